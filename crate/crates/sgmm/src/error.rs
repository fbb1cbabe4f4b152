use thiserror::Error;

/// Errors surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum SgmmError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SgmmError>;

impl SgmmError {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for IO
    /// and file-format problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            SgmmError::Config(_) | SgmmError::Data(_) => 2,
            SgmmError::Io(_) | SgmmError::Format(_) => 3,
        }
    }
}
