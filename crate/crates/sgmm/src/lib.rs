//! Sublinear Gaussian mixture clustering.
//!
//! This crate fits isotropic Gaussian mixtures (and plain k-means) while
//! counting every squared-distance evaluation, the unit of computational
//! cost. The headline fit is D-GMM, a truncated stochastic variational EM:
//! each datapoint keeps a small candidate set of clusters, refreshed by
//! sampling nearby candidates from a data-built cluster similarity matrix,
//! which
//! makes the per-iteration cost O(N (R + H) D) instead of the O(N M D) of
//! exact EM. AFK-MC2 seeding and lightweight coresets round out the
//! pipeline; exact EM and Lloyd's k-means serve as instrumented baselines.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each one demonstrates a single capability end to end. The `sgmm` binary
//! wraps the same machinery behind `generate`, `coreset`, `fit`, `eval`,
//! `sweep`, and `stability` subcommands.

pub mod baselines;
pub mod coreset;
pub mod counter;
pub mod data;
pub mod dgmm;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub(crate) mod par;
pub mod rng;
pub mod seeding;
pub mod similarity;
pub mod synthetic;
pub mod truncation;

pub mod cli;

pub use baselines::{exact_em_fit, kmeans_fit, ExactEmEngine, ExactEmFit, KMeansEngine, KMeansFit};
pub use coreset::lightweight_coreset;
pub use counter::DistanceCounter;
pub use data::DataMatrix;
pub use dgmm::{DgmmConfig, DgmmEngine};
pub use error::{Result, SgmmError};
pub use experiment::{
    run_experiment, stability, sweep, Algorithm, ExperimentConfig, FitOutcome, FitReport,
    StabilityReport, SweepAxis, SweepRow,
};
pub use metrics::{center_rmse, quantization_error, relative_error};
pub use model::{
    exact_posterior, free_energy, initial_variance, initial_variance_dense, kl_to_exact,
    m_step_means, m_step_variance, squared_distance, truncated_posterior, ModelParams,
    Responsibilities,
};
pub use rng::RngStream;
pub use seeding::{afkmc2_seed, SeedingConfig};
pub use similarity::{build_similarity, SimilarityMatrix};
pub use synthetic::{generate_synthetic, SyntheticDataset};
pub use truncation::{
    conditional_distribution, sample_candidates, CandidateDistribution, TruncationState,
};
