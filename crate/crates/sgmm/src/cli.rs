//! The `sgmm` command-line interface: thin argument handling over the
//! library's experiment drivers. Primary output goes to `--out` or stdout;
//! human-readable summaries go to stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::coreset::lightweight_coreset;
use crate::counter::DistanceCounter;
use crate::error::{Result, SgmmError};
use crate::experiment::{
    run_experiment, stability, sweep, write_fit_csv, write_sweep_csv, Algorithm, ExperimentConfig,
    FitReport, SweepAxis,
};
use crate::io;
use crate::metrics::{center_rmse, quantization_error};
use crate::rng::{domain, RngStream};
use crate::synthetic::generate_synthetic;

/// Version tag written into every JSON report and implied by the CSV
/// headers; bump when a schema changes shape.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "sgmm",
    version,
    about = "Sublinear Gaussian mixture clustering benchmark tool"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; the SGMM_THREADS environment variable overrides this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Report output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Write the primary output to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Report wall times as zero so outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub fixed_time: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic mixture data with known centres.
    Generate {
        #[arg(long)]
        points: usize,
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        dim: usize,
        /// Isotropic standard deviation around each centre.
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        /// Also save the true centres.
        #[arg(long)]
        centers_out: Option<PathBuf>,
    },
    /// Build a lightweight coreset of a dataset.
    Coreset {
        #[arg(long)]
        input: PathBuf,
        /// Coreset size.
        #[arg(long)]
        size: usize,
    },
    /// Fit a clustering algorithm and report instrumentation.
    Fit(FitArgs),
    /// Evaluate saved centres against a dataset.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        centers: PathBuf,
        /// Reference centres for a matched-centre RMSE.
        #[arg(long)]
        ref_centers: Option<PathBuf>,
    },
    /// Run one experiment per value of a hyperparameter axis.
    Sweep {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Repeated fits with pairwise matched-centre RMSE statistics.
    Stability {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset to fit (CSV or binary).
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum)]
    pub algo: Algorithm,

    /// Number of clusters M.
    #[arg(long)]
    pub clusters: usize,

    /// Candidate-set size H (dgmm).
    #[arg(long, default_value_t = 5)]
    pub trunc: usize,

    /// Candidates sampled per iteration R (dgmm).
    #[arg(long, default_value_t = 5)]
    pub cands: usize,

    /// Seeding chain length m.
    #[arg(long, default_value_t = 5)]
    pub chain: usize,

    /// Relative objective increment below which a fit stops.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,

    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,

    /// Fit on a lightweight coreset of this size.
    #[arg(long)]
    pub coreset: Option<usize>,

    /// Independent repetitions.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,

    /// Pair each run with a full-data k-means baseline (reports eta and
    /// speedup).
    #[arg(long)]
    pub eta: bool,

    /// Charge the final full-data quantization evaluation to the fit
    /// counter.
    #[arg(long)]
    pub count_eval: bool,

    /// Save the fitted centres of the first repetition (fit only).
    #[arg(long)]
    pub centers_out: Option<PathBuf>,
}

impl FitArgs {
    fn to_config(&self, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            algorithm: self.algo,
            n_clusters: self.clusters,
            truncation: self.trunc,
            candidates: self.cands,
            chain_length: self.chain,
            eps: self.eps,
            max_iters: self.max_iters,
            coreset_size: self.coreset,
            seed,
            repetitions: self.reps,
            compute_eta: self.eta,
            count_eval: self.count_eval,
        }
    }
}

/// Runs a parsed invocation. IO and configuration failures surface as
/// errors; the binary maps them to exit codes 3 and 2.
pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads);
    match &cli.command {
        Command::Generate {
            points,
            clusters,
            dim,
            spread,
            centers_out,
        } => {
            let set = generate_synthetic(*points, *clusters, *dim, *spread, cli.seed)?;
            if let Some(path) = centers_out {
                io::write_centers(path, &set.centers, *clusters, *dim)?;
            }
            match &cli.out {
                Some(path) => io::write_data(path, &set.data)?,
                None => {
                    let mut buf = Vec::new();
                    io::write_data_csv(&mut buf, &set.data)?;
                    write_stdout(&buf)?;
                }
            }
            Ok(())
        }
        Command::Coreset { input, size } => {
            let data = io::read_data(input)?;
            let mut counter = DistanceCounter::new();
            let mut rng = RngStream::new(cli.seed).for_domain(domain::CORESET);
            let coreset = lightweight_coreset(&data, *size, &mut rng, &mut counter)?;
            eprintln!(
                "coreset: {} rows from {} ({} distance evals)",
                coreset.n_points(),
                data.n_points(),
                counter.total()
            );
            match &cli.out {
                Some(path) => io::write_data(path, &coreset)?,
                None => {
                    let mut buf = Vec::new();
                    io::write_data_csv(&mut buf, &coreset)?;
                    write_stdout(&buf)?;
                }
            }
            Ok(())
        }
        Command::Fit(args) => {
            let data = io::read_data(&args.input)?;
            let cfg = args.to_config(cli.seed);
            let outcomes = run_experiment(&cfg, &data)?;
            if let Some(path) = &args.centers_out {
                io::write_centers(path, &outcomes[0].centers, cfg.n_clusters, data.dim())?;
            }
            let mut reports: Vec<FitReport> = outcomes.into_iter().map(|o| o.report).collect();
            if cli.fixed_time {
                for r in &mut reports {
                    r.wall_time_s = 0.0;
                }
            }
            match cli.format {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    write_fit_csv(&mut buf, &reports)?;
                    emit(&cli.out, &buf)
                }
                OutputFormat::Json => {
                    let value = json!({
                        "schema_version": REPORT_SCHEMA_VERSION,
                        "command": "fit",
                        "config": cfg,
                        "reports": reports,
                    });
                    emit_json(&cli.out, &value)
                }
            }
        }
        Command::Eval {
            input,
            centers,
            ref_centers,
        } => {
            let data = io::read_data(input)?;
            let (centers, m, dim) = io::read_centers(centers)?;
            if dim != data.dim() {
                return Err(SgmmError::Config(format!(
                    "centers have dimension {dim}, data has {}",
                    data.dim()
                )));
            }
            let q = quantization_error(&data, &centers, m, None);
            let rmse = match ref_centers {
                Some(path) => {
                    let (reference, rm, rd) = io::read_centers(path)?;
                    if rm != m || rd != dim {
                        return Err(SgmmError::Config(
                            "reference centers have a different shape".into(),
                        ));
                    }
                    Some(center_rmse(&centers, &reference, m, dim)?)
                }
                None => None,
            };
            #[derive(Serialize)]
            struct EvalRow {
                q: f64,
                center_rmse: Option<f64>,
            }
            let row = EvalRow {
                q,
                center_rmse: rmse,
            };
            match cli.format {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.serialize(&row)
                        .map_err(|e| SgmmError::Format(format!("csv: {e}")))?;
                    w.flush()?;
                    drop(w);
                    emit(&cli.out, &buf)
                }
                OutputFormat::Json => {
                    let value = json!({
                        "schema_version": REPORT_SCHEMA_VERSION,
                        "command": "eval",
                        "q": row.q,
                        "center_rmse": row.center_rmse,
                    });
                    emit_json(&cli.out, &value)
                }
            }
        }
        Command::Sweep { fit, axis, values } => {
            let data = io::read_data(&fit.input)?;
            let cfg = fit.to_config(cli.seed);
            let mut rows = sweep(&cfg, *axis, values, &data)?;
            if cli.fixed_time {
                for r in &mut rows {
                    r.wall_time_s = 0.0;
                }
            }
            match cli.format {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&mut buf, &rows)?;
                    emit(&cli.out, &buf)
                }
                OutputFormat::Json => {
                    let value = json!({
                        "schema_version": REPORT_SCHEMA_VERSION,
                        "command": "sweep",
                        "axis": axis,
                        "config": cfg,
                        "rows": rows,
                    });
                    emit_json(&cli.out, &value)
                }
            }
        }
        Command::Stability { fit, runs } => {
            let data = io::read_data(&fit.input)?;
            let cfg = fit.to_config(cli.seed);
            let report = stability(&cfg, *runs, &data)?;
            eprintln!(
                "stability: mean RMSE {:.6} +/- {:.6} over {} runs ({} pairs)",
                report.mean_rmse,
                report.std_rmse,
                report.runs,
                report.pairs.len()
            );
            match cli.format {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    let mut w = csv::Writer::from_writer(&mut buf);
                    for pair in &report.pairs {
                        w.serialize(pair)
                            .map_err(|e| SgmmError::Format(format!("csv: {e}")))?;
                    }
                    w.flush()?;
                    drop(w);
                    emit(&cli.out, &buf)
                }
                OutputFormat::Json => {
                    let value = json!({
                        "schema_version": REPORT_SCHEMA_VERSION,
                        "command": "stability",
                        "config": cfg,
                        "report": report,
                    });
                    emit_json(&cli.out, &value)
                }
            }
        }
    }
}

/// SGMM_THREADS overrides the flag; without either, rayon's default pool is
/// used. Thread count never changes results, only speed.
fn configure_threads(flag: Option<usize>) {
    let threads = std::env::var("SGMM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(flag);
    if let Some(n) = threads.filter(|&n| n > 0) {
        // Ignore the error if a pool already exists (e.g. repeated calls in
        // one process); results do not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, bytes)?),
        None => write_stdout(bytes),
    }
}

fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| SgmmError::Format(format!("json: {e}")))?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(bytes)?;
    stdout.flush()?;
    Ok(())
}
