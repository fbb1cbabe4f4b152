//! End-to-end experiment drivers: coreset, seeding, fit, evaluation, and the
//! sweep and stability studies, all with distance-evaluation accounting.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{exact_em_fit, kmeans_fit};
use crate::coreset::lightweight_coreset;
use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::dgmm::{DgmmConfig, DgmmEngine};
use crate::error::{Result, SgmmError};
use crate::metrics::{center_rmse, quantization_error, relative_error};
use crate::model::{initial_variance_dense, ModelParams};
use crate::rng::{domain, RngStream};
use crate::seeding::{afkmc2_seed, SeedingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Algorithm {
    #[serde(rename = "dgmm")]
    #[value(name = "dgmm")]
    Dgmm,
    #[serde(rename = "em")]
    #[value(name = "em")]
    ExactEm,
    #[serde(rename = "kmeans")]
    #[value(name = "kmeans")]
    KMeans,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Algorithm::Dgmm => "dgmm",
            Algorithm::ExactEm => "em",
            Algorithm::KMeans => "kmeans",
        };
        f.write_str(name)
    }
}

/// One experiment: algorithm, model size, truncation, seeding and
/// convergence settings, repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n_clusters: usize,
    /// Candidate-set size H (D-GMM only).
    pub truncation: usize,
    /// Candidates sampled per iteration R (D-GMM only).
    pub candidates: usize,
    /// Seeding chain length m.
    pub chain_length: usize,
    pub eps: f64,
    pub max_iters: usize,
    /// Fit on a lightweight coreset of this size instead of the full data.
    pub coreset_size: Option<usize>,
    pub seed: u64,
    pub repetitions: usize,
    /// Run a paired full-data k-means baseline to report eta and speedup.
    pub compute_eta: bool,
    /// Charge the final full-data quantization evaluation to the fit
    /// counter.
    pub count_eval: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, n_clusters: usize) -> Self {
        Self {
            algorithm,
            n_clusters,
            truncation: 5,
            candidates: 5,
            chain_length: 5,
            eps: 1e-3,
            max_iters: 100,
            coreset_size: None,
            seed: 0,
            repetitions: 1,
            compute_eta: false,
            count_eval: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(SgmmError::Config("need at least one cluster".into()));
        }
        if self.algorithm == Algorithm::Dgmm && self.truncation > self.n_clusters {
            return Err(SgmmError::Config(format!(
                "truncation size {} exceeds cluster count {}",
                self.truncation, self.n_clusters
            )));
        }
        if self.algorithm == Algorithm::Dgmm && (self.truncation == 0 || self.candidates == 0) {
            return Err(SgmmError::Config(
                "truncation size and candidate count must be positive".into(),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(SgmmError::Config("eps must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SgmmError::Config("max_iters must be at least 1".into()));
        }
        if self.chain_length == 0 {
            return Err(SgmmError::Config("chain length must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(SgmmError::Config("need at least one repetition".into()));
        }
        if self.coreset_size == Some(0) {
            return Err(SgmmError::Config("coreset size must be positive".into()));
        }
        Ok(())
    }
}

/// Instrumented result of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub algorithm: Algorithm,
    pub repetition: usize,
    /// Derived per-repetition seed actually used.
    pub seed: u64,
    /// Objective after each complete iteration: the free energy for the EM
    /// fits, the quantization error for k-means.
    pub objective_trace: Vec<f64>,
    /// Hard-assignment quantization error on the full data.
    pub quantization_error: f64,
    pub eta: Option<f64>,
    pub init_distance_evals: u64,
    pub fit_distance_evals: u64,
    pub total_distance_evals: u64,
    pub baseline_q: Option<f64>,
    pub baseline_distance_evals: Option<u64>,
    /// baseline evals / own evals, init included in both.
    pub speedup: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
}

impl FitReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

/// Report plus the fitted centres.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: FitReport,
    pub centers: Vec<f64>,
}

/// Runs every repetition of the experiment (in parallel; each repetition has
/// an independent derived seed). Outcomes arrive in repetition order.
pub fn run_experiment(cfg: &ExperimentConfig, data: &DataMatrix) -> Result<Vec<FitOutcome>> {
    cfg.validate()?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_single(cfg, data, rep))
        .collect()
}

fn run_single(cfg: &ExperimentConfig, data: &DataMatrix, rep: usize) -> Result<FitOutcome> {
    let rep_seed = RngStream::new(cfg.seed).child_seed(domain::REPETITION, rep as u64);
    let streams = RngStream::new(rep_seed);
    let start = Instant::now();
    let mut init_counter = DistanceCounter::new();

    let coreset_data = match cfg.coreset_size {
        Some(size) => Some(lightweight_coreset(
            data,
            size,
            &mut streams.for_domain(domain::CORESET),
            &mut init_counter,
        )?),
        None => None,
    };
    let fit_data: &DataMatrix = coreset_data.as_ref().unwrap_or(data);

    let seed_cfg = SeedingConfig {
        n_clusters: cfg.n_clusters,
        chain_length: cfg.chain_length,
    };
    let initial_centers = afkmc2_seed(
        fit_data,
        &seed_cfg,
        &mut streams.for_domain(domain::SEEDING),
        &mut init_counter,
    )?;

    let (centers, objective_trace, iterations, mut fit_counter) = match cfg.algorithm {
        Algorithm::Dgmm => {
            let dcfg = DgmmConfig {
                truncation: cfg.truncation,
                candidates: cfg.candidates,
                eps: cfg.eps,
                max_iters: cfg.max_iters,
            };
            let mut engine =
                DgmmEngine::new(fit_data, initial_centers, cfg.n_clusters, dcfg, streams)?;
            let iterations = engine.fit();
            (
                engine.params().means().to_vec(),
                engine.trace().to_vec(),
                iterations,
                *engine.counter(),
            )
        }
        Algorithm::ExactEm => {
            let mut counter = DistanceCounter::new();
            let variance =
                initial_variance_dense(fit_data, &initial_centers, cfg.n_clusters, &mut counter);
            let params =
                ModelParams::new(initial_centers, cfg.n_clusters, fit_data.dim(), variance)?;
            let fit = exact_em_fit(fit_data, params, cfg.max_iters, cfg.eps, &mut counter)?;
            (
                fit.params.means().to_vec(),
                fit.trace,
                fit.iterations,
                counter,
            )
        }
        Algorithm::KMeans => {
            let mut counter = DistanceCounter::new();
            let fit = kmeans_fit(
                fit_data,
                initial_centers,
                cfg.n_clusters,
                cfg.max_iters,
                cfg.eps,
                &mut counter,
            )?;
            (fit.centers, fit.q_trace, fit.iterations, counter)
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    // Final quantization error is always evaluated on the full data and
    // charged to the fit only when requested.
    let q = quantization_error(
        data,
        &centers,
        cfg.n_clusters,
        if cfg.count_eval {
            Some(&mut fit_counter)
        } else {
            None
        },
    );

    let init_distance_evals = init_counter.total();
    let fit_distance_evals = fit_counter.total();
    let total = init_distance_evals + fit_distance_evals;

    let (eta, baseline_q, baseline_distance_evals, speedup) = if cfg.compute_eta {
        if cfg.algorithm == Algorithm::KMeans && cfg.coreset_size.is_none() {
            // This run is its own baseline.
            (Some(0.0), Some(q), Some(total), Some(1.0))
        } else {
            let (bq, bevals) = kmeans_baseline(cfg, data, &streams)?;
            (
                relative_error(q, bq),
                Some(bq),
                Some(bevals),
                Some(bevals as f64 / total as f64),
            )
        }
    } else {
        (None, None, None, None)
    };

    Ok(FitOutcome {
        report: FitReport {
            algorithm: cfg.algorithm,
            repetition: rep,
            seed: rep_seed,
            objective_trace,
            quantization_error: q,
            eta,
            init_distance_evals,
            fit_distance_evals,
            total_distance_evals: total,
            baseline_q,
            baseline_distance_evals,
            speedup,
            iterations,
            wall_time_s,
        },
        centers,
    })
}

/// Full-data k-means from its own seeding, sharing the repetition's seed
/// material; returns (Q, total distance evaluations including seeding).
fn kmeans_baseline(
    cfg: &ExperimentConfig,
    data: &DataMatrix,
    streams: &RngStream,
) -> Result<(f64, u64)> {
    let mut counter = DistanceCounter::new();
    let seed_cfg = SeedingConfig {
        n_clusters: cfg.n_clusters,
        chain_length: cfg.chain_length,
    };
    let centers0 = afkmc2_seed(
        data,
        &seed_cfg,
        &mut streams.for_domain(domain::BASELINE),
        &mut counter,
    )?;
    let fit = kmeans_fit(
        data,
        centers0,
        cfg.n_clusters,
        cfg.max_iters,
        cfg.eps,
        &mut counter,
    )?;
    let q = quantization_error(data, &fit.centers, cfg.n_clusters, None);
    Ok((q, counter.total()))
}

/// Axis of a hyperparameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum SweepAxis {
    #[serde(rename = "clusters")]
    #[value(name = "clusters")]
    Clusters,
    #[serde(rename = "trunc")]
    #[value(name = "trunc")]
    Truncation,
    #[serde(rename = "cands")]
    #[value(name = "cands")]
    Candidates,
    #[serde(rename = "coreset")]
    #[value(name = "coreset")]
    CoresetSize,
}

impl SweepAxis {
    fn apply(self, cfg: &mut ExperimentConfig, value: usize) {
        match self {
            SweepAxis::Clusters => cfg.n_clusters = value,
            SweepAxis::Truncation => cfg.truncation = value,
            SweepAxis::Candidates => cfg.candidates = value,
            SweepAxis::CoresetSize => cfg.coreset_size = Some(value),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SweepAxis::Clusters => "clusters",
            SweepAxis::Truncation => "trunc",
            SweepAxis::Candidates => "cands",
            SweepAxis::CoresetSize => "coreset",
        };
        f.write_str(name)
    }
}

/// One sweep measurement in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: u64,
    pub repetition: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub q: f64,
    pub eta: Option<f64>,
    pub init_distance_evals: u64,
    pub fit_distance_evals: u64,
    pub total_distance_evals: u64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Runs the experiment once per (axis value, repetition) and returns the
/// long-format measurement table.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[usize],
    data: &DataMatrix,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(SgmmError::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len() * cfg.repetitions);
    for &value in values {
        let mut point = cfg.clone();
        axis.apply(&mut point, value);
        let outcomes = run_experiment(&point, data)?;
        for outcome in outcomes {
            let r = outcome.report;
            rows.push(SweepRow {
                axis,
                value: value as u64,
                repetition: r.repetition,
                seed: r.seed,
                algorithm: r.algorithm,
                q: r.quantization_error,
                eta: r.eta,
                init_distance_evals: r.init_distance_evals,
                fit_distance_evals: r.fit_distance_evals,
                total_distance_evals: r.total_distance_evals,
                iterations: r.iterations,
                wall_time_s: r.wall_time_s,
            });
        }
    }
    Ok(rows)
}

/// Matched-centre RMSE between one pair of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRmse {
    pub run_a: usize,
    pub run_b: usize,
    pub rmse: f64,
}

/// Stability study output: pairwise matched-centre RMSEs over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub runs: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub pairs: Vec<PairRmse>,
}

impl StabilityReport {
    /// Coefficient of variation of the pairwise RMSEs.
    pub fn cov(&self) -> f64 {
        self.std_rmse / self.mean_rmse
    }
}

/// Runs the configured fit `runs` times with independent seeds and reports
/// the pairwise matched-centre RMSE statistics.
pub fn stability(
    cfg: &ExperimentConfig,
    runs: usize,
    data: &DataMatrix,
) -> Result<StabilityReport> {
    if runs < 2 {
        return Err(SgmmError::Config(
            "stability needs at least two runs".into(),
        ));
    }
    let mut point = cfg.clone();
    point.repetitions = runs;
    let outcomes = run_experiment(&point, data)?;
    let dim = data.dim();
    let index_pairs: Vec<(usize, usize)> = (0..runs)
        .flat_map(|a| ((a + 1)..runs).map(move |b| (a, b)))
        .collect();
    let pairs: Vec<PairRmse> = index_pairs
        .into_par_iter()
        .map(|(a, b)| {
            center_rmse(
                &outcomes[a].centers,
                &outcomes[b].centers,
                cfg.n_clusters,
                dim,
            )
            .map(|rmse| PairRmse {
                run_a: a,
                run_b: b,
                rmse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = pairs.iter().map(|p| p.rmse).sum::<f64>() / pairs.len() as f64;
    let var = pairs
        .iter()
        .map(|p| (p.rmse - mean) * (p.rmse - mean))
        .sum::<f64>()
        / (pairs.len() - 1).max(1) as f64;
    Ok(StabilityReport {
        runs,
        mean_rmse: mean,
        std_rmse: var.sqrt(),
        pairs,
    })
}

fn csv_format_err(e: csv::Error) -> SgmmError {
    SgmmError::Format(format!("csv: {e}"))
}

/// Writes sweep rows as CSV with a header.
pub fn write_sweep_csv(w: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row).map_err(csv_format_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads back a sweep CSV.
pub fn read_sweep_csv(r: &mut impl Read) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(r);
    reader
        .deserialize()
        .map(|row| row.map_err(csv_format_err))
        .collect()
}

/// Flat per-repetition row used for the fit command's CSV output; the full
/// objective trace is only present in the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub repetition: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub q: f64,
    pub eta: Option<f64>,
    pub init_distance_evals: u64,
    pub fit_distance_evals: u64,
    pub total_distance_evals: u64,
    pub baseline_q: Option<f64>,
    pub baseline_distance_evals: Option<u64>,
    pub speedup: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub final_objective: Option<f64>,
}

impl From<&FitReport> for FitRow {
    fn from(r: &FitReport) -> Self {
        Self {
            repetition: r.repetition,
            seed: r.seed,
            algorithm: r.algorithm,
            q: r.quantization_error,
            eta: r.eta,
            init_distance_evals: r.init_distance_evals,
            fit_distance_evals: r.fit_distance_evals,
            total_distance_evals: r.total_distance_evals,
            baseline_q: r.baseline_q,
            baseline_distance_evals: r.baseline_distance_evals,
            speedup: r.speedup,
            iterations: r.iterations,
            wall_time_s: r.wall_time_s,
            final_objective: r.final_objective(),
        }
    }
}

pub fn write_fit_csv(w: &mut impl Write, reports: &[FitReport]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for report in reports {
        writer
            .serialize(FitRow::from(report))
            .map_err(csv_format_err)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_fit_csv(r: &mut impl Read) -> Result<Vec<FitRow>> {
    let mut reader = csv::Reader::from_reader(r);
    reader
        .deserialize()
        .map(|row| row.map_err(csv_format_err))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::generate_synthetic;

    fn small_data() -> DataMatrix {
        generate_synthetic(300, 4, 2, 0.4, 5).unwrap().data
    }

    #[test]
    fn huge_eps_stops_after_one_iteration() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 4);
        cfg.truncation = 2;
        cfg.candidates = 2;
        cfg.eps = 100.0;
        let outcomes = run_experiment(&cfg, &data).unwrap();
        assert_eq!(outcomes[0].report.iterations, 1);
        assert_eq!(outcomes[0].report.objective_trace.len(), 1);
    }

    #[test]
    fn repetitions_are_distinct_and_reproducible() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 4);
        cfg.truncation = 2;
        cfg.candidates = 2;
        cfg.repetitions = 3;
        cfg.seed = 9;
        let a = run_experiment(&cfg, &data).unwrap();
        let b = run_experiment(&cfg, &data).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            let mut rx = x.report.clone();
            let mut ry = y.report.clone();
            rx.wall_time_s = 0.0;
            ry.wall_time_s = 0.0;
            assert_eq!(rx, ry);
            assert_eq!(x.centers, y.centers);
        }
        assert_ne!(a[0].report.seed, a[1].report.seed);
        assert_ne!(a[0].centers, a[1].centers);
    }

    #[test]
    fn q_evaluation_counts_only_when_flagged() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::KMeans, 4);
        cfg.max_iters = 3;
        let plain = run_experiment(&cfg, &data).unwrap();
        cfg.count_eval = true;
        let counted = run_experiment(&cfg, &data).unwrap();
        let extra = (data.n_points() * 4) as u64;
        assert_eq!(
            counted[0].report.fit_distance_evals,
            plain[0].report.fit_distance_evals + extra
        );
    }

    #[test]
    fn full_kmeans_is_its_own_baseline() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::KMeans, 4);
        cfg.compute_eta = true;
        let outcomes = run_experiment(&cfg, &data).unwrap();
        let r = &outcomes[0].report;
        assert_eq!(r.eta, Some(0.0));
        assert_eq!(r.speedup, Some(1.0));
        assert_eq!(r.baseline_q, Some(r.quantization_error));
    }

    #[test]
    fn eta_pairs_against_full_kmeans() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 4);
        cfg.truncation = 2;
        cfg.candidates = 2;
        cfg.compute_eta = true;
        let outcomes = run_experiment(&cfg, &data).unwrap();
        let r = &outcomes[0].report;
        let bq = r.baseline_q.unwrap();
        assert!((r.eta.unwrap() - (r.quantization_error - bq) / bq).abs() < 1e-12);
        assert!(r.speedup.unwrap() > 0.0);
    }

    #[test]
    fn sweep_single_value_matches_run_experiment() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::KMeans, 4);
        cfg.repetitions = 2;
        let rows = sweep(&cfg, SweepAxis::Clusters, &[4], &data).unwrap();
        let outcomes = run_experiment(&cfg, &data).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, outcome) in rows.iter().zip(&outcomes) {
            assert_eq!(row.q, outcome.report.quantization_error);
            assert_eq!(
                row.total_distance_evals,
                outcome.report.total_distance_evals
            );
            assert_eq!(row.iterations, outcome.report.iterations);
        }
    }

    #[test]
    fn sweep_rows_round_trip_through_csv() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 4);
        cfg.truncation = 2;
        cfg.candidates = 2;
        cfg.repetitions = 2;
        let rows = sweep(&cfg, SweepAxis::Truncation, &[2, 3], &data).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let back = read_sweep_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn fit_rows_round_trip_through_csv() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::ExactEm, 3);
        cfg.repetitions = 2;
        cfg.compute_eta = true;
        let reports: Vec<FitReport> = run_experiment(&cfg, &data)
            .unwrap()
            .into_iter()
            .map(|o| o.report)
            .collect();
        let mut buf = Vec::new();
        write_fit_csv(&mut buf, &reports).unwrap();
        let back = read_fit_csv(&mut buf.as_slice()).unwrap();
        let rows: Vec<FitRow> = reports.iter().map(FitRow::from).collect();
        assert_eq!(rows, back);
    }

    #[test]
    fn stability_reports_every_pair() {
        let data = small_data();
        let mut cfg = ExperimentConfig::new(Algorithm::KMeans, 3);
        cfg.max_iters = 10;
        let report = stability(&cfg, 4, &data).unwrap();
        assert_eq!(report.runs, 4);
        assert_eq!(report.pairs.len(), 6);
        assert!(report.mean_rmse.is_finite());
        assert!(report.std_rmse >= 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 4);
        cfg.truncation = 9;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(Algorithm::KMeans, 0);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Algorithm::KMeans, 2);
        cfg.eps = 0.0;
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::new(Algorithm::KMeans, 2);
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
    }
}
