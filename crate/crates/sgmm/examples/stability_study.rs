//! Repeat a fit with independent seeds and summarize how consistently the
//! centres are recovered (pairwise matched-centre RMSE).
//!
//! ```bash
//! cargo run --release --example stability_study
//! ```

use sgmm::{generate_synthetic, stability, Algorithm, ExperimentConfig};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(4000, 20, 4, 1.0, 77)?;

    for algorithm in [Algorithm::Dgmm, Algorithm::KMeans] {
        let mut cfg = ExperimentConfig::new(algorithm, 20);
        cfg.truncation = 5;
        cfg.candidates = 5;
        cfg.seed = 3;
        let report = stability(&cfg, 12, &set.data)?;
        println!(
            "{algorithm}: pairwise RMSE {:.4} +/- {:.4} over {} runs ({} pairs, CoV {:.3})",
            report.mean_rmse,
            report.std_rmse,
            report.runs,
            report.pairs.len(),
            report.cov()
        );
    }
    Ok(())
}
