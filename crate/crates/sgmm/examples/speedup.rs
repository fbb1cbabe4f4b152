//! Distance-evaluation budgets side by side: truncated fit on a coreset
//! versus full k-means, with the relative quantization error between them.
//!
//! ```bash
//! cargo run --release --example speedup
//! ```

use sgmm::{generate_synthetic, run_experiment, Algorithm, ExperimentConfig};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(20_000, 8, 8, 2.0, 31)?;
    let m = 100;

    let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, m);
    cfg.truncation = 5;
    cfg.candidates = 5;
    cfg.coreset_size = Some(2048);
    cfg.compute_eta = true;
    cfg.seed = 12;
    let outcome = run_experiment(&cfg, &set.data)?.remove(0);
    let r = &outcome.report;

    println!("truncated fit on a 2048-point coreset, M = {m}:");
    println!(
        "  distance evaluations: {} init + {} fit = {}",
        r.init_distance_evals, r.fit_distance_evals, r.total_distance_evals
    );
    println!("  iterations: {}", r.iterations);
    println!("full k-means baseline:");
    println!(
        "  distance evaluations: {}",
        r.baseline_distance_evals.unwrap()
    );
    println!(
        "speedup x{:.1}, relative quantization error {:.1}%",
        r.speedup.unwrap(),
        100.0 * r.eta.unwrap()
    );
    Ok(())
}
