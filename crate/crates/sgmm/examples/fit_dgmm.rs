//! Fit the truncated mixture end to end on synthetic data and inspect the
//! free-energy trace and the distance-evaluation budget.
//!
//! ```bash
//! cargo run --release --example fit_dgmm
//! ```

use sgmm::{generate_synthetic, run_experiment, Algorithm, ExperimentConfig};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(5000, 15, 2, 1.0, 42)?;

    let mut cfg = ExperimentConfig::new(Algorithm::Dgmm, 15);
    cfg.truncation = 3;
    cfg.candidates = 5;
    cfg.coreset_size = Some(1000);
    cfg.seed = 7;
    let outcome = run_experiment(&cfg, &set.data)?.remove(0);
    let r = &outcome.report;

    println!("converged after {} iterations", r.iterations);
    println!("free-energy trace:");
    for (t, f) in r.objective_trace.iter().enumerate() {
        println!("  iter {:>2}: {f:.3}", t + 1);
    }
    println!(
        "distance evaluations: {} init + {} fit = {}",
        r.init_distance_evals, r.fit_distance_evals, r.total_distance_evals
    );
    println!("full-data quantization error: {:.1}", r.quantization_error);

    let rmse = sgmm::center_rmse(&outcome.centers, &set.centers, 15, 2)?;
    println!("matched-centre RMSE to the generating truth: {rmse:.3}");
    Ok(())
}
