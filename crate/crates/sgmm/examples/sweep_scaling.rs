//! Sweep the cluster count and fit log-log slopes of the distance-eval cost:
//! k-means scales linearly in M, the truncated fit sublinearly.
//!
//! ```bash
//! cargo run --release --example sweep_scaling
//! ```

use sgmm::{generate_synthetic, sweep, Algorithm, ExperimentConfig, SweepAxis};

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(10_000, 64, 8, 1.0, 606)?;
    let values = [32usize, 64, 128, 256];

    for algorithm in [Algorithm::KMeans, Algorithm::Dgmm] {
        let mut cfg = ExperimentConfig::new(algorithm, values[0]);
        cfg.truncation = 5;
        cfg.candidates = 5;
        cfg.eps = 1e-4;
        cfg.repetitions = 3;
        cfg.seed = 1;
        let rows = sweep(&cfg, SweepAxis::Clusters, &values, &set.data)?;

        let mut points = Vec::new();
        println!("{algorithm}:");
        for &m in &values {
            let mut evals: Vec<u64> = rows
                .iter()
                .filter(|r| r.value == m as u64)
                .map(|r| r.total_distance_evals)
                .collect();
            evals.sort_unstable();
            let median = evals[evals.len() / 2];
            println!("  M = {m:>4}: median {median:>12} distance evaluations");
            points.push((m as f64, median as f64));
        }
        println!("  log-log slope: {:.3}", slope(&points));
    }
    Ok(())
}
