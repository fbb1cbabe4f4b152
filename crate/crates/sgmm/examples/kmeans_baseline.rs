//! Instrumented Lloyd's k-means: the baseline every other fit is measured
//! against.
//!
//! ```bash
//! cargo run --release --example kmeans_baseline
//! ```

use sgmm::rng::domain;
use sgmm::{
    afkmc2_seed, generate_synthetic, kmeans_fit, DistanceCounter, RngStream, SeedingConfig,
};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(10_000, 12, 2, 1.0, 21)?;
    let m = 12;
    let streams = RngStream::new(4);

    let mut counter = DistanceCounter::new();
    let seeds = afkmc2_seed(
        &set.data,
        &SeedingConfig {
            n_clusters: m,
            chain_length: 5,
        },
        &mut streams.for_domain(domain::SEEDING),
        &mut counter,
    )?;
    let fit = kmeans_fit(&set.data, seeds, m, 100, 1e-3, &mut counter)?;

    println!("k-means converged after {} iterations", fit.iterations);
    for (t, q) in fit.q_trace.iter().enumerate() {
        println!("  iter {:>2}: Q = {q:.1}", t + 1);
    }
    println!("total distance evaluations: {}", counter.total());

    let rmse = sgmm::center_rmse(&fit.centers, &set.centers, m, 2)?;
    println!("matched-centre RMSE to truth: {rmse:.3}");
    Ok(())
}
