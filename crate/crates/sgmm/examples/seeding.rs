//! Seed cluster centres with the Markov-chain D-squared sampler and compare
//! its distance budget against exhaustive D-squared seeding.
//!
//! ```bash
//! cargo run --release --example seeding
//! ```

use sgmm::rng::domain;
use sgmm::{
    afkmc2_seed, generate_synthetic, quantization_error, DistanceCounter, RngStream, SeedingConfig,
};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(20_000, 50, 8, 1.0, 7)?;
    let m = 50;
    let cfg = SeedingConfig {
        n_clusters: m,
        chain_length: 5,
    };

    let mut counter = DistanceCounter::new();
    let mut rng = RngStream::new(123).for_domain(domain::SEEDING);
    let centers = afkmc2_seed(&set.data, &cfg, &mut rng, &mut counter)?;

    let q = quantization_error(&set.data, &centers, m, None);
    println!(
        "seeded {m} centres with {} distance evaluations",
        counter.total()
    );
    println!("quantization error of the raw seeds: {q:.1}");

    // Exhaustive D-squared seeding recomputes N distances per centre.
    let exhaustive = (set.data.n_points() * (m - 1)) as u64;
    println!(
        "exhaustive D^2 seeding would need {} evaluations ({:.1}x more)",
        exhaustive,
        exhaustive as f64 / counter.total() as f64
    );

    // Every seed is one of the input rows.
    let rows = centers
        .chunks_exact(set.data.dim())
        .all(|mu| (0..set.data.n_points()).any(|i| set.data.row(i) == mu));
    assert!(rows);
    println!("every centre is a data row");
    Ok(())
}
