//! Build a lightweight coreset and check that its weighted objective tracks
//! the full-data objective.
//!
//! ```bash
//! cargo run --release --example coresets
//! ```

use sgmm::rng::domain;
use sgmm::{
    generate_synthetic, lightweight_coreset, quantization_error, DistanceCounter, RngStream,
};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(20_000, 10, 4, 1.0, 3)?;
    let streams = RngStream::new(99);

    let mut counter = DistanceCounter::new();
    let coreset = lightweight_coreset(
        &set.data,
        512,
        &mut streams.for_domain(domain::CORESET),
        &mut counter,
    )?;
    println!(
        "coreset: {} weighted rows from {} points ({} distance evaluations)",
        coreset.n_points(),
        set.data.n_points(),
        counter.total()
    );
    println!(
        "total weight {:.1} (estimates N = {})",
        coreset.total_weight(),
        set.data.n_points()
    );

    // For any fixed centres the weighted coreset error estimates the full
    // one; try the true generating centres.
    let q_full = quantization_error(&set.data, &set.centers, set.n_clusters, None);
    let q_core = quantization_error(&coreset, &set.centers, set.n_clusters, None);
    println!(
        "quantization error at the true centres: full {q_full:.1}, coreset estimate {q_core:.1} \
         (ratio {:.3})",
        q_core / q_full
    );
    Ok(())
}
