//! Generate a synthetic mixture dataset, save it in both file formats, and
//! load it back.
//!
//! ```bash
//! cargo run --release --example generate_data
//! ```

use sgmm::{generate_synthetic, io};

fn main() -> sgmm::Result<()> {
    let set = generate_synthetic(5000, 15, 2, 1.0, 42)?;
    println!(
        "generated {} points, {} dims, {} true centres",
        set.data.n_points(),
        set.data.dim(),
        set.n_clusters
    );

    let dir = std::env::temp_dir();
    let csv_path = dir.join("sgmm_example_data.csv");
    let bin_path = dir.join("sgmm_example_data.bin");
    io::write_data(&csv_path, &set.data)?;
    io::write_data(&bin_path, &set.data)?;
    println!("wrote {} and {}", csv_path.display(), bin_path.display());

    let csv_back = io::read_data(&csv_path)?;
    let bin_back = io::read_data(&bin_path)?;
    assert_eq!(csv_back, set.data, "CSV round trip is lossless");
    assert_eq!(bin_back, set.data, "binary round trip is lossless");
    println!("both formats round-trip losslessly");

    let label_counts = set
        .labels
        .iter()
        .fold(vec![0u32; set.n_clusters], |mut acc, &l| {
            acc[l as usize] += 1;
            acc
        });
    println!(
        "points per true centre: min {}, max {}",
        label_counts.iter().min().unwrap(),
        label_counts.iter().max().unwrap()
    );
    Ok(())
}
