//! Synthetic mixture data with known ground-truth centres.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::rng::{domain, RngStream};

/// Generated dataset together with its ground truth.
pub struct SyntheticDataset {
    pub data: DataMatrix,
    /// True centres, K x D row-major.
    pub centers: Vec<f64>,
    /// Generating centre of every datapoint.
    pub labels: Vec<u32>,
    pub n_clusters: usize,
}

/// Draws `n_clusters` centres uniformly in a box whose side grows with both
/// the spread and the cluster count (side = 8 * spread * K^(1/D)), so
/// neighbouring centres sit about four spreads apart on average, then samples
/// points isotropically around uniformly chosen centres.
pub fn generate_synthetic(
    n_points: usize,
    n_clusters: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if n_points == 0 || n_clusters == 0 || dim == 0 {
        return Err(SgmmError::Config(
            "points, clusters, and dimensions must all be positive".into(),
        ));
    }
    if spread.is_nan() || spread < 0.0 {
        return Err(SgmmError::Config("spread must be nonnegative".into()));
    }
    let mut rng = RngStream::new(seed).for_domain(domain::SYNTHETIC);

    let per_cluster = if spread > 0.0 { 8.0 * spread } else { 1.0 };
    let side = per_cluster * (n_clusters as f64).powf(1.0 / dim as f64);
    let mut centers = vec![0.0; n_clusters * dim];
    for v in &mut centers {
        *v = rng.random::<f64>() * side;
    }

    let noise = Normal::new(0.0, spread.max(0.0))
        .map_err(|e| SgmmError::Config(format!("invalid spread: {e}")))?;
    let mut values = Vec::with_capacity(n_points * dim);
    let mut labels = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let c = rng.random_range(0..n_clusters);
        labels.push(c as u32);
        for d in 0..dim {
            let eps: f64 = if spread > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            values.push(centers[c * dim + d] + eps);
        }
    }
    Ok(SyntheticDataset {
        data: DataMatrix::new(n_points, dim, values)?,
        centers,
        labels,
        n_clusters,
    })
}
