//! Lightweight coresets: small weighted subsamples whose weighted objective
//! is an unbiased estimate of the full-data objective.

use rand::Rng;

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::sqdist;
use crate::par::par_map_chunks;

/// Draws a weighted coreset of `size` rows in two O(ND) passes:
///
/// 1. the data mean,
/// 2. sampling probabilities q(n) = 1/(2N) + d(y_n, mean)^2 / (2 sum_k d_k^2),
///
/// then samples `size` indices i.i.d. with replacement from q and weights
/// each picked row by 1 / (size * q(n)). Duplicated rows keep separate
/// weights. When all points coincide (zero total distance), q is uniform and
/// every weight is N / size.
pub fn lightweight_coreset(
    data: &DataMatrix,
    size: usize,
    rng: &mut impl Rng,
    counter: &mut DistanceCounter,
) -> Result<DataMatrix> {
    if data.is_weighted() {
        return Err(SgmmError::Config(
            "coreset construction expects unweighted data".into(),
        ));
    }
    let n = data.n_points();
    if size == 0 || size > n {
        return Err(SgmmError::Config(format!(
            "coreset size {size} must satisfy 1 <= size <= {n}"
        )));
    }
    let dim = data.dim();
    let mean = data.mean();

    // Pass 2: squared distances to the mean (counted).
    let partials = par_map_chunks(n, |range| {
        let mut d2 = Vec::with_capacity(range.len());
        for i in range {
            d2.push(sqdist(data.row(i), &mean));
        }
        d2
    });
    let mut d2 = Vec::with_capacity(n);
    for p in partials {
        counter.add(p.len() as u64);
        d2.extend(p);
    }
    let d2_sum: f64 = d2.iter().sum();

    let uniform = 0.5 / n as f64;
    let q: Vec<f64> = if d2_sum > 0.0 {
        d2.iter().map(|&d| uniform + 0.5 * d / d2_sum).collect()
    } else {
        vec![1.0 / n as f64; n]
    };

    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &qi in &q {
        acc += qi;
        cum.push(acc);
    }
    let total = acc;

    let mut values = Vec::with_capacity(size * dim);
    let mut weights = Vec::with_capacity(size);
    let inv_size = 1.0 / size as f64;
    for _ in 0..size {
        let u = rng.random::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= u).min(n - 1);
        values.extend_from_slice(data.row(idx));
        weights.push(inv_size / q[idx]);
    }
    DataMatrix::with_weights(size, dim, values, weights)
}
