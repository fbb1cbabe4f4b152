//! Evaluation metrics: quantization error, relative error against a
//! baseline, and RMSE between matched centre sets.

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::sqdist;
use crate::par::par_map_chunks;

/// Largest centre count solved with the exact assignment algorithm; larger
/// instances fall back to greedy mutual-nearest matching.
const EXACT_ASSIGNMENT_LIMIT: usize = 512;

/// Hard-assignment quantization error sum_n w_n min_c ||y_n - mu_c||^2.
/// Distance evaluations are counted only when a counter is supplied.
pub fn quantization_error(
    data: &DataMatrix,
    centers: &[f64],
    n_clusters: usize,
    counter: Option<&mut DistanceCounter>,
) -> f64 {
    assert!(n_clusters >= 1, "need at least one center");
    let dim = data.dim();
    assert_eq!(centers.len(), n_clusters * dim);
    let partials = par_map_chunks(data.n_points(), |range| {
        let mut acc = 0.0;
        for n in range {
            let y = data.row(n);
            let mut min = f64::INFINITY;
            for mu in centers.chunks_exact(dim) {
                let d = sqdist(y, mu);
                if d < min {
                    min = d;
                }
            }
            acc += data.weight(n) * min;
        }
        acc
    });
    if let Some(counter) = counter {
        counter.add((data.n_points() * n_clusters) as u64);
    }
    partials.into_iter().sum()
}

/// Relative error eta = (Q_algorithm - Q_kmeans) / Q_kmeans. `None` when the
/// baseline error is zero (undefined).
pub fn relative_error(q_algorithm: f64, q_kmeans: f64) -> Option<f64> {
    if q_kmeans > 0.0 {
        Some((q_algorithm - q_kmeans) / q_kmeans)
    } else {
        None
    }
}

/// Root mean squared distance between two centre sets under the best
/// one-to-one matching. Exact assignment up to 512 centres, greedy
/// mutual-nearest above.
pub fn center_rmse(a: &[f64], b: &[f64], n_clusters: usize, dim: usize) -> Result<f64> {
    center_rmse_with_limit(a, b, n_clusters, dim, EXACT_ASSIGNMENT_LIMIT)
}

fn center_rmse_with_limit(
    a: &[f64],
    b: &[f64],
    n_clusters: usize,
    dim: usize,
    exact_limit: usize,
) -> Result<f64> {
    if a.len() != n_clusters * dim || b.len() != n_clusters * dim {
        return Err(SgmmError::Config(format!(
            "center sets must both be {n_clusters}x{dim}"
        )));
    }
    let m = n_clusters;
    let mut cost = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            cost[i * m + j] = sqdist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        }
    }
    let total = if m <= exact_limit {
        let assignment = min_cost_assignment(&cost, m);
        (0..m).map(|i| cost[i * m + assignment[i]]).sum::<f64>()
    } else {
        greedy_matching_cost(&cost, m)
    };
    Ok((total / m as f64).sqrt())
}

/// Exact minimum-cost assignment via shortest augmenting paths with
/// potentials (O(n^3)). Returns the matched column for every row.
fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based potentials; p[j] is the row matched to column j, p[0] the row
    // currently being inserted.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Greedy matching: repeatedly marry the cheapest remaining (row, col) pair.
/// Any pair taken is mutually nearest among the still-unmatched sets.
fn greedy_matching_cost(cost: &[f64], n: usize) -> f64 {
    let mut pairs: Vec<(usize, usize)> = (0..n * n).map(|k| (k / n, k % n)).collect();
    pairs.sort_unstable_by(|&(ai, aj), &(bi, bj)| cost[ai * n + aj].total_cmp(&cost[bi * n + bj]));
    let mut row_taken = vec![false; n];
    let mut col_taken = vec![false; n];
    let mut total = 0.0;
    let mut matched = 0;
    for (i, j) in pairs {
        if !row_taken[i] && !col_taken[j] {
            row_taken[i] = true;
            col_taken[j] = true;
            total += cost[i * n + j];
            matched += 1;
            if matched == n {
                break;
            }
        }
    }
    total
}
