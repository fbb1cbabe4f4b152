//! Markov-chain approximation of D-squared seeding for the cluster means.
//!
//! The first centre is a (weight-proportionally) uniform data row. Every
//! further centre is the end state of a short Metropolis-Hastings chain whose
//! stationary distribution is the D-squared distribution against the centres
//! chosen so far, with an assumption-free proposal built from one pass over
//! the data. Total cost is O(ND) for the proposal plus O(m (M-1)^2 D) for the
//! chains, far below the O(NMD) of exact D-squared seeding.

use rand::Rng;

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::sqdist;

/// Seeding hyperparameters: number of centres M and chain length m.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedingConfig {
    pub n_clusters: usize,
    pub chain_length: usize,
}

impl SeedingConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(SgmmError::Config("need at least one cluster".into()));
        }
        if self.chain_length == 0 {
            return Err(SgmmError::Config("chain length must be at least 1".into()));
        }
        if self.n_clusters > n_points {
            return Err(SgmmError::Config(format!(
                "cannot seed {} clusters from {} datapoints",
                self.n_clusters, n_points
            )));
        }
        Ok(())
    }
}

/// Seeds `cfg.n_clusters` centres from the data. Every returned centre is a
/// data row. Distance evaluations (one per proposal-table entry and one per
/// chain-state distance) are counted.
pub fn afkmc2_seed(
    data: &DataMatrix,
    cfg: &SeedingConfig,
    rng: &mut impl Rng,
    counter: &mut DistanceCounter,
) -> Result<Vec<f64>> {
    cfg.validate(data.n_points())?;
    let n = data.n_points();
    let dim = data.dim();
    let m = cfg.n_clusters;

    let mut centers: Vec<f64> = Vec::with_capacity(m * dim);
    let first = sample_weighted_uniform(data, rng);
    centers.extend_from_slice(data.row(first));
    if m == 1 {
        return Ok(centers);
    }

    // Assumption-free proposal: half D-squared mass against the first
    // centre, half (weighted) uniform. One O(ND) pass.
    let mut q = vec![0.0; n];
    let mut d2_sum = 0.0;
    for (i, qi) in q.iter_mut().enumerate() {
        let d = sqdist(data.row(i), &centers[..dim]);
        counter.record();
        *qi = data.weight(i) * d;
        d2_sum += *qi;
    }
    let total_w = data.total_weight();
    if d2_sum > 0.0 {
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = 0.5 * *qi / d2_sum + 0.5 * data.weight(i) / total_w;
        }
    } else {
        // All points coincide with the first centre.
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = data.weight(i) / total_w;
        }
    }
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &qi in &q {
        acc += qi;
        cum.push(acc);
    }
    let cum_total = acc;

    let min_d2 = |row: usize, centers: &[f64], counter: &mut DistanceCounter| -> f64 {
        let y = data.row(row);
        let mut min = f64::INFINITY;
        for mu in centers.chunks_exact(dim) {
            let d = sqdist(y, mu);
            counter.record();
            if d < min {
                min = d;
            }
        }
        min
    };

    for _ in 1..m {
        let mut x = sample_cumulative(&cum, cum_total, rng);
        let mut dx = min_d2(x, &centers, counter);
        for _ in 1..cfg.chain_length {
            let y = sample_cumulative(&cum, cum_total, rng);
            let dy = min_d2(y, &centers, counter);
            // Target mass is w * min distance; NaN ratios (all-identical
            // data) reject and keep the current state.
            let ratio = (data.weight(y) * dy * q[x]) / (data.weight(x) * dx * q[y]);
            if rng.random::<f64>() < ratio {
                x = y;
                dx = dy;
            }
        }
        centers.extend_from_slice(data.row(x));
    }
    Ok(centers)
}

fn sample_weighted_uniform(data: &DataMatrix, rng: &mut impl Rng) -> usize {
    match data.weights() {
        None => rng.random_range(0..data.n_points()),
        Some(w) => {
            let u = rng.random::<f64>() * data.total_weight();
            let mut acc = 0.0;
            for (i, &wi) in w.iter().enumerate() {
                acc += wi;
                if u < acc {
                    return i;
                }
            }
            data.n_points() - 1
        }
    }
}

fn sample_cumulative(cum: &[f64], total: f64, rng: &mut impl Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn is_data_row(data: &DataMatrix, center: &[f64]) -> bool {
        (0..data.n_points()).any(|i| data.row(i) == center)
    }

    #[test]
    fn single_cluster_returns_a_uniform_row() {
        let data = DataMatrix::new(4, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let cfg = SeedingConfig {
            n_clusters: 1,
            chain_length: 5,
        };
        let mut counter = DistanceCounter::new();
        let mut seen = [false; 4];
        for s in 0..200 {
            let mut rng = RngStream::new(s).for_domain(0x21);
            let centers = afkmc2_seed(&data, &cfg, &mut rng, &mut counter).unwrap();
            assert!(is_data_row(&data, &centers));
            for (i, hit) in seen.iter_mut().enumerate() {
                if data.row(i) == centers.as_slice() {
                    *hit = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s), "uniform pick should hit every row");
        assert_eq!(counter.total(), 0, "M=1 needs no distance evaluations");
    }

    #[test]
    fn identical_rows_yield_identical_centers() {
        let data = DataMatrix::new(5, 2, [[3.0, -1.0]; 5].concat()).unwrap();
        let cfg = SeedingConfig {
            n_clusters: 3,
            chain_length: 4,
        };
        let mut counter = DistanceCounter::new();
        let mut rng = RngStream::new(9).for_domain(0x22);
        let centers = afkmc2_seed(&data, &cfg, &mut rng, &mut counter).unwrap();
        for mu in centers.chunks_exact(2) {
            assert_eq!(mu, &[3.0, -1.0]);
        }
    }

    #[test]
    fn centers_are_rows_and_runs_are_reproducible() {
        let streams = RngStream::new(42);
        let values: Vec<f64> = (0..40).map(|i| ((i * 17) % 23) as f64 * 0.5).collect();
        let data = DataMatrix::new(20, 2, values).unwrap();
        let cfg = SeedingConfig {
            n_clusters: 5,
            chain_length: 3,
        };
        let mut c1 = DistanceCounter::new();
        let mut c2 = DistanceCounter::new();
        let a = afkmc2_seed(&data, &cfg, &mut streams.for_domain(0x23), &mut c1).unwrap();
        let b = afkmc2_seed(&data, &cfg, &mut streams.for_domain(0x23), &mut c2).unwrap();
        assert_eq!(a, b);
        assert_eq!(c1.total(), c2.total());
        for mu in a.chunks_exact(2) {
            assert!(is_data_row(&data, mu));
        }
    }

    #[test]
    fn distance_evaluations_are_exactly_accounted() {
        // Proposal pass: N. Chains: m states per centre, each evaluated
        // against the centres chosen so far.
        let n = 10;
        let m = 3;
        let chain = 4;
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let data = DataMatrix::new(n, 1, values).unwrap();
        let cfg = SeedingConfig {
            n_clusters: m,
            chain_length: chain,
        };
        let mut counter = DistanceCounter::new();
        let mut rng = RngStream::new(3).for_domain(0x24);
        afkmc2_seed(&data, &cfg, &mut rng, &mut counter).unwrap();
        let expected = n as u64 + (chain as u64) * (1 + 2);
        assert_eq!(counter.total(), expected);
    }

    #[test]
    fn rejects_more_clusters_than_points() {
        let data = DataMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let cfg = SeedingConfig {
            n_clusters: 3,
            chain_length: 2,
        };
        let mut counter = DistanceCounter::new();
        let mut rng = RngStream::new(0).for_domain(0x25);
        assert!(afkmc2_seed(&data, &cfg, &mut rng, &mut counter).is_err());
    }

    #[test]
    fn weighted_first_center_tracks_weights() {
        // Two rows with a 9:1 weight ratio; the first centre should land on
        // the heavy row about 90% of the time (3 sigma binomial check).
        let data = DataMatrix::with_weights(2, 1, vec![0.0, 1.0], vec![9.0, 1.0]).unwrap();
        let cfg = SeedingConfig {
            n_clusters: 1,
            chain_length: 1,
        };
        let trials = 4000;
        let mut heavy = 0u64;
        let mut counter = DistanceCounter::new();
        let streams = RngStream::new(17);
        for t in 0..trials {
            let mut rng = streams.stream(0x26, t, 0);
            let centers = afkmc2_seed(&data, &cfg, &mut rng, &mut counter).unwrap();
            if centers[0] == 0.0 {
                heavy += 1;
            }
        }
        let p = 0.9;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((heavy as f64 - mean).abs() <= 3.0 * sigma);
    }
}
