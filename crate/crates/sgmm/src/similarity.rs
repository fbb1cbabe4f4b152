//! Cluster co-affinity accumulated from shared candidate-set membership.

use crate::data::DataMatrix;
use crate::par::par_map_chunks;
use crate::truncation::TruncationState;

/// Symmetric nonnegative M x M matrix; entry (i, j) is positive only if some
/// datapoint held both clusters in its candidate set when the matrix was
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n_clusters: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn zeros(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            entries: vec![0.0; n_clusters * n_clusters],
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_clusters + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_clusters..(i + 1) * self.n_clusters]
    }

    /// Sets entry (i, j) and its mirror.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.n_clusters + j] = value;
        self.entries[j * self.n_clusters + i] = value;
    }
}

/// Builds the similarity matrix from a state whose cached distances are
/// current:
///
/// S_ij = (1 / sum_n w_n) * sum_n w_n exp(-(d~_i + d~_j))
///
/// over datapoints whose candidate set contains both i and j, where
/// d~_c = (d_c - min_k d_k) / (2 sigma^2) is the per-datapoint stabilized
/// scaled distance. Shifting by the row minimum keeps the exponentials in
/// (0, 1] regardless of data scale, and since the shift is constant within a
/// datapoint it preserves the within-row ranking the sampler consumes.
pub fn build_similarity(
    state: &TruncationState,
    variance: f64,
    data: &DataMatrix,
) -> SimilarityMatrix {
    let m = state.n_clusters();
    let h = state.h();
    let inv2s = 0.5 / variance;

    // Per-chunk sparse contributions (upper triangle), merged in chunk order.
    let partials = par_map_chunks(state.n_points(), |range| {
        let mut triples: Vec<(u32, u32, f64)> = Vec::with_capacity(range.len() * h * (h + 1) / 2);
        let mut scaled = vec![0.0; h];
        for n in range {
            let w = data.weight(n);
            let dists = state.distances(n);
            let members = state.members(n);
            let d_min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            for (s, &d) in scaled.iter_mut().zip(dists) {
                *s = (d - d_min) * inv2s;
            }
            for a in 0..h {
                for b in a..h {
                    let v = w * (-(scaled[a] + scaled[b])).exp();
                    // Members are index-sorted, so (members[a], members[b])
                    // is already an upper-triangle coordinate.
                    triples.push((members[a], members[b], v));
                }
            }
        }
        triples
    });

    let mut sim = SimilarityMatrix::zeros(m);
    for triples in partials {
        for (i, j, v) in triples {
            sim.entries[i as usize * m + j as usize] += v;
        }
    }
    let inv_weight = 1.0 / data.total_weight();
    for v in &mut sim.entries {
        *v *= inv_weight;
    }
    // Mirror the accumulated upper triangle for exact symmetry.
    for i in 0..m {
        for j in (i + 1)..m {
            sim.entries[j * m + i] = sim.entries[i * m + j];
        }
    }
    sim
}
