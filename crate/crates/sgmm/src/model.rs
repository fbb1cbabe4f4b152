//! Model parameters and the mathematical kernels shared by every fit:
//! squared distances, exact and truncated posteriors, the variational free
//! energy, and the (optionally weighted) M-step updates.

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::par::par_map_chunks;
use crate::truncation::TruncationState;

/// Mixture parameters: M cluster means and one shared isotropic variance.
/// The prior over clusters is uniform and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n_clusters: usize,
    dim: usize,
    means: Vec<f64>,
    variance: f64,
}

impl ModelParams {
    pub fn new(means: Vec<f64>, n_clusters: usize, dim: usize, variance: f64) -> Result<Self> {
        if n_clusters == 0 || dim == 0 {
            return Err(SgmmError::Config(
                "model needs at least one cluster and one dimension".into(),
            ));
        }
        if means.len() != n_clusters * dim {
            return Err(SgmmError::Config(format!(
                "expected {} mean values for {}x{}, got {}",
                n_clusters * dim,
                n_clusters,
                dim,
                means.len()
            )));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(SgmmError::Config("all means must be finite".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(SgmmError::Config("variance must be positive".into()));
        }
        Ok(Self {
            n_clusters,
            dim,
            means,
            variance,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    #[inline]
    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.dim..(c + 1) * self.dim]
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub(crate) fn set_means(&mut self, means: Vec<f64>) {
        debug_assert_eq!(means.len(), self.n_clusters * self.dim);
        self.means = means;
    }

    pub(crate) fn set_variance(&mut self, variance: f64) {
        debug_assert!(variance > 0.0);
        self.variance = variance;
    }
}

/// Squared euclidean distance without instrumentation. Hot path; callers
/// tally evaluations in batches.
#[inline]
pub(crate) fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Squared euclidean distance between a datapoint and a cluster mean.
/// Records exactly one evaluation on the counter.
///
/// Panics if the vectors differ in length (caller bug).
pub fn squared_distance(y: &[f64], mu: &[f64], counter: &mut DistanceCounter) -> f64 {
    assert_eq!(y.len(), mu.len(), "dimension mismatch in squared_distance");
    counter.record();
    sqdist(y, mu)
}

/// Softmax of -d/(2 sigma^2), shifted by the smallest distance so the largest
/// exponent is exactly zero. Writes the normalized posterior into `out` and
/// returns the shift and the pre-normalization sum, from which
/// log sum_c exp(-d_c / 2 sigma^2) = -d_min / (2 sigma^2) + ln(norm).
pub(crate) fn posterior_into(distances: &[f64], variance: f64, out: &mut [f64]) -> (f64, f64) {
    debug_assert!(!distances.is_empty());
    debug_assert!(variance > 0.0);
    debug_assert_eq!(distances.len(), out.len());
    let d_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let inv2s = 0.5 / variance;
    let mut norm = 0.0;
    for (o, &d) in out.iter_mut().zip(distances) {
        let e = (-(d - d_min) * inv2s).exp();
        *o = e;
        norm += e;
    }
    let inv_norm = 1.0 / norm;
    for o in out.iter_mut() {
        *o *= inv_norm;
    }
    (d_min, norm)
}

/// Exact posterior over all M clusters given the M squared distances.
pub fn exact_posterior(distances: &[f64], variance: f64) -> Vec<f64> {
    let mut out = vec![0.0; distances.len()];
    posterior_into(distances, variance, &mut out);
    out
}

/// Posterior restricted to a candidate set and renormalized over it; the
/// input is the candidate set's cached distances.
pub fn truncated_posterior(cached_distances: &[f64], variance: f64) -> Vec<f64> {
    exact_posterior(cached_distances, variance)
}

/// Sparse per-datapoint cluster responsibilities, aligned with the candidate
/// sets of a [`TruncationState`]. Entries outside a datapoint's candidate set
/// are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n_points: usize,
    h: usize,
    pub(crate) probs: Vec<f64>,
}

impl Responsibilities {
    pub(crate) fn zeroed(n_points: usize, h: usize) -> Self {
        Self {
            n_points,
            h,
            probs: vec![0.0; n_points * h],
        }
    }

    /// Builds responsibilities from explicit per-datapoint distributions.
    pub fn from_probs(n_points: usize, h: usize, probs: Vec<f64>) -> Result<Self> {
        if h == 0 || probs.len() != n_points * h {
            return Err(SgmmError::Config(format!(
                "expected {} probabilities for {} points with {} candidates",
                n_points * h,
                n_points,
                h
            )));
        }
        for entry in probs.chunks_exact(h) {
            let sum: f64 = entry.iter().sum();
            if entry.iter().any(|&q| !(0.0..=1.0 + 1e-9).contains(&q)) || (sum - 1.0).abs() > 1e-9 {
                return Err(SgmmError::Config(
                    "each responsibility entry must be a distribution".into(),
                ));
            }
        }
        Ok(Self { n_points, h, probs })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn entry(&self, n: usize) -> &[f64] {
        &self.probs[n * self.h..(n + 1) * self.h]
    }
}

/// log p(c, y | theta) = lognorm - d/(2 sigma^2) with
/// lognorm = -ln M - (D/2) ln(2 pi sigma^2).
pub(crate) fn log_norm_const(n_clusters: usize, dim: usize, variance: f64) -> f64 {
    -(n_clusters as f64).ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI * variance).ln()
}

/// Unweighted free-energy contribution of one datapoint given its candidate
/// distances and responsibilities. Uses 0 ln 0 = 0 for the entropy.
#[inline]
pub(crate) fn free_energy_point(dists: &[f64], q: &[f64], variance: f64, lognorm: f64) -> f64 {
    let inv2s = 0.5 / variance;
    let mut cross = 0.0;
    let mut entropy = 0.0;
    for (&d, &p) in dists.iter().zip(q) {
        cross += p * d;
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    lognorm - cross * inv2s + entropy
}

/// Variational lower bound sum_n w_n [ sum_c q_c log p(c, y_n | theta) +
/// H(q_n) ], recomputing the candidate distances from the given parameters.
/// Diagnostic path; evaluations are not counted.
pub fn free_energy(
    data: &DataMatrix,
    params: &ModelParams,
    resp: &Responsibilities,
    state: &TruncationState,
) -> f64 {
    let lognorm = log_norm_const(params.n_clusters(), params.dim(), params.variance());
    let partials = par_map_chunks(data.n_points(), |range| {
        let mut acc = 0.0;
        let mut dists = vec![0.0; state.h()];
        for n in range {
            let y = data.row(n);
            for (d, &c) in dists.iter_mut().zip(state.members(n)) {
                *d = sqdist(y, params.mean(c as usize));
            }
            acc += data.weight(n)
                * free_energy_point(&dists, resp.entry(n), params.variance(), lognorm);
        }
        acc
    });
    partials.into_iter().sum()
}

/// Weighted mean update mu_c = sum_n w q_c y / sum_n w q_c over the
/// datapoints whose candidate set contains c. Clusters with zero total
/// responsibility keep their previous mean.
pub fn m_step_means(
    data: &DataMatrix,
    resp: &Responsibilities,
    state: &TruncationState,
    old_params: &ModelParams,
) -> Vec<f64> {
    let m = old_params.n_clusters();
    let dim = data.dim();
    struct Partial {
        num: Vec<f64>,
        den: Vec<f64>,
    }
    let partials = par_map_chunks(data.n_points(), |range| {
        let mut p = Partial {
            num: vec![0.0; m * dim],
            den: vec![0.0; m],
        };
        for n in range {
            let w = data.weight(n);
            let y = data.row(n);
            for (&c, &q) in state.members(n).iter().zip(resp.entry(n)) {
                let wq = w * q;
                let c = c as usize;
                p.den[c] += wq;
                let num = &mut p.num[c * dim..(c + 1) * dim];
                for (acc, &v) in num.iter_mut().zip(y) {
                    *acc += wq * v;
                }
            }
        }
        p
    });

    let mut num = vec![0.0; m * dim];
    let mut den = vec![0.0; m];
    for p in partials {
        for (a, b) in num.iter_mut().zip(&p.num) {
            *a += b;
        }
        for (a, b) in den.iter_mut().zip(&p.den) {
            *a += b;
        }
    }

    let mut means = vec![0.0; m * dim];
    for c in 0..m {
        let dst = &mut means[c * dim..(c + 1) * dim];
        if den[c] > 0.0 {
            let inv = 1.0 / den[c];
            for (d, &v) in dst.iter_mut().zip(&num[c * dim..(c + 1) * dim]) {
                *d = v * inv;
            }
        } else {
            dst.copy_from_slice(old_params.mean(c));
        }
    }
    means
}

/// Weighted variance update
/// sigma^2 = sum_n sum_c w q_c ||y_n - mu_c||^2 / (D sum_n w_n),
/// floored at the data's variance floor. Distances are recomputed against the
/// new means (counted) and written back into the state's cache, together with
/// the refreshed best-cluster indices.
pub fn m_step_variance(
    data: &DataMatrix,
    resp: &Responsibilities,
    state: &mut TruncationState,
    new_means: &[f64],
    counter: &mut DistanceCounter,
) -> f64 {
    let dim = data.dim();
    debug_assert_eq!(new_means.len() % dim, 0);
    struct Partial {
        sum: f64,
        evals: u64,
    }
    let h = state.h();
    let (members, distances, best) = state.parts_mut();
    let partials: Vec<Partial> = {
        use rayon::prelude::*;
        members
            .par_chunks(crate::par::CHUNK_SIZE * h)
            .zip(distances.par_chunks_mut(crate::par::CHUNK_SIZE * h))
            .zip(best.par_chunks_mut(crate::par::CHUNK_SIZE))
            .enumerate()
            .map(|(chunk, ((mem, dst), bst))| {
                let base = chunk * crate::par::CHUNK_SIZE;
                let mut p = Partial { sum: 0.0, evals: 0 };
                for i in 0..bst.len() {
                    let n = base + i;
                    let w = data.weight(n);
                    let y = data.row(n);
                    let q = resp.entry(n);
                    let mem = &mem[i * h..(i + 1) * h];
                    let dst = &mut dst[i * h..(i + 1) * h];
                    let mut best_pos = 0;
                    let mut best_d = f64::INFINITY;
                    for (pos, (&c, d)) in mem.iter().zip(dst.iter_mut()).enumerate() {
                        let mu = &new_means[c as usize * dim..(c as usize + 1) * dim];
                        *d = sqdist(y, mu);
                        p.evals += 1;
                        p.sum += w * q[pos] * *d;
                        if *d < best_d {
                            best_d = *d;
                            best_pos = pos;
                        }
                    }
                    bst[i] = mem[best_pos];
                }
                p
            })
            .collect()
    };
    let mut sum = 0.0;
    for p in partials {
        sum += p.sum;
        counter.add(p.evals);
    }
    (sum / (dim as f64 * data.total_weight())).max(data.variance_floor())
}

/// Initial variance from a freshly refreshed truncation cache:
/// mean over datapoints of the smallest cached distance, divided by D,
/// floored.
pub fn initial_variance(data: &DataMatrix, state: &TruncationState) -> f64 {
    let partials = par_map_chunks(data.n_points(), |range| {
        let mut acc = 0.0;
        for n in range {
            acc += state
                .distances(n)
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
        }
        acc
    });
    let sum: f64 = partials.into_iter().sum();
    (sum / (data.n_points() as f64 * data.dim() as f64)).max(data.variance_floor())
}

/// Initial variance against all M clusters: mean over datapoints of the
/// smallest squared distance to any mean, divided by D, floored. Each
/// distance is counted.
pub fn initial_variance_dense(
    data: &DataMatrix,
    means: &[f64],
    n_clusters: usize,
    counter: &mut DistanceCounter,
) -> f64 {
    let dim = data.dim();
    let partials = par_map_chunks(data.n_points(), |range| {
        let mut acc = 0.0;
        let mut evals = 0u64;
        for n in range {
            let y = data.row(n);
            let mut min = f64::INFINITY;
            for c in 0..n_clusters {
                let d = sqdist(y, &means[c * dim..(c + 1) * dim]);
                evals += 1;
                if d < min {
                    min = d;
                }
            }
            acc += min;
        }
        (acc, evals)
    });
    let mut sum = 0.0;
    for (acc, evals) in partials {
        sum += acc;
        counter.add(evals);
    }
    (sum / (data.n_points() as f64 * data.dim() as f64)).max(data.variance_floor())
}

/// KL divergence of a truncated responsibility entry from the exact posterior
/// over all M clusters: sum_{c in K} q_c ln(q_c / p_c), with 0 ln 0 = 0.
/// Returns +infinity when some p_c underflowed to zero while q_c > 0.
pub fn kl_to_exact(members: &[u32], q: &[f64], exact: &[f64]) -> f64 {
    debug_assert_eq!(members.len(), q.len());
    let mut acc = 0.0;
    for (&c, &qc) in members.iter().zip(q) {
        if qc == 0.0 {
            continue;
        }
        let pc = exact[c as usize];
        if pc == 0.0 {
            return f64::INFINITY;
        }
        acc += qc * (qc.ln() - pc.ln());
    }
    acc
}
