//! Exact comparators sharing the instrumented distance kernel: Lloyd's
//! k-means and full-posterior EM for the isotropic mixture. Both honor data
//! weights and use the same convergence rule as the truncated fit: stop when
//! the relative objective increment drops below epsilon.

use rayon::prelude::*;

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::{log_norm_const, posterior_into, sqdist, ModelParams};
use crate::par::{par_map_chunks, CHUNK_SIZE};

/// Relative-increment convergence test shared by every fit loop. The
/// previous objective starts at 0, so the first iteration's relative
/// increment is 1 and any epsilon above 1 stops after exactly one iteration.
pub(crate) fn converged(previous: f64, current: f64, eps: f64) -> bool {
    let delta = (current - previous).abs();
    delta == 0.0 || delta / current.abs().max(f64::MIN_POSITIVE) < eps
}

/// Lloyd's k-means with hard assignments. Empty clusters keep their centre.
pub struct KMeansEngine<'a> {
    data: &'a DataMatrix,
    n_clusters: usize,
    centers: Vec<f64>,
    assignments: Vec<u32>,
    counter: DistanceCounter,
    trace: Vec<f64>,
}

impl<'a> KMeansEngine<'a> {
    pub fn new(data: &'a DataMatrix, centers: Vec<f64>, n_clusters: usize) -> Result<Self> {
        if n_clusters == 0 || n_clusters > data.n_points() {
            return Err(SgmmError::Config(format!(
                "cluster count {} must satisfy 1 <= M <= {}",
                n_clusters,
                data.n_points()
            )));
        }
        if centers.len() != n_clusters * data.dim() {
            return Err(SgmmError::Config(
                "initial centers have the wrong shape".into(),
            ));
        }
        Ok(Self {
            data,
            n_clusters,
            centers,
            assignments: vec![0; data.n_points()],
            counter: DistanceCounter::new(),
            trace: Vec::new(),
        })
    }

    /// Assigns every datapoint to its nearest centre and returns the
    /// weighted quantization error of the current centres. Counts N * M
    /// distance evaluations.
    pub fn assign_step(&mut self) -> f64 {
        let dim = self.data.dim();
        let data = self.data;
        let centers = &self.centers;
        let partials: Vec<(f64, u64)> = self
            .assignments
            .par_chunks_mut(CHUNK_SIZE)
            .enumerate()
            .map(|(chunk, assign)| {
                let base = chunk * CHUNK_SIZE;
                let mut q = 0.0;
                let mut evals = 0u64;
                for (i, a) in assign.iter_mut().enumerate() {
                    let y = data.row(base + i);
                    let mut best = 0u32;
                    let mut min = f64::INFINITY;
                    for (c, mu) in centers.chunks_exact(dim).enumerate() {
                        let d = sqdist(y, mu);
                        evals += 1;
                        if d < min {
                            min = d;
                            best = c as u32;
                        }
                    }
                    *a = best;
                    q += data.weight(base + i) * min;
                }
                (q, evals)
            })
            .collect();
        let mut q = 0.0;
        for (partial, evals) in partials {
            q += partial;
            self.counter.add(evals);
        }
        q
    }

    /// Moves every centre to the weighted mean of its assigned points.
    pub fn update_step(&mut self) {
        let dim = self.data.dim();
        let m = self.n_clusters;
        let data = self.data;
        let assignments = &self.assignments;
        let partials = par_map_chunks(data.n_points(), |range| {
            let mut sums = vec![0.0; m * dim];
            let mut wsum = vec![0.0; m];
            for n in range {
                let c = assignments[n] as usize;
                let w = data.weight(n);
                wsum[c] += w;
                for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(data.row(n)) {
                    *s += w * v;
                }
            }
            (sums, wsum)
        });
        let mut sums = vec![0.0; m * dim];
        let mut wsum = vec![0.0; m];
        for (ps, pw) in partials {
            for (a, b) in sums.iter_mut().zip(&ps) {
                *a += b;
            }
            for (a, b) in wsum.iter_mut().zip(&pw) {
                *a += b;
            }
        }
        for c in 0..m {
            if wsum[c] > 0.0 {
                let inv = 1.0 / wsum[c];
                for (dst, &s) in self.centers[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s * inv;
                }
            }
        }
    }

    pub fn iterate(&mut self) -> f64 {
        let q = self.assign_step();
        self.update_step();
        q
    }

    /// Iterates until the relative quantization-error decrease falls below
    /// `eps` or `max_iters` is reached. Returns the iteration count.
    pub fn fit(&mut self, eps: f64, max_iters: usize) -> usize {
        let mut previous = 0.0;
        for it in 1..=max_iters {
            let q = self.iterate();
            self.trace.push(q);
            if converged(previous, q, eps) {
                return it;
            }
            previous = q;
        }
        max_iters
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn counter(&self) -> &DistanceCounter {
        &self.counter
    }
}

/// Result of a full k-means fit.
pub struct KMeansFit {
    pub centers: Vec<f64>,
    pub assignments: Vec<u32>,
    pub q_trace: Vec<f64>,
    pub iterations: usize,
    pub distance_evals: u64,
}

/// Runs Lloyd's algorithm from the given centres until the relative
/// quantization-error decrease drops below `eps` or `max_iters`.
pub fn kmeans_fit(
    data: &DataMatrix,
    initial_centers: Vec<f64>,
    n_clusters: usize,
    max_iters: usize,
    eps: f64,
    counter: &mut DistanceCounter,
) -> Result<KMeansFit> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(SgmmError::Config("eps must be positive".into()));
    }
    let mut engine = KMeansEngine::new(data, initial_centers, n_clusters)?;
    let iterations = engine.fit(eps, max_iters);
    counter.merge(engine.counter);
    Ok(KMeansFit {
        distance_evals: engine.counter.total(),
        centers: engine.centers,
        assignments: engine.assignments,
        q_trace: engine.trace,
        iterations,
    })
}

/// Full-posterior EM for the isotropic mixture: softmax E-step over all M
/// clusters, weighted mean and variance M-step with the shared floor and
/// empty-cluster handling.
pub struct ExactEmEngine<'a> {
    data: &'a DataMatrix,
    params: ModelParams,
    resp: Vec<f64>,
    counter: DistanceCounter,
    trace: Vec<f64>,
}

impl<'a> ExactEmEngine<'a> {
    pub fn new(data: &'a DataMatrix, params: ModelParams) -> Result<Self> {
        if params.dim() != data.dim() {
            return Err(SgmmError::Config("model and data dimensions differ".into()));
        }
        if params.n_clusters() > data.n_points() {
            return Err(SgmmError::Config("more clusters than datapoints".into()));
        }
        let resp = vec![0.0; data.n_points() * params.n_clusters()];
        Ok(Self {
            data,
            params,
            resp,
            counter: DistanceCounter::new(),
            trace: Vec::new(),
        })
    }

    /// Computes the exact posterior for every datapoint and returns the data
    /// log-likelihood, which equals the variational bound after an exact
    /// E-step. Counts exactly N * M distance evaluations.
    pub fn e_step(&mut self) -> f64 {
        let m = self.params.n_clusters();
        let dim = self.data.dim();
        let variance = self.params.variance();
        let lognorm = log_norm_const(m, dim, variance);
        let inv2s = 0.5 / variance;
        let data = self.data;
        let params = &self.params;
        let partials: Vec<(f64, u64)> = self
            .resp
            .par_chunks_mut(CHUNK_SIZE * m)
            .enumerate()
            .map(|(chunk, resp)| {
                let base = chunk * CHUNK_SIZE;
                let mut ll = 0.0;
                let mut evals = 0u64;
                let mut dists = vec![0.0; m];
                for (i, row) in resp.chunks_exact_mut(m).enumerate() {
                    let y = data.row(base + i);
                    for (c, d) in dists.iter_mut().enumerate() {
                        *d = sqdist(y, params.mean(c));
                        evals += 1;
                    }
                    let (d_min, norm) = posterior_into(&dists, variance, row);
                    ll += data.weight(base + i) * (lognorm - d_min * inv2s + norm.ln());
                }
                (ll, evals)
            })
            .collect();
        let mut ll = 0.0;
        for (partial, evals) in partials {
            ll += partial;
            self.counter.add(evals);
        }
        ll
    }

    /// Weighted mean update followed by the variance update against the new
    /// means (N * M distances, counted), floored at the data's floor.
    pub fn m_step(&mut self) {
        let m = self.params.n_clusters();
        let dim = self.data.dim();
        let data = self.data;
        let resp = &self.resp;

        let partials = par_map_chunks(data.n_points(), |range| {
            let mut num = vec![0.0; m * dim];
            let mut den = vec![0.0; m];
            for n in range {
                let w = data.weight(n);
                let y = data.row(n);
                for (c, &q) in resp[n * m..(n + 1) * m].iter().enumerate() {
                    let wq = w * q;
                    den[c] += wq;
                    for (a, &v) in num[c * dim..(c + 1) * dim].iter_mut().zip(y) {
                        *a += wq * v;
                    }
                }
            }
            (num, den)
        });
        let mut num = vec![0.0; m * dim];
        let mut den = vec![0.0; m];
        for (pn, pd) in partials {
            for (a, b) in num.iter_mut().zip(&pn) {
                *a += b;
            }
            for (a, b) in den.iter_mut().zip(&pd) {
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
                dst.copy_from_slice(self.params.mean(c));
            }
        }

        let var_partials = par_map_chunks(data.n_points(), |range| {
            let mut sum = 0.0;
            let mut evals = 0u64;
            for n in range {
                let w = data.weight(n);
                let y = data.row(n);
                for (c, &q) in resp[n * m..(n + 1) * m].iter().enumerate() {
                    let d = sqdist(y, &means[c * dim..(c + 1) * dim]);
                    evals += 1;
                    sum += w * q * d;
                }
            }
            (sum, evals)
        });
        let mut sum = 0.0;
        for (s, evals) in var_partials {
            sum += s;
            self.counter.add(evals);
        }
        let variance = (sum / (dim as f64 * data.total_weight())).max(data.variance_floor());
        self.params.set_means(means);
        self.params.set_variance(variance);
    }

    pub fn iterate(&mut self) -> f64 {
        let ll = self.e_step();
        self.m_step();
        ll
    }

    /// Iterates until the relative lower-bound increment drops below `eps`
    /// or `max_iters`. Returns the iteration count.
    pub fn fit(&mut self, eps: f64, max_iters: usize) -> usize {
        let mut previous = 0.0;
        for it in 1..=max_iters {
            let ll = self.iterate();
            self.trace.push(ll);
            if converged(previous, ll, eps) {
                return it;
            }
            previous = ll;
        }
        max_iters
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Dense posterior of datapoint `n` from the last E-step.
    pub fn responsibilities(&self, n: usize) -> &[f64] {
        let m = self.params.n_clusters();
        &self.resp[n * m..(n + 1) * m]
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn counter(&self) -> &DistanceCounter {
        &self.counter
    }
}

/// Result of a full exact-EM fit.
pub struct ExactEmFit {
    pub params: ModelParams,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub distance_evals: u64,
}

/// Runs exact EM from the given parameters until the relative lower-bound
/// increment drops below `eps` or `max_iters`.
pub fn exact_em_fit(
    data: &DataMatrix,
    params: ModelParams,
    max_iters: usize,
    eps: f64,
    counter: &mut DistanceCounter,
) -> Result<ExactEmFit> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(SgmmError::Config("eps must be positive".into()));
    }
    let mut engine = ExactEmEngine::new(data, params)?;
    let iterations = engine.fit(eps, max_iters);
    counter.merge(engine.counter);
    Ok(ExactEmFit {
        distance_evals: engine.counter.total(),
        params: engine.params,
        trace: engine.trace,
        iterations,
    })
}
