//! Truncated stochastic variational EM with similarity-guided candidate
//! sampling.
//!
//! Each datapoint owns a candidate set of H clusters. Per iteration, up to R
//! fresh candidates are drawn from the similarity row of the datapoint's best
//! cluster, evaluated, and merged; the H closest survive. Responsibilities
//! are computed over the surviving set only, so an iteration costs
//! O(N (R + H) D) distance work instead of the O(N M D) of exact EM: the
//! E-step evaluates only the sampled candidates (cached member distances stay
//! fresh because the variance update recomputes them against the new means),
//! and the variance update adds N * H.

use rayon::prelude::*;

use crate::baselines::converged;
use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::{
    free_energy_point, initial_variance, log_norm_const, m_step_means, m_step_variance,
    posterior_into, sqdist, ModelParams, Responsibilities,
};
use crate::par::CHUNK_SIZE;
use crate::rng::RngStream;
use crate::similarity::{build_similarity, SimilarityMatrix};
use crate::truncation::{
    draw_without_replacement, fill_conditional, select_h_smallest, TruncationState,
};

/// Truncated-fit hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgmmConfig {
    /// Candidate-set size H.
    pub truncation: usize,
    /// Candidates sampled per datapoint and iteration, R.
    pub candidates: usize,
    /// Relative free-energy increment below which the fit stops.
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for DgmmConfig {
    fn default() -> Self {
        Self {
            truncation: 5,
            candidates: 5,
            eps: 1e-3,
            max_iters: 100,
        }
    }
}

impl DgmmConfig {
    pub fn validate(&self, n_clusters: usize) -> Result<()> {
        if self.truncation == 0 || self.truncation > n_clusters {
            return Err(SgmmError::Config(format!(
                "truncation size {} must satisfy 1 <= H <= {}",
                self.truncation, n_clusters
            )));
        }
        if self.candidates == 0 {
            return Err(SgmmError::Config(
                "need at least one candidate per step".into(),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(SgmmError::Config("eps must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SgmmError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stateful driver for the truncated fit. Construction initialises the
/// candidate sets from the prior, fills their distance cache against the
/// initial means, and sets the starting variance from the cached minima.
pub struct DgmmEngine<'a> {
    data: &'a DataMatrix,
    cfg: DgmmConfig,
    params: ModelParams,
    state: TruncationState,
    resp: Responsibilities,
    sim: SimilarityMatrix,
    streams: RngStream,
    iteration: usize,
    counter: DistanceCounter,
    trace: Vec<f64>,
}

impl<'a> DgmmEngine<'a> {
    pub fn new(
        data: &'a DataMatrix,
        initial_means: Vec<f64>,
        n_clusters: usize,
        cfg: DgmmConfig,
        streams: RngStream,
    ) -> Result<Self> {
        cfg.validate(n_clusters)?;
        let mut counter = DistanceCounter::new();
        let mut state =
            TruncationState::init(data.n_points(), n_clusters, cfg.truncation, &streams)?;
        state.refresh_distances(data, &initial_means, &mut counter);
        let variance = initial_variance(data, &state);
        let params = ModelParams::new(initial_means, n_clusters, data.dim(), variance)?;
        let resp = Responsibilities::zeroed(data.n_points(), cfg.truncation);
        let sim = SimilarityMatrix::zeros(n_clusters);
        Ok(Self {
            data,
            cfg,
            params,
            state,
            resp,
            sim,
            streams,
            iteration: 0,
            counter,
            trace: Vec::new(),
        })
    }

    /// One E-step: sample candidates from the previous similarity matrix,
    /// keep the H closest of each union, recompute responsibilities, and
    /// rebuild the similarity matrix. Returns the free energy of the fresh
    /// responsibilities at the current parameters. Evaluates at most R
    /// distances per datapoint.
    pub fn e_step(&mut self) -> f64 {
        let t = self.iteration + 1;
        let m = self.params.n_clusters();
        let h = self.cfg.truncation;
        let r = self.cfg.candidates;
        let dim = self.data.dim();
        let variance = self.params.variance();
        let lognorm = log_norm_const(m, dim, variance);
        let data = self.data;
        let streams = self.streams;
        let sim = &self.sim;
        let means = self.params.means();

        let (members, distances, best) = self.state.parts_all_mut();
        let probs = &mut self.resp.probs;

        let partials: Vec<(f64, u64)> = members
            .par_chunks_mut(CHUNK_SIZE * h)
            .zip(distances.par_chunks_mut(CHUNK_SIZE * h))
            .zip(best.par_chunks_mut(CHUNK_SIZE))
            .zip(probs.par_chunks_mut(CHUNK_SIZE * h))
            .enumerate()
            .map(|(chunk, (((mem, dst), bst), prb))| {
                let base = chunk * CHUNK_SIZE;
                let mut f_acc = 0.0;
                let mut evals = 0u64;
                let mut support: Vec<u32> = Vec::with_capacity(m);
                let mut weights: Vec<f64> = Vec::with_capacity(m);
                let mut drawn: Vec<u32> = Vec::with_capacity(r);
                let mut pool: Vec<(u32, f64)> = Vec::with_capacity(h + r);
                for i in 0..bst.len() {
                    let n = base + i;
                    let y = data.row(n);
                    let mem_i = &mut mem[i * h..(i + 1) * h];
                    let dst_i = &mut dst[i * h..(i + 1) * h];
                    let q_i = &mut prb[i * h..(i + 1) * h];

                    drawn.clear();
                    if h < m {
                        fill_conditional(
                            Some(sim.row(bst[i] as usize)),
                            mem_i,
                            m,
                            &mut support,
                            &mut weights,
                        );
                        let mut rng = streams.for_datapoint(n, t);
                        draw_without_replacement(&support, &mut weights, r, &mut rng, &mut drawn);
                    }
                    if !drawn.is_empty() {
                        pool.clear();
                        for (pos, &c) in mem_i.iter().enumerate() {
                            pool.push((c, dst_i[pos]));
                        }
                        for &c in drawn.iter() {
                            let d = sqdist(y, &means[c as usize * dim..(c as usize + 1) * dim]);
                            evals += 1;
                            pool.push((c, d));
                        }
                        bst[i] = select_h_smallest(&mut pool, h, mem_i, dst_i);
                    }
                    posterior_into(dst_i, variance, q_i);
                    f_acc += data.weight(n) * free_energy_point(dst_i, q_i, variance, lognorm);
                }
                (f_acc, evals)
            })
            .collect();

        let mut free_energy = 0.0;
        for (f, evals) in partials {
            free_energy += f;
            self.counter.add(evals);
        }
        self.sim = build_similarity(&self.state, variance, self.data);
        free_energy
    }

    /// One M-step: weighted mean update, then the variance update against
    /// the new means (N * H distances, counted) which also refreshes the
    /// distance cache and best-cluster indices for the next iteration.
    pub fn m_step(&mut self) {
        let means = m_step_means(self.data, &self.resp, &self.state, &self.params);
        let variance = m_step_variance(
            self.data,
            &self.resp,
            &mut self.state,
            &means,
            &mut self.counter,
        );
        self.params.set_means(means);
        self.params.set_variance(variance);
    }

    /// One complete EM iteration; returns its free energy.
    pub fn iterate(&mut self) -> f64 {
        let f = self.e_step();
        self.m_step();
        self.iteration += 1;
        f
    }

    /// Iterates until the relative free-energy increment drops below eps or
    /// `max_iters` is reached. Returns the iteration count.
    pub fn fit(&mut self) -> usize {
        let mut previous = 0.0;
        for it in 1..=self.cfg.max_iters {
            let f = self.iterate();
            self.trace.push(f);
            if converged(previous, f, self.cfg.eps) {
                return it;
            }
            previous = f;
        }
        self.cfg.max_iters
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &TruncationState {
        &self.state
    }

    pub fn responsibilities(&self) -> &Responsibilities {
        &self.resp
    }

    pub fn similarity(&self) -> &SimilarityMatrix {
        &self.sim
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn counter(&self) -> &DistanceCounter {
        &self.counter
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}
