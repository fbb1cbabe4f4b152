//! Per-datapoint candidate sets and their similarity-guided updates.
//!
//! Each datapoint keeps a set of H candidate clusters with cached squared
//! distances. An update proposes up to R new clusters drawn from the
//! similarity row of the datapoint's current best cluster, evaluates them,
//! and keeps the H closest of the union.

use rand::Rng;

use crate::counter::DistanceCounter;
use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};
use crate::model::sqdist;
use crate::rng::RngStream;
use crate::similarity::SimilarityMatrix;

/// Per-datapoint candidate sets with cached distances and best-cluster
/// indices.
///
/// Candidate sets are stored sorted by cluster index. Cached distances are
/// valid for whichever means they were last refreshed against; right after
/// [`TruncationState::init`] they are unset (infinite) until the first
/// refresh or update.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationState {
    n_points: usize,
    n_clusters: usize,
    h: usize,
    pub(crate) members: Vec<u32>,
    pub(crate) distances: Vec<f64>,
    pub(crate) best: Vec<u32>,
}

impl TruncationState {
    /// Draws H distinct clusters uniformly for every datapoint, keyed by the
    /// per-datapoint stream at step 0.
    pub fn init(n_points: usize, n_clusters: usize, h: usize, streams: &RngStream) -> Result<Self> {
        validate_shape(n_points, n_clusters, h)?;
        let mut members = Vec::with_capacity(n_points * h);
        if h == n_clusters {
            for _ in 0..n_points {
                members.extend(0..n_clusters as u32);
            }
        } else {
            for n in 0..n_points {
                let mut rng = streams.for_datapoint(n, 0);
                let mut picked: Vec<u32> = rand::seq::index::sample(&mut rng, n_clusters, h)
                    .iter()
                    .map(|i| i as u32)
                    .collect();
                picked.sort_unstable();
                members.extend(picked);
            }
        }
        Ok(Self::assemble(n_points, n_clusters, h, members))
    }

    /// Builds a state from explicit candidate sets (mainly for tests and
    /// custom drivers). Sets are sorted; distances start unset.
    pub fn from_members(
        n_points: usize,
        n_clusters: usize,
        h: usize,
        members: Vec<u32>,
    ) -> Result<Self> {
        validate_shape(n_points, n_clusters, h)?;
        if members.len() != n_points * h {
            return Err(SgmmError::Config(format!(
                "expected {} candidate entries, got {}",
                n_points * h,
                members.len()
            )));
        }
        let mut sorted = members;
        for entry in sorted.chunks_exact_mut(h) {
            entry.sort_unstable();
            if entry.iter().any(|&c| c as usize >= n_clusters) {
                return Err(SgmmError::Config("candidate index out of range".into()));
            }
            if entry.windows(2).any(|w| w[0] == w[1]) {
                return Err(SgmmError::Config(
                    "candidate indices must be distinct".into(),
                ));
            }
        }
        Ok(Self::assemble(n_points, n_clusters, h, sorted))
    }

    fn assemble(n_points: usize, n_clusters: usize, h: usize, members: Vec<u32>) -> Self {
        let best = members.iter().step_by(h).copied().collect();
        Self {
            n_points,
            n_clusters,
            h,
            members,
            distances: vec![f64::INFINITY; n_points * h],
            best,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn members(&self, n: usize) -> &[u32] {
        &self.members[n * self.h..(n + 1) * self.h]
    }

    #[inline]
    pub fn distances(&self, n: usize) -> &[f64] {
        &self.distances[n * self.h..(n + 1) * self.h]
    }

    /// Cluster with the smallest cached distance for datapoint `n`.
    #[inline]
    pub fn best(&self, n: usize) -> u32 {
        self.best[n]
    }

    /// Recomputes every cached distance against the given means and refreshes
    /// the best-cluster indices. Counts one evaluation per member.
    pub fn refresh_distances(
        &mut self,
        data: &DataMatrix,
        means: &[f64],
        counter: &mut DistanceCounter,
    ) {
        use rayon::prelude::*;
        let h = self.h;
        let dim = data.dim();
        let evals: u64 = self
            .members
            .par_chunks(crate::par::CHUNK_SIZE * h)
            .zip(self.distances.par_chunks_mut(crate::par::CHUNK_SIZE * h))
            .zip(self.best.par_chunks_mut(crate::par::CHUNK_SIZE))
            .enumerate()
            .map(|(chunk, ((mem, dst), bst))| {
                let base = chunk * crate::par::CHUNK_SIZE;
                let mut evals = 0u64;
                for i in 0..bst.len() {
                    let y = data.row(base + i);
                    let mem = &mem[i * h..(i + 1) * h];
                    let dst = &mut dst[i * h..(i + 1) * h];
                    let mut best_pos = 0;
                    let mut best_d = f64::INFINITY;
                    for (pos, (&c, d)) in mem.iter().zip(dst.iter_mut()).enumerate() {
                        *d = sqdist(y, &means[c as usize * dim..(c as usize + 1) * dim]);
                        evals += 1;
                        if *d < best_d {
                            best_d = *d;
                            best_pos = pos;
                        }
                    }
                    bst[i] = mem[best_pos];
                }
                evals
            })
            .sum();
        counter.add(evals);
    }

    /// Replaces datapoint `n`'s candidate set with the H closest clusters of
    /// the union of the current set and `candidates`, recomputing every
    /// distance against `means` (each counted). Ties break on the lower
    /// cluster index.
    pub fn update_point(
        &mut self,
        n: usize,
        data: &DataMatrix,
        candidates: &[u32],
        means: &[f64],
        counter: &mut DistanceCounter,
    ) {
        debug_assert!(candidates.iter().all(|c| !self.members(n).contains(c)));
        let dim = data.dim();
        let y = data.row(n);
        let mut pool: Vec<(u32, f64)> = Vec::with_capacity(self.h + candidates.len());
        for &c in self.members(n) {
            pool.push((
                c,
                sqdist(y, &means[c as usize * dim..(c as usize + 1) * dim]),
            ));
            counter.record();
        }
        for &c in candidates {
            pool.push((
                c,
                sqdist(y, &means[c as usize * dim..(c as usize + 1) * dim]),
            ));
            counter.record();
        }
        let h = self.h;
        let start = n * h;
        self.best[n] = select_h_smallest(
            &mut pool,
            h,
            &mut self.members[start..start + h],
            &mut self.distances[start..start + h],
        );
    }

    /// Raw views for data-parallel passes: members read-only, distances and
    /// best writable.
    pub(crate) fn parts_mut(&mut self) -> (&[u32], &mut [f64], &mut [u32]) {
        (&self.members, &mut self.distances, &mut self.best)
    }

    /// Raw views with everything writable (E-step candidate updates).
    pub(crate) fn parts_all_mut(&mut self) -> (&mut [u32], &mut [f64], &mut [u32]) {
        (&mut self.members, &mut self.distances, &mut self.best)
    }
}

fn validate_shape(n_points: usize, n_clusters: usize, h: usize) -> Result<()> {
    if n_points == 0 || n_clusters == 0 {
        return Err(SgmmError::Config(
            "need at least one datapoint and one cluster".into(),
        ));
    }
    if h == 0 || h > n_clusters {
        return Err(SgmmError::Config(format!(
            "truncation size {h} must satisfy 1 <= H <= {n_clusters}"
        )));
    }
    Ok(())
}

/// Keeps the `h` pool entries with the smallest distances (ties to the lower
/// cluster index), writes them back sorted by cluster index, and returns the
/// best cluster.
pub(crate) fn select_h_smallest(
    pool: &mut Vec<(u32, f64)>,
    h: usize,
    members_out: &mut [u32],
    dists_out: &mut [f64],
) -> u32 {
    debug_assert!(pool.len() >= h);
    pool.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    pool.truncate(h);
    let best = pool[0].0;
    pool.sort_unstable_by_key(|e| e.0);
    for (i, &(c, d)) in pool.iter().enumerate() {
        members_out[i] = c;
        dists_out[i] = d;
    }
    best
}

/// Sampling distribution over the clusters outside a candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDistribution {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl CandidateDistribution {
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Masks the similarity row of `best` at the candidate set and renormalizes
/// over the complement. A zero row falls back to the uniform distribution.
/// Returns `None` when the complement is empty (H = M); callers skip
/// sampling in that case.
pub fn conditional_distribution(
    sim: &SimilarityMatrix,
    best: u32,
    members: &[u32],
) -> Option<CandidateDistribution> {
    debug_assert!(members.contains(&best));
    let mut support = Vec::new();
    let mut probs = Vec::new();
    fill_conditional(
        Some(sim.row(best as usize)),
        members,
        sim.n_clusters(),
        &mut support,
        &mut probs,
    );
    if support.is_empty() {
        None
    } else {
        Some(CandidateDistribution { support, probs })
    }
}

/// Shared core of the conditional distribution: support = complement of the
/// candidate set in index order, probabilities from the (optional) row,
/// renormalized; uniform when the masked row sums to zero.
pub(crate) fn fill_conditional(
    row: Option<&[f64]>,
    members: &[u32],
    n_clusters: usize,
    support: &mut Vec<u32>,
    probs: &mut Vec<f64>,
) {
    support.clear();
    probs.clear();
    let mut mi = 0;
    let mut total = 0.0;
    for c in 0..n_clusters as u32 {
        if mi < members.len() && members[mi] == c {
            mi += 1;
            continue;
        }
        let w = row.map_or(0.0, |r| r[c as usize]);
        support.push(c);
        probs.push(w);
        total += w;
    }
    if support.is_empty() {
        return;
    }
    if total > 0.0 {
        let inv = 1.0 / total;
        for p in probs.iter_mut() {
            *p *= inv;
        }
    } else {
        let u = 1.0 / support.len() as f64;
        for p in probs.iter_mut() {
            *p = u;
        }
    }
}

/// Draws up to `r` distinct clusters without replacement, stopping early when
/// the probability mass is exhausted. Returned indices are never members of
/// the candidate set the distribution was built from.
pub fn sample_candidates(dist: &CandidateDistribution, r: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut probs = dist.probs.clone();
    let mut out = Vec::with_capacity(r.min(dist.support.len()));
    draw_without_replacement(&dist.support, &mut probs, r, rng, &mut out);
    out
}

/// Iterative draw-and-mask sampling; consumes the probabilities in place.
pub(crate) fn draw_without_replacement(
    support: &[u32],
    probs: &mut [f64],
    r: usize,
    rng: &mut impl Rng,
    out: &mut Vec<u32>,
) {
    let mut remaining = probs.iter().sum::<f64>();
    for _ in 0..r {
        if remaining <= 0.0 {
            break;
        }
        let u = rng.random::<f64>() * remaining;
        let mut acc = 0.0;
        let mut pick = usize::MAX;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
        }
        if pick == usize::MAX {
            // Floating-point leftovers: take the last positive entry.
            match probs.iter().rposition(|&p| p > 0.0) {
                Some(i) => pick = i,
                None => break,
            }
        }
        out.push(support[pick]);
        remaining -= probs[pick];
        probs[pick] = 0.0;
    }
}
