//! Dense observation matrices, optionally weighted.

use crate::error::{Result, SgmmError};

/// Relative factor applied to the mean per-dimension data variance to obtain
/// the variance floor used by every fit on that data.
const VARIANCE_FLOOR_FACTOR: f64 = 1e-10;

/// N x D row-major matrix of observations with optional per-row positive
/// weights (all weights are 1 when absent).
///
/// Construction validates the invariants once: finite values, positive
/// weights, consistent lengths. The variance floor and the total weight are
/// computed here so downstream code can read them for free.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_points: usize,
    dim: usize,
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
    total_weight: f64,
    variance_floor: f64,
}

impl DataMatrix {
    pub fn new(n_points: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::build(n_points, dim, values, None)
    }

    pub fn with_weights(
        n_points: usize,
        dim: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        Self::build(n_points, dim, values, Some(weights))
    }

    fn build(
        n_points: usize,
        dim: usize,
        values: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n_points == 0 || dim == 0 {
            return Err(SgmmError::Data(
                "data must have at least one point and one dimension".into(),
            ));
        }
        if values.len() != n_points * dim {
            return Err(SgmmError::Data(format!(
                "expected {} values for a {}x{} matrix, got {}",
                n_points * dim,
                n_points,
                dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SgmmError::Data("all values must be finite".into()));
        }
        if let Some(w) = &weights {
            if w.len() != n_points {
                return Err(SgmmError::Data(format!(
                    "expected {} weights, got {}",
                    n_points,
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(SgmmError::Data(
                    "all weights must be finite and positive".into(),
                ));
            }
        }
        let total_weight = match &weights {
            Some(w) => w.iter().sum(),
            None => n_points as f64,
        };
        let variance_floor = compute_variance_floor(&values, n_points, dim);
        Ok(Self {
            n_points,
            dim,
            values,
            weights,
            total_weight,
            variance_floor,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// Weight of row `n`; 1 for unweighted data.
    #[inline]
    pub fn weight(&self, n: usize) -> f64 {
        match &self.weights {
            Some(w) => w[n],
            None => 1.0,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Sum of weights; equals the number of points when unweighted.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Floor applied to every variance estimate on this data. Keeps the
    /// posterior softmax finite while preserving near-hard assignments.
    pub fn variance_floor(&self) -> f64 {
        self.variance_floor
    }

    /// Unweighted per-dimension mean of the rows.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for n in 0..self.n_points {
            for (m, v) in mean.iter_mut().zip(self.row(n)) {
                *m += v;
            }
        }
        let inv = 1.0 / self.n_points as f64;
        for m in &mut mean {
            *m *= inv;
        }
        mean
    }
}

fn compute_variance_floor(values: &[f64], n_points: usize, dim: usize) -> f64 {
    let inv_n = 1.0 / n_points as f64;
    let mut mean = vec![0.0; dim];
    for row in values.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m *= inv_n;
    }
    let mut var_sum = 0.0;
    for row in values.chunks_exact(dim) {
        for (m, v) in mean.iter().zip(row) {
            let d = v - m;
            var_sum += d * d;
        }
    }
    let mean_var = var_sum * inv_n / dim as f64;
    // Zero-variance data would floor sigma^2 at exactly zero and break the
    // posterior; clamp to the smallest positive normal instead.
    (VARIANCE_FLOOR_FACTOR * mean_var).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::new(2, 0, vec![]).is_err());
        assert!(DataMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::with_weights(2, 1, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(DataMatrix::with_weights(2, 1, vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(DataMatrix::with_weights(2, 1, vec![1.0, 2.0], vec![1.0, -3.0]).is_err());
    }

    #[test]
    fn accessors() {
        let d = DataMatrix::with_weights(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 1.5]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.weight(0), 0.5);
        assert_eq!(d.total_weight(), 2.0);
        assert!(d.is_weighted());

        let u = DataMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(u.weight(1), 1.0);
        assert_eq!(u.total_weight(), 2.0);
        assert_eq!(u.mean(), vec![2.0, 3.0]);
    }

    #[test]
    fn variance_floor_scales_with_data() {
        let d = DataMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        // per-dim variance of {0,1,2,3} is 1.25
        let expected = 1e-10 * 1.25;
        assert!((d.variance_floor() - expected).abs() < 1e-24);
    }

    #[test]
    fn variance_floor_positive_on_constant_data() {
        let d = DataMatrix::new(3, 2, vec![5.0; 6]).unwrap();
        assert!(d.variance_floor() > 0.0);
    }
}
