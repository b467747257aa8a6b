//! Jittered Cholesky factorization for small dense SPD matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const MAX_JITTER_ATTEMPTS: usize = 8;

/// Cholesky factor `M = L Lᵀ`, possibly of `M + jitter·I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    /// Factorizes `m`. If plain Cholesky fails, retries with a diagonal jitter
    /// starting at `jitter_scale · trace/D` and growing tenfold per attempt.
    pub fn new(m: &DMatrix<f64>, jitter_scale: f64) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { jitter: 0.0 });
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let mean_diag = (m.trace() / d.max(1) as f64).abs();
        let mut jitter = jitter_scale * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        for _ in 0..MAX_JITTER_ATTEMPTS {
            let mut repaired = m.clone();
            for i in 0..d {
                repaired[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(repaired) {
                tracing::debug!(jitter, "cholesky needed diagonal jitter");
                return Ok(Self { chol, jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::NotPositiveDefinite { jitter: jitter / 10.0 })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Jitter that was added to the diagonal (zero if none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Solves `L y = b` (forward substitution only).
    pub fn whiten(&self, b: &[f64]) -> Vec<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                acc -= l[(i, j)] * yj;
            }
            y[i] = acc / l[(i, i)];
        }
        y
    }

    /// Quadratic form `bᵀ M⁻¹ b` through one triangular solve.
    pub fn inv_quad(&self, b: &[f64]) -> f64 {
        self.whiten(b).iter().map(|v| v * v).sum()
    }

    /// Solves `Lᵀ x = y` (back substitution only).
    pub fn unwhiten_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut x = DVector::zeros(n);
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= l[(j, i)] * x[j];
            }
            x[i] = acc / l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Rank-one update `M ← M + w·v vᵀ` for `w ≥ 0`.
    pub fn rank_one_update(&mut self, v: &DVector<f64>, w: f64) {
        self.chol.rank_one_update(v, w);
    }
}
