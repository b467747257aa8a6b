//! Maximum-likelihood fit of the linear BT model `P(left ≻ right) = σ(dᵀβ)`.
//!
//! Newton's method with backtracking. Used to check the asymptotic covariance
//! of the estimator against the inverse Fisher information.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::{bernoulli_variance, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub beta: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Ridge penalty `λ/2 ‖β‖²`; zero gives the plain MLE.
    pub ridge: f64,
    pub max_iter: usize,
    /// Stop when the Newton decrement `gᵀH⁻¹g` falls below `tol · n`.
    pub tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-14,
        }
    }
}

fn check(diffs: &[DVector<f64>], outcomes: &[f64]) -> Result<usize> {
    let first = diffs.first().ok_or(Error::EmptyDataset)?;
    if outcomes.len() != diffs.len() {
        return Err(Error::DimensionMismatch {
            expected: diffs.len(),
            actual: outcomes.len(),
        });
    }
    let dim = first.len();
    if let Some(bad) = diffs.iter().find(|d| d.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(dim)
}

/// Negative log-likelihood plus ridge term.
pub fn linear_bt_nll(diffs: &[DVector<f64>], outcomes: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let data: f64 = diffs
        .iter()
        .zip(outcomes)
        .map(|(d, &y)| {
            let z = d.dot(beta);
            y * softplus(-z) + (1.0 - y) * softplus(z)
        })
        .sum();
    data + 0.5 * ridge * beta.norm_squared()
}

/// Fisher information `Σ σ'(dᵀβ) d dᵀ` of the linear BT model at `beta`.
pub fn linear_bt_fisher(diffs: &[DVector<f64>], beta: &DVector<f64>) -> DMatrix<f64> {
    let dim = beta.len();
    let mut m = DMatrix::zeros(dim, dim);
    for d in diffs {
        m.ger(bernoulli_variance(d.dot(beta)), d, d, 1.0);
    }
    m
}

pub fn fit_linear_bt(diffs: &[DVector<f64>], outcomes: &[f64], config: &NewtonConfig) -> Result<LinearFit> {
    let dim = check(diffs, outcomes)?;
    let mut beta = DVector::zeros(dim);
    let mut loss = linear_bt_nll(diffs, outcomes, &beta, config.ridge);
    for iter in 0..config.max_iter {
        let mut grad = &beta * config.ridge;
        let mut hess = DMatrix::identity(dim, dim) * config.ridge;
        for (d, &y) in diffs.iter().zip(outcomes) {
            let z = d.dot(&beta);
            grad.axpy(sigmoid(z) - y, d, 1.0);
            hess.ger(bernoulli_variance(z), d, d, 1.0);
        }
        let step = SpdFactor::new(&hess, 1e-10)?.solve(&grad);
        let decrement = grad.dot(&step);
        if decrement < config.tol * diffs.len() as f64 {
            return Ok(LinearFit { beta, iterations: iter });
        }
        let mut t = 1.0;
        loop {
            let candidate = &beta - &step * t;
            let next = linear_bt_nll(diffs, outcomes, &candidate, config.ridge);
            if next <= loss - 0.25 * t * decrement {
                beta = candidate;
                loss = next;
                break;
            }
            if t < 1e-10 {
                // No representable descent left: already at the optimum.
                return Ok(LinearFit { beta, iterations: iter });
            }
            t *= 0.5;
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: iter });
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_data_gives_zero() {
        let d = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0])];
        let fit = fit_linear_bt(&d, &[1.0, 0.0], &NewtonConfig::default()).unwrap();
        assert!(fit.beta[0].abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // Three wins out of four on the same unit difference: σ(β) = 3/4.
        let d = vec![DVector::from_vec(vec![1.0]); 4];
        let fit = fit_linear_bt(&d, &[1.0, 1.0, 1.0, 0.0], &NewtonConfig::default()).unwrap();
        assert!((fit.beta[0] - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn separable_data_needs_ridge() {
        let d = vec![DVector::from_vec(vec![1.0]); 3];
        let cfg = NewtonConfig {
            max_iter: 30,
            ..NewtonConfig::default()
        };
        assert!(fit_linear_bt(&d, &[1.0; 3], &cfg).is_err());
        let ridged = NewtonConfig { ridge: 1.0, ..cfg };
        assert!(fit_linear_bt(&d, &[1.0; 3], &ridged).unwrap().beta[0] > 0.0);
    }
}
