//! Last-layer feature view of a candidate pool under a fixed model.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::PairContribution;
use crate::model::{bernoulli_variance, sigmoid, RewardModel};
use crate::types::{ComparisonPair, PairId};

/// Per-pair feature differences `d = F(left) − F(right)` and reward gaps
/// `headᵀ d`, computed once per (model, pool) and shared by every strategy.
///
/// The differences are stored as the rows of one `n × D` matrix so design
/// computations over large pools run as dense matrix products.
#[derive(Debug, Clone)]
pub struct PoolView {
    ids: Vec<PairId>,
    stacked: DMatrix<f64>,
    gaps: Vec<f64>,
}

impl PoolView {
    pub fn compute(model: &RewardModel, pairs: &[ComparisonPair]) -> Result<Self> {
        let rows: Vec<(DVector<f64>, f64)> = pairs
            .par_iter()
            .map(|p| {
                let fl = model.last_layer_features(p.left.as_slice())?;
                let fr = model.last_layer_features(p.right.as_slice())?;
                let head = model.head_slice();
                let rl: f64 = fl.iter().zip(head).map(|(a, b)| a * b).sum();
                let rr: f64 = fr.iter().zip(head).map(|(a, b)| a * b).sum();
                Ok((fl - fr, rl - rr))
            })
            .collect::<Result<_>>()?;
        let (diffs, gaps): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        Ok(Self {
            ids: pairs.iter().map(|p| p.id).collect(),
            stacked: stack(&diffs, model.hidden()),
            gaps,
        })
    }

    /// Builds a view directly from feature differences and a linear head, as
    /// for a linear BT model over fixed features.
    pub fn linear(ids: Vec<PairId>, diffs: Vec<DVector<f64>>, head: &DVector<f64>) -> Result<Self> {
        if ids.len() != diffs.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                actual: diffs.len(),
            });
        }
        let feature_dim = head.len();
        for d in &diffs {
            if d.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    actual: d.len(),
                });
            }
        }
        let gaps = diffs.iter().map(|d| d.dot(head)).collect();
        Ok(Self {
            ids,
            stacked: stack(&diffs, feature_dim),
            gaps,
        })
    }

    /// View restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            stacked: self.stacked.select_rows(indices),
            gaps: indices.iter().map(|&i| self.gaps[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.stacked.ncols()
    }

    pub fn ids(&self) -> &[PairId] {
        &self.ids
    }

    /// `n × D` matrix whose row `i` is `d_i`.
    pub fn stacked(&self) -> &DMatrix<f64> {
        &self.stacked
    }

    pub fn diff(&self, i: usize) -> DVector<f64> {
        self.stacked.row(i).transpose()
    }

    pub fn diffs(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.diff(i)).collect()
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Plug-in preference probability for pair `i`.
    pub fn p_hat(&self, i: usize) -> f64 {
        sigmoid(self.gaps[i])
    }

    /// Plug-in Bernoulli variances `p̂(1 − p̂)`.
    pub fn variance_weights(&self) -> Vec<f64> {
        self.gaps.iter().map(|&z| bernoulli_variance(z)).collect()
    }

    /// Fisher contributions with plug-in Bernoulli variances.
    pub fn contributions(&self) -> Vec<PairContribution> {
        self.gaps
            .iter()
            .enumerate()
            .map(|(i, &z)| PairContribution {
                diff: self.diff(i),
                variance_weight: bernoulli_variance(z),
            })
            .collect()
    }

    /// Contributions with every weight forced to one (pure design matrix).
    pub fn unit_contributions(&self) -> Vec<PairContribution> {
        (0..self.len())
            .map(|i| PairContribution {
                diff: self.diff(i),
                variance_weight: 1.0,
            })
            .collect()
    }
}

fn stack(diffs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(diffs.len(), dim);
    for (i, d) in diffs.iter().enumerate() {
        m.row_mut(i).copy_from(&d.transpose());
    }
    m
}
