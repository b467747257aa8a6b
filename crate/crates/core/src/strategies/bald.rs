//! Last-layer Laplace posterior and greedy batchBALD.
//!
//! The posterior over head weights is Gaussian with mean equal to the trained
//! head and precision `I_past + I/σ²`. For a candidate batch `B` the mutual
//! information between its labels and the head weights is estimated from `K`
//! posterior samples:
//!
//! ```text
//! I(y_B; β) = H(y_B) − Σ_{i∈B} mean_k H(p_ik),   p_ik = σ(β_kᵀ d_i)
//! ```
//!
//! `H(y_B)` is computed over all `2^|B|` label configurations while that is
//! cheap, then from configurations sampled ancestrally from the joint.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PoolView;
use crate::fisher::{assemble_fi, FisherInfo, PairContribution};
use crate::linalg::SpdFactor;
use crate::model::sigmoid;
use crate::selection::{check_budget, select_topc_by_id, SelectedPair, SelectionResult, StrategyKind};

use super::scores::bernoulli_entropy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaldConfig {
    /// Posterior samples `K`.
    pub samples: usize,
    /// Largest number of label configurations tracked exactly before switching
    /// to sampled configurations.
    pub max_exact_configs: usize,
    /// Number of sampled configurations once the exact joint is too large.
    pub sampled_configs: usize,
    /// Only the highest single-point BALD candidates enter the greedy batch
    /// search. Pools no larger than this are searched in full.
    pub candidate_cap: usize,
}

impl Default for BaldConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            max_exact_configs: 256,
            sampled_configs: 256,
            candidate_cap: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaplacePosterior {
    pub mean: DVector<f64>,
    pub precision: FisherInfo,
    factor: SpdFactor,
    pub samples: usize,
}

/// Builds the posterior from already-labeled contributions under the current
/// model (`past`), the current head and the prior variance.
pub fn fit_laplace(
    head: &DVector<f64>,
    past: &[PairContribution],
    prior_variance: f64,
    jitter: f64,
    samples: usize,
) -> Result<LaplacePosterior> {
    if samples < 2 {
        return Err(Error::TooFewSamples(samples));
    }
    let precision = assemble_fi(head.len(), past, None, prior_variance)?;
    let factor = SpdFactor::new(&precision.matrix, jitter)?;
    Ok(LaplacePosterior {
        mean: head.clone(),
        precision,
        factor,
        samples,
    })
}

impl LaplacePosterior {
    pub fn covariance(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    /// `K` head samples `mean + L⁻ᵀ ε` with `ε ~ N(0, I)`, where
    /// `precision = L Lᵀ`.
    pub fn sample_heads(&self, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.mean.len();
        (0..self.samples)
            .map(|_| {
                let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + self.factor.unwhiten_transpose(&eps)
            })
            .collect()
    }

    /// `J × K` matrix of per-sample preference probabilities.
    pub fn predictive_probs(&self, view: &PoolView, seed: u64) -> DMatrix<f64> {
        let heads = DMatrix::from_columns(&self.sample_heads(seed));
        (view.stacked() * heads).map(sigmoid)
    }
}

/// Single-point BALD score per row of a `J × K` probability matrix.
pub fn bald_scores(probs: &DMatrix<f64>) -> Vec<f64> {
    let k = probs.ncols() as f64;
    probs
        .row_iter()
        .map(|row| {
            let mean = row.sum() / k;
            let cond = row.iter().map(|p| bernoulli_entropy(*p)).sum::<f64>() / k;
            bernoulli_entropy(mean) - cond
        })
        .collect()
}

/// Joint label-configuration state of the batch chosen so far.
struct JointState {
    /// Per-configuration, per-sample probabilities `P_k(Y_r)`, each row scaled
    /// by `exp(log_scale[r])`.
    rows: DMatrix<f64>,
    log_scale: Vec<f64>,
    /// Importance weight of each configuration; 1 while enumerating exactly.
    mass: Vec<f64>,
    exact: bool,
}

impl JointState {
    fn new(samples: usize) -> Self {
        Self {
            rows: DMatrix::from_element(1, samples, 1.0),
            log_scale: vec![0.0],
            mass: vec![1.0],
            exact: true,
        }
    }

    fn row_prob(&self, r: usize) -> f64 {
        self.rows.row(r).mean() * self.log_scale[r].exp()
    }

    /// `H(y_B ∪ y_i)` for every candidate column of `probs_t` (`K × J`).
    fn joint_entropies(&self, probs_t: &DMatrix<f64>) -> Vec<f64> {
        let k = self.rows.ncols() as f64;
        let m1 = &self.rows * probs_t / k;
        let row_means: Vec<f64> = (0..self.rows.nrows()).map(|r| self.rows.row(r).mean()).collect();
        (0..probs_t.ncols())
            .map(|j| {
                let mut h = 0.0;
                for r in 0..self.rows.nrows() {
                    let scale = self.log_scale[r];
                    let p1 = m1[(r, j)];
                    let p0 = (row_means[r] - p1).max(0.0);
                    for q in [p0, p1] {
                        if q > 0.0 {
                            h -= self.mass[r] * scale.exp() * q * (q.ln() + scale);
                        }
                    }
                }
                h
            })
            .collect()
    }

    fn renormalize(&mut self, r: usize) {
        let m = self.rows.row(r).max();
        if m > 0.0 {
            self.rows.row_mut(r).scale_mut(1.0 / m);
            self.log_scale[r] += m.ln();
        }
    }

    fn add_item(&mut self, p: &[f64], config: &BaldConfig, rng: &mut ChaCha8Rng) {
        let k = p.len();
        if self.exact && 2 * self.rows.nrows() <= config.max_exact_configs.max(2) {
            let n = self.rows.nrows();
            let mut rows = DMatrix::zeros(2 * n, k);
            let mut log_scale = Vec::with_capacity(2 * n);
            for r in 0..n {
                for (y, out) in [(1.0, 2 * r), (0.0, 2 * r + 1)] {
                    for s in 0..k {
                        let q = if y == 1.0 { p[s] } else { 1.0 - p[s] };
                        rows[(out, s)] = self.rows[(r, s)] * q;
                    }
                    log_scale.push(self.log_scale[r]);
                }
            }
            self.rows = rows;
            self.log_scale = log_scale;
            self.mass = vec![1.0; 2 * n];
            for r in 0..2 * n {
                self.renormalize(r);
            }
            return;
        }
        if self.exact {
            self.resample(config.sampled_configs.max(1), rng);
        }
        for r in 0..self.rows.nrows() {
            let total = self.rows.row(r).mean();
            let p1: f64 = (0..k).map(|s| self.rows[(r, s)] * p[s]).sum::<f64>() / k as f64;
            let y1 = total > 0.0 && rng.random::<f64>() < p1 / total;
            for s in 0..k {
                self.rows[(r, s)] *= if y1 { p[s] } else { 1.0 - p[s] };
            }
            self.renormalize(r);
        }
        self.refresh_mass();
    }

    /// Replaces the exact configuration table by `count` draws from it.
    fn resample(&mut self, count: usize, rng: &mut ChaCha8Rng) {
        let probs: Vec<f64> = (0..self.rows.nrows()).map(|r| self.row_prob(r)).collect();
        let total: f64 = probs.iter().sum();
        let k = self.rows.ncols();
        let mut rows = DMatrix::zeros(count, k);
        let mut log_scale = Vec::with_capacity(count);
        for out in 0..count {
            let mut u = rng.random::<f64>() * total;
            let mut pick = probs.len() - 1;
            for (r, p) in probs.iter().enumerate() {
                if u < *p {
                    pick = r;
                    break;
                }
                u -= p;
            }
            rows.set_row(out, &self.rows.row(pick));
            log_scale.push(self.log_scale[pick]);
        }
        self.rows = rows;
        self.log_scale = log_scale;
        self.exact = false;
        self.refresh_mass();
    }

    fn refresh_mass(&mut self) {
        let count = self.rows.nrows() as f64;
        self.mass = (0..self.rows.nrows())
            .map(|r| {
                let p = self.row_prob(r);
                if p > 0.0 {
                    1.0 / (count * p)
                } else {
                    0.0
                }
            })
            .collect();
    }
}

/// Greedy batchBALD over a `J × K` probability matrix. Returns the chosen rows
/// in order with the mutual-information gain of each pick.
pub fn greedy_batchbald(
    probs: &DMatrix<f64>,
    ids: &[crate::types::PairId],
    c: usize,
    config: &BaldConfig,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    check_budget(c, probs.nrows())?;
    let k = probs.ncols();
    if k < 2 {
        return Err(Error::TooFewSamples(k));
    }
    let cond: Vec<f64> = probs
        .row_iter()
        .map(|row| row.iter().map(|p| bernoulli_entropy(*p)).sum::<f64>() / k as f64)
        .collect();
    let probs_t = probs.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba1d);
    let mut state = JointState::new(k);
    let mut taken = vec![false; probs.nrows()];
    let mut picked = Vec::with_capacity(c);
    let mut batch_mi = 0.0;
    let mut batch_cond = 0.0;
    for _ in 0..c {
        let joint = state.joint_entropies(&probs_t);
        let mut best: Option<(usize, f64)> = None;
        for (j, h) in joint.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let mi = h - batch_cond - cond[j];
            best = match best {
                Some((b, v)) if v > mi || (v == mi && ids[b] < ids[j]) => Some((b, v)),
                _ => Some((j, mi)),
            };
        }
        let (j, mi) = best.expect("budget checked");
        taken[j] = true;
        picked.push((j, mi - batch_mi));
        batch_mi = mi;
        batch_cond += cond[j];
        let row: Vec<f64> = probs.row(j).iter().copied().collect();
        state.add_item(&row, config, &mut rng);
    }
    Ok(picked)
}

pub fn select_batchbald(
    posterior: &LaplacePosterior,
    view: &PoolView,
    c: usize,
    config: &BaldConfig,
    seed: u64,
) -> Result<SelectionResult> {
    check_budget(c, view.len())?;
    let probs = posterior.predictive_probs(view, seed);
    let single = bald_scores(&probs);
    let ids = view.ids();

    let cap = config.candidate_cap.max(c);
    let candidates: Vec<usize> = if view.len() > cap {
        select_topc_by_id(&single, ids, cap)?
    } else {
        (0..view.len()).collect()
    };
    let sub_probs = probs.select_rows(candidates.iter());
    let sub_ids: Vec<_> = candidates.iter().map(|&i| ids[i]).collect();
    let picks = greedy_batchbald(&sub_probs, &sub_ids, c, config, seed)?;

    let selected = picks
        .iter()
        .enumerate()
        .map(|(rank, &(j, gain))| SelectedPair {
            pair_id: ids[candidates[j]],
            pool_index: candidates[j],
            score: gain,
            rank,
        })
        .collect();
    Ok(SelectionResult {
        strategy: StrategyKind::Batchbald,
        round: 0,
        selected,
        scores: single,
    })
}
