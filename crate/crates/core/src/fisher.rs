//! Fisher information of the last-layer BT model and D-optimal selection.
//!
//! For feature differences `d_i` and plug-in probabilities `p̂_i` the Fisher
//! information of the head weights is `Σ_i p̂_i(1−p̂_i) d_i d_iᵀ`. Subset
//! selection weights every candidate by `w_i ∈ {0,1}`, relaxes `w` to be
//! continuous, and keeps the candidates with the largest partial derivative
//! of `log det M(w)` at `w = 1`. By Jacobi's formula that derivative is
//! `w_i d_iᵀ M⁻¹ d_i`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PoolView;
use crate::linalg::SpdFactor;
use crate::model::{bernoulli_variance, RewardModel};
use crate::selection::{check_budget, select_topc_by_id, SelectionResult, StrategyKind};
use crate::types::{ComparisonPair, LabeledDataset, PairId};

#[derive(Debug, Clone, PartialEq)]
pub struct PairContribution {
    pub diff: DVector<f64>,
    pub variance_weight: f64,
}

impl PairContribution {
    pub fn new(diff: DVector<f64>, variance_weight: f64) -> Result<Self> {
        if !(variance_weight >= 0.0 && variance_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "variance weight {variance_weight} must be finite and non-negative"
            )));
        }
        if diff.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite feature difference".into()));
        }
        Ok(Self {
            diff,
            variance_weight,
        })
    }
}

pub fn pair_contribution(model: &RewardModel, pair: &ComparisonPair) -> Result<PairContribution> {
    let fl = model.last_layer_features(pair.left.as_slice())?;
    let fr = model.last_layer_features(pair.right.as_slice())?;
    let diff = fl - fr;
    let gap = diff.dot(&model.head());
    Ok(PairContribution {
        diff,
        variance_weight: bernoulli_variance(gap),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    pub matrix: DMatrix<f64>,
    pub n_pairs: usize,
}

impl FisherInfo {
    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
            n_pairs: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `Σ w_i d_i d_iᵀ + I/σ² + past`. Pass `f64::INFINITY` for a flat prior.
pub fn assemble_fi(
    dim: usize,
    contribs: &[PairContribution],
    past: Option<&FisherInfo>,
    prior_variance: f64,
) -> Result<FisherInfo> {
    let (x, w) = stack_contributions(dim, contribs)?;
    assemble_stacked(&x, &w, past, prior_variance)
}

/// [`assemble_fi`] over the rows of an `n × D` matrix with weights `w`.
pub fn assemble_stacked(
    x: &DMatrix<f64>,
    w: &[f64],
    past: Option<&FisherInfo>,
    prior_variance: f64,
) -> Result<FisherInfo> {
    if !(prior_variance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "prior variance {prior_variance} must be positive"
        )));
    }
    let dim = x.ncols();
    let mut matrix = weighted_gram(x, w);
    let mut n_pairs = x.nrows();
    let ridge = 1.0 / prior_variance;
    if ridge > 0.0 {
        for i in 0..dim {
            matrix[(i, i)] += ridge;
        }
    }
    if let Some(past) = past {
        if past.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: past.dim(),
            });
        }
        // Keep the stored matrix exactly symmetric regardless of rounding in
        // `past`.
        matrix += (&past.matrix + past.matrix.transpose()) * 0.5;
        n_pairs += past.n_pairs;
    }
    Ok(FisherInfo { matrix, n_pairs })
}

pub fn log_det_score(fi: &FisherInfo, jitter: f64) -> Result<f64> {
    Ok(SpdFactor::new(&fi.matrix, jitter)?.log_det())
}

/// `∂/∂w_i log det M(w)` at `w = 1`, i.e. `w_i d_iᵀ M⁻¹ d_i`, where `base` is
/// `M(1)` assembled from the whole pool plus prior and past terms.
pub fn score_gradient(pool: &[PairContribution], base: &FisherInfo, jitter: f64) -> Result<Vec<f64>> {
    let factor = SpdFactor::new(&base.matrix, jitter)?;
    let (x, w) = stack_contributions(factor.dim(), pool)?;
    Ok(quad_forms(&x, &w, &factor))
}

fn stack_contributions(dim: usize, contribs: &[PairContribution]) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut x = DMatrix::zeros(contribs.len(), dim);
    for (i, c) in contribs.iter().enumerate() {
        if c.diff.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.diff.len(),
            });
        }
        x.row_mut(i).copy_from(&c.diff.transpose());
    }
    Ok((x, contribs.iter().map(|c| c.variance_weight).collect()))
}

/// `Σ w_i x_i x_iᵀ` over the rows of `x`, as one dense product, symmetrized
/// so the result is exactly symmetric.
fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled_t = x.transpose();
    for (mut col, wi) in scaled_t.column_iter_mut().zip(w) {
        col *= wi.sqrt();
    }
    let g = &scaled_t * scaled_t.transpose();
    (&g + g.transpose()) * 0.5
}

/// `w_i x_iᵀ M⁻¹ x_i` for every row, through one `n × D × D` product.
fn quad_forms(x: &DMatrix<f64>, w: &[f64], factor: &SpdFactor) -> Vec<f64> {
    let solved = x * factor.inverse();
    let mut out = vec![0.0; x.nrows()];
    for (xc, sc) in x.column_iter().zip(solved.column_iter()) {
        for ((o, a), b) in out.iter_mut().zip(xc.iter()).zip(sc.iter()) {
            *o += a * b;
        }
    }
    out.iter_mut().zip(w).for_each(|(o, wi)| *o = (*o * wi).max(0.0));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    #[default]
    Dopt,
    PaDopt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DesignSelector {
    /// Top-c partial derivatives of log det at w = 1.
    #[default]
    Gradient,
    /// Exact greedy forward selection maximizing log det at every step.
    Greedy,
    /// Sampling without replacement with probability proportional to the
    /// gradient components.
    Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub prior_variance: f64,
    /// Relative Cholesky jitter; the absolute value is `jitter · trace/D`.
    pub jitter: f64,
    pub mode: DesignMode,
    pub selector: DesignSelector,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            prior_variance: 1.0,
            jitter: 1e-8,
            mode: DesignMode::Dopt,
            selector: DesignSelector::Gradient,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_variance > 0.0) {
            return Err(Error::InvalidConfig("design.prior_variance must be > 0".into()));
        }
        if !(self.jitter > 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidConfig("design.jitter must be > 0".into()));
        }
        Ok(())
    }
}

/// Fisher information of already-labeled pairs under the current model, with
/// no prior term.
pub fn past_fisher(model: &RewardModel, past: &LabeledDataset) -> Result<FisherInfo> {
    let pairs: Vec<ComparisonPair> = past.pairs().cloned().collect();
    let view = PoolView::compute(model, &pairs)?;
    assemble_stacked(view.stacked(), &view.variance_weights(), None, f64::INFINITY)
}

/// D-optimal selection (`dopt` or `pa_dopt` per `config.mode`).
pub fn select_dopt(
    model: &RewardModel,
    pool: &[ComparisonPair],
    c: usize,
    config: &DesignConfig,
    past: Option<&LabeledDataset>,
    seed: u64,
) -> Result<SelectionResult> {
    check_budget(c, pool.len())?;
    let view = PoolView::compute(model, pool)?;
    let past_fi = match (config.mode, past) {
        (DesignMode::PaDopt, Some(data)) if !data.is_empty() => Some(past_fisher(model, data)?),
        _ => None,
    };
    select_dopt_view(&view, c, config, past_fi.as_ref(), seed)
}

pub fn select_dopt_view(
    view: &PoolView,
    c: usize,
    config: &DesignConfig,
    past: Option<&FisherInfo>,
    seed: u64,
) -> Result<SelectionResult> {
    let strategy = match config.mode {
        DesignMode::Dopt => StrategyKind::Dopt,
        DesignMode::PaDopt => StrategyKind::PaDopt,
    };
    let past = if config.mode == DesignMode::PaDopt { past } else { None };
    design_stacked(strategy, view.ids(), view.stacked(), &view.variance_weights(), None, c, config, past, seed)
}

/// `det(XᵀX)` selection: the D-optimal machinery with unit weights.
pub fn select_xtx_view(view: &PoolView, c: usize, config: &DesignConfig, seed: u64) -> Result<SelectionResult> {
    let ones = vec![1.0; view.len()];
    design_stacked(StrategyKind::Xtx, view.ids(), view.stacked(), &ones, None, c, config, None, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn select_design(
    strategy: StrategyKind,
    ids: &[PairId],
    contribs: &[PairContribution],
    dim: usize,
    c: usize,
    config: &DesignConfig,
    past: Option<&FisherInfo>,
    seed: u64,
) -> Result<SelectionResult> {
    check_budget(c, contribs.len())?;
    let (x, w) = stack_contributions(dim, contribs)?;
    design_stacked(strategy, ids, &x, &w, Some(contribs), c, config, past, seed)
}

#[allow(clippy::too_many_arguments)]
fn design_stacked(
    strategy: StrategyKind,
    ids: &[PairId],
    x: &DMatrix<f64>,
    w: &[f64],
    contribs: Option<&[PairContribution]>,
    c: usize,
    config: &DesignConfig,
    past: Option<&FisherInfo>,
    seed: u64,
) -> Result<SelectionResult> {
    check_budget(c, w.len())?;
    config.validate()?;
    let base = assemble_stacked(x, w, past, config.prior_variance)?;
    let factor = SpdFactor::new(&base.matrix, config.jitter)?;
    let grad = quad_forms(x, w, &factor);
    let ranked = match config.selector {
        DesignSelector::Gradient => select_topc_by_id(&grad, ids, c)?,
        DesignSelector::Sampling => sample_by_weight(&grad, ids, c, seed)?,
        DesignSelector::Greedy => {
            let start = assemble_fi(x.ncols(), &[], past, config.prior_variance)?;
            let owned;
            let contribs = match contribs {
                Some(cs) => cs,
                None => {
                    owned = (0..x.nrows())
                        .map(|i| PairContribution {
                            diff: x.row(i).transpose(),
                            variance_weight: w[i],
                        })
                        .collect::<Vec<_>>();
                    &owned
                }
            };
            greedy_logdet(contribs, &start, ids, c, config.jitter)?
        }
    };
    Ok(SelectionResult::from_ranked(strategy, ids, &ranked, grad))
}

fn sample_by_weight(weights: &[f64], ids: &[PairId], c: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positive = weights.iter().filter(|w| **w > 0.0 && w.is_finite()).count();
    let take = c.min(positive);
    let mut picked: Vec<usize> = if take > 0 {
        rand::seq::index::sample_weighted(&mut rng, weights.len(), |i| {
            let w = weights[i];
            if w.is_finite() && w > 0.0 {
                w
            } else {
                0.0
            }
        }, take)
        .map_err(|e| Error::InvalidConfig(format!("weighted sampling failed: {e}")))?
        .into_vec()
    } else {
        Vec::new()
    };
    if picked.len() < c {
        // Fewer positive weights than the budget: fill with the remaining
        // candidates in the deterministic top-c order.
        let chosen: std::collections::HashSet<usize> = picked.iter().copied().collect();
        let rest = select_topc_by_id(weights, ids, weights.len())?;
        picked.extend(rest.into_iter().filter(|i| !chosen.contains(i)).take(c - picked.len()));
    }
    Ok(picked)
}

/// Greedy forward selection: starting from `start`, repeatedly add the
/// candidate that maximizes `log det(M + w d dᵀ) = log det M + ln(1 + w dᵀM⁻¹d)`.
pub fn greedy_logdet(
    contribs: &[PairContribution],
    start: &FisherInfo,
    ids: &[PairId],
    c: usize,
    jitter: f64,
) -> Result<Vec<usize>> {
    check_budget(c, contribs.len())?;
    let mut factor = SpdFactor::new(&start.matrix, jitter)?;
    let mut quad: Vec<f64> = contribs
        .iter()
        .map(|ct| factor.inv_quad(ct.diff.as_slice()))
        .collect();
    let mut taken = vec![false; contribs.len()];
    let mut order = Vec::with_capacity(c);
    for _ in 0..c {
        let mut best: Option<usize> = None;
        for i in 0..contribs.len() {
            if taken[i] {
                continue;
            }
            let gain = (contribs[i].variance_weight * quad[i]).ln_1p();
            best = match best {
                None => Some(i),
                Some(b) => {
                    let gb = (contribs[b].variance_weight * quad[b]).ln_1p();
                    if gain > gb || (gain == gb && ids[i] < ids[b]) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let j = best.expect("budget checked against pool size");
        taken[j] = true;
        order.push(j);
        let w = contribs[j].variance_weight;
        if w > 0.0 {
            // Sherman-Morrison on the quadratic forms, then refresh the factor.
            let a = factor.solve(&contribs[j].diff);
            let denom = 1.0 + w * quad[j];
            for (i, ct) in contribs.iter().enumerate() {
                if !taken[i] {
                    let proj = ct.diff.dot(&a);
                    quad[i] = (quad[i] - w * proj * proj / denom).max(0.0);
                }
            }
            factor.rank_one_update(&contribs[j].diff, w);
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn contrib(d: &[f64], w: f64) -> PairContribution {
        PairContribution::new(DVector::from_column_slice(d), w).unwrap()
    }

    #[test]
    fn identical_sides_give_zero_diff_and_quarter_weight() {
        let m = RewardModel::init(3, 5, 2);
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let p = ComparisonPair::new(PairId(1), x.clone(), x).unwrap();
        let c = pair_contribution(&m, &p).unwrap();
        assert!(c.diff.iter().all(|v| *v == 0.0));
        assert_eq!(c.variance_weight, 0.25);
    }

    #[test]
    fn swap_negates_diff_keeps_weight() {
        let m = RewardModel::init(3, 5, 2);
        let p = ComparisonPair::new(
            PairId(1),
            DVector::from_vec(vec![1.0, -0.2, 0.3]),
            DVector::from_vec(vec![-0.5, 0.4, 2.0]),
        )
        .unwrap();
        let a = pair_contribution(&m, &p).unwrap();
        let b = pair_contribution(&m, &p.swapped()).unwrap();
        assert_relative_eq!(a.diff, -b.diff, epsilon = 1e-15);
        assert_relative_eq!(a.variance_weight, b.variance_weight, max_relative = 1e-12);
    }

    #[test]
    fn planted_gap_ln3_weight() {
        assert_relative_eq!(bernoulli_variance(3f64.ln()), 0.1875, max_relative = 1e-14);
    }

    #[test]
    fn assemble_examples() {
        let fi = assemble_fi(2, &[contrib(&[1.0, 0.0], 0.25)], None, f64::INFINITY).unwrap();
        assert_eq!(fi.matrix, DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.0]));

        let fi = assemble_fi(
            2,
            &[contrib(&[1.0, 0.0], 0.25), contrib(&[0.0, 1.0], 0.25)],
            None,
            f64::INFINITY,
        )
        .unwrap();
        assert_relative_eq!(fi.matrix.determinant(), 0.0625);
        assert_relative_eq!(log_det_score(&fi, 1e-8).unwrap(), 0.0625f64.ln(), max_relative = 1e-12);

        let prior = assemble_fi(3, &[], None, 1.0).unwrap();
        assert_eq!(prior.matrix, DMatrix::identity(3, 3));
        assert_eq!(log_det_score(&assemble_fi(4, &[], None, 1.0).unwrap(), 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn assemble_rejects_mixed_dims() {
        assert!(matches!(
            assemble_fi(2, &[contrib(&[1.0, 0.0, 0.0], 0.25)], None, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_diff_and_duplicates_in_gradient() {
        let pool = vec![
            contrib(&[1.0, 0.5], 0.2),
            contrib(&[1.0, 0.5], 0.2),
            contrib(&[0.0, 0.0], 0.25),
            contrib(&[-0.3, 2.0], 0.1),
        ];
        let base = assemble_fi(2, &pool, None, 1.0).unwrap();
        let g = score_gradient(&pool, &base, 1e-8).unwrap();
        assert_eq!(g[0], g[1]);
        assert_eq!(g[2], 0.0);
        assert!(g.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn budget_saturation_selects_whole_pool() {
        let ids: Vec<PairId> = (0..4).map(PairId).collect();
        let pool = vec![
            contrib(&[1.0, 0.5], 0.2),
            contrib(&[0.1, 0.5], 0.2),
            contrib(&[0.0, 0.0], 0.25),
            contrib(&[-0.3, 2.0], 0.1),
        ];
        let r = select_design(StrategyKind::Dopt, &ids, &pool, 2, 4, &DesignConfig::default(), None, 0)
            .unwrap();
        let mut got = r.indices();
        got.sort();
        assert_eq!(got, vec![0, 1, 2, 3]);
        assert!(matches!(
            select_design(StrategyKind::Dopt, &ids, &pool, 2, 5, &DesignConfig::default(), None, 0),
            Err(Error::BudgetExceedsPool { .. })
        ));
        assert!(matches!(
            select_design(StrategyKind::Dopt, &[], &[], 2, 1, &DesignConfig::default(), None, 0),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn sampling_selector_is_seeded() {
        let ids: Vec<PairId> = (0..6).map(PairId).collect();
        let pool: Vec<_> = (0..6)
            .map(|i| contrib(&[i as f64 * 0.3, 1.0 - i as f64 * 0.1], 0.2))
            .collect();
        let cfg = DesignConfig {
            selector: DesignSelector::Sampling,
            ..DesignConfig::default()
        };
        let a = select_design(StrategyKind::Dopt, &ids, &pool, 2, 3, &cfg, None, 7).unwrap();
        let b = select_design(StrategyKind::Dopt, &ids, &pool, 2, 3, &cfg, None, 7).unwrap();
        assert_eq!(a, b);
        let mut idx = a.indices();
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), 3);
    }
}
