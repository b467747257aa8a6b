use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::PoolView;
use crate::model::RewardModel;
use crate::selection::{check_budget, select_topc_by_id, SelectionResult, StrategyKind};
use crate::types::{ComparisonPair, PairId};

/// Bernoulli entropy in nats with `0·ln 0 = 0`.
pub fn bernoulli_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

pub fn score_entropy(model: &RewardModel, pool: &[ComparisonPair]) -> Result<Vec<f64>> {
    pool.iter()
        .map(|p| Ok(bernoulli_entropy(model.pref_prob(p)?)))
        .collect()
}

pub fn score_maxdiff(model: &RewardModel, pool: &[ComparisonPair]) -> Result<Vec<f64>> {
    pool.iter().map(|p| Ok(model.reward_gap(p)?.abs())).collect()
}

pub fn entropy_scores(view: &PoolView) -> Vec<f64> {
    (0..view.len()).map(|i| bernoulli_entropy(view.p_hat(i))).collect()
}

pub fn maxdiff_scores(view: &PoolView) -> Vec<f64> {
    view.gaps().iter().map(|g| g.abs()).collect()
}

pub fn select_by_scores(
    strategy: StrategyKind,
    ids: &[PairId],
    scores: Vec<f64>,
    c: usize,
) -> Result<SelectionResult> {
    check_budget(c, scores.len())?;
    let ranked = select_topc_by_id(&scores, ids, c)?;
    Ok(SelectionResult::from_ranked(strategy, ids, &ranked, scores))
}

/// Uniform sample of `c` pool entries without replacement.
pub fn select_random(ids: &[PairId], c: usize, seed: u64) -> Result<SelectionResult> {
    check_budget(c, ids.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranked = rand::seq::index::sample(&mut rng, ids.len(), c).into_vec();
    Ok(SelectionResult::from_ranked(
        StrategyKind::Random,
        ids,
        &ranked,
        vec![0.0; ids.len()],
    ))
}
