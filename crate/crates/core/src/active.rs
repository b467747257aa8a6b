//! The model-based active-learning loop.
//!
//! Round 0 labels a seeded random bootstrap batch and trains `M_0`. Every
//! later round `s` builds a pool, lets the strategy pick `c` pairs using
//! `M_{s−1}` and `D_{s−1}`, labels them, forms `D_s = D_{s−1} ∪ C̃_s`, retrains
//! from scratch and evaluates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::annotate::{annotate, Annotator};
use crate::error::{Error, Result};
use crate::features::PoolView;
use crate::metrics::{best_of_n_from_rewards, spearman_from_rewards, TestPromptSet};
use crate::model::RewardModel;
use crate::pool::{build_pool, ItemSet, PoolConfig};
use crate::selection::{SelectionResult, StrategyKind};
use crate::strategies::{self, SelectionInput, StrategyParams};
use crate::train::{train, TrainConfig};
use crate::types::{ComparisonPair, LabeledDataset, PairId, PreferenceLabel};
use crate::worlds::BimodalWorld2D;

/// Supplies the candidate items of each round.
pub trait ItemSource {
    fn items_for_round(&mut self, round: usize, seed: u64) -> Result<ItemSet>;
}

/// The same item set every round (prompt/response embeddings from a file or
/// a planted world).
pub struct FixedItems(pub ItemSet);

impl ItemSource for FixedItems {
    fn items_for_round(&mut self, _round: usize, _seed: u64) -> Result<ItemSet> {
        Ok(self.0.clone())
    }
}

impl ItemSource for BimodalWorld2D {
    fn items_for_round(&mut self, round: usize, seed: u64) -> Result<ItemSet> {
        self.sample_round(round, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub rounds: usize,
    pub pool: PoolConfig,
    pub train: TrainConfig,
    pub params: StrategyParams,
    pub seed: u64,
    /// N for best-of-N; `None` uses every generation of each test prompt.
    pub best_of_n: Option<usize>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.pool.pool_cap < self.batch_size {
            return Err(Error::InvalidConfig(format!(
                "pool_cap {} is smaller than batch_size {}",
                self.pool.pool_cap, self.batch_size
            )));
        }
        self.pool.validate()?;
        self.train.validate()?;
        self.params.validate()
    }
}

/// Independent, reproducible seed for one purpose within one round.
pub fn derive_seed(base: u64, round: usize, stream: u64) -> u64 {
    // splitmix64 finalizer over the packed inputs
    let mut z = base
        .wrapping_add((round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(stream.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub mod stream {
    pub const ITEMS: u64 = 1;
    pub const POOL: u64 = 2;
    pub const SELECT: u64 = 3;
    pub const ANNOTATE: u64 = 4;
    pub const TRAIN: u64 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub one_minus_spearman: f64,
    pub best_of_n: f64,
    pub skipped_prompts: usize,
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub n_labels: usize,
    pub pool_size: usize,
    pub selection: SelectionResult,
    /// Pairs labeled this round with their labels, in selection order.
    pub added: Vec<(ComparisonPair, PreferenceLabel)>,
    pub model: RewardModel,
    pub metrics: Option<RoundMetrics>,
    /// Mean |p̂ − 0.5| over the pool and over the selected pairs under the
    /// model that made the selection.
    pub pool_mean_margin: f64,
    pub selected_mean_margin: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    /// Round 0 is the random bootstrap; rounds `1..=n` follow the strategy.
    pub rounds: Vec<RoundRecord>,
    pub labeled: LabeledDataset,
}

impl RunTrace {
    pub fn final_model(&self) -> &RewardModel {
        &self.rounds.last().expect("trace has at least the bootstrap round").model
    }

    pub fn strategy_rounds(&self) -> &[RoundRecord] {
        &self.rounds[1..]
    }
}

/// Hooks into the loop; every method has a no-op default.
pub trait LoopObserver {
    /// Called right before the strategy selects round `round`'s batch.
    fn before_select(
        &mut self,
        _round: usize,
        _model: &RewardModel,
        _past: &LabeledDataset,
        _pool: &[ComparisonPair],
    ) {
    }

    fn after_round(&mut self, _record: &RoundRecord, _pool: &[ComparisonPair]) {}
}

pub struct NoopObserver;

impl LoopObserver for NoopObserver {}

pub fn evaluate(model: &RewardModel, test: &TestPromptSet, best_of_n: Option<usize>) -> Result<RoundMetrics> {
    let model_rewards = test.model_rewards(model)?;
    let golden = test.golden();
    let sp = spearman_from_rewards(&model_rewards, &golden)?;
    let n = best_of_n.unwrap_or_else(|| test.min_generations());
    Ok(RoundMetrics {
        one_minus_spearman: sp.value,
        best_of_n: best_of_n_from_rewards(&model_rewards, &golden, n)?,
        skipped_prompts: sp.skipped,
    })
}

fn mean_margin(view: &PoolView, indices: impl Iterator<Item = usize>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for i in indices {
        s += (view.p_hat(i) - 0.5).abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs the loop. When `initial` is non-empty it replaces the random bootstrap
/// batch as `D_0`.
pub fn run_active_learning(
    initial: Option<LabeledDataset>,
    source: &mut dyn ItemSource,
    annotator: &Annotator,
    test: Option<&TestPromptSet>,
    config: &LoopConfig,
    observer: &mut dyn LoopObserver,
) -> Result<RunTrace> {
    config.validate()?;
    let c = config.batch_size;
    let mut labeled = initial.unwrap_or_default();
    let mut rounds = Vec::with_capacity(config.rounds + 1);

    // Round 0: bootstrap.
    let mut bootstrap = || -> Result<RoundRecord> {
        let items = source.items_for_round(0, derive_seed(config.seed, 0, stream::ITEMS))?;
        let pool = build_pool(&items, &config.pool, labeled.ids(), derive_seed(config.seed, 0, stream::POOL))?;
        let ids: Vec<PairId> = pool.iter().map(|p| p.id).collect();
        let selection = if labeled.is_empty() {
            strategies::select_random(&ids, c, derive_seed(config.seed, 0, stream::SELECT))?
        } else {
            SelectionResult {
                strategy: StrategyKind::Random,
                round: 0,
                selected: Vec::new(),
                scores: Vec::new(),
            }
        };
        let chosen: Vec<ComparisonPair> = selection.indices().iter().map(|&i| pool[i].clone()).collect();
        let labels = annotate(&chosen, annotator, derive_seed(config.seed, 0, stream::ANNOTATE))?;
        let added: Vec<_> = chosen.into_iter().zip(labels).collect();
        Ok(RoundRecord {
            round: 0,
            n_labels: 0,
            pool_size: pool.len(),
            selection,
            added,
            model: RewardModel::zeros(items.dim(), config.train.hidden),
            metrics: None,
            pool_mean_margin: 0.0,
            selected_mean_margin: 0.0,
        })
    };
    let mut record = bootstrap().map_err(|e| e.in_round(0))?;
    labeled.extend(record.added.iter().cloned()).map_err(|e| e.in_round(0))?;
    record.model = train(&labeled, &config.train, derive_seed(config.seed, 0, stream::TRAIN))
        .map_err(|e| e.in_round(0))?;
    record.n_labels = labeled.len();
    if let Some(test) = test {
        record.metrics = Some(evaluate(&record.model, test, config.best_of_n).map_err(|e| e.in_round(0))?);
    }
    rounds.push(record);

    for s in 1..=config.rounds {
        let record = run_round(s, &mut labeled, rounds.last().unwrap(), source, annotator, test, config, observer)
            .map_err(|e| e.in_round(s))?;
        rounds.push(record);
    }

    Ok(RunTrace {
        strategy: config.strategy,
        batch_size: c,
        rounds,
        labeled,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_round(
    s: usize,
    labeled: &mut LabeledDataset,
    previous: &RoundRecord,
    source: &mut dyn ItemSource,
    annotator: &Annotator,
    test: Option<&TestPromptSet>,
    config: &LoopConfig,
    observer: &mut dyn LoopObserver,
) -> Result<RoundRecord> {
    let c = config.batch_size;
    let model = &previous.model;
    let items = source.items_for_round(s, derive_seed(config.seed, s, stream::ITEMS))?;
    let pool = build_pool(&items, &config.pool, labeled.ids(), derive_seed(config.seed, s, stream::POOL))?;
    if pool.len() < c {
        return Err(Error::BudgetExceedsPool {
            budget: c,
            pool: pool.len(),
        });
    }
    observer.before_select(s, model, labeled, &pool);
    let view = PoolView::compute(model, &pool)?;
    let input = SelectionInput {
        model,
        pool: &pool,
        view: &view,
        past: labeled,
    };
    let selection = strategies::select(
        config.strategy,
        &input,
        c,
        &config.params,
        derive_seed(config.seed, s, stream::SELECT),
    )?
    .with_round(s);

    let picked = selection.indices();
    let seen: HashSet<usize> = picked.iter().copied().collect();
    if seen.len() != c {
        return Err(Error::InvalidConfig(format!(
            "strategy {} returned {} distinct pairs, expected {c}",
            config.strategy,
            seen.len()
        )));
    }
    let chosen: Vec<ComparisonPair> = picked.iter().map(|&i| pool[i].clone()).collect();
    let labels = annotate(&chosen, annotator, derive_seed(config.seed, s, stream::ANNOTATE))?;
    let added: Vec<_> = chosen.into_iter().zip(labels).collect();
    labeled.extend(added.iter().cloned())?;

    let new_model = train(labeled, &config.train, derive_seed(config.seed, s, stream::TRAIN))?;
    let metrics = match test {
        Some(t) => Some(evaluate(&new_model, t, config.best_of_n)?),
        None => None,
    };
    let record = RoundRecord {
        round: s,
        n_labels: labeled.len(),
        pool_size: pool.len(),
        pool_mean_margin: mean_margin(&view, 0..view.len()),
        selected_mean_margin: mean_margin(&view, picked.iter().copied()),
        selection,
        added,
        model: new_model,
        metrics,
    };
    observer.after_round(&record, &pool);
    Ok(record)
}
