//! Selection strategies and the name-based dispatcher.

pub mod bald;
pub mod coreset;
pub mod scores;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::PoolView;
use crate::fisher::{
    assemble_fi, select_dopt_view, select_xtx_view, DesignConfig, DesignMode, FisherInfo,
};
use crate::model::RewardModel;
use crate::selection::{SelectionResult, StrategyKind};
use crate::types::{ComparisonPair, LabeledDataset};

pub use bald::{bald_scores, fit_laplace, greedy_batchbald, select_batchbald, BaldConfig, LaplacePosterior};
pub use coreset::{coreset_sensitivities, kmeans, CoresetConfig};
pub use scores::{
    bernoulli_entropy, entropy_scores, maxdiff_scores, score_entropy, score_maxdiff,
    select_by_scores, select_random,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyParams {
    pub design: DesignConfig,
    pub coreset: CoresetConfig,
    pub bald: BaldConfig,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.coreset.validate()
    }
}

/// Everything a strategy may look at when picking round `s`: the previous
/// model, the data labeled so far and the round's pool.
pub struct SelectionInput<'a> {
    pub model: &'a RewardModel,
    pub pool: &'a [ComparisonPair],
    pub view: &'a PoolView,
    pub past: &'a LabeledDataset,
}

/// Past data seen through the current model's last layer.
pub fn past_view(model: &RewardModel, past: &LabeledDataset) -> Result<PoolView> {
    let pairs: Vec<ComparisonPair> = past.pairs().cloned().collect();
    PoolView::compute(model, &pairs)
}

pub fn select(
    kind: StrategyKind,
    input: &SelectionInput<'_>,
    c: usize,
    params: &StrategyParams,
    seed: u64,
) -> Result<SelectionResult> {
    params.validate()?;
    let view = input.view;
    let dim = view.feature_dim();
    match kind {
        StrategyKind::Random => select_random(view.ids(), c, seed),
        StrategyKind::Entropy => select_by_scores(kind, view.ids(), entropy_scores(view), c),
        StrategyKind::Maxdiff => select_by_scores(kind, view.ids(), maxdiff_scores(view), c),
        StrategyKind::Xtx => select_xtx_view(view, c, &params.design, seed),
        StrategyKind::Dopt => {
            let design = DesignConfig {
                mode: DesignMode::Dopt,
                ..params.design.clone()
            };
            select_dopt_view(view, c, &design, None, seed)
        }
        StrategyKind::PaDopt => {
            let design = DesignConfig {
                mode: DesignMode::PaDopt,
                ..params.design.clone()
            };
            let past: Option<FisherInfo> = if input.past.is_empty() {
                None
            } else {
                let pv = past_view(input.model, input.past)?;
                Some(assemble_fi(dim, &pv.contributions(), None, f64::INFINITY)?)
            };
            select_dopt_view(view, c, &design, past.as_ref(), seed)
        }
        StrategyKind::Coreset => {
            let mut points = view.diffs();
            if !input.past.is_empty() {
                points.extend(past_view(input.model, input.past)?.diffs());
            }
            let sens = coreset_sensitivities(&points, view.len(), &params.coreset, seed)?;
            select_by_scores(kind, view.ids(), sens, c)
        }
        StrategyKind::Batchbald => {
            let past = if input.past.is_empty() {
                Vec::new()
            } else {
                past_view(input.model, input.past)?.contributions()
            };
            let posterior = fit_laplace(
                &input.model.head(),
                &past,
                params.design.prior_variance,
                params.design.jitter,
                params.bald.samples,
            )?;
            select_batchbald(&posterior, view, c, &params.bald, seed)
        }
    }
}
