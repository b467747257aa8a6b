//! Two-dimensional bimodal illustration: four rounds of 200 comparisons
//! selected from pools over 1000 fresh standard-normal points.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::active::{run_active_learning, ItemSource, LoopConfig, LoopObserver, RunTrace};
use crate::annotate::Annotator;
use crate::error::Result;
use crate::model::RewardModel;
use crate::pool::{ItemSet, PoolConfig};
use crate::selection::StrategyKind;
use crate::strategies::StrategyParams;
use crate::train::TrainConfig;
use crate::types::{ComparisonPair, LabeledDataset};
use crate::worlds::{grid_points, BimodalWorld2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoDConfig {
    pub rounds: usize,
    pub points_per_round: usize,
    pub batch_size: usize,
    pub pool_cap: usize,
    /// Side length of the evaluation grid over `[−test_extent, test_extent]²`.
    pub test_side: usize,
    pub test_extent: f64,
    /// Side length of the reward heat-map grid over `[−heatmap_extent, heatmap_extent]²`.
    pub heatmap_side: usize,
    pub heatmap_extent: f64,
    pub train: TrainConfig,
    pub params: StrategyParams,
}

impl Default for TwoDConfig {
    fn default() -> Self {
        Self {
            rounds: 4,
            points_per_round: 1000,
            batch_size: 200,
            pool_cap: 20_000,
            test_side: 31,
            test_extent: 3.0,
            heatmap_side: 41,
            heatmap_extent: 4.0,
            train: TrainConfig::world_2d(),
            params: StrategyParams::default(),
        }
    }
}

impl TwoDConfig {
    pub fn loop_config(&self, strategy: StrategyKind, seed: u64) -> LoopConfig {
        LoopConfig {
            strategy,
            batch_size: self.batch_size,
            rounds: self.rounds,
            pool: PoolConfig {
                prompts_per_round: 0,
                responses_per_prompt: self.points_per_round,
                cross_prompt: false,
                pool_cap: self.pool_cap,
            },
            train: self.train.clone(),
            params: self.params.clone(),
            seed,
            best_of_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub side: usize,
    pub extent: f64,
    /// Model rewards, row-major with y outer.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn of_model(model: &RewardModel, side: usize, extent: f64) -> Result<Self> {
        let values = grid_points(side, extent)
            .iter()
            .map(|p| model.reward(p.as_slice()))
            .collect::<Result<_>>()?;
        Ok(Self { side, extent, values })
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        grid_points(self.side, self.extent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSnapshot {
    pub round: usize,
    pub candidate_count: usize,
    pub pool_size: usize,
    /// Reward surface of the model that made this round's selection.
    pub heatmap: Heatmap,
    pub selected: Vec<[[f64; 2]; 2]>,
    pub pool_mean_margin: f64,
    pub selected_mean_margin: f64,
}

#[derive(Debug, Clone)]
pub struct TwoDRun {
    pub trace: RunTrace,
    pub snapshots: Vec<RoundSnapshot>,
}

struct CountingSource {
    world: BimodalWorld2D,
    counts: Vec<usize>,
}

impl ItemSource for CountingSource {
    fn items_for_round(&mut self, round: usize, seed: u64) -> Result<ItemSet> {
        let items = self.world.items_for_round(round, seed)?;
        if self.counts.len() <= round {
            self.counts.resize(round + 1, 0);
        }
        self.counts[round] = items.len();
        Ok(items)
    }
}

struct HeatmapObserver {
    side: usize,
    extent: f64,
    maps: Vec<(usize, Result<Heatmap>)>,
}

impl LoopObserver for HeatmapObserver {
    fn before_select(&mut self, round: usize, model: &RewardModel, _: &LabeledDataset, _: &[ComparisonPair]) {
        self.maps.push((round, Heatmap::of_model(model, self.side, self.extent)));
    }
}

pub fn run_2d_experiment(strategy: StrategyKind, seed: u64, config: &TwoDConfig) -> Result<TwoDRun> {
    let mut source = CountingSource {
        world: BimodalWorld2D {
            points_per_round: config.points_per_round,
        },
        counts: Vec::new(),
    };
    let mut observer = HeatmapObserver {
        side: config.heatmap_side,
        extent: config.heatmap_extent,
        maps: Vec::new(),
    };
    let test = BimodalWorld2D::grid_test_set(config.test_side, config.test_extent);
    let trace = run_active_learning(
        None,
        &mut source,
        &Annotator::GoldenBernoulli,
        Some(&test),
        &config.loop_config(strategy, seed),
        &mut observer,
    )?;

    let mut snapshots = Vec::with_capacity(config.rounds);
    for (record, (round, heatmap)) in trace.strategy_rounds().iter().zip(observer.maps) {
        debug_assert_eq!(record.round, round);
        snapshots.push(RoundSnapshot {
            round,
            candidate_count: source.counts[round],
            pool_size: record.pool_size,
            heatmap: heatmap?,
            selected: record
                .added
                .iter()
                .map(|(p, _)| [[p.left[0], p.left[1]], [p.right[0], p.right[1]]])
                .collect(),
            pool_mean_margin: record.pool_mean_margin,
            selected_mean_margin: record.selected_mean_margin,
        });
    }
    Ok(TwoDRun { trace, snapshots })
}
