//! TOML experiment configuration: one run per seed, optionally swept over
//! strategies, batch sizes and pooling modes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::active::{derive_seed, run_active_learning, stream, FixedItems, LoopConfig, NoopObserver, RunTrace};
use crate::annotate::Annotator;
use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::experiment2d::{run_2d_experiment, RoundSnapshot, TwoDConfig};
use crate::metrics::TestPromptSet;
use crate::pool::{ItemSet, PoolConfig};
use crate::selection::StrategyKind;
use crate::strategies::StrategyParams;
use crate::train::TrainConfig;
use crate::worlds::{BimodalWorld2D, PlantedLinearWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedLinearSpec {
    pub dim: usize,
    pub prompts: usize,
    pub responses: usize,
    pub test_prompts: usize,
    pub test_generations: usize,
    /// Seeds `β*`, the candidate embeddings and the test set; the run seeds
    /// only drive pooling, selection, annotation and training.
    pub world_seed: u64,
}

impl Default for PlantedLinearSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            prompts: 100,
            responses: 10,
            test_prompts: 50,
            test_generations: 50,
            world_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bimodal2dSpec {
    pub points_per_round: usize,
    pub test_side: usize,
    pub test_extent: f64,
    pub heatmap_side: usize,
    pub heatmap_extent: f64,
}

impl Default for Bimodal2dSpec {
    fn default() -> Self {
        let d = TwoDConfig::default();
        Self {
            points_per_round: d.points_per_round,
            test_side: d.test_side,
            test_extent: d.test_extent,
            heatmap_side: d.heatmap_side,
            heatmap_extent: d.heatmap_extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Candidate embeddings (binary or `.jsonl`) with golden scores.
    pub train: PathBuf,
    /// Optional held-out test prompts with golden scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldConfig {
    PlantedLinear(PlantedLinearSpec),
    #[serde(rename = "bimodal_2d")]
    Bimodal2d(Bimodal2dSpec),
    Dataset(DatasetSpec),
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig::PlantedLinear(PlantedLinearSpec::default())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorConfig {
    #[default]
    GoldenBernoulli,
    GoldenDeterministic,
}

impl AnnotatorConfig {
    pub fn annotator(self) -> Annotator {
        match self {
            AnnotatorConfig::GoldenBernoulli => Annotator::GoldenBernoulli,
            AnnotatorConfig::GoldenDeterministic => Annotator::GoldenDeterministic,
        }
    }
}

/// Sweep axes; an omitted axis holds the top-level value fixed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<StrategyKind>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub batch_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cross_prompt: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// N for best-of-N; defaults to every generation of each test prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_of_n: Option<usize>,
    #[serde(default)]
    pub annotator: AnnotatorConfig,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub pool: PoolConfig,
    /// Defaults to the general preset, or the small-MLP preset for the 2D world.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub params: StrategyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory relative paths are resolved against; set by [`Self::load`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// One cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub cross_prompt: bool,
    pub seed: u64,
}

impl RunSpec {
    pub fn pooling(&self) -> &'static str {
        if self.cross_prompt {
            "cross_prompt"
        } else {
            "in_prompt"
        }
    }

    /// Configuration directory name, shared by all seeds of the cell.
    pub fn cell_name(&self) -> String {
        format!("{}_c{}_{}", self.strategy, self.batch_size, self.pooling())
    }
}

/// Result of executing one seed.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub snapshots: Option<Vec<RoundSnapshot>>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(e.to_string())
}

fn or_single<T>(v: Vec<T>, d: T) -> Vec<T> {
    if v.is_empty() {
        vec![d]
    } else {
        v
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(config_err)?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    /// Parses and validates a config file; relative paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        match (&self.train, &self.world) {
            (Some(t), _) => t.clone(),
            (None, WorldConfig::Bimodal2d(_)) => TrainConfig::world_2d(),
            (None, _) => TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        match &self.world {
            WorldConfig::PlantedLinear(w) => {
                if w.dim == 0 || w.prompts == 0 || w.responses < 2 {
                    return Err(Error::InvalidConfig(
                        "planted_linear needs dim >= 1, prompts >= 1, responses >= 2".into(),
                    ));
                }
                if w.test_prompts == 0 || w.test_generations < 2 {
                    return Err(Error::InvalidConfig(
                        "planted_linear needs test_prompts >= 1 and test_generations >= 2".into(),
                    ));
                }
            }
            WorldConfig::Bimodal2d(w) => {
                if w.points_per_round < 2 || w.test_side < 2 || w.heatmap_side < 1 {
                    return Err(Error::InvalidConfig(
                        "bimodal_2d needs points_per_round >= 2, test_side >= 2, heatmap_side >= 1".into(),
                    ));
                }
            }
            WorldConfig::Dataset(d) => {
                for p in std::iter::once(&d.train).chain(d.test.as_ref()) {
                    let p = self.resolve(p);
                    if !p.is_file() {
                        return Err(Error::InvalidConfig(format!("dataset file {} does not exist", p.display())));
                    }
                }
            }
        }
        if let (Some(n), WorldConfig::PlantedLinear(w)) = (self.best_of_n, &self.world) {
            if n == 0 || n > w.test_generations {
                return Err(Error::InvalidConfig(format!(
                    "best_of_n {n} must be in 1..={}",
                    w.test_generations
                )));
            }
        }
        for spec in self.runs() {
            self.loop_config(&spec).validate()?;
        }
        Ok(())
    }

    /// Every (strategy, batch size, pooling, seed) combination, seeds innermost.
    pub fn runs(&self) -> Vec<RunSpec> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let strategies = or_single(sweep.strategies, self.strategy);
        let batch_sizes = or_single(sweep.batch_sizes, self.batch_size);
        let pooling = or_single(sweep.cross_prompt, self.pool.cross_prompt);
        let mut out = Vec::new();
        for &strategy in &strategies {
            for &batch_size in &batch_sizes {
                for &cross_prompt in &pooling {
                    for &seed in &self.seeds {
                        out.push(RunSpec {
                            strategy,
                            batch_size,
                            cross_prompt,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    /// Single-run configuration for a sweep cell, suitable as a snapshot.
    pub fn for_run(&self, spec: &RunSpec) -> Self {
        let mut c = self.clone();
        c.strategy = spec.strategy;
        c.batch_size = spec.batch_size;
        c.pool.cross_prompt = spec.cross_prompt;
        c.seeds = vec![spec.seed];
        c.sweep = None;
        // The snapshot lives elsewhere, so relative dataset paths must not
        // depend on the original config location.
        if let WorldConfig::Dataset(d) = &mut c.world {
            d.train = self.resolve(&d.train);
            d.test = d.test.as_ref().map(|p| self.resolve(p));
        }
        c
    }

    fn two_d_config(&self, w: &Bimodal2dSpec, spec: &RunSpec) -> TwoDConfig {
        TwoDConfig {
            rounds: self.rounds,
            points_per_round: w.points_per_round,
            batch_size: spec.batch_size,
            pool_cap: self.pool.pool_cap,
            test_side: w.test_side,
            test_extent: w.test_extent,
            heatmap_side: w.heatmap_side,
            heatmap_extent: w.heatmap_extent,
            train: self.train_config(),
            params: self.params.clone(),
        }
    }

    pub fn loop_config(&self, spec: &RunSpec) -> LoopConfig {
        if let WorldConfig::Bimodal2d(w) = &self.world {
            return self.two_d_config(w, spec).loop_config(spec.strategy, spec.seed);
        }
        let mut pool = self.pool.clone();
        pool.cross_prompt = spec.cross_prompt;
        LoopConfig {
            strategy: spec.strategy,
            batch_size: spec.batch_size,
            rounds: self.rounds,
            pool,
            train: self.train_config(),
            params: self.params.clone(),
            seed: spec.seed,
            best_of_n: self.best_of_n,
        }
    }

    /// Runs one sweep cell end to end.
    pub fn execute(&self, spec: &RunSpec) -> Result<RunOutput> {
        let annotator = self.annotator.annotator();
        match &self.world {
            WorldConfig::Bimodal2d(w) => {
                if self.annotator != AnnotatorConfig::GoldenBernoulli {
                    tracing::warn!("bimodal_2d always samples labels from the BT law");
                }
                let run = run_2d_experiment(spec.strategy, spec.seed, &self.two_d_config(w, spec))?;
                Ok(RunOutput {
                    trace: run.trace,
                    snapshots: Some(run.snapshots),
                })
            }
            _ => {
                let (items, test) = self.load_world(spec.seed)?;
                self.execute_fixed(spec, FixedItems(items), test.as_ref(), &annotator)
            }
        }
    }

    /// Item set and optional held-out test set of the configured world. The
    /// 2D world contributes its round-0 draw and the evaluation grid.
    pub fn load_world(&self, seed: u64) -> Result<(ItemSet, Option<TestPromptSet>)> {
        match &self.world {
            WorldConfig::PlantedLinear(w) => {
                let world = PlantedLinearWorld::new(w.dim, w.world_seed);
                let items = world.items(w.prompts, w.responses, w.world_seed ^ 0x17)?;
                let test = world.test_set(w.test_prompts, w.test_generations, w.world_seed ^ 0x2b);
                Ok((items, Some(test)))
            }
            WorldConfig::Bimodal2d(w) => {
                let world = BimodalWorld2D {
                    points_per_round: w.points_per_round,
                };
                let items = world.sample_round(0, derive_seed(seed, 0, stream::ITEMS))?;
                Ok((items, Some(BimodalWorld2D::grid_test_set(w.test_side, w.test_extent))))
            }
            WorldConfig::Dataset(d) => {
                let items = EmbeddingDataset::load_any(&self.resolve(&d.train))?.to_item_set()?;
                let test = match &d.test {
                    Some(p) => Some(EmbeddingDataset::load_any(&self.resolve(p))?.to_test_set()?),
                    None => None,
                };
                Ok((items, test))
            }
        }
    }

    fn execute_fixed(
        &self,
        spec: &RunSpec,
        mut items: FixedItems,
        test: Option<&TestPromptSet>,
        annotator: &Annotator,
    ) -> Result<RunOutput> {
        let trace = run_active_learning(
            None,
            &mut items,
            annotator,
            test,
            &self.loop_config(spec),
            &mut NoopObserver,
        )?;
        Ok(RunOutput { trace, snapshots: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
strategy = "random"
batch_size = 20
rounds = 2
seeds = [1, 2]

[world]
kind = "planted_linear"
dim = 3
prompts = 10
responses = 5

[pool]
prompts_per_round = 0
"#;

    #[test]
    fn parse_and_round_trip() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        c.validate().unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("dim = 3", "dim = 3\ndimm = 4");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("rounds = 2", "rounds = 2\nround = 2");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn invalid_strategy_rejected() {
        let bad = MINIMAL.replace("\"random\"", "\"bogus\"");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn sweep_cartesian_product() {
        let text = format!("{MINIMAL}\n[sweep]\nstrategies = [\"random\", \"entropy\"]\nbatch_sizes = [5, 10]\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let runs = c.runs();
        assert_eq!(runs.len(), 8);
        assert_eq!(runs[1].seed, 2);
        assert_eq!(c.for_run(&runs[3]).sweep, None);
    }

    #[test]
    fn empty_seeds_invalid() {
        let c = ExperimentConfig::from_toml_str(&MINIMAL.replace("[1, 2]", "[]")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_dataset_file_invalid() {
        let text = "strategy = \"dopt\"\nbatch_size = 2\nrounds = 1\nseeds = [0]\n[world]\nkind = \"dataset\"\ntrain = \"/nonexistent/x.bin\"\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(c.validate().is_err());
    }
}
