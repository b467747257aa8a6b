//! Active selection of pairwise preference comparisons for Bradley-Terry
//! reward models over fixed embeddings.
//!
//! The crate covers the reward model and its training ([`model`], [`train`]),
//! Fisher-information designs ([`fisher`]), the baseline query strategies
//! ([`strategies`]), the annotation loop ([`active`]), evaluation metrics
//! ([`metrics`]) and synthetic worlds plus file formats ([`worlds`],
//! [`dataset`], [`artifact`]).

pub mod active;
pub mod annotate;
pub mod artifact;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod experiment2d;
pub mod error;
pub mod features;
pub mod fisher;
pub mod linalg;
pub mod metrics;
pub mod mle;
pub mod model;
pub mod pool;
pub mod selection;
pub mod strategies;
pub mod train;
pub mod types;
pub mod worlds;

pub use error::{Error, FormatError, Result};
pub use features::PoolView;
pub use model::RewardModel;
pub use selection::{SelectionResult, StrategyKind};
pub use train::TrainConfig;
pub use types::{ComparisonPair, ItemMeta, LabeledDataset, PairId, PreferenceLabel};
