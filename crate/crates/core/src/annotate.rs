//! Simulated and imported annotators.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::types::{AnnotatorKind, ComparisonPair, PairId, PreferenceLabel};

#[derive(Debug, Clone, PartialEq)]
pub enum Annotator {
    /// Samples each label from the BT law under the golden rewards.
    GoldenBernoulli,
    /// Prefers the side with the strictly larger golden reward.
    GoldenDeterministic,
    /// Labels arrive asynchronously through an annotation session.
    HumanSession,
    /// Labels looked up from a previously collected table.
    Imported(HashMap<PairId, bool>),
}

impl Annotator {
    pub fn name(&self) -> &'static str {
        match self {
            Annotator::GoldenBernoulli => "golden_bernoulli",
            Annotator::GoldenDeterministic => "golden_deterministic",
            Annotator::HumanSession => "human_session",
            Annotator::Imported(_) => "imported",
        }
    }
}

pub fn annotate(pairs: &[ComparisonPair], annotator: &Annotator, seed: u64) -> Result<Vec<PreferenceLabel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs
        .iter()
        .map(|pair| {
            let (left_preferred, kind) = match annotator {
                Annotator::GoldenBernoulli => {
                    let (l, r) = pair.golden_rewards().ok_or(Error::MissingOracle(pair.id))?;
                    (rng.random::<f64>() < sigmoid(l - r), AnnotatorKind::Simulated)
                }
                Annotator::GoldenDeterministic => {
                    let (l, r) = pair.golden_rewards().ok_or(Error::MissingOracle(pair.id))?;
                    (l > r, AnnotatorKind::Simulated)
                }
                Annotator::Imported(table) => (
                    *table.get(&pair.id).ok_or(Error::MissingOracle(pair.id))?,
                    AnnotatorKind::Imported,
                ),
                Annotator::HumanSession => return Err(Error::AsyncAnnotator("human_session")),
            };
            Ok(PreferenceLabel {
                pair_id: pair.id,
                left_preferred,
                annotator: kind,
                timestamp: 0,
            })
        })
        .collect()
}
