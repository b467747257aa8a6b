//! Comparison pairs, preference labels and labeled datasets.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairId(pub u64);

impl PairId {
    /// Canonical id for the unordered pair of two item ids. Orientation does not
    /// matter, so a pair can never be offered twice with sides swapped.
    pub fn from_items(a: u64, b: u64) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        debug_assert!(hi < (1 << 32), "item ids must fit in 32 bits");
        PairId((lo << 32) | hi)
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Display and provenance payload for one side of a comparison.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item_id: u64,
    pub prompt_id: u32,
    pub response_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Ground-truth reward used by simulated annotators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPair {
    pub id: PairId,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
    pub left_meta: Option<ItemMeta>,
    pub right_meta: Option<ItemMeta>,
    pub cross_prompt: bool,
}

impl ComparisonPair {
    pub fn new(id: PairId, left: DVector<f64>, right: DVector<f64>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                expected: left.len(),
                actual: right.len(),
            });
        }
        if left.iter().chain(right.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pair {id} has non-finite embedding entries"
            )));
        }
        Ok(Self {
            id,
            left,
            right,
            left_meta: None,
            right_meta: None,
            cross_prompt: false,
        })
    }

    pub fn with_meta(mut self, left: ItemMeta, right: ItemMeta) -> Self {
        self.cross_prompt = left.prompt_id != right.prompt_id;
        self.left_meta = Some(left);
        self.right_meta = Some(right);
        self
    }

    pub fn dim(&self) -> usize {
        self.left.len()
    }

    pub fn swapped(&self) -> Self {
        Self {
            id: self.id,
            left: self.right.clone(),
            right: self.left.clone(),
            left_meta: self.right_meta.clone(),
            right_meta: self.left_meta.clone(),
            cross_prompt: self.cross_prompt,
        }
    }

    pub fn golden_rewards(&self) -> Option<(f64, f64)> {
        let l = self.left_meta.as_ref()?.golden?;
        let r = self.right_meta.as_ref()?.golden?;
        Some((l, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorKind {
    Simulated,
    Human,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceLabel {
    pub pair_id: PairId,
    /// `true` when the left item is preferred.
    pub left_preferred: bool,
    pub annotator: AnnotatorKind,
    /// Seconds since the Unix epoch; zero for simulated labels so traces stay
    /// byte-stable.
    pub timestamp: u64,
}

impl PreferenceLabel {
    pub fn outcome(&self) -> f64 {
        if self.left_preferred {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    dim: Option<usize>,
    entries: Vec<(ComparisonPair, PreferenceLabel)>,
    ids: HashSet<PairId>,
}

impl LabeledDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (ComparisonPair, PreferenceLabel)>,
    ) -> Result<Self> {
        let mut data = Self::new();
        for (pair, label) in entries {
            data.push(pair, label)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, pair: ComparisonPair, label: PreferenceLabel) -> Result<()> {
        if label.pair_id != pair.id {
            return Err(Error::InvalidConfig(format!(
                "label for pair {} attached to pair {}",
                label.pair_id, pair.id
            )));
        }
        match self.dim {
            Some(d) if d != pair.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: pair.dim(),
                })
            }
            _ => self.dim = Some(pair.dim()),
        }
        if !self.ids.insert(pair.id) {
            return Err(Error::DuplicatePair(pair.id));
        }
        self.entries.push((pair, label));
        Ok(())
    }

    pub fn extend(
        &mut self,
        entries: impl IntoIterator<Item = (ComparisonPair, PreferenceLabel)>,
    ) -> Result<()> {
        for (pair, label) in entries {
            self.push(pair, label)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn contains(&self, id: PairId) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> &HashSet<PairId> {
        &self.ids
    }

    pub fn entries(&self) -> &[(ComparisonPair, PreferenceLabel)] {
        &self.entries
    }

    pub fn pairs(&self) -> impl Iterator<Item = &ComparisonPair> {
        self.entries.iter().map(|(p, _)| p)
    }
}
