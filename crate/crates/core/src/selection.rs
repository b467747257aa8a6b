//! Strategy names, selection results and the top-c rule.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PairId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Entropy,
    Maxdiff,
    Xtx,
    Coreset,
    Batchbald,
    Dopt,
    PaDopt,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::Maxdiff,
        StrategyKind::Xtx,
        StrategyKind::Coreset,
        StrategyKind::Batchbald,
        StrategyKind::Dopt,
        StrategyKind::PaDopt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Entropy => "entropy",
            StrategyKind::Maxdiff => "maxdiff",
            StrategyKind::Xtx => "xtx",
            StrategyKind::Coreset => "coreset",
            StrategyKind::Batchbald => "batchbald",
            StrategyKind::Dopt => "dopt",
            StrategyKind::PaDopt => "pa_dopt",
        }
    }

    /// Whether selection reads the current reward model.
    pub fn uses_model(self) -> bool {
        !matches!(self, StrategyKind::Random)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "random" => StrategyKind::Random,
            "entropy" => StrategyKind::Entropy,
            "maxdiff" | "max_diff" => StrategyKind::Maxdiff,
            "xtx" | "det_xtx" | "det(xtx)" => StrategyKind::Xtx,
            "coreset" => StrategyKind::Coreset,
            "batchbald" | "batch_bald" => StrategyKind::Batchbald,
            "dopt" | "d_opt" => StrategyKind::Dopt,
            "pa_dopt" | "pa_d_opt" | "padopt" => StrategyKind::PaDopt,
            _ => return Err(Error::UnknownStrategy(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPair {
    pub pair_id: PairId,
    pub pool_index: usize,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub strategy: StrategyKind,
    pub round: usize,
    /// Chosen pairs in rank order.
    pub selected: Vec<SelectedPair>,
    /// Score of every pool entry, indexed like the pool.
    pub scores: Vec<f64>,
}

/// One line of a selection record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub pair_id: PairId,
    pub score: f64,
    pub rank: usize,
    pub strategy: StrategyKind,
    pub round: usize,
}

impl SelectionResult {
    pub(crate) fn from_ranked(
        strategy: StrategyKind,
        ids: &[PairId],
        ranked: &[usize],
        scores: Vec<f64>,
    ) -> Self {
        let selected = ranked
            .iter()
            .enumerate()
            .map(|(rank, &i)| SelectedPair {
                pair_id: ids[i],
                pool_index: i,
                score: scores[i],
                rank,
            })
            .collect();
        Self {
            strategy,
            round: 0,
            selected,
            scores,
        }
    }

    pub fn with_round(mut self, round: usize) -> Self {
        self.round = round;
        self
    }

    pub fn pair_ids(&self) -> Vec<PairId> {
        self.selected.iter().map(|s| s.pair_id).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.pool_index).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = SelectionRecord> + '_ {
        self.selected.iter().map(|s| SelectionRecord {
            pair_id: s.pair_id,
            score: s.score,
            rank: s.rank,
            strategy: self.strategy,
            round: self.round,
        })
    }

    /// Writes one JSON object per selected pair.
    pub fn write_records<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub(crate) fn check_budget(c: usize, pool: usize) -> Result<()> {
    if pool == 0 {
        return Err(Error::EmptyPool);
    }
    if c == 0 {
        return Err(Error::ZeroBudget);
    }
    if c > pool {
        return Err(Error::BudgetExceedsPool { budget: c, pool });
    }
    Ok(())
}

/// Descending by score; NaN sorts last.
fn score_order(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => b.total_cmp(&a),
    }
}

/// Indices of the `c` largest scores, ties broken by ascending index.
pub fn select_topc(scores: &[f64], c: usize) -> Result<Vec<usize>> {
    if c > scores.len() {
        return Err(Error::BudgetExceedsPool {
            budget: c,
            pool: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| score_order(scores[a], scores[b]).then(a.cmp(&b)));
    idx.truncate(c);
    Ok(idx)
}

/// Indices of the `c` largest scores, ties broken by ascending pair id.
pub fn select_topc_by_id(scores: &[f64], ids: &[PairId], c: usize) -> Result<Vec<usize>> {
    if c > scores.len() {
        return Err(Error::BudgetExceedsPool {
            budget: c,
            pool: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| score_order(scores[a], scores[b]).then(ids[a].cmp(&ids[b])));
    idx.truncate(c);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topc_examples() {
        assert_eq!(select_topc(&[1.0, 3.0, 2.0], 2).unwrap(), vec![1, 2]);
        assert_eq!(select_topc(&[5.0; 6], 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            select_topc(&[1.0], 2),
            Err(Error::BudgetExceedsPool { budget: 2, pool: 1 })
        ));
        assert_eq!(select_topc(&[f64::NAN, 0.0, -1.0], 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn topc_by_id_breaks_ties_on_id() {
        let ids = [PairId(9), PairId(3), PairId(5)];
        assert_eq!(select_topc_by_id(&[1.0, 1.0, 1.0], &ids, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
        assert_eq!("D-opt".parse::<StrategyKind>().unwrap(), StrategyKind::Dopt);
        assert!("bogus".parse::<StrategyKind>().is_err());
    }
}
