//! Per-prompt Spearman correlation and best-of-N reward against golden rewards.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::RewardModel;

#[derive(Debug, Clone, PartialEq)]
pub struct TestPrompt {
    pub generations: Vec<DVector<f64>>,
    pub golden: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestPromptSet {
    pub prompts: Vec<TestPrompt>,
}

impl TestPromptSet {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.prompts.iter().enumerate() {
            if p.generations.len() != p.golden.len() {
                return Err(Error::InvalidConfig(format!(
                    "test prompt {i}: {} generations but {} golden rewards",
                    p.generations.len(),
                    p.golden.len()
                )));
            }
            if p.generations.len() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "test prompt {i} has fewer than 2 generations"
                )));
            }
            if p.golden.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "test prompt {i} has a non-finite golden reward"
                )));
            }
        }
        Ok(())
    }

    pub fn min_generations(&self) -> usize {
        self.prompts.iter().map(|p| p.generations.len()).min().unwrap_or(0)
    }

    /// Model rewards for every generation of every prompt.
    pub fn model_rewards(&self, model: &RewardModel) -> Result<Vec<Vec<f64>>> {
        self.prompts
            .par_iter()
            .map(|p| p.generations.iter().map(|x| model.reward(x.as_slice())).collect())
            .collect()
    }

    pub fn golden(&self) -> Vec<Vec<f64>> {
        self.prompts.iter().map(|p| p.golden.clone()).collect()
    }
}

/// 1-based ranks, ties sharing the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ as the Pearson correlation of average ranks; `None` when either
/// side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman inputs must have equal length");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanOutcome {
    /// Mean of `1 − ρ` over prompts where ρ is defined.
    pub value: f64,
    /// Prompts skipped because one side was constant.
    pub skipped: usize,
}

pub fn spearman_from_rewards(model: &[Vec<f64>], golden: &[Vec<f64>]) -> Result<SpearmanOutcome> {
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (m, g) in model.iter().zip(golden) {
        if m.len() < 2 {
            return Err(Error::InvalidConfig("test prompt has fewer than 2 generations".into()));
        }
        match spearman(m, g) {
            Some(rho) => {
                total += 1.0 - rho;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        tracing::warn!(skipped, "skipped test prompts with constant rewards");
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "spearman correlation undefined on every test prompt".into(),
        ));
    }
    Ok(SpearmanOutcome {
        value: total / used as f64,
        skipped,
    })
}

pub fn spearman_metric(model: &RewardModel, test: &TestPromptSet) -> Result<SpearmanOutcome> {
    spearman_from_rewards(&test.model_rewards(model)?, &test.golden())
}

pub fn best_of_n_from_rewards(model: &[Vec<f64>], golden: &[Vec<f64>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("best-of-N needs N >= 1".into()));
    }
    if model.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (m, g) in model.iter().zip(golden) {
        if n > m.len() {
            return Err(Error::InvalidConfig(format!(
                "best-of-N with N = {n} but a prompt has only {} generations",
                m.len()
            )));
        }
        let mut best = 0;
        for i in 1..n {
            if m[i] > m[best] {
                best = i;
            }
        }
        total += g[best];
    }
    Ok(total / model.len() as f64)
}

pub fn best_of_n(model: &RewardModel, test: &TestPromptSet, n: usize) -> Result<f64> {
    best_of_n_from_rewards(&test.model_rewards(model)?, &test.golden(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0, 0.0]), vec![2.5, 2.5, 4.0, 1.0]);
    }

    #[test]
    fn spearman_examples() {
        let g = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let out = spearman_from_rewards(&g, &g).unwrap();
        assert_eq!(out.value, 0.0);
        let neg = vec![vec![-1.0, -2.0, -3.0, -4.0]];
        assert_relative_eq!(spearman_from_rewards(&neg, &g).unwrap().value, 2.0);
        let swapped = vec![vec![1.0, 2.0, 4.0, 3.0]];
        assert_relative_eq!(spearman_from_rewards(&swapped, &g).unwrap().value, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn constant_prompts_are_skipped_and_counted() {
        let model = vec![vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]];
        let golden = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let out = spearman_from_rewards(&model, &golden).unwrap();
        assert_eq!(out.skipped, 1);
        assert_eq!(out.value, 0.0);
        assert!(spearman_from_rewards(&model[..1], &golden[..1]).is_err());
    }

    #[test]
    fn best_of_n_examples() {
        let model = vec![vec![0.1, 0.9, 0.5], vec![2.0, 2.0, 1.0]];
        let golden = vec![vec![1.0, 5.0, 3.0], vec![-1.0, 4.0, 0.0]];
        assert_eq!(best_of_n_from_rewards(&model, &golden, 1).unwrap(), 0.0);
        // Ties resolve to the lowest index.
        assert_eq!(best_of_n_from_rewards(&model, &golden, 3).unwrap(), 2.0);
        assert_eq!(best_of_n_from_rewards(&golden, &golden, 3).unwrap(), 4.5);
        assert!(best_of_n_from_rewards(&model, &golden, 4).is_err());
    }
}
