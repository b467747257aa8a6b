//! Candidate items and comparison-pool construction.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ComparisonPair, ItemMeta, PairId};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub embedding: DVector<f64>,
    pub meta: ItemMeta,
}

/// Prompt/response items that pools are drawn from. Item ids must be unique
/// and below 2³².
#[derive(Debug, Clone, Default)]
pub struct ItemSet {
    dim: usize,
    items: Vec<Item>,
    by_prompt: BTreeMap<u32, Vec<usize>>,
}

impl ItemSet {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let dim = items.first().map(|i| i.embedding.len()).unwrap_or(0);
        let mut by_prompt: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for (idx, item) in items.iter().enumerate() {
            if item.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: item.embedding.len(),
                });
            }
            if item.meta.item_id >= 1 << 32 {
                return Err(Error::InvalidConfig(format!(
                    "item id {} does not fit in 32 bits",
                    item.meta.item_id
                )));
            }
            if !seen.insert(item.meta.item_id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate item id {}",
                    item.meta.item_id
                )));
            }
            by_prompt.entry(item.meta.prompt_id).or_default().push(idx);
        }
        Ok(Self {
            dim,
            items,
            by_prompt,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn prompt_count(&self) -> usize {
        self.by_prompt.len()
    }

    pub fn make_pair(&self, a: usize, b: usize) -> ComparisonPair {
        let (l, r) = (&self.items[a], &self.items[b]);
        ComparisonPair {
            id: PairId::from_items(l.meta.item_id, r.meta.item_id),
            left: l.embedding.clone(),
            right: r.embedding.clone(),
            left_meta: Some(l.meta.clone()),
            right_meta: Some(r.meta.clone()),
            cross_prompt: l.meta.prompt_id != r.meta.prompt_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    /// Prompts sampled per round (without replacement within the round);
    /// 0 means every prompt.
    pub prompts_per_round: usize,
    /// Responses used per sampled prompt.
    pub responses_per_prompt: usize,
    pub cross_prompt: bool,
    pub pool_cap: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            prompts_per_round: 500,
            responses_per_prompt: 10,
            cross_prompt: false,
            pool_cap: 20_000,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_cap < 1 {
            return Err(Error::InvalidConfig("pool.pool_cap must be >= 1".into()));
        }
        if self.responses_per_prompt < 2 {
            return Err(Error::InvalidConfig(
                "pool.responses_per_prompt must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Builds one round's candidate pool.
///
/// In-prompt mode emits every unordered response pair of every sampled prompt;
/// cross-prompt mode draws uniform unordered pairs over all sampled items. Both
/// cap the pool at `pool_cap` by seeded subsampling, skip pairs in `exclude`
/// and orient each pair by a seeded coin flip.
pub fn build_pool(
    items: &ItemSet,
    config: &PoolConfig,
    exclude: &HashSet<PairId>,
    seed: u64,
) -> Result<Vec<ComparisonPair>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let prompts: Vec<u32> = items.by_prompt.keys().copied().collect();
    let chosen_prompts: Vec<u32> =
        if config.prompts_per_round == 0 || config.prompts_per_round >= prompts.len() {
            prompts
        } else {
            let mut picks = index::sample(&mut rng, prompts.len(), config.prompts_per_round).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| prompts[i]).collect()
        };

    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(chosen_prompts.len());
    for p in chosen_prompts {
        let responses = &items.by_prompt[&p];
        if responses.len() < 2 {
            return Err(Error::InsufficientResponses {
                prompt: p,
                count: responses.len(),
            });
        }
        if responses.len() > config.responses_per_prompt {
            let mut picks =
                index::sample(&mut rng, responses.len(), config.responses_per_prompt).into_vec();
            picks.sort_unstable();
            groups.push(picks.into_iter().map(|i| responses[i]).collect());
        } else {
            groups.push(responses.clone());
        }
    }

    let mut keys: Vec<(usize, usize)> = if config.cross_prompt {
        let flat: Vec<usize> = groups.into_iter().flatten().collect();
        sample_cross_pairs(items, &flat, config.pool_cap, exclude, &mut rng)
    } else {
        let mut out = Vec::new();
        for g in &groups {
            for (ai, &a) in g.iter().enumerate() {
                for &b in &g[ai + 1..] {
                    out.push((a, b));
                }
            }
        }
        out.retain(|&(a, b)| !exclude.contains(&pair_key(items, a, b)));
        out
    };

    if keys.len() > config.pool_cap {
        let mut picks = index::sample(&mut rng, keys.len(), config.pool_cap).into_vec();
        picks.sort_unstable();
        keys = picks.into_iter().map(|i| keys[i]).collect();
    }

    Ok(keys
        .into_iter()
        .map(|(a, b)| {
            if rng.random::<bool>() {
                items.make_pair(a, b)
            } else {
                items.make_pair(b, a)
            }
        })
        .collect())
}

fn pair_key(items: &ItemSet, a: usize, b: usize) -> PairId {
    PairId::from_items(items.items[a].meta.item_id, items.items[b].meta.item_id)
}

fn sample_cross_pairs(
    items: &ItemSet,
    flat: &[usize],
    cap: usize,
    exclude: &HashSet<PairId>,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let n = flat.len();
    let total = n.saturating_mul(n.saturating_sub(1)) / 2;
    if total <= cap.saturating_mul(4) {
        // Small universe: enumerate, the caller subsamples to the cap.
        let mut out = Vec::with_capacity(total);
        for i in 0..n {
            for j in i + 1..n {
                if !exclude.contains(&pair_key(items, flat[i], flat[j])) {
                    out.push((flat[i], flat[j]));
                }
            }
        }
        return out;
    }
    let mut seen = HashSet::with_capacity(cap);
    let mut out = Vec::with_capacity(cap);
    let max_attempts = cap.saturating_mul(64);
    let mut attempts = 0;
    while out.len() < cap && attempts < max_attempts {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let (a, b) = if i < j { (flat[i], flat[j]) } else { (flat[j], flat[i]) };
        let key = pair_key(items, a, b);
        if exclude.contains(&key) || !seen.insert(key) {
            continue;
        }
        out.push((a, b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(prompts: u32, responses: u32) -> ItemSet {
        let mut v = Vec::new();
        for p in 0..prompts {
            for r in 0..responses {
                let id = (p * responses + r) as u64;
                v.push(Item {
                    embedding: DVector::from_vec(vec![id as f64, 1.0]),
                    meta: ItemMeta {
                        item_id: id,
                        prompt_id: p,
                        response_id: r,
                        text: None,
                        golden: None,
                    },
                });
            }
        }
        ItemSet::new(v).unwrap()
    }

    #[test]
    fn single_prompt_three_responses() {
        let cfg = PoolConfig {
            prompts_per_round: 0,
            responses_per_prompt: 10,
            ..PoolConfig::default()
        };
        let pool = build_pool(&items(1, 3), &cfg, &HashSet::new(), 0).unwrap();
        assert_eq!(pool.len(), 3);
        assert!(pool.iter().all(|p| !p.cross_prompt));
    }

    #[test]
    fn prompt_with_one_response_is_rejected() {
        let cfg = PoolConfig::default();
        assert!(matches!(
            build_pool(&items(2, 1), &cfg, &HashSet::new(), 0),
            Err(Error::InsufficientResponses { count: 1, .. })
        ));
    }

    #[test]
    fn excluded_pairs_never_reappear() {
        let cfg = PoolConfig {
            prompts_per_round: 0,
            ..PoolConfig::default()
        };
        let set = items(3, 4);
        let first = build_pool(&set, &cfg, &HashSet::new(), 1).unwrap();
        let exclude: HashSet<PairId> = first.iter().take(5).map(|p| p.id).collect();
        let second = build_pool(&set, &cfg, &exclude, 2).unwrap();
        assert_eq!(second.len(), first.len() - 5);
        assert!(second.iter().all(|p| !exclude.contains(&p.id)));
    }

    #[test]
    fn zero_cap_is_rejected() {
        let cfg = PoolConfig {
            pool_cap: 0,
            ..PoolConfig::default()
        };
        assert!(build_pool(&items(1, 3), &cfg, &HashSet::new(), 0).is_err());
    }
}
