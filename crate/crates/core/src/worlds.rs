//! Synthetic worlds with known golden rewards.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::metrics::{TestPrompt, TestPromptSet};
use crate::model::sigmoid;
use crate::pool::{Item, ItemSet};
use crate::types::ItemMeta;

pub const BIMODAL_CENTERS: [[f64; 2]; 2] = [[-2.5, -2.5], [2.5, 2.5]];
pub const BIMODAL_VARIANCE: f64 = 0.25;

/// Log-density of the equal-weight mixture of two isotropic Gaussians centred
/// at `(−2.5, −2.5)` and `(2.5, 2.5)` with variance 0.25.
pub fn golden_reward_2d(x: [f64; 2]) -> f64 {
    let log_norm = -(2.0 * std::f64::consts::PI * BIMODAL_VARIANCE).ln();
    let terms = BIMODAL_CENTERS.map(|c| {
        let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        0.5f64.ln() + log_norm - d2 / (2.0 * BIMODAL_VARIANCE)
    });
    let m = terms[0].max(terms[1]);
    m + ((terms[0] - m).exp() + (terms[1] - m).exp()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimodalWorld2D {
    pub points_per_round: usize,
}

impl Default for BimodalWorld2D {
    fn default() -> Self {
        Self {
            points_per_round: 1000,
        }
    }
}

impl BimodalWorld2D {
    /// Fresh standard-normal candidate points for one round, all under a
    /// single prompt id so any two of them may be compared. Item ids are
    /// unique across rounds.
    pub fn sample_round(&self, round: usize, seed: u64) -> Result<ItemSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = round as u64 * self.points_per_round as u64;
        let items = (0..self.points_per_round)
            .map(|j| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                Item {
                    embedding: DVector::from_vec(vec![x, y]),
                    meta: ItemMeta {
                        item_id: base + j as u64,
                        prompt_id: round as u32,
                        response_id: j as u32,
                        text: None,
                        golden: Some(golden_reward_2d([x, y])),
                    },
                }
            })
            .collect();
        ItemSet::new(items)
    }

    /// Held-out evaluation grid: one prompt whose generations are the points
    /// of a `side × side` grid over `[−extent, extent]²`.
    pub fn grid_test_set(side: usize, extent: f64) -> TestPromptSet {
        let pts = grid_points(side, extent);
        TestPromptSet {
            prompts: vec![TestPrompt {
                golden: pts.iter().map(|p| golden_reward_2d([p[0], p[1]])).collect(),
                generations: pts,
            }],
        }
    }
}

/// Row-major grid points (y outer, x inner).
pub fn grid_points(side: usize, extent: f64) -> Vec<DVector<f64>> {
    let step = if side > 1 {
        2.0 * extent / (side - 1) as f64
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(side * side);
    for iy in 0..side {
        for ix in 0..side {
            out.push(DVector::from_vec(vec![
                -extent + ix as f64 * step,
                -extent + iy as f64 * step,
            ]));
        }
    }
    out
}

/// Linear golden reward `xᵀβ*` over standard-normal embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedLinearWorld {
    pub beta: DVector<f64>,
}

impl PlantedLinearWorld {
    /// `β*` is a seeded uniformly random unit vector.
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut beta = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let norm = beta.norm();
        if norm > 0.0 {
            beta /= norm;
        } else {
            beta[0] = 1.0;
        }
        Self { beta }
    }

    pub fn with_beta(beta: DVector<f64>) -> Self {
        Self { beta }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn reward(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.beta)
    }

    /// BT probability that `left` beats `right`.
    pub fn pref_prob(&self, left: &DVector<f64>, right: &DVector<f64>) -> f64 {
        sigmoid((left - right).dot(&self.beta))
    }

    pub fn sample_embedding(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng))
    }

    /// `prompts × responses` items with golden rewards.
    pub fn items(&self, prompts: usize, responses: usize, seed: u64) -> Result<ItemSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::with_capacity(prompts * responses);
        for p in 0..prompts {
            for r in 0..responses {
                let x = self.sample_embedding(&mut rng);
                items.push(Item {
                    meta: ItemMeta {
                        item_id: (p * responses + r) as u64,
                        prompt_id: p as u32,
                        response_id: r as u32,
                        text: None,
                        golden: Some(self.reward(&x)),
                    },
                    embedding: x,
                });
            }
        }
        ItemSet::new(items)
    }

    pub fn test_set(&self, prompts: usize, generations: usize, seed: u64) -> TestPromptSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TestPromptSet {
            prompts: (0..prompts)
                .map(|_| {
                    let generations: Vec<_> =
                        (0..generations).map(|_| self.sample_embedding(&mut rng)).collect();
                    TestPrompt {
                        golden: generations.iter().map(|x| self.reward(x)).collect(),
                        generations,
                    }
                })
                .collect(),
        }
    }
}
