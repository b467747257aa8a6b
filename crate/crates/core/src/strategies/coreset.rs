//! Sensitivity-based coreset scoring for logistic likelihoods.
//!
//! For data points `z_n` and a parameter ball of radius `R`, the sensitivity of
//! point `n` is bounded by `N / (1 + Σ_{m≠n} exp(−R‖z_m − z_n‖))`. Evaluating
//! that sum is quadratic in `N`; instead the points are clustered with k-means
//! and each cluster `k` (center `c_k`, radius `r_k`) contributes
//! `|G_k \ {n}| · exp(−R(r_k + ‖c_k − z_n‖))`. By the triangle inequality each
//! cluster term is at most the exact pairwise sum over its members, so the
//! clustered value is an upper bound of the pairwise bound.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoresetConfig {
    pub clusters: usize,
    /// Radius of the parameter ball the bound holds over.
    pub radius: f64,
    pub kmeans_iters: usize,
}

impl Default for CoresetConfig {
    fn default() -> Self {
        Self {
            clusters: 6,
            radius: 1.0,
            kmeans_iters: 50,
        }
    }
}

impl CoresetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("coreset.clusters must be >= 1".into()));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig("coreset.radius must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub centers: Vec<DVector<f64>>,
    pub assignment: Vec<usize>,
    pub radii: Vec<f64>,
    pub sizes: Vec<usize>,
}

/// Seeded k-means (k-means++ seeding, Lloyd iterations).
pub fn kmeans(points: &[DVector<f64>], k: usize, iters: usize, seed: u64) -> Clustering {
    let n = points.len();
    let k = k.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist2 = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm_squared();

    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        let c = centers.last().unwrap();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..iters.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..centers.len())
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .unwrap();
            if best != assignment[i] {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![DVector::zeros(dim); centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a] += p;
            counts[a] += 1;
        }
        for ((c, s), &cnt) in centers.iter_mut().zip(sums).zip(&counts) {
            if cnt > 0 {
                *c = s / cnt as f64;
            }
        }
    }

    // Radii are measured against the final centers, so the bound holds even
    // if Lloyd stopped before convergence.
    let mut radii = vec![0.0f64; centers.len()];
    let mut sizes = vec![0usize; centers.len()];
    for (p, &a) in points.iter().zip(&assignment) {
        radii[a] = radii[a].max((p - &centers[a]).norm());
        sizes[a] += 1;
    }
    Clustering {
        centers,
        assignment,
        radii,
        sizes,
    }
}

/// Clustered sensitivity upper bounds for the first `n_candidates` points;
/// the remaining points (already-labeled data) only enter the sums.
pub fn coreset_sensitivities(
    points: &[DVector<f64>],
    n_candidates: usize,
    config: &CoresetConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    config.validate()?;
    if points.is_empty() || n_candidates == 0 {
        return Err(Error::EmptyPool);
    }
    let n = points.len() as f64;
    let clustering = kmeans(points, config.clusters, config.kmeans_iters, seed);
    let r = config.radius;
    Ok((0..n_candidates.min(points.len()))
        .map(|i| {
            let z = &points[i];
            let own = clustering.assignment[i];
            let sum: f64 = clustering
                .centers
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let members = clustering.sizes[k] - usize::from(k == own);
                    if members == 0 {
                        return 0.0;
                    }
                    let dist = clustering.radii[k] + (c - z).norm();
                    members as f64 * (-r * dist).exp()
                })
                .sum();
            n / (1.0 + sum)
        })
        .collect())
}
