#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use prefdesign::types::AnnotatorKind;
use prefdesign::{ComparisonPair, LabeledDataset, PairId, PreferenceLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn pair(id: u64, left: DVector<f64>, right: DVector<f64>) -> ComparisonPair {
    ComparisonPair::new(PairId(id), left, right).unwrap()
}

pub fn label(id: PairId, left_preferred: bool) -> PreferenceLabel {
    PreferenceLabel {
        pair_id: id,
        left_preferred,
        annotator: AnnotatorKind::Simulated,
        timestamp: 0,
    }
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<ComparisonPair> {
    (0..n)
        .map(|i| pair(i as u64, normal_vec(rng, dim), normal_vec(rng, dim)))
        .collect()
}

/// Random pairs with coin-flip labels.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> LabeledDataset {
    let mut data = LabeledDataset::new();
    for p in random_pairs(rng, n, dim) {
        let l = label(p.id, rng.random::<bool>());
        data.push(p, l).unwrap();
    }
    data
}

/// Dense log-determinant via LU, independent of the Cholesky code path.
pub fn dense_logdet(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().ln()
}

/// `Σ w_i d_i d_iᵀ + ridge·I` built with plain loops.
pub fn dense_design(diffs: &[DVector<f64>], weights: &[f64], ridge: f64) -> DMatrix<f64> {
    let d = diffs.first().map_or(0, |v| v.len());
    let mut m = DMatrix::identity(d, d) * ridge;
    for (v, &w) in diffs.iter().zip(weights) {
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    m
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
