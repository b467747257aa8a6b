mod common;

use common::*;
use nalgebra::DVector;
use prefdesign::metrics::{
    average_ranks, best_of_n, best_of_n_from_rewards, spearman, spearman_from_rewards, spearman_metric,
    TestPrompt, TestPromptSet,
};
use prefdesign::RewardModel;
use proptest::prelude::*;
use rand::Rng;

/// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

fn oracle_metric(model: &[Vec<f64>], golden: &[Vec<f64>]) -> Option<f64> {
    let vals: Vec<f64> = model
        .iter()
        .zip(golden)
        .filter_map(|(m, g)| pearson(&counting_ranks(m), &counting_ranks(g)))
        .map(|rho| 1.0 - rho)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn oracle_best_of_n(model: &[Vec<f64>], golden: &[Vec<f64>], n: usize) -> f64 {
    let picks: Vec<f64> = model
        .iter()
        .zip(golden)
        .map(|(m, g)| {
            let mut best = 0;
            for i in 1..n {
                if m[i] > m[best] {
                    best = i;
                }
            }
            g[best]
        })
        .collect();
    picks.iter().sum::<f64>() / picks.len() as f64
}

/// Small integer-valued rewards so ties are frequent.
fn tied_instance(r: &mut rand_chacha::ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let prompts = r.random_range(1..6);
    let gens = r.random_range(2..9);
    let draw = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..prompts)
            .map(|_| (0..gens).map(|_| f64::from(r.random_range(0..4))).collect())
            .collect()
    };
    (draw(r), draw(r))
}

#[test]
fn spearman_and_best_of_n_match_brute_force() {
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let (model, golden) = tied_instance(&mut r);
        match (spearman_from_rewards(&model, &golden), oracle_metric(&model, &golden)) {
            (Ok(got), Some(want)) => assert!((got.value - want).abs() <= 1e-12, "seed {seed}"),
            (Err(_), None) => {}
            (got, want) => panic!("seed {seed}: {got:?} vs {want:?}"),
        }
        let gens = model[0].len();
        for n in 1..=gens {
            let got = best_of_n_from_rewards(&model, &golden, n).unwrap();
            assert_eq!(got, oracle_best_of_n(&model, &golden, n), "seed {seed} n {n}");
        }
    }
}

#[test]
fn rank_formula_without_ties() {
    for seed in 0..20u64 {
        let mut r = rng(seed + 300);
        let n = r.random_range(2..30);
        let a: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let (ra, rb) = (average_ranks(&a), average_ranks(&b));
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        let nf = n as f64;
        let expected = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        assert!((spearman(&a, &b).unwrap() - expected).abs() <= 1e-12);
    }
}

#[test]
fn metric_examples() {
    let golden = vec![vec![1.0, 2.0, 3.0, 4.0]];
    assert_eq!(spearman_from_rewards(&golden, &golden).unwrap().value, 0.0);
    let neg = vec![vec![-1.0, -2.0, -3.0, -4.0]];
    assert_eq!(spearman_from_rewards(&neg, &golden).unwrap().value, 2.0);
    let swapped = vec![vec![1.0, 2.0, 4.0, 3.0]];
    assert!((spearman_from_rewards(&swapped, &golden).unwrap().value - 0.2).abs() < 1e-12);

    let g = vec![vec![5.0, 1.0, 9.0], vec![-1.0, 2.0, 0.0]];
    let m = vec![vec![0.0, 3.0, 1.0], vec![4.0, 4.0, 1.0]];
    assert_eq!(best_of_n_from_rewards(&m, &g, 1).unwrap(), 2.0);
    assert_eq!(best_of_n_from_rewards(&g, &g, 3).unwrap(), 5.5);
    // Tie on model reward picks the lower index.
    assert_eq!(best_of_n_from_rewards(&m, &g, 2).unwrap(), (1.0 - 1.0) / 2.0);
    assert!(best_of_n_from_rewards(&m, &g, 4).is_err());
}

#[test]
fn constant_prompts_are_skipped_and_counted() {
    let model = vec![vec![1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]];
    let golden = vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
    let out = spearman_from_rewards(&model, &golden).unwrap();
    assert_eq!(out.skipped, 1);
    assert_eq!(out.value, 2.0);
    assert!(spearman_from_rewards(&model[..1], &golden[..1]).is_err());
}

#[test]
fn model_level_metrics() {
    let mut r = rng(4);
    let model = RewardModel::init(3, 4, 0);
    let prompts = (0..5)
        .map(|_| {
            let generations: Vec<DVector<f64>> = (0..6).map(|_| normal_vec(&mut r, 3)).collect();
            TestPrompt {
                golden: generations.iter().map(|x| model.reward(x.as_slice()).unwrap()).collect(),
                generations,
            }
        })
        .collect();
    let test = TestPromptSet { prompts };
    assert!(spearman_metric(&model, &test).unwrap().value.abs() < 1e-12);
    let golden = test.golden();
    let perfect: f64 = golden
        .iter()
        .map(|g| g.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / 5.0;
    assert_eq!(best_of_n(&model, &test, 6).unwrap(), perfect);
}

proptest! {
    #[test]
    fn spearman_rank_invariance(seed in any::<u64>(), which in 0usize..3) {
        let mut r = rng(seed);
        let model: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let golden: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| r.random()).collect()).collect();
        let f = |x: f64| match which {
            0 => x.exp(),
            1 => x * x * x + 2.0 * x,
            _ => 7.0 * x - 3.0,
        };
        let transformed: Vec<Vec<f64>> = model.iter().map(|m| m.iter().map(|v| f(*v)).collect()).collect();
        prop_assert_eq!(
            spearman_from_rewards(&model, &golden).unwrap(),
            spearman_from_rewards(&transformed, &golden).unwrap()
        );
    }

    #[test]
    fn best_of_n_affine_invariance(seed in any::<u64>(), a in 0.01f64..100.0, b in -50.0f64..50.0, n in 1usize..=10) {
        let mut r = rng(seed);
        let model: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| f64::from(r.random_range(0..6))).collect()).collect();
        let golden: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| r.random()).collect()).collect();
        let affine: Vec<Vec<f64>> = model.iter().map(|m| m.iter().map(|v| a * v + b).collect()).collect();
        prop_assert_eq!(
            best_of_n_from_rewards(&model, &golden, n).unwrap(),
            best_of_n_from_rewards(&affine, &golden, n).unwrap()
        );
    }

    #[test]
    fn best_of_n_monotone_for_perfect_model(seed in any::<u64>()) {
        let mut r = rng(seed);
        let golden: Vec<Vec<f64>> = (0..4).map(|_| (0..12).map(|_| r.random()).collect()).collect();
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=12 {
            let v = best_of_n_from_rewards(&golden, &golden, n).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn ranks_match_counting_oracle(v in prop::collection::vec(-3i32..3, 1..20)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        prop_assert_eq!(average_ranks(&v), counting_ranks(&v));
    }
}
