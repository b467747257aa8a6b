mod common;

use std::collections::HashSet;

use common::*;
use prefdesign::pool::{build_pool, Item, ItemSet, PoolConfig};
use prefdesign::worlds::PlantedLinearWorld;
use prefdesign::{ItemMeta, PairId};

fn items(prompts: usize, responses: usize) -> ItemSet {
    PlantedLinearWorld::new(4, 0).items(prompts, responses, 1).unwrap()
}

fn assert_well_formed(pool: &[prefdesign::ComparisonPair]) {
    let ids: HashSet<PairId> = pool.iter().map(|p| p.id).collect();
    assert_eq!(ids.len(), pool.len(), "duplicate pair");
    for p in pool {
        let (l, r) = (p.left_meta.as_ref().unwrap(), p.right_meta.as_ref().unwrap());
        assert_ne!(l.item_id, r.item_id, "self pair");
        assert_eq!(p.id, PairId::from_items(l.item_id, r.item_id));
        assert_eq!(p.cross_prompt, l.prompt_id != r.prompt_id);
    }
}

#[test]
fn in_prompt_pool_has_45_pairs_per_prompt() {
    let config = PoolConfig {
        prompts_per_round: 500,
        responses_per_prompt: 10,
        cross_prompt: false,
        pool_cap: 25_000,
    };
    let pool = build_pool(&items(800, 12), &config, &HashSet::new(), 3).unwrap();
    assert_eq!(pool.len(), 22_500);
    assert_well_formed(&pool);
    assert!(pool.iter().all(|p| !p.cross_prompt));
}

#[test]
fn cross_prompt_pool_is_capped_exactly() {
    let config = PoolConfig {
        prompts_per_round: 500,
        responses_per_prompt: 10,
        cross_prompt: true,
        pool_cap: 20_000,
    };
    let pool = build_pool(&items(500, 10), &config, &HashSet::new(), 4).unwrap();
    assert_eq!(pool.len(), 20_000);
    assert_well_formed(&pool);
    assert!(pool.iter().filter(|p| p.cross_prompt).count() > 19_000);
}

#[test]
fn in_prompt_cap_subsamples() {
    let config = PoolConfig {
        prompts_per_round: 0,
        responses_per_prompt: 10,
        cross_prompt: false,
        pool_cap: 1000,
    };
    let pool = build_pool(&items(100, 10), &config, &HashSet::new(), 5).unwrap();
    assert_eq!(pool.len(), 1000);
    assert_well_formed(&pool);
}

#[test]
fn pools_are_seeded() {
    let config = PoolConfig {
        prompts_per_round: 20,
        ..PoolConfig::default()
    };
    let set = items(50, 10);
    let a: Vec<PairId> = build_pool(&set, &config, &HashSet::new(), 9).unwrap().iter().map(|p| p.id).collect();
    let b: Vec<PairId> = build_pool(&set, &config, &HashSet::new(), 9).unwrap().iter().map(|p| p.id).collect();
    let c: Vec<PairId> = build_pool(&set, &config, &HashSet::new(), 10).unwrap().iter().map(|p| p.id).collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn excluded_pairs_never_return() {
    let set = items(3, 4);
    let config = PoolConfig {
        prompts_per_round: 0,
        responses_per_prompt: 4,
        ..PoolConfig::default()
    };
    let full = build_pool(&set, &config, &HashSet::new(), 0).unwrap();
    assert_eq!(full.len(), 18);
    let exclude: HashSet<PairId> = full.iter().take(5).map(|p| p.id).collect();
    let rest = build_pool(&set, &config, &exclude, 0).unwrap();
    assert_eq!(rest.len(), 13);
    assert!(rest.iter().all(|p| !exclude.contains(&p.id)));

    let cross = PoolConfig {
        cross_prompt: true,
        ..config
    };
    let rest = build_pool(&set, &cross, &exclude, 0).unwrap();
    assert!(rest.iter().all(|p| !exclude.contains(&p.id)));
    assert_eq!(rest.len(), 66 - 5);
}

#[test]
fn single_response_prompt_is_an_error() {
    let item = |id: u64, prompt: u32| Item {
        embedding: nalgebra::DVector::zeros(2),
        meta: ItemMeta {
            item_id: id,
            prompt_id: prompt,
            response_id: id as u32,
            ..Default::default()
        },
    };
    let set = ItemSet::new(vec![item(0, 0), item(1, 0), item(2, 1)]).unwrap();
    let config = PoolConfig {
        prompts_per_round: 0,
        ..PoolConfig::default()
    };
    assert!(build_pool(&set, &config, &HashSet::new(), 0).is_err());
    let _ = rng(0);
}
