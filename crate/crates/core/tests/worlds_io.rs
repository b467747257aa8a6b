mod common;

use common::*;
use nalgebra::DVector;
use prefdesign::annotate::{annotate, Annotator};
use prefdesign::dataset::{EmbeddingDataset, EmbeddingRecord};
use prefdesign::checkpoint::{read_checkpoint, write_checkpoint};
use prefdesign::worlds::{golden_reward_2d, PlantedLinearWorld, BIMODAL_CENTERS, BIMODAL_VARIANCE};
use prefdesign::{Error, FormatError, PairId, RewardModel};
use proptest::prelude::*;

/// Analytic gradient of the mixture log-density: responsibility-weighted
/// pulls toward each centre.
fn golden_gradient(x: [f64; 2]) -> [f64; 2] {
    let dens: Vec<f64> = BIMODAL_CENTERS
        .iter()
        .map(|c| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * BIMODAL_VARIANCE)).exp())
        .collect();
    let total: f64 = dens.iter().sum();
    let mut g = [0.0; 2];
    for (c, d) in BIMODAL_CENTERS.iter().zip(&dens) {
        let w = d / total;
        g[0] += w * (c[0] - x[0]) / BIMODAL_VARIANCE;
        g[1] += w * (c[1] - x[1]) / BIMODAL_VARIANCE;
    }
    g
}

#[test]
fn golden_2d_gradient_matches_finite_differences() {
    let h = 1e-6;
    for &(x, y) in &[(0.1, 0.2), (-1.0, 0.5), (2.4, 2.6), (-2.0, -3.0), (0.0, 0.0), (1.3, -1.2)] {
        let g = golden_gradient([x, y]);
        let fx = (golden_reward_2d([x + h, y]) - golden_reward_2d([x - h, y])) / (2.0 * h);
        let fy = (golden_reward_2d([x, y + h]) - golden_reward_2d([x, y - h])) / (2.0 * h);
        assert!((g[0] - fx).abs() < 1e-6 * g[0].abs().max(1.0), "{x},{y}: {} vs {fx}", g[0]);
        assert!((g[1] - fy).abs() < 1e-6 * g[1].abs().max(1.0), "{x},{y}: {} vs {fy}", g[1]);
    }
}

#[test]
fn planted_labels_follow_the_bt_law() {
    let world = PlantedLinearWorld::new(5, 3);
    let mut r = rng(1);
    let p = pair(7, normal_vec(&mut r, 5), normal_vec(&mut r, 5));
    let golden = |x: &DVector<f64>| world.reward(x);
    let meta = |x: &DVector<f64>, id| prefdesign::ItemMeta {
        item_id: id,
        golden: Some(golden(x)),
        ..Default::default()
    };
    let p = p.clone().with_meta(meta(&p.left, 0), meta(&p.right, 1));
    let pairs = vec![p.clone(); 1];
    let mut wins = 0;
    for seed in 0..10_000u64 {
        wins += annotate(&pairs, &Annotator::GoldenBernoulli, seed).unwrap()[0].left_preferred as usize;
    }
    let expected = world.pref_prob(&p.left, &p.right);
    assert!((wins as f64 / 10_000.0 - expected).abs() < 0.02);
}

fn sample_dataset(dim: usize, n: usize, seed: u64) -> EmbeddingDataset {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|i| EmbeddingRecord {
            prompt_id: (i / 3) as u32,
            response_id: (i % 3) as u32,
            embedding: normal_vec(&mut r, dim).iter().map(|v| *v as f32).collect(),
            golden: (i % 2 == 0).then_some(i as f64 * 0.5 - 1.0),
            text: (i % 3 == 1).then(|| format!("response {i} ✓")),
        })
        .collect();
    EmbeddingDataset::new(records).unwrap()
}

#[test]
fn dataset_file_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_dataset(6, 10, 2);
    for name in ["d.bin", "d.jsonl"] {
        let path = dir.path().join(name);
        data.save_any(&path).unwrap();
        assert_eq!(EmbeddingDataset::load_any(&path).unwrap(), data);
    }
    let bin = dir.path().join("d.bin");
    let bytes = std::fs::read(&bin).unwrap();
    let reloaded = EmbeddingDataset::load(&bin).unwrap();
    assert_eq!(reloaded.to_bytes(), bytes);
}

#[test]
fn dataset_errors_are_distinct() {
    let bytes = sample_dataset(4, 5, 1).to_bytes();
    let truncated = EmbeddingDataset::from_bytes(&bytes[..bytes.len() - 7]).unwrap_err();
    assert!(matches!(truncated, Error::Format(FormatError::Truncated { .. })), "{truncated:?}");
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        EmbeddingDataset::from_bytes(&bad_magic),
        Err(Error::Format(FormatError::BadMagic { .. }))
    ));
    let mut bad_version = bytes.clone();
    bad_version[8] = 99;
    assert!(matches!(
        EmbeddingDataset::from_bytes(&bad_version),
        Err(Error::Format(FormatError::UnsupportedVersion(99)))
    ));

    let jsonl = "{\"prompt_id\":0,\"response_id\":0,\"embedding\":[1.0,2.0]}\n{\"prompt_id\":0,\"response_id\":1,\"embedding\":[1.0]}\n";
    let err = EmbeddingDataset::read_jsonl(jsonl.as_bytes()).unwrap_err();
    assert!(
        matches!(err, Error::Format(FormatError::DimMismatch { record: 1, .. })),
        "{err:?}"
    );
}

#[test]
fn dataset_converts_to_items_and_test_sets() {
    let mut data = sample_dataset(3, 9, 4);
    for r in &mut data.records {
        r.golden = Some(f64::from(r.response_id));
    }
    let items = data.to_item_set().unwrap();
    assert_eq!(items.len(), 9);
    assert_eq!(items.prompt_count(), 3);
    let test = data.to_test_set().unwrap();
    assert_eq!(test.prompts.len(), 3);
    assert_eq!(test.prompts[0].generations.len(), 3);
    assert_eq!(EmbeddingDataset::from_item_set(&items).unwrap().records.len(), 9);
}

#[test]
fn checkpoint_fuzzing_never_panics() {
    let mut buf = Vec::new();
    write_checkpoint(&RewardModel::init(3, 4, 1), &mut buf).unwrap();
    for cut in 0..buf.len() {
        assert!(read_checkpoint(&buf[..cut]).is_err());
    }
    for i in 0..32 {
        let mut m = buf.clone();
        m[i] ^= 0xff;
        let _ = read_checkpoint(m.as_slice());
    }
}

proptest! {
    #[test]
    fn every_written_dataset_reads_back(dim in 1usize..8, n in 0usize..12, seed in any::<u64>()) {
        let data = sample_dataset(dim, n, seed);
        let bytes = data.to_bytes();
        let back = EmbeddingDataset::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let mut jsonl = Vec::new();
        data.write_jsonl(&mut jsonl).unwrap();
        prop_assert_eq!(EmbeddingDataset::read_jsonl(jsonl.as_slice()).unwrap(), data);
    }

    #[test]
    fn fuzzed_headers_only_error(seed in any::<u64>(), pos in 0usize..48, byte in any::<u8>()) {
        let mut bytes = sample_dataset(3, 4, seed).to_bytes();
        if pos < bytes.len() {
            bytes[pos] = byte;
        }
        let _ = EmbeddingDataset::from_bytes(&bytes);
    }

    #[test]
    fn random_bytes_only_error(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let mut with_magic = b"PDEMBSET".to_vec();
        with_magic.extend_from_slice(&bytes);
        let _ = EmbeddingDataset::from_bytes(&bytes);
        let _ = EmbeddingDataset::from_bytes(&with_magic);
        let _ = read_checkpoint(bytes.as_slice());
    }
}

#[test]
fn annotation_of_pairs_without_golden_is_an_error() {
    let p = pair(1, DVector::zeros(2), DVector::zeros(2));
    assert!(matches!(
        annotate(&[p], &Annotator::GoldenBernoulli, 0),
        Err(Error::MissingOracle(PairId(1)))
    ));
}
