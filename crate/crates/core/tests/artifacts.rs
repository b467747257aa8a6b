use std::fs;
use std::path::Path;

use prefdesign::artifact::{read_heatmap, read_labels, read_metrics, read_pairs, snapshot_rounds, RunWriter};
use prefdesign::checkpoint::load_checkpoint;
use prefdesign::config::ExperimentConfig;

const CONFIG: &str = r#"
strategy = "entropy"
batch_size = 10
rounds = 2
seeds = [5]

[world]
kind = "planted_linear"
dim = 3
prompts = 12
responses = 5
test_prompts = 4
test_generations = 6

[pool]
prompts_per_round = 0
responses_per_prompt = 5

[train]
hidden = 6
epochs = 20
"#;

fn run_into(dir: &Path, text: &str) -> prefdesign::config::RunOutput {
    let config = ExperimentConfig::from_toml_str(text).unwrap();
    config.validate().unwrap();
    let spec = config.runs()[0];
    let out = config.execute(&spec).unwrap();
    let writer = RunWriter::create(dir, &config.for_run(&spec).to_toml_string().unwrap()).unwrap();
    writer.write_trace(&out.trace).unwrap();
    if let Some(snaps) = &out.snapshots {
        for s in snaps {
            writer.write_snapshot(s).unwrap();
        }
    }
    writer.mark_finished().unwrap();
    out
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        if rel != "metadata.json" {
            out.push((rel, fs::read(&entry).unwrap()));
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn run_artifact_round_trip_and_byte_stability() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run_into(&a, CONFIG);
    run_into(&b, CONFIG);
    assert_eq!(tree(&a), tree(&b));

    let rows = read_metrics(&a).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, rec) in rows.iter().zip(out.trace.strategy_rounds()) {
        assert_eq!(row.round, rec.round);
        assert_eq!(row.n_labels, rec.n_labels);
        let m = rec.metrics.unwrap();
        assert_eq!(row.one_minus_spearman, Some(m.one_minus_spearman));
        assert_eq!(row.best_of_n, Some(m.best_of_n));
    }
    assert_eq!(read_labels(&a).unwrap().len(), 30);
    let ckpt = load_checkpoint(&a.join("checkpoints/round_002.bin")).unwrap();
    assert_eq!(ckpt.hidden(), 6);
    let snapshot = ExperimentConfig::from_toml_str(&fs::read_to_string(a.join("config.toml")).unwrap()).unwrap();
    assert_eq!(snapshot.seeds, vec![5]);
    assert!(fs::read_to_string(a.join("selections/round_001.jsonl")).unwrap().lines().count() == 10);
}

#[test]
fn two_d_artifacts_hold_plot_data() {
    let text = r#"
strategy = "dopt"
batch_size = 15
rounds = 2
seeds = [1]

[world]
kind = "bimodal_2d"
points_per_round = 60
test_side = 7
heatmap_side = 5

[pool]
pool_cap = 400

[train]
hidden = 16
epochs = 20
"#;
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), text);
    assert_eq!(snapshot_rounds(tmp.path()).unwrap(), vec![1, 2]);
    let cells = read_heatmap(tmp.path(), 2).unwrap();
    assert_eq!(cells.len(), 25);
    let snap = &out.snapshots.unwrap()[1];
    assert_eq!(cells.iter().map(|c| c.reward).collect::<Vec<_>>(), snap.heatmap.values);
    let pairs = read_pairs(tmp.path(), 2).unwrap();
    assert_eq!(pairs.len(), 15);
    assert_eq!([pairs[0].x1, pairs[0].y1], snap.selected[0][0]);
}
