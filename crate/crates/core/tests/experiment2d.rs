use prefdesign::experiment2d::{run_2d_experiment, TwoDConfig};
use prefdesign::StrategyKind;

#[test]
fn two_d_run_matches_the_published_setup() {
    let config = TwoDConfig::default();
    assert_eq!((config.rounds, config.points_per_round, config.batch_size), (4, 1000, 200));
    assert_eq!(config.train.hidden, 16);

    let run = run_2d_experiment(StrategyKind::Entropy, 3, &config).unwrap();
    assert_eq!(run.snapshots.len(), 4);
    assert_eq!(run.trace.final_model().hidden(), 16);
    assert_eq!(run.trace.final_model().input_dim(), 2);
    for (i, snap) in run.snapshots.iter().enumerate() {
        assert_eq!(snap.round, i + 1);
        assert_eq!(snap.candidate_count, 1000);
        assert_eq!(snap.pool_size, 20_000);
        assert_eq!(snap.selected.len(), 200);
        assert_eq!(snap.heatmap.values.len(), config.heatmap_side * config.heatmap_side);
        assert!(
            snap.selected_mean_margin < snap.pool_mean_margin,
            "round {}: {} >= {}",
            snap.round,
            snap.selected_mean_margin,
            snap.pool_mean_margin
        );
    }
    // The heat map of round s is drawn from the model that selected it.
    let first = &run.snapshots[1];
    let model = &run.trace.rounds[1].model;
    let p = &first.heatmap.points()[17];
    assert_eq!(first.heatmap.values[17], model.reward(p.as_slice()).unwrap());
}
