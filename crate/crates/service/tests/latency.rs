//! next_pairs on a 20,000-pair pool with 64 last-layer features.

mod common;

use std::time::{Duration, Instant};

use common::start;
use prefdesign::config::ExperimentConfig;
use prefdesign_service::api::NextPairsResponse;

const CONFIG: &str = r#"
strategy = "dopt"
batch_size = 20
rounds = 10
seeds = [3]

[world]
kind = "planted_linear"
dim = 16
prompts = 500
responses = 10
test_prompts = 10
test_generations = 10

[pool]
prompts_per_round = 500
responses_per_prompt = 10
pool_cap = 20000

[train]
hidden = 64
epochs = 40
"#;

pub async fn measure_next_latency(rounds: usize) -> Vec<Duration> {
    let tmp = tempfile::tempdir().unwrap();
    let srv = start(tmp.path()).await;
    let config = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let id = srv.create(&config, "sync").await.session_id.to_string();
    // Warm-up: the bootstrap round and one strategy round.
    srv.finish_round(&id).await;
    srv.finish_round(&id).await;
    let mut times = Vec::new();
    for _ in 0..rounds {
        let t = Instant::now();
        let next: NextPairsResponse = srv.next(&id, 1).await.ok();
        times.push(t.elapsed());
        assert_eq!(next.pairs.len(), 1);
        srv.finish_round(&id).await;
    }
    let pool = srv.state.session(&id.parse().unwrap()).unwrap();
    assert_eq!(pool.current_model().1.hidden(), 64);
    times
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn next_pairs_is_fast_on_a_full_pool() {
    let times = measure_next_latency(3).await;
    println!("next_pairs latency: {times:?}");
    for t in times {
        assert!(t < Duration::from_millis(200), "{t:?}");
    }
}
