#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use prefdesign::config::ExperimentConfig;
use prefdesign_service::api::{CreateSessionResponse, ErrorBody, LabelAck, NextPairsResponse, PairView, SessionStatus};
use prefdesign_service::{router, AppState};
use serde_json::{json, Value};

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    pub state: Arc<AppState>,
    handle: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn start(root: &Path) -> Server {
    let state = Arc::new(AppState::open(root).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(Arc::clone(&state));
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server {
        base: format!("http://{addr}/v1"),
        client: reqwest::Client::new(),
        state,
        handle,
    }
}

pub fn planted_config(strategy: &str, c: usize) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
strategy = "{strategy}"
batch_size = {c}
rounds = 5
seeds = [11]

[world]
kind = "planted_linear"
dim = 4
prompts = 20
responses = 5
test_prompts = 5
test_generations = 6

[pool]
prompts_per_round = 0
responses_per_prompt = 5

[train]
hidden = 8
epochs = 30
"#
    ))
    .unwrap()
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Reply {
    pub fn ok<T: serde::de::DeserializeOwned>(self) -> T {
        assert!(self.status < 300, "status {}: {}", self.status, self.body);
        serde_json::from_value(self.body).unwrap()
    }

    pub fn err(self) -> (u16, ErrorBody) {
        assert!(self.status >= 400, "expected an error, got {}", self.body);
        (self.status, serde_json::from_value(self.body).unwrap())
    }
}

impl Server {
    async fn send(&self, req: reqwest::RequestBuilder) -> Reply {
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let body = resp.json::<Value>().await.unwrap_or(Value::Null);
        Reply { status, body }
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        self.send(self.client.post(format!("{}{path}", self.base)).json(&body)).await
    }

    pub async fn get(&self, path: &str) -> Reply {
        self.send(self.client.get(format!("{}{path}", self.base))).await
    }

    pub async fn create(&self, config: &ExperimentConfig, retrain: &str) -> CreateSessionResponse {
        self.post("/sessions", json!({ "config": config, "retrain": retrain })).await.ok()
    }

    pub async fn next(&self, id: &str, k: usize) -> Reply {
        self.get(&format!("/sessions/{id}/next?k={k}")).await
    }

    pub async fn status(&self, id: &str) -> SessionStatus {
        self.get(&format!("/sessions/{id}/status")).await.ok()
    }

    pub async fn label(&self, id: &str, pair: &PairView, nonce: &str) -> Reply {
        self.post(
            &format!("/sessions/{id}/labels"),
            json!({ "pair_id": pair.pair_id, "outcome": golden_outcome(pair), "nonce": nonce }),
        )
        .await
    }

    /// Labels the whole remaining round by the golden rewards.
    pub async fn finish_round(&self, id: &str) -> Vec<LabelAck> {
        let status = self.status(id).await;
        let left = status.batch_size - status.labels_in_round;
        let next: NextPairsResponse = self.next(id, left).await.ok();
        let mut acks = Vec::new();
        for p in &next.pairs {
            acks.push(self.label(id, p, &format!("n-{}", p.pair_id)).await.ok());
        }
        acks
    }

    pub async fn wait_for_version(&self, id: &str, version: u64) -> SessionStatus {
        for _ in 0..2000 {
            let s = self.status(id).await;
            if s.model_version >= version && !s.retraining {
                return s;
            }
            tokio::time::sleep(std::time::Duration::from_millis(10)).await;
        }
        panic!("model version {version} never arrived");
    }
}

pub fn golden_outcome(pair: &PairView) -> u8 {
    let l = pair.left.as_ref().and_then(|m| m.golden).unwrap();
    let r = pair.right.as_ref().and_then(|m| m.golden).unwrap();
    u8::from(l > r)
}
