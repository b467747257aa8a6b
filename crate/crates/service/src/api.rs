//! Request and response bodies of the `/v1` API.

use prefdesign::artifact::MetricsRow;
use prefdesign::config::ExperimentConfig;
use prefdesign::{ItemMeta, PairId, StrategyKind};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

/// When a closed round's model is trained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    /// Train off the request path; `next` keeps serving from the previous
    /// model until the new one is swapped in.
    #[default]
    Background,
    /// Train before acknowledging the label that closed the round.
    Sync,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub config: ExperimentConfig,
    /// Overrides `config.seeds[0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub retrain: RetrainMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: Uuid,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub pair_id: PairId,
    pub rank: usize,
    pub score: f64,
    /// Current model's probability that `left` is preferred; absent before the
    /// first model is trained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_left: Option<f64>,
    pub left: Option<ItemMeta>,
    pub right: Option<ItemMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPairsResponse {
    pub session_id: Uuid,
    pub round: usize,
    /// Version of the model the queue was selected with.
    pub model_version: u64,
    pub pairs: Vec<PairView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSubmission {
    pub pair_id: PairId,
    /// 1 when the left item is preferred, 0 otherwise.
    pub outcome: u8,
    /// Idempotency key: replaying a nonce returns the original result.
    pub nonce: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAck {
    pub pair_id: PairId,
    /// Round the label was collected in.
    pub round: usize,
    pub labels: usize,
    pub labels_in_round: usize,
    pub round_closed: bool,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: Uuid,
    pub round: usize,
    pub labels: usize,
    pub labels_in_round: usize,
    pub batch_size: usize,
    pub strategy: StrategyKind,
    pub model_version: u64,
    pub pending: usize,
    pub retraining: bool,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Pending,
    Labeled,
    Available,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDetail {
    pub pair_id: PairId,
    pub state: PairState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
    pub left: Option<ItemMeta>,
    pub right: Option<ItemMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: serde_json::Value,
}
