use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use prefdesign::PairId;
use serde_json::json;
use uuid::Uuid;

use crate::api::ErrorBody;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset not found: {0}")]
    DatasetMissing(String),

    #[error("unknown session {0}")]
    UnknownSession(String),

    #[error("unknown pair {0}")]
    UnknownPair(PairId),

    #[error("pair {0} is not pending")]
    NotPending(PairId),

    #[error("outcome must be 0 or 1, got {0}")]
    MalformedOutcome(u8),

    #[error("requested {requested} pairs but only {remaining} remain in this round")]
    BudgetExceeded { requested: usize, remaining: usize },

    #[error("pool has {available} unlabeled pairs, round needs {needed}")]
    ExhaustedPool { available: usize, needed: usize },

    #[error("session finished all {0} rounds")]
    Complete(usize),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error(transparent)]
    Core(#[from] prefdesign::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt session state: {0}")]
    Corrupt(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidConfig(_) => "invalid_config",
            ServiceError::DatasetMissing(_) => "dataset_missing",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownPair(_) => "unknown_pair",
            ServiceError::NotPending(_) => "not_pending",
            ServiceError::MalformedOutcome(_) => "malformed_outcome",
            ServiceError::BudgetExceeded { .. } => "budget_exceeded",
            ServiceError::ExhaustedPool { .. } => "exhausted_pool",
            ServiceError::Complete(_) => "session_complete",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Core(_) | ServiceError::Io(_) | ServiceError::Corrupt(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::InvalidConfig(_) | ServiceError::DatasetMissing(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::UnknownSession(_) | ServiceError::UnknownPair(_) => StatusCode::NOT_FOUND,
            ServiceError::NotPending(_) | ServiceError::ExhaustedPool { .. } | ServiceError::Complete(_) => {
                StatusCode::CONFLICT
            }
            ServiceError::MalformedOutcome(_) | ServiceError::BudgetExceeded { .. } | ServiceError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::Core(_) | ServiceError::Io(_) | ServiceError::Corrupt(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    fn detail(&self) -> serde_json::Value {
        match self {
            ServiceError::UnknownSession(id) => json!({ "session_id": id }),
            ServiceError::UnknownPair(id) | ServiceError::NotPending(id) => json!({ "pair_id": id }),
            ServiceError::MalformedOutcome(v) => json!({ "outcome": v }),
            ServiceError::BudgetExceeded { requested, remaining } => {
                json!({ "requested": requested, "remaining": remaining })
            }
            ServiceError::ExhaustedPool { available, needed } => json!({ "available": available, "needed": needed }),
            ServiceError::Complete(rounds) => json!({ "rounds": rounds }),
            _ => serde_json::Value::Null,
        }
    }

    /// Sorts core failures raised while setting up a session into client
    /// errors and internal ones.
    pub(crate) fn from_setup(err: prefdesign::Error) -> Self {
        use prefdesign::Error as E;
        match err {
            E::Io(e) if e.kind() == std::io::ErrorKind::NotFound => ServiceError::DatasetMissing(e.to_string()),
            E::Format(e) => ServiceError::InvalidConfig(format!("dataset: {e}")),
            E::InvalidConfig(_)
            | E::UnknownStrategy(_)
            | E::InsufficientResponses { .. }
            | E::BudgetExceedsPool { .. }
            | E::ZeroBudget
            | E::DimensionMismatch { .. } => ServiceError::InvalidConfig(err.to_string()),
            other => ServiceError::Core(other),
        }
    }
}

pub(crate) fn unknown_session(id: &Uuid) -> ServiceError {
    ServiceError::UnknownSession(id.to_string())
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            detail: self.detail(),
        };
        (self.status(), Json(body)).into_response()
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;
