use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use prefdesign::PairId;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use uuid::Uuid;

use crate::api::{CreateSessionRequest, CreateSessionResponse, LabelAck, LabelSubmission, NextPairsResponse, PairDetail, SessionStatus};
use crate::error::{unknown_session, ServiceError, ServiceResult};
use crate::session::{session_dirs, Session};

/// Sessions by id, all persisted under one root directory.
pub struct AppState {
    root: PathBuf,
    sessions: RwLock<HashMap<Uuid, Arc<Session>>>,
}

impl AppState {
    /// Opens `root`, recovering every session found there. Sessions that fail
    /// to load are logged and skipped.
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for dir in session_dirs(&root)? {
            match Session::open(&dir) {
                Ok(s) => {
                    sessions.insert(s.id(), s);
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping unreadable session"),
            }
        }
        Ok(Self {
            root,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session(&self, id: &Uuid) -> ServiceResult<Arc<Session>> {
        self.sessions.read().get(id).cloned().ok_or_else(|| unknown_session(id))
    }

    pub fn create(&self, request: CreateSessionRequest) -> ServiceResult<Arc<Session>> {
        let session = Session::create(&self.root, request)?;
        self.sessions.write().insert(session.id(), Arc::clone(&session));
        Ok(session)
    }

    pub fn session_ids(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.sessions.read().keys().copied().collect();
        ids.sort();
        ids
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/next", get(next_pairs))
        .route("/v1/sessions/{id}/labels", post(submit_label))
        .route("/v1/sessions/{id}/retrain", post(retrain))
        .route("/v1/sessions/{id}/status", get(status))
        .route("/v1/sessions/{id}/pairs/{pair_id}", get(pair))
        .fallback(|| async { ServiceError::BadRequest("no such endpoint".into()) })
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Like [`serve`], but stops accepting connections once `shutdown` resolves
/// and returns after in-flight requests finish.
pub async fn serve_until<F>(listener: tokio::net::TcpListener, state: Arc<AppState>, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ServiceResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn parse_id(raw: &str) -> ServiceResult<Uuid> {
    Uuid::parse_str(raw).map_err(|_| ServiceError::UnknownSession(raw.to_string()))
}

/// Session work is CPU-bound or does synchronous file I/O; keep it off the
/// async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ServiceResult<T> + Send + 'static) -> ServiceResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Corrupt(format!("worker panicked: {e}")))?
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Bytes,
) -> ServiceResult<(StatusCode, Json<CreateSessionResponse>)> {
    let request: CreateSessionRequest = parse_body(&body)?;
    let session = blocking(move || app.create(request)).await?;
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            session_id: session.id(),
            status: session.status(),
        }),
    ))
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    k: Option<usize>,
}

async fn next_pairs(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<NextQuery>,
) -> ServiceResult<Json<NextPairsResponse>> {
    let session = app.session(&parse_id(&id)?)?;
    let k = query.k.unwrap_or(1);
    Ok(Json(blocking(move || session.next_pairs(k)).await?))
}

async fn submit_label(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ServiceResult<Json<LabelAck>> {
    let session = app.session(&parse_id(&id)?)?;
    let submission: LabelSubmission = parse_body(&body)?;
    Ok(Json(blocking(move || session.submit_label(submission)).await?))
}

async fn retrain(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ServiceResult<Json<SessionStatus>> {
    let session = app.session(&parse_id(&id)?)?;
    Ok(Json(blocking(move || session.retrain_now()).await?))
}

async fn status(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ServiceResult<Json<SessionStatus>> {
    Ok(Json(app.session(&parse_id(&id)?)?.status()))
}

async fn pair(
    State(app): State<Arc<AppState>>,
    UrlPath((id, pair_id)): UrlPath<(String, String)>,
) -> ServiceResult<Json<PairDetail>> {
    let session = app.session(&parse_id(&id)?)?;
    let pair_id = pair_id
        .parse::<u64>()
        .map_err(|_| ServiceError::BadRequest(format!("pair id `{pair_id}` is not an integer")))?;
    Ok(Json(session.pair(PairId(pair_id))?))
}
