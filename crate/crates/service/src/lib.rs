//! Live annotation sessions over HTTP.
//!
//! Every session owns a fixed candidate pool, a label log and a reward model.
//! `next` serves the strategy's picks for the current round, labels close the
//! round once the batch is full, and the model is retrained without blocking
//! reads. All routes live under `/v1`; errors are `{code, message, detail}`.

pub mod api;
mod error;
mod server;
pub mod session;

pub use error::{ServiceError, ServiceResult};
pub use server::{router, serve, serve_until, AppState};
pub use session::{session_pool, Session};
