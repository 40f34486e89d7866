//! HTTP front end for a threadloom [`Engine`].
//!
//! Every request body is an envelope
//! `{"version": 1, "request_id": "...", "expected_revision": 7, "payload": {...}}`
//! and every response is `{"version": 1, "request_id": "...", "revision": 8, "payload": ...}`.
//! Failures carry `{"error": {"code": "...", "message": "..."}}` in place of the payload.

mod error;
mod routes;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::Router;
use threadloom_core::engine::Engine;

pub use error::ApiError;
pub use routes::{Envelope, HighlightRequest, Reply};

pub const API_VERSION: u32 = 1;
const BODY_LIMIT: usize = 32 << 20;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    next_request: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        AppState { engine, next_request: Arc::new(AtomicU64::new(1)) }
    }

    fn request_id(&self, supplied: Option<String>) -> String {
        supplied.unwrap_or_else(|| format!("r{}", self.next_request.fetch_add(1, Ordering::Relaxed)))
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    routes::routes().layer(DefaultBodyLimit::max(BODY_LIMIT)).with_state(AppState::new(engine))
}

/// Serves until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
