//! HTTP + JSON front end.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use super::ServerState;
use crate::error::Error;

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            Error::NoPartition => StatusCode::SERVICE_UNAVAILABLE,
            Error::UnknownSegment(_) => StatusCode::NOT_FOUND,
            Error::IndexOutOfRange { .. } | Error::InvalidParameter(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

#[derive(Deserialize)]
struct PositionReport {
    session: String,
    view: usize,
}

#[derive(Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

async fn domain(State(state): State<Arc<ServerState>>) -> Result<Response, ApiError> {
    Ok(Json(state.domain_info()?).into_response())
}

async fn position(
    State(state): State<Arc<ServerState>>,
    Json(report): Json<PositionReport>,
) -> Result<Response, ApiError> {
    let fetch = state.position_report(&report.session, report.view)?;
    Ok(Json(serde_json::json!({ "fetch": fetch })).into_response())
}

async fn segment(
    State(state): State<Arc<ServerState>>,
    Path(id): Path<usize>,
    Query(q): Query<SessionQuery>,
) -> Result<Response, ApiError> {
    let payload = state.segment_fetch(q.session.as_deref(), id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], payload.to_vec()).into_response())
}

async fn stats(State(state): State<Arc<ServerState>>, Query(q): Query<SessionQuery>) -> Response {
    Json(state.stats(q.session.as_deref())).into_response()
}

pub fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/api/domain", get(domain))
        .route("/api/position", post(position))
        .route("/api/segment/{id}", get(segment))
        .route("/api/stats", get(stats))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<ServerState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
