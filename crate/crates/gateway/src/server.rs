//! HTTP routes and the telemetry WebSocket.

use crate::api::{ErrorBody, ProtocolCell, StartTrialRequest, StopResponse, TrialSummary, TrialsResponse, VolumeRequest};
use crate::engine::{CommandError, EngineHandle};
use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use std::net::SocketAddr;
use swaycue_core::dispersion::{dispersion_export, region_boundaries, DispersionDataset};
use swaycue_core::metrics::MetricsError;
use swaycue_core::session::{complete_cells, protocol_order, report_from_records, TrialOrder};
use swaycue_core::TrialRecord;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot};
use tokio::task::JoinHandle;
use uuid::Uuid;

pub const DEFAULT_BIND: &str = "127.0.0.1:8787";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(#[from] std::io::Error),
}

/// An error response with a machine-readable code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: error.to_string(), message: message.into() } }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<CommandError> for ApiError {
    fn from(e: CommandError) -> Self {
        let status = match e {
            CommandError::CalibrationMissing | CommandError::Busy | CommandError::TrialRunning => StatusCode::CONFLICT,
            CommandError::InvalidVolume(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CommandError::EngineStopped => StatusCode::SERVICE_UNAVAILABLE,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), "InvalidRequest", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(engine: EngineHandle) -> Router {
    Router::new()
        .route("/ws/telemetry", get(telemetry))
        .route("/state", get(state))
        .route("/calibrate", post(calibrate))
        .route("/trial/start", post(start_trial))
        .route("/trial/stop", post(stop_trial))
        .route("/volume", put(set_volume))
        .route("/trials", get(trials))
        .route("/report", get(report))
        .route("/dispersion", get(boundaries))
        .route("/dispersion/{trial_id}", get(dispersion))
        .with_state(engine)
}

/// A server running on a background task.
pub struct RunningGateway {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningGateway {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and waits for the server task.
    pub async fn shutdown(mut self) -> Result<(), GatewayError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.wait().await
    }

    /// Waits until the server stops on its own.
    pub async fn wait(self) -> Result<(), GatewayError> {
        match self.task.await {
            Ok(r) => Ok(r?),
            Err(e) => Err(GatewayError::Serve(std::io::Error::other(e))),
        }
    }
}

/// Binds `addr` and serves the engine in the background. A busy port is an
/// error here rather than in the task.
pub async fn serve(addr: SocketAddr, engine: EngineHandle) -> Result<RunningGateway, GatewayError> {
    let listener = TcpListener::bind(addr).await.map_err(|source| GatewayError::Bind { addr, source })?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(engine);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    log::info!("gateway listening on http://{addr}");
    Ok(RunningGateway { addr, shutdown: Some(tx), task })
}

async fn telemetry(ws: WebSocketUpgrade, State(engine): State<EngineHandle>) -> Response {
    let rx = engine.subscribe();
    ws.on_upgrade(move |socket| stream_frames(socket, rx))
}

async fn stream_frames(mut socket: WebSocket, mut rx: broadcast::Receiver<std::sync::Arc<str>>) {
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("telemetry client skipped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn state(State(engine): State<EngineHandle>) -> ApiResult<Response> {
    Ok(Json(engine.state().await?).into_response())
}

async fn calibrate(State(engine): State<EngineHandle>) -> ApiResult<Response> {
    engine.calibrate().await?;
    Ok((StatusCode::ACCEPTED, Json(engine.state().await?)).into_response())
}

async fn start_trial(
    State(engine): State<EngineHandle>,
    body: Result<Json<StartTrialRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    engine.start_trial(req).await?;
    Ok((StatusCode::ACCEPTED, Json(engine.state().await?)).into_response())
}

async fn stop_trial(State(engine): State<EngineHandle>) -> ApiResult<Json<StopResponse>> {
    Ok(Json(engine.stop_trial().await?))
}

async fn set_volume(
    State(engine): State<EngineHandle>,
    body: Result<Json<VolumeRequest>, JsonRejection>,
) -> ApiResult<Json<VolumeRequest>> {
    let Json(req) = body?;
    let v = engine.set_volume(req.reference_volume).await?;
    Ok(Json(VolumeRequest { reference_volume: v }))
}

async fn load_subject_records(engine: &EngineHandle) -> ApiResult<Vec<TrialRecord>> {
    let store = engine.store().clone();
    let id = engine.subject().id.clone();
    tokio::task::spawn_blocking(move || store.load(&id))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)
}

async fn trials(State(engine): State<EngineHandle>) -> ApiResult<Json<TrialsResponse>> {
    let records = load_subject_records(&engine).await?;
    let done = complete_cells(&records);
    let cells: Vec<ProtocolCell> = protocol_order(TrialOrder::Fixed)
        .into_iter()
        .map(|(condition, abf_on)| ProtocolCell {
            condition,
            abf_on,
            trial_id: done.get(&(condition, abf_on)).map(|r| r.id),
        })
        .collect();
    let protocol_complete = cells.iter().all(|c| c.trial_id.is_some());
    Ok(Json(TrialsResponse { trials: records.iter().map(TrialSummary::from).collect(), cells, protocol_complete }))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(State(engine): State<EngineHandle>, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    let store = engine.store().clone();
    let records = tokio::task::spawn_blocking(move || store.load_all())
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    let report = report_from_records(&records).map_err(|e| match e {
        MetricsError::MissingCondition { .. } => ApiError::new(StatusCode::CONFLICT, "MissingCondition", e.to_string()),
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ReportUndefined", other.to_string()),
    })?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], report.to_csv()).into_response()),
        Some(other) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "InvalidRequest",
            format!("unknown format `{other}` (json|csv)"),
        )),
    }
}

async fn boundaries() -> Json<DispersionDataset> {
    Json(DispersionDataset { points: Vec::new(), boundaries: region_boundaries() })
}

async fn dispersion(State(engine): State<EngineHandle>, Path(trial_id): Path<String>) -> ApiResult<Json<DispersionDataset>> {
    let id = Uuid::parse_str(&trial_id)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", format!("bad trial id: {e}")))?;
    let store = engine.store().clone();
    let record = tokio::task::spawn_blocking(move || store.find(id))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "TrialNotFound", format!("no trial {id}")))?;
    Ok(Json(dispersion_export(&record.samples)))
}
