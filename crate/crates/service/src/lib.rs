//! Local HTTP/JSON service over a single campaign file.
//!
//! Reads are served from an immutable snapshot. Mutations are serialized
//! through one writer lock, applied to a copy, persisted atomically and only
//! then published, so a failed request leaves both memory and disk untouched.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::sync::Mutex;

use epal_core::api::{
    point_views, ApiStatusView, EmbeddingView, ErrorBody, LogView, MeasurementRequest, OverrideRequest,
    OverrideResponse, PointView, ReportView, StepResponse, SuggestionsView,
};
use epal_core::campaign::{Campaign, Measurement};
use epal_core::embed::EmbeddingRecord;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] epal_core::Error),

    #[error("malformed request body: {0}")]
    BadRequest(String),

    #[error("a step is already running")]
    Busy,

    #[error("background task failed: {0}")]
    Task(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use epal_core::Error as E;
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Busy => StatusCode::CONFLICT,
            ServiceError::Core(E::NotFound(_)) => StatusCode::NOT_FOUND,
            ServiceError::Core(E::InvalidArgument(_) | E::Parse { .. } | E::State(_) | E::Domain(_)) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

pub struct AppState {
    path: PathBuf,
    snapshot: RwLock<Arc<Campaign>>,
    writer: Mutex<()>,
    stepping: AtomicBool,
}

impl AppState {
    pub fn new(campaign: Campaign, path: impl Into<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            path: path.into(),
            snapshot: RwLock::new(Arc::new(campaign)),
            writer: Mutex::new(()),
            stepping: AtomicBool::new(false),
        })
    }

    pub fn open(path: &Path) -> Result<Arc<Self>, ServiceError> {
        Ok(Self::new(Campaign::load(path)?, path))
    }

    pub fn snapshot(&self) -> Arc<Campaign> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Applies `f` to a copy of the campaign, saves it and publishes it.
    async fn mutate<T, F>(&self, f: F) -> Result<T, ServiceError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Campaign) -> epal_core::Result<T> + Send + 'static,
    {
        let _writer = self.writer.lock().await;
        let mut next = (*self.snapshot()).clone();
        let path = self.path.clone();
        let (next, out) = tokio::task::spawn_blocking(move || -> Result<_, ServiceError> {
            let out = f(&mut next)?;
            next.save(&path)?;
            Ok((next, out))
        })
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))??;
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
        Ok(out)
    }
}

struct StepGuard<'a>(&'a AtomicBool);

impl Drop for StepGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/points", get(points))
        .route("/suggestions", get(suggestions))
        .route("/report", get(report))
        .route("/embedding", get(embedding))
        .route("/log", get(log))
        .route("/measurements", post(measurements))
        .route("/override", post(override_point))
        .route("/step", post(step))
        .with_state(state)
}

async fn status(State(s): State<Arc<AppState>>) -> ApiResult<ApiStatusView> {
    Ok(Json(ApiStatusView::of(&s.snapshot())))
}

async fn points(State(s): State<Arc<AppState>>) -> ApiResult<Vec<PointView>> {
    Ok(Json(point_views(&s.snapshot())))
}

#[derive(Debug, serde::Deserialize)]
struct BatchQuery {
    batch: Option<usize>,
}

async fn suggestions(State(s): State<Arc<AppState>>, Query(q): Query<BatchQuery>) -> ApiResult<SuggestionsView> {
    let c = s.snapshot();
    let batch = c.suggest_batch(q.batch.unwrap_or(c.config.pal.batch_size))?;
    Ok(Json(SuggestionsView {
        points: batch.points,
        converged: batch.converged,
        budget_exhausted: batch.budget_exhausted,
        override_target: c.override_target,
    }))
}

async fn report(State(s): State<Arc<AppState>>) -> ApiResult<ReportView> {
    let c = s.snapshot();
    let report = match &c.report {
        Some(r) => r.clone(),
        None => tokio::task::spawn_blocking(move || c.explain())
            .await
            .map_err(|e| ServiceError::Task(e.to_string()))??,
    };
    Ok(Json(ReportView {
        iteration: s.snapshot().pal.iteration,
        markdown: report.markdown,
        records: report.records,
        prompt: report.prompt,
    }))
}

async fn embedding(State(s): State<Arc<AppState>>) -> ApiResult<EmbeddingView> {
    let coords = match &s.snapshot().embedding {
        Some(e) => e.coords.clone(),
        None => s.mutate(|c| Ok(c.embedding()?.coords.clone())).await?,
    };
    let records = coords
        .iter()
        .enumerate()
        .map(|(id, p)| EmbeddingRecord { id, x: p[0], y: p[1] })
        .collect();
    Ok(Json(EmbeddingView { records }))
}

async fn log(State(s): State<Arc<AppState>>) -> ApiResult<LogView> {
    Ok(Json(LogView {
        entries: s.snapshot().log.clone(),
    }))
}

async fn measurements(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<ApiStatusView> {
    let req: MeasurementRequest = parse_body(&body)?;
    let mut m = Measurement::new(req.point_id, req.hardness, req.inverse_elasticity);
    m.note = req.note.unwrap_or_default();
    m.timestamp = req.timestamp;
    s.mutate(move |c| c.ingest(m)).await?;
    Ok(Json(ApiStatusView::of(&s.snapshot())))
}

async fn override_point(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<OverrideResponse> {
    let req: OverrideRequest = parse_body(&body)?;
    let out = s
        .mutate(move |c| {
            let id = match (req.point_id, req.coordinates) {
                (Some(id), None) => id,
                (None, Some(x)) => c.find_point(&x).ok_or_else(|| {
                    epal_core::Error::NotFound(format!("no grid point at coordinates {x:?}"))
                })?,
                _ => {
                    return Err(epal_core::Error::InvalidArgument(
                        "give exactly one of point_id and coordinates".into(),
                    ))
                }
            };
            c.override_suggestion(id)?;
            Ok(OverrideResponse {
                point_id: id,
                suggestions: c.suggestions.clone(),
            })
        })
        .await?;
    Ok(Json(out))
}

async fn step(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, ServiceError> {
    if !body.is_empty() {
        parse_body::<serde_json::Value>(&body)?;
    }
    if s.stepping
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .is_err()
    {
        return Err(ServiceError::Busy);
    }
    let _guard = StepGuard(&s.stepping);
    let a = s.mutate(|c| c.step()).await?;
    let body = StepResponse {
        iteration: a.iteration,
        counts: a.counts,
        converged: a.converged,
        suggestions: a.suggestions,
        embedding_refreshed: a.embedding_refreshed,
        report_digest: hex_digest(&a.report.markdown),
    };
    Ok(Json(body).into_response())
}

fn hex_digest(text: &str) -> String {
    ApiStatusView::digest(text)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve_with<F>(listener: tokio::net::TcpListener, state: Arc<AppState>, shutdown: F) -> Result<(), ServiceError>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    tracing::info!(addr = %listener.local_addr()?, campaign = %state.path().display(), "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_with(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
