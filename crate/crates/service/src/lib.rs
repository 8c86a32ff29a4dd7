//! HTTP service over one refinement session. Reads and writes go through a
//! single session lock, so every response reflects one state version and
//! mutations are applied one at a time. Judgments land in the proposal queue
//! and are consumed when a step reaches them.

mod session;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use topicbench::agent::{AgentError, Judgment};
use topicbench::assessment::RawRating;

pub use session::{
    CorrelationView, KeywordBar, ManualAction, ProjectedDoc, ProjectedTopic, ProjectionView, ProposalView,
    RatingsResponse, Representative, RunRequest, RunResponse, RunStop, Session, SessionSnapshot, StepResponse,
    TopicCard, TopicMetrics, TopicReview, TopicSummary,
};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn from_agent(e: AgentError) -> Self {
        if e.is_input_error() {
            ApiError::Unprocessable(e.to_string())
        } else {
            ApiError::Internal(e.to_string())
        }
    }

    pub fn from_core(e: topicbench::Error) -> Self {
        if e.is_input_error() {
            ApiError::Unprocessable(e.to_string())
        } else {
            ApiError::Internal(e.to_string())
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.to_string() };
        (self.status(), axum::Json(body)).into_response()
    }
}

/// JSON extractor whose rejections use the service's error body.
struct Json<T>(T);

impl<T, S> FromRequest<S> for Json<T>
where
    axum::Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(v)) => Ok(Json(v)),
            Err(e @ JsonRejection::JsonDataError(_)) => Err(ApiError::Unprocessable(e.body_text())),
            Err(e) => Err(ApiError::BadRequest(e.body_text())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Server(#[source] std::io::Error),
}

pub type SharedSession = Arc<Mutex<Session>>;

/// Runs `f` on a blocking thread while holding the session lock.
async fn with_session<T: Send + 'static>(
    session: SharedSession,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("worker: {e}")))?
}

type ApiResult<T> = Result<axum::Json<T>, ApiError>;

async fn get_state(State(s): State<SharedSession>) -> ApiResult<SessionSnapshot> {
    with_session(s, |s| Ok(s.snapshot())).await.map(axum::Json)
}

async fn get_topics(State(s): State<SharedSession>) -> ApiResult<Vec<TopicCard>> {
    with_session(s, |s| Ok(s.topic_cards())).await.map(axum::Json)
}

async fn get_topic_packet(State(s): State<SharedSession>, Path(k): Path<usize>) -> ApiResult<TopicReview> {
    with_session(s, move |s| s.topic_review(k)).await.map(axum::Json)
}

async fn get_projection(State(s): State<SharedSession>) -> ApiResult<ProjectionView> {
    with_session(s, |s| s.projection()).await.map(axum::Json)
}

async fn get_correlations(State(s): State<SharedSession>) -> ApiResult<CorrelationView> {
    with_session(s, |s| Ok(s.correlations())).await.map(axum::Json)
}

async fn get_proposals(State(s): State<SharedSession>) -> ApiResult<Vec<ProposalView>> {
    with_session(s, |s| Ok(s.proposals())).await.map(axum::Json)
}

async fn post_judgment(
    State(s): State<SharedSession>,
    Path(id): Path<u64>,
    Json(judgment): Json<Judgment>,
) -> ApiResult<ProposalView> {
    with_session(s, move |s| s.judge(id, judgment)).await.map(axum::Json)
}

async fn post_action(
    State(s): State<SharedSession>,
    Json(action): Json<ManualAction>,
) -> ApiResult<topicbench::audit::AuditRecord> {
    with_session(s, move |s| s.act(action)).await.map(axum::Json)
}

async fn post_step(State(s): State<SharedSession>) -> ApiResult<StepResponse> {
    with_session(s, |s| s.step()).await.map(axum::Json)
}

/// The body is optional; an empty one uses the configured stopping rule.
async fn post_run(State(s): State<SharedSession>, body: axum::body::Bytes) -> ApiResult<RunResponse> {
    let req: RunRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RunRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(e.to_string()))?
    };
    with_session(s, move |s| s.run(req)).await.map(axum::Json)
}

#[derive(Debug, Deserialize)]
struct AuditQuery {
    #[serde(default)]
    from: u64,
}

async fn get_audit(
    State(s): State<SharedSession>,
    Query(q): Query<AuditQuery>,
) -> ApiResult<Vec<topicbench::audit::AuditRecord>> {
    with_session(s, move |s| Ok(s.audit(q.from))).await.map(axum::Json)
}

async fn get_metrics(State(s): State<SharedSession>) -> ApiResult<topicbench::harness::MetricsExport> {
    with_session(s, |s| Ok(s.metrics())).await.map(axum::Json)
}

async fn get_packets(State(s): State<SharedSession>) -> ApiResult<Vec<topicbench::assessment::TopicPacket>> {
    with_session(s, |s| s.packets()).await.map(axum::Json)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RatingBody {
    Many(Vec<RawRating>),
    One(RawRating),
}

async fn post_ratings(State(s): State<SharedSession>, Json(body): Json<RatingBody>) -> ApiResult<RatingsResponse> {
    let ratings = match body {
        RatingBody::Many(v) => v,
        RatingBody::One(r) => vec![r],
    };
    with_session(s, move |s| s.rate(ratings)).await.map(axum::Json)
}

pub fn router(session: SharedSession) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/topics", get(get_topics))
        .route("/topics/{k}/packet", get(get_topic_packet))
        .route("/projection", get(get_projection))
        .route("/correlations", get(get_correlations))
        .route("/proposals", get(get_proposals))
        .route("/proposals/{id}/judgment", post(post_judgment))
        .route("/actions", post(post_action))
        .route("/step", post(post_step))
        .route("/run", post(post_run))
        .route("/audit", get(get_audit))
        .route("/metrics", get(get_metrics))
        .route("/packets", get(get_packets))
        .route("/ratings", post(post_ratings))
        .with_state(session)
}

/// Binds `addr` and serves `session` until the process ends.
pub async fn serve(session: Session, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    let app = router(Arc::new(Mutex::new(session)));
    axum::serve(listener, app).await.map_err(ServeError::Server)
}
