//! HTTP/JSON routes over [`OakService`].
//!
//! Handlers parse their own bodies so malformed JSON gets the same error
//! envelope as every other failure: `{"error": code, "message": text}`.
//! Service calls may block on disk or remote providers and run on the
//! blocking thread pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use oak_core::decision::Decision;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::search::SearchRequest;
use crate::service::OakService;

pub const DEGRADED_HEADER: &str = "x-oak-degraded";
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

type AppState = Arc<OakService>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        Self::new(status, e.code(), e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

async fn blocking<T, F>(svc: AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&OakService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn content_type(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "empty_mime", "Content-Type header is required"))
}

pub fn router(service: AppState) -> Router {
    let api = Router::new()
        .route("/media", post(put_media))
        .route("/media/{id}", get(get_media))
        .route("/catalog", post(post_catalog))
        .route("/documents", post(post_document))
        .route("/triplets", post(post_triplet))
        .route("/search", post(search))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/defect", post(attach_defect))
        .route("/sessions/{id}/assessed", post(mark_assessed))
        .route("/sessions/{id}/measurements", post(log_measurement))
        .route("/sessions/{id}/suggestion", post(suggest))
        .route("/sessions/{id}/decision", post(record_decision))
        .route("/ratings", post(rate))
        .route("/defects/{id}", get(get_defect))
        .route("/bench/run", post(run_bench))
        .route_layer(middleware::from_fn_with_state(service.clone(), require_token));
    Router::new()
        .route("/health", get(health))
        .merge(api)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}

async fn require_token(State(svc): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &svc.config().bearer_token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

#[derive(Serialize)]
struct MediaIdBody {
    media_id: String,
}

async fn put_media(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Json<MediaIdBody>> {
    let mime = content_type(&headers)?;
    let out = blocking(svc, move |s| s.put_media(&body, &mime)).await?;
    Ok(Json(MediaIdBody {
        media_id: out.media_id.to_string(),
    }))
}

async fn get_media(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (bytes, mime) = blocking(svc, move |s| s.get_media(&id)).await?;
    let mime = HeaderValue::from_str(&mime).unwrap_or(HeaderValue::from_static("application/octet-stream"));
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn post_catalog(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let json = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "body is not utf-8"))?;
    let report = blocking(svc, move |s| s.ingest_catalog_json(&json)).await?;
    Ok(Json(report).into_response())
}

async fn post_document(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let mime = content_type(&headers)?;
    let report = blocking(svc, move |s| s.ingest_document(&body, &mime)).await?;
    Ok(Json(report).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletBody {
    subject: String,
    relation: String,
    object: String,
}

async fn post_triplet(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let t: TripletBody = parse(&body)?;
    let echo = blocking(svc, move |s| s.insert_triplet(&t.subject, &t.relation, &t.object)).await?;
    Ok(Json(echo).into_response())
}

async fn search(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: SearchRequest = parse(&body)?;
    let outcome = blocking(svc, move |s| s.search(&req)).await?;
    let mut resp = Json(outcome.results).into_response();
    if outcome.degraded {
        resp.headers_mut().insert(DEGRADED_HEADER, HeaderValue::from_static("true"));
    }
    Ok(resp)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartBody {
    product_id: String,
    operator_id: String,
}

async fn start_session(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let b: StartBody = parse(&body)?;
    let session = blocking(svc, move |s| s.start_session(&b.product_id, &b.operator_id)).await?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn get_session(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = blocking(svc, move |s| s.session(&id)).await?;
    Ok(Json(session).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DefectBody {
    defect_id: String,
}

async fn attach_defect(State(svc): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let b: DefectBody = parse(&body)?;
    let session = blocking(svc, move |s| s.attach_defect(&id, &b.defect_id)).await?;
    Ok(Json(session).into_response())
}

async fn mark_assessed(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let guide = blocking(svc, move |s| s.mark_assessed(&id)).await?;
    Ok(Json(guide).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementBody {
    metric: String,
    value: f64,
    #[serde(default)]
    unit: String,
    #[serde(default)]
    commentary_media_id: Option<String>,
}

async fn log_measurement(State(svc): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let b: MeasurementBody = parse(&body)?;
    let record = blocking(svc, move |s| {
        s.log_measurement(&id, &b.metric, b.value, &b.unit, b.commentary_media_id.as_deref())
    })
    .await?;
    Ok(Json(record).into_response())
}

async fn suggest(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let suggestion = blocking(svc, move |s| s.suggest(&id)).await?;
    Ok(Json(suggestion).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    decision: Decision,
    #[serde(default)]
    override_comment: Option<String>,
}

async fn record_decision(State(svc): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let b: DecisionBody = parse(&body)?;
    let session = blocking(svc, move |s| s.record_decision(&id, b.decision, b.override_comment.as_deref())).await?;
    Ok(Json(session).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingBody {
    node_id: String,
    operator_id: String,
    score: i64,
}

async fn rate(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let b: RatingBody = parse(&body)?;
    let aggregate = blocking(svc, move |s| s.rate(&b.node_id, &b.operator_id, b.score)).await?;
    Ok(Json(aggregate).into_response())
}

async fn get_defect(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let view = blocking(svc, move |s| s.defect(&id)).await?;
    Ok(Json(view).into_response())
}

async fn health(State(svc): State<AppState>) -> ApiResult<Response> {
    let health = blocking(svc, |s| Ok(s.health())).await?;
    Ok(Json(health).into_response())
}

fn default_ns() -> Vec<usize> {
    vec![1, 5, 10]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchBody {
    dataset: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_ns")]
    ns: Vec<usize>,
}

async fn run_bench(State(svc): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let b: BenchBody = parse(&body)?;
    let report = blocking(svc, move |s| s.run_benchmark(&b.dataset, b.seed, &b.ns)).await?;
    Ok(Json(report).into_response())
}

/// Serves until Ctrl-C.
pub async fn serve(service: AppState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
