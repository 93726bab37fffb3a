//! Read-only HTTP/JSON API over a saved venue recommendation model.
//!
//! | method | path                      | body / query                      |
//! |--------|---------------------------|-----------------------------------|
//! | GET    | `/v1/health`              |                                   |
//! | GET    | `/v1/venues`              |                                   |
//! | GET    | `/v1/vocabulary`          | `?q=substr&offset=0&limit=50`     |
//! | GET    | `/v1/coefficients/{venue}`| `?top=30`                         |
//! | GET    | `/v1/model`               |                                   |
//! | POST   | `/v1/recommend`           | `{"fields": [..]}`                |
//! | POST   | `/v1/whatif`              | `{"base_fields", "add", "remove"}`|
//!
//! Field names missing from the model vocabulary are ignored and echoed back
//! under `ignored_fields`.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use venuerec::dataset::Covariates;
use venuerec::learners::{BaseLearners, Recommendation, TrainedModel};
use venuerec::store::{load_model, ModelFile};

pub const DEFAULT_TOP: usize = 30;
pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendRequest {
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    #[serde(flatten)]
    pub recommendation: Recommendation,
    pub ignored_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub base_fields: Vec<String>,
    #[serde(default)]
    pub add: Vec<String>,
    #[serde(default)]
    pub remove: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub base: Recommendation,
    pub modified: Recommendation,
    /// Fields of the modified query: `(base ∪ add) \ remove`.
    pub modified_fields: Vec<String>,
    /// Per venue, modified score minus base score (log scale).
    pub delta: BTreeMap<String, f64>,
    pub delta_citations: BTreeMap<String, f64>,
    pub ignored_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub field: String,
    pub weight: f64,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<venuerec::Error> for ApiError {
    fn from(e: venuerec::Error) -> Self {
        let status = match e {
            venuerec::Error::UnknownVenue(_) => StatusCode::NOT_FOUND,
            venuerec::Error::InvalidInput(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn query_vector(model: &TrainedModel, fields: &[String]) -> (Covariates, Vec<String>) {
    let (features, ignored) = model.featurize(fields);
    (Covariates::Sparse(features), ignored)
}

/// Scores and recommendation for a bag of fields, as served by `/v1/recommend`.
pub fn recommend_fields(model: &TrainedModel, fields: &[String]) -> venuerec::Result<RecommendResponse> {
    let (x, ignored_fields) = query_vector(model, fields);
    Ok(RecommendResponse {
        recommendation: model.recommend(&x)?,
        ignored_fields,
    })
}

fn dedup_in_order(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

pub fn what_if(model: &TrainedModel, req: &WhatIfRequest) -> Result<WhatIfResponse, ApiError> {
    let remove: BTreeSet<&String> = req.remove.iter().collect();
    let clash: Vec<&String> = req.add.iter().filter(|f| remove.contains(f)).collect();
    if !clash.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("fields both added and removed: {clash:?}"),
        ));
    }
    let modified_fields = dedup_in_order(
        req.base_fields
            .iter()
            .chain(&req.add)
            .filter(|f| !remove.contains(f))
            .cloned(),
    );
    let (xb, _) = query_vector(model, &req.base_fields);
    let (xm, _) = query_vector(model, &modified_fields);
    let base = model.recommend(&xb)?;
    let modified = model.recommend(&xm)?;
    let delta = model
        .venues
        .iter()
        .map(|v| (v.clone(), modified.scores[v] - base.scores[v]))
        .collect();
    let delta_citations = model
        .venues
        .iter()
        .map(|v| (v.clone(), modified.predicted_citations[v] - base.predicted_citations[v]))
        .collect();
    let ignored_fields = dedup_in_order(
        req.base_fields
            .iter()
            .chain(&req.add)
            .chain(&req.remove)
            .filter(|f| model.vocabulary.index_of(f).is_none())
            .cloned(),
    );
    Ok(WhatIfResponse {
        base,
        modified,
        modified_fields,
        delta,
        delta_citations,
        ignored_fields,
    })
}

type Shared = Arc<ModelFile>;

async fn health(State(file): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_version": file.format_version }))
}

async fn venues(State(file): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "venues": file.model.venues }))
}

#[derive(Debug, Deserialize)]
struct VocabularyQuery {
    q: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn vocabulary(State(file): State<Shared>, query: Result<Query<VocabularyQuery>, QueryRejection>) -> ApiResult<serde_json::Value> {
    let Query(query) = query?;
    let needle = query.q.unwrap_or_default().to_lowercase();
    let offset = query.offset.unwrap_or(0);
    let limit = query.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let matches: Vec<&String> = file
        .model
        .vocabulary
        .fields()
        .iter()
        .filter(|f| f.to_lowercase().contains(&needle))
        .collect();
    let page: Vec<&String> = matches.iter().skip(offset).take(limit).copied().collect();
    Ok(Json(json!({
        "total": matches.len(),
        "offset": offset,
        "limit": limit,
        "fields": page,
    })))
}

#[derive(Debug, Deserialize)]
struct TopQuery {
    top: Option<usize>,
}

async fn coefficients(
    State(file): State<Shared>,
    UrlPath(venue): UrlPath<String>,
    query: Result<Query<TopQuery>, QueryRejection>,
) -> ApiResult<serde_json::Value> {
    let Query(query) = query?;
    Ok(Json(coefficient_report(&file.model, &venue, query.top.unwrap_or(DEFAULT_TOP))?))
}

/// Body of `GET /v1/coefficients/{venue}`.
pub fn coefficient_report(model: &TrainedModel, venue: &str, top: usize) -> venuerec::Result<serde_json::Value> {
    let coefficients: Vec<Coefficient> = model
        .coefficients(venue, top)?
        .into_iter()
        .map(|(field, weight)| Coefficient { field, weight })
        .collect();
    let venue_effects = model
        .venue_effects()
        .map(|e| e.into_iter().collect::<BTreeMap<String, f64>>());
    Ok(json!({
        "venue": venue,
        "coefficients": coefficients,
        "venue_effects": venue_effects,
    }))
}

async fn model_info(State(file): State<Shared>) -> Json<serde_json::Value> {
    let m = &file.model;
    let learner = match m.base_learners {
        BaseLearners::T { .. } => "t",
        BaseLearners::S { .. } => "s",
    };
    Json(json!({
        "format_version": file.format_version,
        "created_at": file.created_at,
        "learner": learner,
        "weighting": m.config.weighting,
        "target_transform": m.config.target_transform,
        "venues": m.venues,
        "vocabulary_size": m.vocabulary.len(),
        "vocabulary_built_from": m.vocabulary.built_from(),
        "per_venue_lambda": m.per_venue_lambda,
        "propensity_c": m.propensity.as_ref().map(|p| p.selected_c),
        "intercepts": m.venues.iter().zip(m.intercepts()).map(|(v, b)| (v.clone(), b)).collect::<BTreeMap<_, _>>(),
        "dataset_fingerprint": m.dataset_fingerprint,
        "feature_space_fingerprint": file.feature_space_fingerprint,
    }))
}

async fn recommend(State(file): State<Shared>, body: Result<Json<RecommendRequest>, JsonRejection>) -> ApiResult<RecommendResponse> {
    let Json(req) = body?;
    Ok(Json(recommend_fields(&file.model, &req.fields)?))
}

async fn whatif(State(file): State<Shared>, body: Result<Json<WhatIfRequest>, JsonRejection>) -> ApiResult<WhatIfResponse> {
    let Json(req) = body?;
    Ok(Json(what_if(&file.model, &req)?))
}

pub fn router(file: ModelFile) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/venues", get(venues))
        .route("/v1/vocabulary", get(vocabulary))
        .route("/v1/coefficients/{venue}", get(coefficients))
        .route("/v1/model", get(model_info))
        .route("/v1/recommend", post(recommend))
        .route("/v1/whatif", post(whatif))
        .with_state(Arc::new(file))
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot load model: {0}")]
    Model(#[from] venuerec::Error),
    #[error("invalid bind address `{0}`")]
    Address(String),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Load `model_path` and serve it on `bind` until interrupted.
pub fn serve(model_path: &Path, bind: &str) -> Result<(), ServeError> {
    let file = load_model(model_path)?;
    let addr: SocketAddr = bind.parse().map_err(|_| ServeError::Address(bind.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("serving {} on http://{}", model_path.display(), listener.local_addr()?);
        axum::serve(listener, router(file))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
