//! Read-only HTTP endpoint over a frozen session graph.
//!
//! Routes:
//!
//! * `GET /health`: graph statistics, `503` until a graph is installed.
//! * `GET /recommendations/{object_id}?k=&variant=&scope=&weights=`
//! * `POST /recommendations/pathway` with a JSON id list, or an object
//!   `{"objects": [...], "k": .., "variant": .., "scope": .., "weights": ..}`.
//!
//! Errors are `{"error": {"code": .., "message": ..}}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sessrec_core::engine::{recommend_pathway, EngineError};
use sessrec_core::graph::{GraphError, GraphStats};
use sessrec_core::ingest::{EdgeFileSpec, LoadOptions, ObjectCatalog};
use sessrec_core::{recommend, ClassWeights, NodeId, RecommendParams, RecommendationVector, SessionGraph, Variant};

/// Startup configuration.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: std::net::IpAddr,
    pub port: u16,
    pub edges: Vec<EdgeFileSpec>,
    pub catalog: Option<PathBuf>,
    pub load: LoadOptions,
    /// Applied when a request leaves a parameter out.
    pub defaults: RecommendParams,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("port must be between 1 and 65535")]
    BadPort,
    #[error("at least one edge file is required")]
    NoEdgeFiles,
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::BadPort);
        }
        if self.edges.is_empty() {
            return Err(ConfigError::NoEdgeFiles);
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

struct Served {
    graph: SessionGraph,
    catalog: Option<ObjectCatalog>,
}

/// Shared handler state. Starts empty; [`AppState::install`] publishes the
/// graph exactly once.
#[derive(Clone)]
pub struct AppState {
    served: Arc<OnceLock<Served>>,
    defaults: Arc<RecommendParams>,
}

impl AppState {
    pub fn pending(defaults: RecommendParams) -> Self {
        AppState {
            served: Arc::new(OnceLock::new()),
            defaults: Arc::new(defaults),
        }
    }

    pub fn ready(graph: SessionGraph, catalog: Option<ObjectCatalog>, defaults: RecommendParams) -> Self {
        let state = Self::pending(defaults);
        state.install(graph, catalog);
        state
    }

    /// Returns `false` if a graph was already installed.
    pub fn install(&self, graph: SessionGraph, catalog: Option<ObjectCatalog>) -> bool {
        self.served.set(Served { graph, catalog }).is_ok()
    }

    pub fn is_ready(&self) -> bool {
        self.served.get().is_some()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/recommendations/pathway", post(pathway))
        .route("/recommendations/{object_id}", get(single))
        .with_state(state)
}

/// Serves `state` on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    detail: ErrorDetail,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            detail: ErrorDetail {
                code: code.into(),
                message: message.into(),
                objects: Vec::new(),
            },
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Graph(GraphError::UnknownObject(id)) => {
                let mut err = ApiError::new(StatusCode::NOT_FOUND, "unknown_object", message);
                err.detail.objects.push(id.raw().to_string());
                err
            }
            EngineError::UnknownPathwayObjects(ids) => {
                let mut err = ApiError::new(StatusCode::NOT_FOUND, "unknown_object", message);
                err.detail.objects = ids.iter().map(|id| id.raw().to_string()).collect();
                err
            }
            EngineError::EmptyPathway => ApiError::bad_request("empty_pathway", message),
            EngineError::MissingWeights => ApiError::bad_request("missing_weights", message),
            EngineError::Graph(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
            _ => ApiError::bad_request("invalid_params", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.detail })).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HealthBody {
    pub status: String,
    pub valid: bool,
    #[serde(flatten)]
    pub stats: GraphStats,
}

async fn health(State(state): State<AppState>) -> Result<Json<HealthBody>, ApiError> {
    let served = state
        .served
        .get()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "starting", "graph is still loading"))?;
    Ok(Json(HealthBody {
        status: "ok".into(),
        valid: served.graph.is_valid(),
        stats: served.graph.stats(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntryDoc {
    pub rank: usize,
    pub object_id: String,
    pub score: sessrec_core::Score,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SeedDoc {
    Object(String),
    Pathway(Vec<String>),
}

/// JSON form of a [`RecommendationVector`]; same rows as the CSV export.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecommendationDoc {
    pub seed: SeedDoc,
    pub params: RecommendParams,
    pub entries: Vec<EntryDoc>,
}

impl RecommendationDoc {
    pub fn new(vec: &RecommendationVector, catalog: Option<&ObjectCatalog>) -> Self {
        let seed = match &vec.seed {
            sessrec_core::Seed::Object(id) => SeedDoc::Object(id.raw().to_string()),
            sessrec_core::Seed::Pathway(ids) => SeedDoc::Pathway(ids.iter().map(|id| id.raw().to_string()).collect()),
        };
        let entries = vec
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| EntryDoc {
                rank: i + 1,
                object_id: e.object.raw().to_string(),
                score: e.score,
                name: catalog.map(|c| c.name(&e.object).unwrap_or_default().to_string()),
            })
            .collect();
        RecommendationDoc {
            seed,
            params: vec.params.clone(),
            entries,
        }
    }
}

/// Weights as `"K1=1,K2=2"` or `{"K1": 1, "K2": 2}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum WeightsInput {
    Text(String),
    Map(std::collections::BTreeMap<String, f64>),
}

/// Query or body overrides; everything optional and kept loosely typed so
/// bad values map to a JSON 400 instead of an extractor rejection.
#[derive(Debug, Clone, Default, Deserialize)]
struct ParamOverrides {
    k: Option<Value>,
    variant: Option<String>,
    scope: Option<String>,
    weights: Option<WeightsInput>,
}

impl ParamOverrides {
    fn apply(&self, mut params: RecommendParams) -> Result<RecommendParams, ApiError> {
        if let Some(k) = &self.k {
            let k = match k {
                Value::Number(n) => n.as_u64(),
                Value::String(s) => s.trim().parse().ok(),
                _ => None,
            };
            match k {
                Some(k) if k >= 1 => params.k = Some(k as usize),
                _ => return Err(ApiError::bad_request("invalid_params", "k must be an integer >= 1")),
            }
        }
        if let Some(v) = &self.variant {
            params.variant = v.parse()?;
        }
        if let Some(s) = &self.scope {
            params.scope = s.parse()?;
        }
        match &self.weights {
            Some(WeightsInput::Text(t)) => params.weights = Some(t.parse::<ClassWeights>()?),
            Some(WeightsInput::Map(m)) => params.weights = Some(ClassWeights::new(m.clone())?),
            None => {}
        }
        params.validate()?;
        Ok(params)
    }
}

fn served(state: &AppState) -> Result<&Served, ApiError> {
    state
        .served
        .get()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "starting", "graph is still loading"))
}

fn object_id(raw: &str) -> Result<NodeId, ApiError> {
    NodeId::object(raw).map_err(|e| ApiError::bad_request("invalid_params", e.to_string()))
}

async fn single(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    query: Result<Query<ParamOverrides>, QueryRejection>,
) -> Result<Json<RecommendationDoc>, ApiError> {
    let served = served(&state)?;
    let query = query.map_err(|e| ApiError::bad_request("invalid_params", e.body_text()))?;
    let params = query.apply((*state.defaults).clone())?;
    let vec = recommend(&served.graph, &object_id(&raw)?, &params)?;
    Ok(Json(RecommendationDoc::new(&vec, served.catalog.as_ref())))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PathwayBody {
    Ids(Vec<String>),
    Full {
        objects: Vec<String>,
        #[serde(flatten)]
        params: ParamOverrides,
    },
}

async fn pathway(
    State(state): State<AppState>,
    query: Result<Query<ParamOverrides>, QueryRejection>,
    body: Bytes,
) -> Result<Json<RecommendationDoc>, ApiError> {
    let served = served(&state)?;
    let query = query.map_err(|e| ApiError::bad_request("invalid_params", e.body_text()))?;
    let body: PathwayBody = serde_json::from_slice(&body).map_err(|e| {
        ApiError::bad_request(
            "malformed_body",
            format!("expected a JSON id list or {{\"objects\": [...]}}: {e}"),
        )
    })?;
    let mut defaults = (*state.defaults).clone();
    defaults.variant = Variant::Pathway;
    let mut params = query.apply(defaults)?;
    let ids = match body {
        PathwayBody::Ids(ids) => ids,
        PathwayBody::Full { objects, params: overrides } => {
            params = overrides.apply(params)?;
            objects
        }
    };
    let ids = ids.iter().map(|raw| object_id(raw)).collect::<Result<Vec<_>, _>>()?;
    let vec = recommend_pathway(&served.graph, &ids, &params)?;
    Ok(Json(RecommendationDoc::new(&vec, served.catalog.as_ref())))
}
