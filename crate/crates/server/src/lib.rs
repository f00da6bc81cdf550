//! HTTP/JSON service over a registry of loaded datasets.
//!
//! Every query route is a read-only GET whose body is the corresponding
//! `landscape_core::api` payload; failures carry a machine code.

mod openapi;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use landscape_core::api::{self, ApiError, CompareRequest, Params};
use landscape_core::registry::{LoadedDataset, Registry};
use landscape_core::store::{load_manifest, Manifest, Store, StoreError};
use serde::Serialize;
use tower_http::services::ServeDir;

pub use openapi::{openapi_document, ROUTES};

/// Shared handler state.
#[derive(Debug, Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
}

/// A JSON body, either a payload or an error envelope.
pub struct JsonResponse {
    status: StatusCode,
    body: String,
}

impl JsonResponse {
    pub fn ok<T: Serialize>(payload: &T) -> Self {
        Self {
            status: StatusCode::OK,
            body: api::to_json(payload),
        }
    }
}

impl From<ApiError> for JsonResponse {
    fn from(e: ApiError) -> Self {
        Self {
            status: StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body: e.body(),
        }
    }
}

impl IntoResponse for JsonResponse {
    fn into_response(self) -> Response {
        (self.status, [(header::CONTENT_TYPE, "application/json")], Body::from(self.body)).into_response()
    }
}

type Raw = Result<Query<Vec<(String, String)>>, QueryRejection>;

fn params(raw: Raw) -> Result<Params, ApiError> {
    raw.map(|Query(pairs)| Params::new(pairs))
        .map_err(|e| ApiError::invalid(e.body_text()))
}

impl AppState {
    fn entry(&self, id: &str) -> Result<Arc<LoadedDataset>, ApiError> {
        self.registry.get(id).ok_or_else(|| ApiError::dataset_not_found(id))
    }
}

/// Runs CPU-bound request work off the async executor.
async fn blocking<T, F>(work: F) -> JsonResponse
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Serialize + Send + 'static,
{
    match tokio::task::spawn_blocking(work).await {
        Ok(Ok(payload)) => JsonResponse::ok(&payload),
        Ok(Err(e)) => e.into(),
        Err(e) => ApiError::new("internal", e.to_string()).into(),
    }
}

/// A GET handler over one dataset: parse the query, then build the payload.
fn dataset_query<Q, T>(
    parse: fn(Params) -> Result<Q, ApiError>,
    run: fn(&LoadedDataset, &Q) -> Result<T, ApiError>,
) -> impl Fn(State<AppState>, Path<String>, Raw) -> std::pin::Pin<Box<dyn Future<Output = JsonResponse> + Send>>
       + Clone
       + Send
       + Sync
       + 'static
where
    Q: Send + 'static,
    T: Serialize + Send + 'static,
{
    move |State(state): State<AppState>, Path(id): Path<String>, raw: Raw| {
        Box::pin(async move {
            let prepared = state.entry(&id).and_then(|e| Ok((e, parse(params(raw)?)?)));
            match prepared {
                Ok((entry, q)) => blocking(move || run(&entry, &q)).await,
                Err(e) => e.into(),
            }
        })
    }
}

async fn list_datasets(State(state): State<AppState>, raw: Raw) -> JsonResponse {
    match params(raw).and_then(Params::finish) {
        Ok(()) => JsonResponse::ok(&api::datasets(&state.registry.list())),
        Err(e) => e.into(),
    }
}

async fn explanation(State(state): State<AppState>, Path((id, sid)): Path<(String, String)>, raw: Raw) -> JsonResponse {
    let prepared = state
        .entry(&id)
        .and_then(|e| Ok((e, api::ExplainQuery::from_params(params(raw)?)?)));
    match prepared {
        Ok((entry, q)) => blocking(move || api::explanation(&entry, &sid, &q)).await,
        Err(e) => e.into(),
    }
}

async fn compare(State(state): State<AppState>, body: Bytes) -> JsonResponse {
    let req: CompareRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return ApiError::new("invalid_body", e.to_string()).into(),
    };
    let registry = Arc::clone(&state.registry);
    blocking(move || api::compare(&req, &|id| registry.get(id))).await
}

fn load_error(e: StoreError) -> ApiError {
    ApiError::new("load_failed", e.to_string())
}

async fn admin_load(State(state): State<AppState>, body: Bytes) -> JsonResponse {
    let manifest: Manifest = match serde_json::from_slice(&body) {
        Ok(m) => m,
        Err(e) => return ApiError::new("invalid_body", e.to_string()).into(),
    };
    if state.registry.contains(&manifest.id) {
        return exists(&manifest.id).into();
    }
    let registry = Arc::clone(&state.registry);
    let mut response = blocking(move || {
        let stored = load_manifest(&manifest).map_err(load_error)?;
        let entry = registry
            .insert(LoadedDataset::new(stored))
            .map_err(|dup| exists(&dup.0))?;
        Ok(api::dataset_info(&entry))
    })
    .await;
    if response.status == StatusCode::OK {
        response.status = StatusCode::CREATED;
    }
    response
}

fn exists(id: &str) -> ApiError {
    ApiError::new("dataset_exists", format!("dataset {id:?} is already loaded"))
}

async fn openapi() -> JsonResponse {
    JsonResponse::ok(&openapi_document())
}

async fn api_fallback() -> JsonResponse {
    ApiError::new("route_not_found", "no such API route").into()
}

/// Routes under `/api`, plus static assets from `static_dir` for all other
/// paths when given.
pub fn router(registry: Arc<Registry>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/datasets", get(list_datasets))
        .route("/datasets/{id}/points", get(dataset_query(api::PointsQuery::from_params, api::points)))
        .route(
            "/datasets/{id}/local-words",
            get(dataset_query(api::LocalWordsQuery::from_params, api::local_words_payload)),
        )
        .route("/datasets/{id}/lists", get(dataset_query(api::ListsQuery::from_params, api::lists)))
        .route(
            "/datasets/{id}/confusions",
            get(dataset_query(api::ConfusionsQuery::from_params, api::confusions)),
        )
        .route(
            "/datasets/{id}/label-clusters",
            get(dataset_query(api::parse_cut, |e, cut| api::label_clusters(e, *cut))),
        )
        .route("/datasets/{id}/hulls", get(dataset_query(api::HullsQuery::from_params, api::hulls)))
        .route("/datasets/{id}/samples/{sid}/explanation", get(explanation))
        .route("/compare", post(compare))
        .route("/admin/datasets", post(admin_load))
        .route("/openapi.json", get(openapi))
        .fallback(api_fallback);
    let app = Router::new().nest("/api", api);
    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.with_state(AppState { registry })
}

/// Loads every dataset in `store` into a fresh registry.
pub fn load_store(store: &Store) -> Result<Arc<Registry>, StoreError> {
    let registry = Registry::new();
    for id in store.dataset_ids()? {
        let entry = LoadedDataset::new(store.load(&id)?);
        registry
            .insert(entry)
            .map_err(|dup| StoreError::Exists(dup.0))?;
    }
    Ok(Arc::new(registry))
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub static_dir: Option<PathBuf>,
}

/// Binds and serves until Ctrl-C. Bind failures (for example a port in use)
/// are returned before any request is accepted.
pub async fn serve(config: ServeConfig, registry: Arc<Registry>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    axum::serve(listener, router(registry, config.static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
