//! HTTP facade over the terrablock pipeline, versioned under `/v1`.

mod api;
pub mod error;
pub mod jobs;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{HeaderValue, Method};
use axum::routing::get;
use axum::Router;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use api::summarize;
pub use error::ApiError;
pub use jobs::{AnalysisJob, JobInputs, JobManager, JobResults, JobState};
pub use store::{DatasetHandle, DatasetKind, DatasetStore, Layout};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub max_upload_bytes: usize,
    /// Concurrent analyses; 0 queues jobs without running them.
    pub workers: usize,
    /// Allowed CORS origins; empty allows any.
    pub cors_origins: Vec<String>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cors_origins: Vec::new(),
        }
    }

    /// Reads `TERRABLOCK_DATA_DIR`, `TERRABLOCK_MAX_UPLOAD_BYTES`,
    /// `TERRABLOCK_WORKERS` and `TERRABLOCK_CORS_ORIGINS` (comma separated).
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let mut config = Self::new(var("TERRABLOCK_DATA_DIR").unwrap_or_else(|| "terrablock-data".into()));
        if let Some(n) = var("TERRABLOCK_MAX_UPLOAD_BYTES").and_then(|v| v.parse().ok()) {
            config.max_upload_bytes = n;
        }
        if let Some(n) = var("TERRABLOCK_WORKERS").and_then(|v| v.parse().ok()) {
            config.workers = n;
        }
        if let Some(origins) = var("TERRABLOCK_CORS_ORIGINS") {
            config.cors_origins = origins.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        config
    }
}

/// Port from `TERRABLOCK_PORT`, else the default.
pub fn port_from_env() -> u16 {
    std::env::var("TERRABLOCK_PORT").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_PORT)
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub datasets: Arc<DatasetStore>,
    pub jobs: Arc<JobManager>,
}

impl AppState {
    pub fn open(config: ServiceConfig) -> std::io::Result<Self> {
        let layout = Arc::new(Layout::new(&config.data_dir)?);
        let datasets = Arc::new(DatasetStore::open(Arc::clone(&layout))?);
        let jobs = Arc::new(JobManager::open(layout, Arc::clone(&datasets), config.workers)?);
        Ok(Self {
            config: Arc::new(config),
            datasets,
            jobs,
        })
    }
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods([Method::GET, Method::POST]).allow_headers(Any);
    if origins.is_empty() {
        return layer.allow_origin(Any);
    }
    let parsed: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    layer.allow_origin(AllowOrigin::list(parsed))
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    let v1 = Router::new()
        .route("/health", get(api::health))
        .route("/datasets", get(api::list_datasets).post(api::upload_dataset))
        .route("/datasets/{id}", get(api::get_dataset))
        .route("/analyses", axum::routing::post(api::submit_analysis))
        .route("/analyses/{id}", get(api::get_analysis))
        .route("/analyses/{id}/report", get(api::get_report))
        .route("/analyses/{id}/blocks", get(api::get_blocks))
        .route("/analyses/{id}/table", get(api::get_table))
        .route("/grids/{id}", get(api::get_grid));
    Router::new()
        .nest("/v1", v1)
        .fallback(|| async { api::not_found_fallback() })
        // multipart framing needs headroom above the file limit
        .layer(DefaultBodyLimit::max(limit.saturating_add(64 * 1024)))
        .layer(cors(&state.config.cors_origins))
        .with_state(state)
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
