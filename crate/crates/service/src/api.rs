use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use terrablock_core::interpolation::{default_season_label, parse_yield_csv};
use terrablock_core::raster::{parse_ascii_grid, GridJson};
use terrablock_core::report::AnalysisConfig;
use terrablock_core::soil::{parse_boundary, parse_soil_layer, AttributeSchema, MultiPolygon};

use crate::error::{ApiError, ApiResult};
use crate::jobs::{AnalysisJob, JobInputs, JobState};
use crate::store::{DatasetHandle, DatasetKind};
use crate::AppState;

fn union_bbox(boxes: impl Iterator<Item = [f64; 4]>) -> Option<[f64; 4]> {
    boxes.reduce(|a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])])
}

fn multipolygon_bbox(mp: &MultiPolygon) -> Option<[f64; 4]> {
    (!mp.0.is_empty()).then(|| mp.bbox())
}

/// Parses the upload as its declared kind; the error text is the parser's own.
pub fn summarize(kind: DatasetKind, name: &str, bytes: &[u8]) -> Result<Value, String> {
    match kind {
        DatasetKind::Dem => {
            let grid = parse_ascii_grid(bytes).map_err(|e| e.to_string())?;
            let g = grid.geometry();
            Ok(json!({
                "ncols": g.ncols,
                "nrows": g.nrows,
                "cell_size": g.cell_size,
                "extent": g.extent(),
                "valid_cells": grid.valid_count(),
            }))
        }
        DatasetKind::Soil => {
            let layer = parse_soil_layer(bytes, &AttributeSchema::default()).map_err(|e| e.to_string())?;
            let mut unknown: Vec<&str> = layer.map_units.iter().flat_map(|u| u.unknown_keys.iter().map(String::as_str)).collect();
            unknown.sort_unstable();
            unknown.dedup();
            Ok(json!({
                "map_units": layer.map_units.len(),
                "extent": union_bbox(layer.map_units.iter().filter_map(|u| multipolygon_bbox(&u.geometry))),
                "unknown_keys": unknown,
            }))
        }
        DatasetKind::Boundary => {
            let boundary = parse_boundary(bytes).map_err(|e| e.to_string())?;
            Ok(json!({
                "polygons": boundary.0.len(),
                "area": boundary.area(),
                "extent": multipolygon_bbox(&boundary),
            }))
        }
        DatasetKind::Yield => {
            let sets = parse_yield_csv(bytes, &default_season_label(name)).map_err(|e| e.to_string())?;
            let points = sets.iter().flat_map(|s| &s.points);
            Ok(json!({
                "point_count": sets.iter().map(|s| s.points.len()).sum::<usize>(),
                "seasons": sets.iter().map(|s| s.season.as_str()).collect::<Vec<_>>(),
                "extent": union_bbox(points.map(|p| [p.x, p.y, p.x, p.y])),
            }))
        }
    }
}

pub async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "version": terrablock_core::VERSION}))
}

pub async fn upload_dataset(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
) -> ApiResult<(StatusCode, Json<DatasetHandle>)> {
    let mut multipart = multipart.map_err(|e| ApiError::bad_request(format!("expected a multipart body: {e}")))?;
    let limit = state.config.max_upload_bytes;
    let read_err = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::too_large(limit)
        } else {
            ApiError::bad_request(format!("malformed multipart body: {e}"))
        }
    };
    let mut kind = None;
    let mut file: Option<(String, Bytes)> = None;
    while let Some(field) = multipart.next_field().await.map_err(read_err)? {
        match field.name() {
            Some("kind") => {
                let text = field.text().await.map_err(read_err)?;
                kind = Some(DatasetKind::parse(text.trim()).ok_or_else(|| {
                    ApiError::bad_request(format!("unknown dataset kind '{}'", text.trim()))
                        .with_detail(json!({"allowed": ["dem", "soil", "boundary", "yield"]}))
                })?);
            }
            Some("file") => {
                let name = field.file_name().unwrap_or_default().to_string();
                let bytes = field.bytes().await.map_err(read_err)?;
                if bytes.len() > limit {
                    return Err(ApiError::too_large(limit));
                }
                file = Some((name, bytes));
            }
            _ => {}
        }
    }
    let kind = kind.ok_or_else(|| ApiError::bad_request("missing 'kind' field"))?;
    let (name, bytes) = file.ok_or_else(|| ApiError::bad_request("missing 'file' field"))?;
    let name = if name.is_empty() { kind.name().to_string() } else { name };
    let summary = {
        let (name, bytes) = (name.clone(), bytes.clone());
        tokio::task::spawn_blocking(move || summarize(kind, &name, &bytes))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }
    .map_err(|message| ApiError::bad_request(message).with_detail(json!({"kind": kind.name(), "name": name})))?;
    let handle = state.datasets.insert(kind, name, &bytes, summary)?;
    Ok((StatusCode::CREATED, Json(handle)))
}

pub async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetHandle>> {
    Json(state.datasets.list())
}

pub async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DatasetHandle>> {
    state.datasets.get(&id).map(Json).ok_or_else(|| ApiError::not_found("dataset", &id))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisRequest {
    dem: String,
    soil: String,
    boundary: String,
    yields: Vec<String>,
    #[serde(default)]
    config: Option<Value>,
    #[serde(default)]
    schema: Option<Value>,
}

pub async fn submit_analysis(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let raw: Value = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("body is not JSON: {e}")))?;
    let request: AnalysisRequest =
        serde_json::from_value(raw).map_err(|e| ApiError::unprocessable(format!("invalid analysis request: {e}")))?;
    if request.yields.is_empty() {
        return Err(ApiError::unprocessable("at least one yield dataset is required"));
    }
    let roles = [(&request.dem, DatasetKind::Dem), (&request.soil, DatasetKind::Soil), (&request.boundary, DatasetKind::Boundary)]
        .into_iter()
        .chain(request.yields.iter().map(|y| (y, DatasetKind::Yield)));
    for (id, kind) in roles {
        let handle = state.datasets.get(id).ok_or_else(|| ApiError::not_found("dataset", id))?;
        if handle.kind != kind {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "kind_mismatch",
                format!("dataset '{id}' is a {} dataset, expected {}", handle.kind.name(), kind.name()),
            ));
        }
    }
    let config_bytes = serde_json::to_vec(&request.config.unwrap_or_else(|| json!({}))).expect("value serializes");
    let config = AnalysisConfig::from_json(&config_bytes).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let schema = match request.schema {
        None => AttributeSchema::default(),
        Some(v) => AttributeSchema::from_json(&serde_json::to_vec(&v).expect("value serializes"))
            .map_err(|e| ApiError::unprocessable(e.to_string()))?,
    };
    let inputs = JobInputs {
        dem: request.dem,
        soil: request.soil,
        boundary: request.boundary,
        yields: request.yields,
    };
    let job = state.jobs.submit(config, schema, inputs)?;
    let location = format!("/v1/analyses/{}", job.id);
    Ok((StatusCode::ACCEPTED, [(header::LOCATION, location)], Json(job)).into_response())
}

fn job_or_404(state: &AppState, id: &str) -> ApiResult<AnalysisJob> {
    state.jobs.get(id).ok_or_else(|| ApiError::not_found("analysis", id))
}

fn require_done(job: &AnalysisJob) -> ApiResult<()> {
    match job.state {
        JobState::Done => Ok(()),
        JobState::Failed => Err(ApiError::conflict("job_failed", format!("analysis {} failed", job.id))
            .with_detail(json!({"error": job.error}))),
        state => Err(ApiError::conflict("not_ready", format!("analysis {} is not finished", job.id))
            .with_detail(json!({"state": state}))),
    }
}

pub async fn get_analysis(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = job_or_404(&state, &id)?;
    let mut body = serde_json::to_value(&job).expect("job serializes");
    if job.state == JobState::Done {
        let report: Value = serde_json::from_slice(&state.jobs.artifact(&job, "report.json")?)
            .map_err(|e| ApiError::internal(format!("stored report is unreadable: {e}")))?;
        body["report"] = report;
    }
    Ok(Json(body))
}

async fn artifact(state: &AppState, id: &str, suffix: &str, content_type: &'static str) -> ApiResult<Response> {
    let job = job_or_404(state, id)?;
    require_done(&job)?;
    let bytes = state.jobs.artifact(&job, suffix)?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

/// The report exactly as the CLI's `analyze` writes it.
pub async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    artifact(&state, &id, "report.json", "application/json").await
}

pub async fn get_blocks(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    artifact(&state, &id, "blocks.geojson", "application/geo+json").await
}

pub async fn get_table(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    artifact(&state, &id, "fused.csv", "text/csv").await
}

/// DEM datasets and rasters derived by finished jobs.
pub async fn get_grid(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<GridJson>> {
    let bytes = if let Some(handle) = state.datasets.get(&id) {
        if handle.kind != DatasetKind::Dem {
            return Err(ApiError::not_found("grid", &id));
        }
        state.datasets.bytes(&handle)?
    } else {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(ApiError::not_found("grid", &id));
        }
        match std::fs::read(state.jobs.layout().grids().join(format!("{id}.asc"))) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ApiError::not_found("grid", &id)),
            Err(e) => return Err(e.into()),
        }
    };
    let grid = parse_ascii_grid(&bytes).map_err(|e| ApiError::internal(format!("stored grid is unreadable: {e}")))?;
    Ok(Json(GridJson::from(&grid)))
}

pub(crate) fn not_found_fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}
