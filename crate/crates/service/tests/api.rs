use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use terrablock_core::fusion::FusedCellTable;
use terrablock_core::pipeline::{fuse, FuseInputs, YieldSource};
use terrablock_core::raster::parse_ascii_grid;
use terrablock_core::report::{emit_block_geojson, emit_report_json, run_analysis, AnalysisConfig};
use terrablock_core::synthetic::{synthetic_field, SyntheticField, SyntheticSpec};
use terrablock_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

const BOUNDARY: &str = "terrablock-test-boundary";

fn app(dir: &std::path::Path, tweak: impl FnOnce(&mut ServiceConfig)) -> Router {
    let mut config = ServiceConfig::new(dir);
    config.workers = 2;
    tweak(&mut config);
    router(AppState::open(config).unwrap())
}

fn multipart(kind: &str, filename: &str, bytes: &[u8]) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(
        format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"kind\"\r\n\r\n{kind}\r\n").as_bytes(),
    );
    body.extend_from_slice(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\n\
             Content-Type: application/octet-stream\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    body
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn upload(app: &Router, kind: &str, filename: &str, bytes: &[u8]) -> (StatusCode, Value) {
    let req = Request::post("/v1/datasets")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(kind, filename, bytes)))
        .unwrap();
    let (status, body) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = get(app, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(serde_json::to_vec(&body).unwrap()))
        .unwrap();
    let (status, body) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn small_grid() -> Vec<u8> {
    let mut s = String::from("ncols 10\nnrows 10\nxllcorner 0\nyllcorner 0\ncellsize 2\nNODATA_value -9999\n");
    for r in 0..10 {
        let row: Vec<String> = (0..10).map(|c| format!("{}", r * 10 + c)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.into_bytes()
}

fn assert_envelope(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].is_string());
    assert!(v.get("detail").is_some());
}

struct Uploaded {
    dem: String,
    soil: String,
    boundary: String,
    yields: String,
}

async fn upload_field(app: &Router, field: &SyntheticField) -> Uploaded {
    let mut ids = Vec::new();
    for (kind, name, bytes) in [
        ("dem", "dem.asc", &field.dem_asc),
        ("soil", "soil.geojson", &field.soil_geojson),
        ("boundary", "boundary.geojson", &field.boundary_geojson),
        ("yield", "2017.csv", &field.yield_csv),
    ] {
        let (status, handle) = upload(app, kind, name, bytes).await;
        assert_eq!(status, StatusCode::CREATED, "{handle}");
        ids.push(handle["id"].as_str().unwrap().to_string());
    }
    Uploaded {
        dem: ids[0].clone(),
        soil: ids[1].clone(),
        boundary: ids[2].clone(),
        yields: ids[3].clone(),
    }
}

fn request(ids: &Uploaded, config: Value) -> Value {
    json!({"dem": ids.dem, "soil": ids.soil, "boundary": ids.boundary, "yields": [ids.yields], "config": config})
}

async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (status, job) = get_json(app, &format!("/v1/analyses/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        match job["state"].as_str().unwrap() {
            "done" | "failed" => return job,
            _ => tokio::time::sleep(Duration::from_millis(50)).await,
        }
    }
    panic!("job {id} did not finish");
}

#[tokio::test]
async fn dataset_uploads() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |_| {});
    let (status, handle) = upload(&app, "dem", "dem.asc", &small_grid()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(handle["summary"]["ncols"], 10);
    assert_eq!(handle["summary"]["nrows"], 10);
    assert_eq!(handle["kind"], "dem");

    let (status, again) = upload(&app, "dem", "dem.asc", &small_grid()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(again["byte_digest"], handle["byte_digest"]);
    assert_ne!(again["id"], handle["id"]);

    let (status, err) = upload(&app, "yield", "2017.csv", b"lon,lat,value\n1,2,3\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_envelope(&err, "bad_request");
    assert!(err["message"].as_str().unwrap().contains("expected header x,y,yield"), "{err}");

    let (status, err) = upload(&app, "dem", "bad.asc", b"ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["message"].as_str().unwrap().contains("line"), "{err}");

    let (status, err) = upload(&app, "lidar", "x.las", b"x").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_envelope(&err, "bad_request");

    let id = handle["id"].as_str().unwrap();
    let (status, fetched) = get_json(&app, &format!("/v1/datasets/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, handle);
    let (status, err) = get_json(&app, "/v1/datasets/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_envelope(&err, "not_found");
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |c| c.max_upload_bytes = 512);
    let big = vec![b'1'; 4096];
    let (status, err) = upload(&app, "yield", "big.csv", &big).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_envelope(&err, "payload_too_large");
    let (status, _) = upload(&app, "dem", "dem.asc", &small_grid()).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn grid_json_round_trips_values() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |_| {});
    let mut asc = String::from("ncols 3\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 0.5\nNODATA_value -9999\n");
    asc.push_str("0.1 -9999 1e-300\n3.141592653589793 2.718281828459045 123456789.123456789\n");
    let (_, handle) = upload(&app, "dem", "g.asc", asc.as_bytes()).await;
    let (status, grid) = get_json(&app, &format!("/v1/grids/{}", handle["id"].as_str().unwrap())).await;
    assert_eq!(status, StatusCode::OK);
    let expected = parse_ascii_grid(asc.as_bytes()).unwrap();
    let values: Vec<Option<f64>> = serde_json::from_value(grid["values"].clone()).unwrap();
    assert_eq!(values, expected.iter_options().collect::<Vec<_>>());
    assert_eq!(values[4], None);
    assert!(grid["values"][4].is_null());
    assert_eq!(grid["meta"]["ncols"], 3);
    let (status, _) = get_json(&app, "/v1/grids/../../etc").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn analysis_request_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |_| {});
    let field = synthetic_field(&SyntheticSpec::default());
    let ids = upload_field(&app, &field).await;

    let mut dangling = request(&ids, json!({}));
    dangling["soil"] = json!("missing");
    let (status, err) = post_json(&app, "/v1/analyses", dangling).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_envelope(&err, "not_found");

    let (status, err) = post_json(&app, "/v1/analyses", request(&ids, json!({"fwer": 1.5}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_envelope(&err, "invalid_config");

    let (status, _) = post_json(&app, "/v1/analyses", request(&ids, json!({"colour": "red"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut swapped = request(&ids, json!({}));
    swapped["dem"] = json!(ids.soil);
    let (status, err) = post_json(&app, "/v1/analyses", swapped).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_envelope(&err, "kind_mismatch");
}

#[tokio::test]
async fn queued_job_results_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |c| c.workers = 0);
    let field = synthetic_field(&SyntheticSpec::default());
    let ids = upload_field(&app, &field).await;
    let (status, job) = post_json(&app, "/v1/analyses", request(&ids, json!({}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(job["state"], "pending");
    let id = job["id"].as_str().unwrap();
    for suffix in ["report", "blocks"] {
        let (status, body) = get(&app, &format!("/v1/analyses/{id}/{suffix}")).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_envelope(&serde_json::from_slice(&body).unwrap(), "not_ready");
    }
    let (_, polled) = get_json(&app, &format!("/v1/analyses/{id}")).await;
    assert_eq!(polled["state"], "pending");
    assert!(polled.get("report").is_none());
    let (status, _) = get(&app, "/v1/analyses/unknown/report").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn service_report_matches_direct_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |_| {});
    let field = synthetic_field(&SyntheticSpec::default());
    let ids = upload_field(&app, &field).await;
    let (status, job) = post_json(&app, "/v1/analyses", request(&ids, json!({}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = job["id"].as_str().unwrap().to_string();
    let done = wait_done(&app, &id).await;
    assert_eq!(done["state"], "done", "{}", done["error"]);

    let table = fuse(&FuseInputs {
        dem: &field.dem_asc,
        soil: &field.soil_geojson,
        boundary: &field.boundary_geojson,
        yields: vec![YieldSource {
            name: "2017.csv",
            bytes: &field.yield_csv,
        }],
        schema: Default::default(),
        resolution_factor: 1,
    })
    .unwrap()
    .table;
    let table = FusedCellTable::from_csv(&table.to_csv()).unwrap();
    let (report, blocks) = run_analysis(&table, &AnalysisConfig::default()).unwrap();
    let expected = emit_report_json(&report);

    let (status, bytes) = get(&app, &format!("/v1/analyses/{id}/report")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, expected);
    let embedded = terrablock_core::report::canonical_json(&done["report"], true);
    assert_eq!(embedded, expected);
    let (_, geo) = get(&app, &format!("/v1/analyses/{id}/blocks")).await;
    assert_eq!(geo, emit_block_geojson(&blocks));
    let (_, csv) = get(&app, &format!("/v1/analyses/{id}/table")).await;
    assert_eq!(csv, table.to_csv());

    let slope_id = done["results"]["grids"]["slope"].as_str().unwrap();
    let (status, grid) = get_json(&app, &format!("/v1/grids/{slope_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(grid["meta"]["nrows"], 100);
    assert!(done["results"]["grids"]["yield_2017"].is_string());

    // results survive a restart
    let reopened = self::app(dir.path(), |_| {});
    let (status, again) = get(&reopened, &format!("/v1/analyses/{id}/report")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, expected);
}

#[tokio::test]
async fn concurrent_jobs_keep_their_own_results() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |c| c.workers = 3);
    let field = synthetic_field(&SyntheticSpec::default());
    let ids = upload_field(&app, &field).await;
    let fwers = [0.01, 0.02, 0.05, 0.1, 0.2];
    let mut jobs = Vec::new();
    for fwer in fwers {
        let config = json!({"fwer": fwer, "grouping_features": ["texture", "elevation"]});
        let (status, job) = post_json(&app, "/v1/analyses", request(&ids, config)).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        jobs.push(job["id"].as_str().unwrap().to_string());
    }
    for (id, fwer) in jobs.iter().zip(fwers) {
        let done = wait_done(&app, id).await;
        assert_eq!(done["state"], "done");
        assert_eq!(done["config"]["fwer"], fwer);
        assert_eq!(done["report"]["provenance"]["config"]["fwer"], fwer);
        assert_eq!(done["report"]["analyses"][0]["tukey"]["fwer"], fwer);
    }
}

#[tokio::test]
async fn unknown_routes_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |c| c.cors_origins = vec!["http://localhost:5173".into()]);
    let (status, body) = get(&app, "/v2/anything").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_envelope(&serde_json::from_slice(&body).unwrap(), "not_found");
    let req = Request::get("/v1/health")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}
