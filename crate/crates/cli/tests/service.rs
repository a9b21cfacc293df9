use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use angio_cli::service::{router, AppState, DEFAULT_CAPACITY};
use angio_core::phantom::{render_phantom, standard_suite, PhantomTruth};
use angio_core::{Config, GrayImage, Point2};

fn app(capacity: usize) -> Router {
    router(Arc::new(AppState::new(Config::default(), capacity)), None)
}

fn phantom(name: &str) -> (GrayImage, PhantomTruth) {
    let spec = standard_suite().into_iter().find(|s| s.name == name).unwrap();
    render_phantom(&spec, 1).unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn post(uri: &str, body: impl Into<Body>) -> Request<Body> {
    Request::post(uri).body(body.into()).unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn upload(app: &Router, img: &GrayImage) -> Value {
    let (status, body) = send(app, post("/v1/contexts", img.encode_png().unwrap())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

#[tokio::test]
async fn health() {
    let (status, body) = send(&app(4), get("/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn upload_returns_id_dimensions_and_contour() {
    let app = app(DEFAULT_CAPACITY);
    let (img, _) = phantom("tube_w8");
    let v = upload(&app, &img).await;
    assert!(v["id"].is_string());
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(400), Some(400)));
    assert!(!v["contour"]["polygons"].as_array().unwrap().is_empty());
    assert!(v["preview_png"].as_str().unwrap().len() > 100);

    let id = v["id"].as_str().unwrap();
    let resp = app.clone().oneshot(get(&format!("/v1/contexts/{id}/image"))).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/png");
    let png = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(GrayImage::decode(&png).unwrap().width(), 400);
}

#[tokio::test]
async fn pgm_upload_accepted() {
    let (img, _) = phantom("tube_w6");
    let (status, _) = send(&app(4), post("/v1/contexts", img.encode_pgm())).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn repeated_auto_is_byte_identical() {
    let app = app(4);
    let (img, _) = phantom("stenosis_0.6");
    let id = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    let uri = format!("/v1/contexts/{id}/auto");
    let (s1, a) = send(&app, post(&uri, Body::empty())).await;
    let (s2, b) = send(&app, post(&uri, Body::empty())).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["context"], id.as_str());
    assert_eq!(report["findings"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn segment_on_y_phantom_stays_in_the_chosen_arm() {
    let app = app(4);
    let (img, truth) = phantom("y_60");
    let id = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    let stem = truth.paths[0].samples[60].pos;
    let arm = truth.paths[1].samples[truth.paths[1].samples.len() - 41].pos;
    let body = json!({ "start": [stem.x, stem.y], "end": [arm.x, arm.y] });
    let (status, bytes) = send(&app, post(&format!("/v1/contexts/{id}/segment"), body.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    let route: Value = serde_json::from_slice(&bytes).unwrap();
    let pts: Vec<Point2> = route["route"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| serde_json::from_value(p["pos"].clone()).unwrap())
        .collect();
    let inside = pts
        .iter()
        .filter(|p| truth.path_contains(0, **p) || truth.path_contains(1, **p))
        .count();
    assert!(inside as f64 >= 0.95 * pts.len() as f64);
    let end: Point2 = serde_json::from_value(route["end"].clone()).unwrap();
    assert!(pts.last().unwrap().distance(end) < 5.0);
}

#[tokio::test]
async fn unknown_context_is_404() {
    let app = app(4);
    let (status, _) = send(&app, post("/v1/contexts/nope/auto", Body::empty())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let body = json!({ "start": [1, 1], "end": [2, 2] }).to_string();
    let (status, _) = send(&app, post("/v1/contexts/nope/segment", body)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, get("/v1/contexts/nope/image")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = app(4);
    let (status, _) = send(&app, post("/v1/contexts", "not an image")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (img, _) = phantom("tube_w8");
    let id = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    let uri = format!("/v1/contexts/{id}/segment");
    for body in ["{", r#"{"start": [1, 2]}"#, r#"{"start": "a", "end": [1, 2]}"#] {
        let (status, _) = send(&app, post(&uri, body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    }
    let outside = json!({ "start": [-5, 10], "end": [20, 20] }).to_string();
    let (status, _) = send(&app, post(&uri, outside)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn blank_upload_is_unprocessable() {
    let (status, body) = send(&app(4), post("/v1/contexts", GrayImage::filled(64, 64, 0.0).encode_png().unwrap())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert!(v["error"].as_str().unwrap().contains("no ridge points"));
}

#[tokio::test]
async fn unreachable_endpoint_is_422_with_partial_routes() {
    let app = app(4);
    // two disjoint horizontal vessels
    let img = GrayImage::from_fn(200, 200, |x, y| {
        let on = (20..180).contains(&x) && ((y as i64 - 60).abs() <= 3 || (y as i64 - 140).abs() <= 3);
        if on {
            200.0
        } else {
            50.0
        }
    });
    let id = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    let body = json!({ "start": [100, 60], "end": [100, 140] }).to_string();
    let (status, bytes) = send(&app, post(&format!("/v1/contexts/{id}/segment"), body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    let partial = v["partial"].as_array().unwrap();
    assert_eq!(partial.len(), 2);
    assert!(partial.iter().all(|r| !r.as_array().unwrap().is_empty()));
}

#[tokio::test]
async fn least_recently_used_context_is_evicted() {
    let app = app(1);
    let (img, _) = phantom("tube_w8");
    let first = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    let second = upload(&app, &img).await["id"].as_str().unwrap().to_string();
    assert_ne!(first, second);
    let (status, _) = send(&app, get(&format!("/v1/contexts/{first}/image"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, get(&format!("/v1/contexts/{second}/image"))).await;
    assert_eq!(status, StatusCode::OK);
}
