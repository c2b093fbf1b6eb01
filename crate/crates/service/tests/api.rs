use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tennis_index::index::{build_index, save_index, MatchIndex};
use tennis_index::tagger::tag_sequence;
use tennis_index::{MatchFormat, ScoreState, Segment};
use tennis_index_service::{load_indexes, router};
use tower::ServiceExt;

fn st(text: &str) -> ScoreState {
    text.parse().unwrap()
}

fn sample(match_id: &str) -> MatchIndex {
    let readings = [
        "0-0-0|0-0-0",
        "0-0-0|0-0-0",
        "0-0-15|0-0-0",
        "0-0-40|0-0-40",
        "0-0-AD|0-0-40",
        "0-1-0|0-0-0",
        "0-5-40|0-0-0",
        "1-0-0|0-0-0",
    ];
    let scores: Vec<Option<ScoreState>> = readings.iter().map(|s| Some(st(s))).collect();
    let segments: Vec<Segment> = (0..scores.len()).map(|i| Segment::new(i * 100, i * 100 + 60)).collect();
    build_index(&segments, &scores, &tag_sequence(&scores), MatchFormat::BEST_OF_3, 25.0, match_id).unwrap()
}

fn app() -> Router {
    let indexes = BTreeMap::from([("m1".to_string(), sample("m1")), ("m2".to_string(), sample("m2"))]);
    router(Arc::new(indexes), None)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let response = app
        .clone()
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_and_listing() {
    let app = app();
    assert_eq!(get(&app, "/healthz").await, (StatusCode::OK, json!({"status": "ok"})));
    let (status, body) = get(&app, "/api/matches").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!([
            {"match_id": "m1", "rallies": 8, "format": {"best_of": 3}},
            {"match_id": "m2", "rallies": 8, "format": {"best_of": 3}}
        ])
    );
}

#[tokio::test]
async fn whole_match_matches_index_json() {
    let app = app();
    let (status, body) = get(&app, "/api/matches/m1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serde_json::to_value(sample("m1")).unwrap());
}

#[tokio::test]
async fn point_queries() {
    let app = app();
    let (status, body) = get(&app, "/api/matches/m1/points/1/1/1").await;
    assert_eq!(status, StatusCode::OK);
    let records = body.as_array().unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1]["tags"], json!(["fault"]));
    assert_eq!(records[0]["score"], "0-0-0|0-0-0");

    let (status, body) = get(&app, "/api/matches/m1/points/99/1/1").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, body) = get(&app, "/api/matches/m1/points/x/1/1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["detail"].as_str().unwrap().contains("set"));
    let (status, _) = get(&app, "/api/matches/m1/points/0/1/1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn tag_filter() {
    let app = app();
    let (status, body) = get(&app, "/api/matches/m1/segments?tag=deuce").await;
    assert_eq!(status, StatusCode::OK);
    let records = body.as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["score"], "0-0-40|0-0-40");

    let (_, all) = get(&app, "/api/matches/m1/segments").await;
    assert_eq!(all.as_array().unwrap().len(), 8);
    let (status, body) = get(&app, "/api/matches/m1/segments?tag=ace").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "bad_request");
}

#[tokio::test]
async fn sets_and_games() {
    let app = app();
    let (status, body) = get(&app, "/api/matches/m1/sets/1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["set_no"], 1);
    assert_eq!(body["winner"], "a");
    assert_eq!(body["rallies"].as_array().unwrap().len(), 7);
    assert_eq!(body["games"][0], json!({"game_no": 1, "winner": "a"}));

    let (status, body) = get(&app, "/api/matches/m1/sets/1/games/2").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["rallies"].as_array().unwrap().len(), 1);
    assert_eq!(body["rallies"][0]["score"], "0-1-0|0-0-0");

    assert_eq!(get(&app, "/api/matches/m1/sets/9").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/matches/nope/sets/1").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/nothing").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn identical_requests_identical_bodies() {
    let app = app();
    let first = get(&app, "/api/matches/m2/sets/1").await;
    for _ in 0..5 {
        assert_eq!(get(&app, "/api/matches/m2/sets/1").await, first);
    }
}

#[tokio::test]
async fn loads_directory_and_skips_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    save_index(&sample("a"), dir.path().join("a.index.json")).unwrap();
    save_index(&sample("a"), dir.path().join("b.index.json")).unwrap();
    std::fs::write(dir.path().join("broken.index.json"), "{\"match_id\": 3").unwrap();
    std::fs::write(dir.path().join("notes.json"), "{}").unwrap();
    let loaded = load_indexes(dir.path()).unwrap();
    assert_eq!(loaded.keys().collect::<Vec<_>>(), vec!["a"]);
    assert!(load_indexes(&dir.path().join("missing")).is_err());
}

#[tokio::test]
async fn static_assets_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>navigator</h1>").unwrap();
    let app = router(Arc::new(BTreeMap::new()), Some(dir.path()));
    let response = app
        .clone()
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<h1>navigator</h1>");
    assert_eq!(get(&app, "/api/matches").await, (StatusCode::OK, json!([])));
}
