//! Read-only JSON API over match indexes loaded from a directory at startup.
//!
//! | route | body |
//! |---|---|
//! | `GET /healthz` | `{"status":"ok"}` |
//! | `GET /api/matches` | `[{"match_id","rallies","format"}]` |
//! | `GET /api/matches/{id}` | the whole index |
//! | `GET /api/matches/{id}/segments?tag=<tag>` | rallies, optionally filtered by tag |
//! | `GET /api/matches/{id}/sets/{s}` | set summary with its rallies |
//! | `GET /api/matches/{id}/sets/{s}/games/{g}` | the game's rallies |
//! | `GET /api/matches/{id}/points/{s}/{g}/{p}` | the point's rallies |

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tennis_index::index::{load_index, GameSummary, MatchIndex, RallyRecord};
use tennis_index::{EventTag, MatchFormat, Player};
use thiserror::Error;
use tower_http::services::ServeDir;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read index directory {path}: {source}")]
    IndexDir { path: PathBuf, source: std::io::Error },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("static directory {0} does not exist")]
    StaticDir(PathBuf),
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub index_dir: PathBuf,
    pub addr: SocketAddr,
    pub static_dir: Option<PathBuf>,
}

pub type Indexes = Arc<BTreeMap<String, MatchIndex>>;

/// Loads every `*.index.json` in `dir`. Files that fail to parse, and later
/// files repeating a match id, are logged and skipped.
pub fn load_indexes(dir: &Path) -> Result<BTreeMap<String, MatchIndex>, ServiceError> {
    let dir_err = |source| ServiceError::IndexDir { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(dir_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.to_string_lossy().ends_with(".index.json"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        match load_index(&path) {
            Ok(idx) if out.contains_key(&idx.match_id) => {
                tracing::warn!(path = %path.display(), match_id = %idx.match_id, "duplicate match id, skipped");
            }
            Ok(idx) => {
                tracing::info!(path = %path.display(), match_id = %idx.match_id, rallies = idx.rallies.len(), "loaded");
                out.insert(idx.match_id.clone(), idx);
            }
            Err(e) => tracing::warn!(path = %path.display(), error = %e, "invalid index, skipped"),
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn not_found(detail: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, code: "not_found", detail: detail.into() }
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "bad_request", detail: detail.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize)]
struct MatchListing<'a> {
    match_id: &'a str,
    rallies: usize,
    format: MatchFormat,
}

#[derive(Debug, Serialize)]
struct SetView<'a> {
    set_no: u32,
    winner: Option<Player>,
    games: Vec<GameSummary>,
    rallies: Vec<&'a RallyRecord>,
}

#[derive(Debug, Serialize)]
struct GameView<'a> {
    set_no: u32,
    game_no: u32,
    rallies: Vec<&'a RallyRecord>,
}

#[derive(Debug, Deserialize)]
struct TagQuery {
    tag: Option<String>,
}

fn find<'a>(indexes: &'a Indexes, id: &str) -> Result<&'a MatchIndex, ApiError> {
    indexes.get(id).ok_or_else(|| ApiError::not_found(format!("no match with id {id:?}")))
}

fn coordinate(name: &str, raw: &str) -> Result<u32, ApiError> {
    match raw.parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(ApiError::bad_request(format!("{name} must be a positive integer, got {raw:?}"))),
    }
}

fn nonempty(records: Vec<&RallyRecord>, what: String) -> Result<Vec<&RallyRecord>, ApiError> {
    if records.is_empty() {
        return Err(ApiError::not_found(format!("no rallies at {what}")));
    }
    Ok(records)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn list_matches(State(indexes): State<Indexes>) -> Response {
    let listing: Vec<MatchListing> = indexes
        .values()
        .map(|idx| MatchListing { match_id: &idx.match_id, rallies: idx.rallies.len(), format: idx.format })
        .collect();
    Json(listing).into_response()
}

async fn get_match(State(indexes): State<Indexes>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(Json(find(&indexes, &id)?).into_response())
}

async fn segments(
    State(indexes): State<Indexes>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<TagQuery>,
) -> Result<Response, ApiError> {
    let idx = find(&indexes, &id)?;
    let records: Vec<&RallyRecord> = match query.tag.as_deref() {
        None => idx.rallies.iter().collect(),
        Some(raw) => {
            let tag: EventTag = raw
                .parse()
                .map_err(|_| ApiError::bad_request(format!("unknown tag {raw:?}; expected fault, deuce or advantage")))?;
            idx.filter_by_tag(tag)
        }
    };
    Ok(Json(records).into_response())
}

async fn get_set(
    State(indexes): State<Indexes>,
    UrlPath((id, s)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let idx = find(&indexes, &id)?;
    let set_no = coordinate("set", &s)?;
    let rallies = nonempty(idx.query_set(set_no), format!("set {set_no}"))?;
    let summary = idx
        .set_summaries()
        .into_iter()
        .find(|sum| sum.set_no == set_no)
        .expect("a set with rallies has a summary");
    let view = SetView { set_no, winner: summary.winner, games: summary.games, rallies };
    Ok(Json(view).into_response())
}

async fn get_game(
    State(indexes): State<Indexes>,
    UrlPath((id, s, g)): UrlPath<(String, String, String)>,
) -> Result<Response, ApiError> {
    let idx = find(&indexes, &id)?;
    let (set_no, game_no) = (coordinate("set", &s)?, coordinate("game", &g)?);
    let rallies = nonempty(idx.query_game(set_no, game_no), format!("set {set_no} game {game_no}"))?;
    Ok(Json(GameView { set_no, game_no, rallies }).into_response())
}

async fn get_point(
    State(indexes): State<Indexes>,
    UrlPath((id, s, g, p)): UrlPath<(String, String, String, String)>,
) -> ApiResult<Vec<RallyRecord>> {
    let idx = find(&indexes, &id)?;
    let (set_no, game_no, point_no) = (coordinate("set", &s)?, coordinate("game", &g)?, coordinate("point", &p)?);
    let records = nonempty(
        idx.query_point(set_no, game_no, point_no),
        format!("set {set_no} game {game_no} point {point_no}"),
    )?;
    Ok(Json(records.into_iter().cloned().collect()))
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// The API routes, plus the static directory (if any) for everything else.
pub fn router(indexes: Indexes, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/matches", get(list_matches))
        .route("/api/matches/{id}", get(get_match))
        .route("/api/matches/{id}/segments", get(segments))
        .route("/api/matches/{id}/sets/{s}", get(get_set))
        .route("/api/matches/{id}/sets/{s}/games/{g}", get(get_game))
        .route("/api/matches/{id}/points/{s}/{g}/{p}", get(get_point))
        .route("/api/{*rest}", get(api_not_found))
        .with_state(indexes);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.fallback(api_not_found),
    }
}

/// Loads the indexes, binds, and serves until interrupted.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    if let Some(dir) = &cfg.static_dir {
        if !dir.is_dir() {
            return Err(ServiceError::StaticDir(dir.clone()));
        }
    }
    let indexes = Arc::new(load_indexes(&cfg.index_dir)?);
    let app = router(indexes, cfg.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(cfg.addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: cfg.addr, source })?;
    let local = listener.local_addr().map_err(ServiceError::Serve)?;
    tracing::info!(%local, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
