//! HTTP API over a directory of runs.
//!
//! Every response body is JSON with a `v` field. Reads share a per-run
//! read lock; a scheme update re-runs the pipeline on a staging copy and
//! swaps the files in under the write lock, so readers see either the old
//! run or the new one, never a mix.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use forumcode_core::autocoder::{CodeScheme, SchemeError};
use forumcode_core::corpus::Source;
use forumcode_core::ena::EnaError;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex as AsyncMutex, RwLock};

use crate::error::PipelineError;
use crate::pipeline::{self as p, KappaArtifact};
use crate::run::{round_floats, sha256_hex, RunDir, MANIFEST, SCHEMA_VERSION};

const STAGING: &str = ".staging";

#[derive(Default)]
struct RunLocks {
    /// Serializes scheme updates.
    writer: AsyncMutex<()>,
    /// Guards the files themselves.
    files: RwLock<()>,
}

#[derive(Clone)]
pub struct AppState {
    root: PathBuf,
    locks: Arc<Mutex<HashMap<String, Arc<RunLocks>>>>,
}

impl AppState {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        AppState { root: root.into(), locks: Arc::default() }
    }

    fn locks(&self, id: &str) -> Arc<RunLocks> {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(id.to_string()).or_default().clone()
    }

    fn run(&self, id: &str) -> Result<RunDir, ApiError> {
        let valid = !id.is_empty()
            && !id.starts_with('.')
            && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.');
        let dir = self.root.join(id);
        if !valid || !dir.join(MANIFEST).is_file() {
            return Err(ApiError::not_found(format!("no run `{id}`")));
        }
        Ok(RunDir::open(dir))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({"v": SCHEMA_VERSION, "error": message.into()}) }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }

    fn fields(fields: Vec<(String, String)>) -> Self {
        let list: Vec<Value> = fields.iter().map(|(f, m)| json!({"field": f, "message": m})).collect();
        let message = fields.iter().map(|(f, m)| format!("{f}: {m}")).collect::<Vec<_>>().join("; ");
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({"v": SCHEMA_VERSION, "error": message, "fields": list}),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::MissingStage { .. } => ApiError::not_found(e.to_string()),
            PipelineError::Usage(m) => ApiError::new(StatusCode::BAD_REQUEST, m),
            PipelineError::Scheme(s) => scheme_error(s),
            PipelineError::Ena(EnaError::UnknownUnit(u)) => ApiError::not_found(format!("no unit {u}")),
            other => {
                log::error!("{other}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string())
            }
        }
    }
}

fn scheme_error(e: SchemeError) -> ApiError {
    match e {
        SchemeError::Invalid(list) => ApiError::fields(list.into_iter().map(|f| (f.field, f.message)).collect()),
        SchemeError::UnknownTopic(t) => ApiError::fields(vec![(format!("topic_map.{t}"), e.to_string())]),
        SchemeError::UnknownCode { .. } => ApiError::fields(vec![("codes".into(), e.to_string())]),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Adds the schema version to a JSON object and rounds its floats like the
/// artifacts on disk.
fn versioned(value: impl serde::Serialize) -> ApiResult {
    let mut v =
        serde_json::to_value(value).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert("v".into(), json!(SCHEMA_VERSION));
    }
    Ok(Json(round_floats(v)))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

/// Revision token of the stored scheme: a hash of its bytes.
fn revision(run: &RunDir) -> Result<String, ApiError> {
    let bytes = run.read_bytes(p::SCHEME_INPUT, "code")?;
    Ok(sha256_hex(&bytes)[..16].to_string())
}

async fn list_runs(State(state): State<AppState>) -> ApiResult {
    let root = state.root.clone();
    let runs = blocking(move || {
        let mut runs = Vec::new();
        let entries = match std::fs::read_dir(&root) {
            Ok(e) => e,
            Err(_) => return Ok(runs),
        };
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') || !entry.path().join(MANIFEST).is_file() {
                continue;
            }
            let manifest = RunDir::open(entry.path()).manifest().map_err(ApiError::from)?;
            let stages: Vec<&str> = [
                ("ingest", p::CORPUS),
                ("preprocess", p::TOKENS),
                ("topics", p::TOPICS),
                ("code", p::CODED),
                ("agreement", p::KAPPA),
                ("ena", p::ENA_SPACE),
                ("stats", p::STATS),
                ("report", p::REPORT),
            ]
            .into_iter()
            .filter(|(_, f)| manifest.artifacts.contains_key(*f))
            .map(|(s, _)| s)
            .collect();
            runs.push(json!({"id": name, "run_id": manifest.run_id, "stages": stages}));
        }
        runs.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
        Ok(runs)
    })
    .await?;
    Ok(Json(json!({"v": SCHEMA_VERSION, "runs": runs})))
}

/// Runs `f` on the run's files under the shared lock.
async fn read_run<T, F>(state: &AppState, id: &str, f: F) -> ApiResult
where
    T: serde::Serialize,
    F: FnOnce(&RunDir) -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    let run = state.run(id)?;
    let locks = state.locks(id);
    let _guard = locks.files.read().await;
    let value = blocking(move || f(&run)).await?;
    versioned(value)
}

async fn get_topics(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    read_run(&state, &id, |run| Ok(p::load_topics(run)?)).await
}

async fn get_scheme(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    read_run(&state, &id, |run| {
        Ok(json!({
            "revision": revision(run)?,
            "scheme": p::load_scheme_input(run)?,
            "resolved": p::load_scheme(run)?,
        }))
    })
    .await
}

#[derive(Deserialize)]
struct SchemeUpdate {
    revision: String,
    scheme: CodeScheme,
}

fn staging_dir(root: &Path, id: &str) -> PathBuf {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    root.join(STAGING).join(format!("{id}-{nanos}"))
}

fn visible_files(dir: &Path) -> std::io::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && !name.starts_with('.') {
            names.push(name);
        }
    }
    Ok(names)
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Replaces the run's files by the staged ones.
fn swap_in(run: &RunDir, staged: &Path) -> Result<(), ApiError> {
    let new = visible_files(staged).map_err(internal)?;
    for name in visible_files(run.root()).map_err(internal)? {
        if !new.contains(&name) {
            std::fs::remove_file(run.path(&name)).map_err(internal)?;
        }
    }
    for name in &new {
        std::fs::rename(staged.join(name), run.path(name)).map_err(internal)?;
    }
    std::fs::remove_dir_all(staged).map_err(internal)
}

async fn put_scheme(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let run = state.run(&id)?;
    let raw: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("request body is not JSON: {e}")))?;
    let update: SchemeUpdate =
        serde_json::from_value(raw).map_err(|e| ApiError::fields(vec![("scheme".into(), e.to_string())]))?;

    let locks = state.locks(&id);
    let _writer = locks.writer.lock().await;
    let current = revision(&run)?;
    if update.revision != current {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "v": SCHEMA_VERSION,
                "error": "the scheme changed since it was read; reload and retry",
                "revision": current,
            }),
        });
    }

    let staged = staging_dir(&state.root, &id);
    let source = run.clone();
    let scheme = update.scheme;
    let previous = blocking({
        let staged = staged.clone();
        move || {
            p::check_scheme(&source, &scheme)?;
            let previous = if source.has(p::KAPPA) { Some(p::load_kappa(&source, p::KAPPA)?) } else { None };
            std::fs::create_dir_all(&staged).map_err(internal)?;
            for name in visible_files(source.root()).map_err(internal)? {
                std::fs::copy(source.path(&name), staged.join(&name)).map_err(internal)?;
            }
            let staging_run = RunDir::open(&staged);
            if let Err(e) = p::recompute(&staging_run, &scheme) {
                let _ = std::fs::remove_dir_all(&staged);
                return Err(e.into());
            }
            Ok(previous)
        }
    })
    .await?;

    let _files = locks.files.write().await;
    let target = run.clone();
    let (kappa, artifacts, revision) = blocking(move || {
        swap_in(&target, &staged)?;
        let kappa: Option<KappaArtifact> =
            if target.has(p::KAPPA) { Some(p::load_kappa(&target, p::KAPPA)?) } else { None };
        let manifest = target.manifest()?;
        Ok((kappa, manifest.artifacts, revision(&target)?))
    })
    .await?;
    log::info!("run {id}: scheme updated to revision {revision}");
    versioned(json!({
        "revision": revision,
        "artifacts": artifacts,
        "kappa": kappa,
        "previous_kappa": previous,
    }))
}

async fn get_kappa(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    read_run(&state, &id, |run| {
        Ok(json!({
            "a_plus_hk": p::load_kappa(run, p::KAPPA)?,
            "lda_only": p::load_kappa(run, p::KAPPA_LDA)?,
        }))
    })
    .await
}

async fn get_space(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    read_run(&state, &id, |run| Ok(p::load_space(run)?)).await
}

#[derive(Deserialize)]
struct NetworkQuery {
    group: String,
    unit: Option<String>,
}

async fn get_network(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<NetworkQuery>,
) -> ApiResult {
    let bad = |g: &str| {
        ApiError::new(StatusCode::BAD_REQUEST, format!("unknown group `{g}`; use algorithm, human or difference"))
    };
    match (q.group.as_str(), &q.unit) {
        ("algorithm" | "human", _) | ("difference", None) => {}
        ("difference", Some(_)) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "unit networks exist for algorithm or human only"))
        }
        (g, _) => return Err(bad(g)),
    }
    read_run(&state, &id, move |run| {
        if let Some(unit) = &q.unit {
            let source: Source = q.group.parse().map_err(|_| bad(&q.group))?;
            return Ok(p::load_space(run)?.unit_network(unit, source).map_err(PipelineError::from)?);
        }
        let n = p::load_networks(run)?;
        Ok(match q.group.as_str() {
            "algorithm" => n.algorithm,
            "human" => n.human,
            _ => n.difference,
        })
    })
    .await
}

async fn get_stats(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    read_run(&state, &id, |run| {
        let stats = p::load_stats(run)?;
        let lines: Vec<String> = stats.results.iter().map(|r| r.summary_line()).collect();
        Ok(json!({"alternative": stats.alternative, "results": stats.results, "lines": lines}))
    })
    .await
}

#[derive(Deserialize)]
struct ExcerptQuery {
    unit: String,
    source: String,
    a: String,
    b: String,
}

async fn get_excerpts(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExcerptQuery>,
) -> ApiResult {
    let source: Source = q
        .source
        .parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("unknown source `{}`", q.source)))?;
    read_run(&state, &id, move |run| {
        let excerpts = p::excerpts(run, &q.unit, source, &q.a, &q.b)?;
        let mut by_code: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &excerpts {
            for c in &e.codes {
                *by_code.entry(c.as_str()).or_default() += 1;
            }
        }
        Ok(json!({"unit": q.unit, "source": source, "a": q.a, "b": q.b, "counts": by_code, "excerpts": excerpts}))
    })
    .await
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}/topics", get(get_topics))
        .route("/runs/{id}/scheme", get(get_scheme).put(put_scheme))
        .route("/runs/{id}/kappa", get(get_kappa))
        .route("/runs/{id}/ena/space", get(get_space))
        .route("/runs/{id}/ena/network", get(get_network))
        .route("/runs/{id}/stats", get(get_stats))
        .route("/runs/{id}/excerpts", get(get_excerpts))
        .fallback(not_found)
        .with_state(state)
}

/// Serves the API, plus static files from `static_dir` for any other path.
pub async fn serve(root: PathBuf, addr: std::net::SocketAddr, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let mut app = router(AppState::new(root));
    if let Some(dir) = static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
