//! HTTP review API over a segment output directory.

use std::collections::HashMap;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use visionseg_core::imaging::image_dimensions;
use visionseg_core::SystemRegion;

use crate::review::{apply, now, Journal, JournalEntry, QueueLayout, ReviewItem, Verdict};

struct Snapshot {
    items: Vec<ReviewItem>,
    index: HashMap<String, usize>,
}

impl Snapshot {
    fn new(items: Vec<ReviewItem>) -> Self {
        let index = items
            .iter()
            .enumerate()
            .map(|(k, it)| (it.item_id.clone(), k))
            .collect();
        Self { items, index }
    }

    fn get(&self, id: &str) -> Option<&ReviewItem> {
        self.index.get(id).map(|&k| &self.items[k])
    }
}

/// Shared server state: readers take the current snapshot, verdicts go
/// through the single journal writer and publish a new snapshot.
pub struct AppState {
    layout: QueueLayout,
    snapshot: RwLock<Arc<Snapshot>>,
    journal: Mutex<Journal>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    /// Loads the queue and replays its journal.
    pub fn open(queue_dir: impl Into<PathBuf>, ui_dir: Option<PathBuf>) -> Result<Self> {
        let layout = QueueLayout::new(queue_dir);
        let items = layout.load_items()?;
        let journal = Journal::open(&layout.journal())?;
        Ok(Self {
            layout,
            snapshot: RwLock::new(Arc::new(Snapshot::new(items))),
            journal: Mutex::new(journal),
            ui_dir,
        })
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot
            .read()
            .expect("snapshot lock poisoned")
            .clone()
    }

    fn record(&self, entry: JournalEntry) -> Result<ReviewItem> {
        let mut journal = self.journal.lock().expect("journal lock poisoned");
        journal.append(&entry)?;
        let current = self.snapshot();
        let mut items = current.items.clone();
        let k = current.index[&entry.item_id];
        apply(&mut items[k], &entry);
        let item = items[k].clone();
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(Snapshot::new(items));
        Ok(item)
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown item {id:?}"))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn find(state: &AppState, id: &str) -> ApiResult<ReviewItem> {
    state
        .snapshot()
        .get(id)
        .cloned()
        .ok_or_else(|| not_found(id))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<String>,
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ItemPage {
    items: Vec<ReviewItem>,
    total: usize,
    page: usize,
    per_page: usize,
}

const MAX_PER_PAGE: usize = 500;

async fn list_items(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ListQuery>,
) -> ApiResult<Json<ItemPage>> {
    let status =
        match q.status.as_deref() {
            None | Some("") | Some("all") => None,
            Some(s) => Some(Verdict::parse(s).ok_or_else(|| {
                ApiError(StatusCode::BAD_REQUEST, format!("unknown status {s:?}"))
            })?),
        };
    let page = q.page.unwrap_or(1).max(1);
    let per_page = q.per_page.unwrap_or(50).clamp(1, MAX_PER_PAGE);
    let snap = state.snapshot();
    let matching: Vec<&ReviewItem> = snap
        .items
        .iter()
        .filter(|it| status.map(|s| it.verdict == s).unwrap_or(true))
        .collect();
    let items = matching
        .iter()
        .skip((page - 1).saturating_mul(per_page))
        .take(per_page)
        .map(|it| (*it).clone())
        .collect();
    Ok(Json(ItemPage {
        items,
        total: matching.len(),
        page,
        per_page,
    }))
}

async fn get_item(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<ReviewItem>> {
    Ok(Json(find(&state, &id)?))
}

fn content_type(path: &FsPath) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn send_file(path: PathBuf) -> ApiResult<Response> {
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("missing file {}", path.display()),
        )),
        Err(e) => Err(internal(e)),
    }
}

async fn get_image(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let item = find(&state, &id)?;
    send_file(state.layout.root.join(&item.image)).await
}

async fn get_page(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let item = find(&state, &id)?;
    send_file(PathBuf::from(&item.source_page)).await
}

#[derive(Debug, Serialize)]
struct PageContext {
    item_id: String,
    page_id: String,
    page_url: String,
    image_url: String,
    page_height: usize,
    page_width: usize,
    region: SystemRegion,
}

async fn get_context(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<PageContext>> {
    let item = find(&state, &id)?;
    let (page_height, page_width) = image_dimensions(&item.source_page)
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, e.to_string()))?;
    Ok(Json(PageContext {
        page_url: format!("/api/items/{}/page", item.item_id),
        image_url: format!("/api/items/{}/image", item.item_id),
        item_id: item.item_id,
        page_id: item.page_id,
        page_height,
        page_width,
        region: item.region,
    }))
}

/// Reads `{"verdict": "accepted" | "rejected", "note": optional string}`.
fn parse_verdict(body: &Value) -> std::result::Result<(Verdict, Option<String>), String> {
    let obj = body.as_object().ok_or("body must be a JSON object")?;
    let verdict = match obj.get("verdict").and_then(Value::as_str) {
        Some("accepted") => Verdict::Accepted,
        Some("rejected") => Verdict::Rejected,
        _ => return Err("verdict must be \"accepted\" or \"rejected\"".into()),
    };
    let note = match obj.get("note") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("note must be a string".into()),
    };
    Ok((verdict, note))
}

async fn post_verdict(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ReviewItem>> {
    find(&state, &id)?;
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")))?;
    let (verdict, note) =
        parse_verdict(&value).map_err(|msg| ApiError(StatusCode::CONFLICT, msg))?;
    let entry = JournalEntry {
        item_id: id,
        verdict,
        note,
        timestamp: now(),
    };
    let state = state.clone();
    let item = tokio::task::spawn_blocking(move || state.record(entry))
        .await
        .map_err(internal)?
        .map_err(internal)?;
    Ok(Json(item))
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct Progress {
    pub total: usize,
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
}

async fn progress(State(state): State<Arc<AppState>>) -> Json<Progress> {
    let snap = state.snapshot();
    let mut p = Progress {
        total: snap.items.len(),
        ..Progress::default()
    };
    for it in &snap.items {
        match it.verdict {
            Verdict::Pending => p.pending += 1,
            Verdict::Accepted => p.accepted += 1,
            Verdict::Rejected => p.rejected += 1,
        }
    }
    Json(p)
}

/// Static UI files; unknown paths without an extension fall back to
/// `index.html` so client-side routes resolve.
async fn static_file(State(state): State<Arc<AppState>>, uri: Uri) -> ApiResult<Response> {
    let Some(root) = state.ui_dir.clone() else {
        return Err(ApiError(StatusCode::NOT_FOUND, "no such route".into()));
    };
    let rel = PathBuf::from(uri.path().trim_start_matches('/'));
    if uri.path().starts_with("/api/")
        || rel.components().any(|c| !matches!(c, Component::Normal(_)))
    {
        return Err(ApiError(StatusCode::NOT_FOUND, "no such route".into()));
    }
    let path = root.join(&rel);
    if path.is_file() {
        send_file(path).await
    } else if rel.extension().is_none() {
        send_file(root.join("index.html")).await
    } else {
        Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("missing file {}", rel.display()),
        ))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/items", get(list_items))
        .route("/api/items/{id}", get(get_item))
        .route("/api/items/{id}/image", get(get_image))
        .route("/api/items/{id}/context", get(get_context))
        .route("/api/items/{id}/page", get(get_page))
        .route("/api/items/{id}/verdict", post(post_verdict))
        .route("/api/progress", get(progress))
        .fallback(static_file)
        .with_state(state)
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))?;
    eprintln!("serving review API on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
