use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use cordsearch_core::search::Engine;

use crate::api::{self, SearchPayload};
use crate::datadir::DataDir;
use crate::error::Error;
use crate::feedback::{now_iso, FeedbackEvent, FeedbackRequest, FeedbackStore, QuerySession, SessionStore};

/// Shared server state. Requests clone the current engine snapshot and work
/// on it without holding any lock, so a reload swaps snapshots between
/// requests.
pub struct AppState {
    engine: RwLock<Option<Arc<Engine>>>,
    data_dir: Option<PathBuf>,
    sessions: Mutex<SessionStore>,
    feedback: Mutex<FeedbackStore>,
}

impl AppState {
    /// A state with no engine yet; every engine-backed endpoint answers 503
    /// until [`AppState::install`] is called.
    pub fn new(
        data_dir: Option<PathBuf>,
        sessions_log: &std::path::Path,
        feedback_log: &std::path::Path,
    ) -> crate::error::Result<Arc<Self>> {
        Ok(Arc::new(Self {
            engine: RwLock::new(None),
            data_dir,
            sessions: Mutex::new(SessionStore::open(sessions_log)?),
            feedback: Mutex::new(FeedbackStore::open(feedback_log)?),
        }))
    }

    pub fn install(&self, engine: Engine) {
        *self.engine.write().unwrap() = Some(Arc::new(engine));
    }

    pub fn snapshot(&self) -> Option<Arc<Engine>> {
        self.engine.read().unwrap().clone()
    }

    pub fn is_ready(&self) -> bool {
        self.engine.read().unwrap().is_some()
    }

    /// Rebuild the engine from the data directory and swap it in.
    pub fn reload(&self) -> crate::error::Result<usize> {
        let Some(dir) = &self.data_dir else {
            return Err(Error::user("server was started without a data directory"));
        };
        let engine = DataDir::open(dir)?.load_engine()?;
        let n = engine.doc_count();
        self.install(engine);
        Ok(n)
    }

    pub fn session(&self, query_id: &str) -> Option<QuerySession> {
        self.sessions.lock().unwrap().get(query_id).cloned()
    }
}

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::User(_) => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            error: String,
        }
        (self.0, Json(Body { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn ready(state: &AppState) -> ApiResult<Arc<Engine>> {
    state
        .snapshot()
        .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "index is loading".into()))
}

/// Run CPU-bound engine work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> crate::error::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn json_body(bytes: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

/// Query-string pairs, rejecting parameters outside `allowed`.
fn params(raw: Option<String>, allowed: &[&str]) -> ApiResult<Vec<(String, String)>> {
    let pairs: Vec<(String, String)> = form_urlencoded::parse(raw.unwrap_or_default().as_bytes())
        .into_owned()
        .collect();
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(bad_request(format!("unknown parameter `{k}`")));
    }
    Ok(pairs)
}

fn single<'a>(pairs: &'a [(String, String)], name: &str) -> ApiResult<Option<&'a str>> {
    let mut values = pairs.iter().filter(|(k, _)| k == name).map(|(_, v)| v.as_str());
    let first = values.next();
    if values.next().is_some() {
        return Err(bad_request(format!("parameter `{name}` given more than once")));
    }
    Ok(first)
}

fn parsed<T: std::str::FromStr>(pairs: &[(String, String)], name: &str) -> ApiResult<Option<T>> {
    single(pairs, name)?
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| bad_request(format!("invalid value `{v}` for `{name}`")))
        })
        .transpose()
}

async fn search(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let pairs = params(raw, &["q", "topics", "mode", "k"])?;
    let q = single(&pairs, "q")?.unwrap_or("").to_string();
    let topics: Vec<String> = pairs.iter().filter(|(k, _)| k == "topics").map(|(_, v)| v.clone()).collect();
    let mode = single(&pairs, "mode")?.map(String::from);
    let k = parsed::<usize>(&pairs, "k")?;
    let request = api::search_request(&q, &topics, mode.as_deref(), k)?;
    let engine = ready(&state)?;
    let req = request.clone();
    let response = blocking(move || api::run_search(&engine, &req)).await?;

    let query_id = uuid::Uuid::new_v4().to_string();
    let body = serde_json::to_string(&SearchPayload {
        query_id: &query_id,
        response: &response,
    })
    .map_err(|e| ApiError::from(Error::internal(e.to_string())))?;
    let session = QuerySession {
        query_id,
        query: request.query,
        topic_filter: request.topics.into_iter().collect(),
        mode: response.query.mode,
        doc_ids: response.docs.iter().map(|d| d.doc_id.clone()).collect(),
        timestamp: now_iso(),
    };
    state.sessions.lock().unwrap().record(session)?;
    Ok(json_body(body))
}

async fn topics(State(state): State<Arc<AppState>>) -> ApiResult<Json<api::TopicList>> {
    let engine = ready(&state)?;
    Ok(Json(api::topic_list(&engine)))
}

async fn article(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<api::ArticleView>> {
    let engine = ready(&state)?;
    Ok(Json(api::article_view(&engine, &id)?))
}

async fn similar(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Json<api::SimilarList>> {
    let pairs = params(raw, &["k", "alpha"])?;
    let k = parsed::<usize>(&pairs, "k")?;
    let alpha = parsed::<f64>(&pairs, "alpha")?;
    let engine = ready(&state)?;
    Ok(Json(blocking(move || api::similar(&engine, &id, k, alpha)).await?))
}

async fn citations(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<cordsearch_core::ckg::CitationNeighbors>> {
    let engine = ready(&state)?;
    Ok(Json(api::citations(&engine, &id)?))
}

async fn feedback(State(state): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult<StatusCode> {
    let request: FeedbackRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed feedback: {e}")))?;
    request.validate().map_err(bad_request)?;
    let engine = ready(&state)?;
    if !state.sessions.lock().unwrap().contains(&request.query_id) {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown query_id `{}`", request.query_id)));
    }
    if engine.article(&request.doc_id).is_none() {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown document `{}`", request.doc_id)));
    }
    let event = FeedbackEvent {
        event_id: request.event_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
        query_id: request.query_id,
        doc_id: request.doc_id,
        kind: request.kind,
        rating: request.rating,
        rank: request.rank,
        timestamp: now_iso(),
    };
    state.feedback.lock().unwrap().record(event)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    docs: usize,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(match state.snapshot() {
        Some(e) => Health {
            status: "ready",
            docs: e.doc_count(),
        },
        None => Health {
            status: "loading",
            docs: 0,
        },
    })
}

async fn reload(State(state): State<Arc<AppState>>) -> ApiResult<Json<Health>> {
    let s = state.clone();
    let docs = blocking(move || s.reload()).await?;
    Ok(Json(Health { status: "ready", docs }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/search", get(search))
        .route("/topics", get(topics))
        .route("/articles/{id}", get(article))
        .route("/articles/{id}/similar", get(similar))
        .route("/articles/{id}/citations", get(citations))
        .route("/feedback", post(feedback))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

/// Bind, start loading the engine in the background and serve until
/// interrupted. Requests arriving before the engine is ready get 503.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::user(format!("binding {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Error::internal(e.to_string()))?;
    log::info!("listening on http://{local}");
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match loader.reload() {
        Ok(n) => log::info!("index ready: {n} documents"),
        Err(e) => log::error!("loading index failed: {e}"),
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::internal(e.to_string()))
}
