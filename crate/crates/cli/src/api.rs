//! HTTP routes over [`Engine`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tableau_core::scene::render_vector;
use tableau_core::{Event, SessionArchive};

use crate::config::DEFAULT_PENDING_AFTER;
use crate::engine::{Engine, JudgeRequest, SceneMode, Session, TranslatePath};
use crate::error::{ApiError, ErrorCode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Done { result: Value },
    Failed { error: ApiError },
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    jobs: Arc<Mutex<HashMap<String, JobStatus>>>,
    pending_after: Duration,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        Self::with_pending_after(engine, DEFAULT_PENDING_AFTER)
    }

    pub fn with_pending_after(engine: Engine, pending_after: Duration) -> Self {
        AppState {
            engine: Arc::new(engine),
            jobs: Arc::new(Mutex::new(HashMap::new())),
            pending_after,
        }
    }

    fn set_job(&self, id: &str, status: JobStatus) {
        self.jobs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.to_string(), status);
    }
}

/// JSON body whose rejection uses the common error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(json_rejection(e)),
        }
    }
}

fn json_rejection(e: JsonRejection) -> ApiError {
    let code = match e {
        JsonRejection::JsonDataError(_) => ErrorCode::ValidationFailed,
        _ => ErrorCode::BadRequest,
    };
    ApiError::new(code, e.body_text())
}

pub struct PathParams<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for PathParams<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Path::<T>::from_request_parts(parts, state)
            .await
            .map(|p| PathParams(p.0))
            .map_err(|e: PathRejection| ApiError::bad_request(e.body_text()))
    }
}

pub struct QueryParams<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for QueryParams<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| QueryParams(q.0))
            .map_err(|e: QueryRejection| ApiError::bad_request(e.body_text()))
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a model-backed operation off the async workers. If it takes longer
/// than the pending threshold the caller gets `202 {status, jobId}` and the
/// result lands under `/jobs/{jobId}`.
async fn run_model<T, F>(st: &AppState, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    let mut handle = tokio::task::spawn_blocking(f);
    let finish = |joined: Result<Result<T, ApiError>, tokio::task::JoinError>| match joined {
        Ok(r) => r,
        Err(e) => Err(ApiError::new(ErrorCode::Internal, e.to_string())),
    };
    match tokio::time::timeout(st.pending_after, &mut handle).await {
        Ok(joined) => match finish(joined) {
            Ok(v) => Json(v).into_response(),
            Err(e) => e.into_response(),
        },
        Err(_) => {
            let id = uuid::Uuid::new_v4().simple().to_string();
            st.set_job(&id, JobStatus::Pending);
            let st2 = st.clone();
            let job = id.clone();
            tokio::spawn(async move {
                let status = match finish(handle.await) {
                    Ok(v) => JobStatus::Done {
                        result: serde_json::to_value(v).unwrap_or(Value::Null),
                    },
                    Err(error) => JobStatus::Failed { error },
                };
                st2.set_job(&job, status);
            });
            (
                StatusCode::ACCEPTED,
                Json(json!({ "status": "pending", "jobId": id })),
            )
                .into_response()
        }
    }
}

fn spawn_caption(st: &AppState, req: Option<crate::engine::CaptionRequest>) {
    if let Some(req) = req {
        let engine = st.engine.clone();
        tokio::task::spawn_blocking(move || engine.run_caption(&req));
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/bundles", get(list_bundles))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/steps/{index}/caption", patch(edit_caption))
        .route("/sessions/{id}/instruct", post(instruct))
        .route("/sessions/{id}/predict", post(predict))
        .route("/sessions/{id}/proposals/{k}/accept", post(accept_proposal))
        .route("/sessions/{id}/proposals/{k}/reject", post(reject_proposal))
        .route("/sessions/{id}/goals/{object}", get(goals))
        .route("/sessions/{id}/goals/{object}/accept", post(accept_goal))
        .route("/sessions/{id}/scene/{index}", get(scene))
        .route("/sessions/{id}/translate", post(translate))
        .route("/sessions/{id}/archive", get(get_archive).put(put_archive))
        .route("/judge", post(judge))
        .route("/jobs/{id}", get(job))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such route") })
        .with_state(state)
}

async fn list_bundles(State(st): State<AppState>) -> Json<Vec<String>> {
    Json(st.engine.bundle_ids())
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    bundle: String,
}

async fn create_session(
    State(st): State<AppState>,
    Body(req): Body<CreateSession>,
) -> Result<(StatusCode, Json<crate::engine::SessionView>), ApiError> {
    let s = st.engine.create_session(&req.bundle)?;
    Ok((StatusCode::CREATED, Json(st.engine.view(&s))))
}

fn session(st: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    st.engine.session(id)
}

async fn get_session(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
) -> ApiResult<crate::engine::SessionView> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.view(&s)))
}

#[derive(Debug, Deserialize)]
struct EventRequest {
    revision: u64,
    event: Event,
}

async fn post_event(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
    Body(req): Body<EventRequest>,
) -> ApiResult<crate::engine::EditResult> {
    let s = session(&st, &id)?;
    let (result, caption) = st.engine.apply_event(&s, req.revision, &req.event)?;
    spawn_caption(&st, caption);
    Ok(Json(result))
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct CaptionEdit {
    text: String,
    #[serde(default = "default_true")]
    linked: bool,
    #[serde(default)]
    revision: Option<u64>,
}

async fn edit_caption(
    State(st): State<AppState>,
    PathParams((id, index)): PathParams<(String, usize)>,
    Body(req): Body<CaptionEdit>,
) -> Response {
    let s = match session(&st, &id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let engine = st.engine.clone();
    run_model(&st, move || {
        engine.edit_caption(&s, index, &req.text, req.linked, req.revision)
    })
    .await
}

#[derive(Debug, Deserialize)]
struct InstructRequest {
    text: String,
    #[serde(default)]
    revision: Option<u64>,
}

async fn instruct(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
    Body(req): Body<InstructRequest>,
) -> Response {
    let s = match session(&st, &id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let engine = st.engine.clone();
    run_model(&st, move || engine.instruct(&s, &req.text, req.revision)).await
}

async fn predict(State(st): State<AppState>, PathParams(id): PathParams<String>) -> Response {
    let s = match session(&st, &id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let engine = st.engine.clone();
    run_model(&st, move || engine.predict(&s)).await
}

async fn accept_proposal(
    State(st): State<AppState>,
    PathParams((id, k)): PathParams<(String, usize)>,
) -> ApiResult<crate::engine::EditResult> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.accept_proposal(&s, k)?))
}

async fn reject_proposal(
    State(st): State<AppState>,
    PathParams((id, k)): PathParams<(String, usize)>,
) -> ApiResult<crate::engine::ProposalView> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.reject_proposal(&s, k)?))
}

async fn goals(
    State(st): State<AppState>,
    PathParams((id, object)): PathParams<(String, String)>,
) -> ApiResult<tableau_core::assist::GoalProposal> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.goals(&s, &object)?))
}

#[derive(Debug, Deserialize)]
struct GoalAccept {
    index: usize,
    #[serde(default)]
    revision: Option<u64>,
}

async fn accept_goal(
    State(st): State<AppState>,
    PathParams((id, object)): PathParams<(String, String)>,
    Body(req): Body<GoalAccept>,
) -> ApiResult<crate::engine::EditResult> {
    let s = session(&st, &id)?;
    let (result, caption) = st.engine.accept_goal(&s, &object, req.index, req.revision)?;
    spawn_caption(&st, caption);
    Ok(Json(result))
}

#[derive(Debug, Deserialize)]
struct SceneQuery {
    #[serde(default)]
    mode: SceneMode,
    #[serde(default)]
    width: Option<u32>,
    /// `svg` (default) or `json` for the layer document.
    #[serde(default)]
    format: Option<String>,
}

async fn scene(
    State(st): State<AppState>,
    PathParams((id, index)): PathParams<(String, usize)>,
    QueryParams(q): QueryParams<SceneQuery>,
) -> Result<Response, ApiError> {
    let s = session(&st, &id)?;
    let doc = st.engine.scene(&s, index, q.mode)?;
    match q.format.as_deref() {
        None | Some("svg") => Ok((
            [(header::CONTENT_TYPE, "image/svg+xml")],
            render_vector(&doc, q.width),
        )
            .into_response()),
        Some("json") => Ok(Json(doc).into_response()),
        Some(other) => Err(ApiError::bad_request(format!("unknown scene format `{other}`"))),
    }
}

#[derive(Debug, Default, Deserialize)]
struct TranslateRequest {
    #[serde(default)]
    path: TranslatePath,
}

async fn translate(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
    Body(req): Body<TranslateRequest>,
) -> Response {
    let s = match session(&st, &id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let engine = st.engine.clone();
    match req.path {
        TranslatePath::Rule => match engine.translate(&s, req.path) {
            Ok(r) => Json(r).into_response(),
            Err(e) => e.into_response(),
        },
        TranslatePath::Llm => run_model(&st, move || engine.translate(&s, req.path)).await,
    }
}

async fn get_archive(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
) -> ApiResult<SessionArchive> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.archive(&s)))
}

async fn put_archive(
    State(st): State<AppState>,
    PathParams(id): PathParams<String>,
    Body(archive): Body<SessionArchive>,
) -> ApiResult<crate::engine::SessionView> {
    let s = session(&st, &id)?;
    Ok(Json(st.engine.load_archive(&s, &archive)?))
}

async fn judge(
    State(st): State<AppState>,
    Body(req): Body<JudgeRequest>,
) -> ApiResult<tableau_core::judge::ErrorReport> {
    Ok(Json(st.engine.judge(&req)?))
}

async fn job(State(st): State<AppState>, PathParams(id): PathParams<String>) -> ApiResult<JobStatus> {
    st.jobs
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
