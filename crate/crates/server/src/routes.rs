use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{async_trait, Json, Router};
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use threadloom_core::engine::{Engine, EngineError, ExportFormat, OpenPaper};
use threadloom_core::linker::{Highlight, ViewportTransform};
use threadloom_core::store::{CommitMode, PaperRef};

use crate::{ApiError, AppState, API_VERSION};

/// Request body wrapper.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<P> {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    /// Required revision for mutations; omitted means "whatever is current".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_revision: Option<u64>,
    pub payload: P,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reply<T> {
    pub version: u32,
    pub request_id: String,
    /// Revision the payload reflects; for mutations, the new revision.
    pub revision: u64,
    pub payload: T,
}

fn header_id(headers: &HeaderMap) -> Option<String> {
    headers.get("x-request-id").and_then(|v| v.to_str().ok()).map(str::to_string)
}

/// Parsed envelope plus the request id to answer with.
struct Api<P> {
    id: String,
    expected: Option<u64>,
    payload: P,
}

#[async_trait]
impl<P: DeserializeOwned> FromRequest<AppState> for Api<P> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &AppState) -> Result<Self, ApiError> {
        let fallback = header_id(req.headers());
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::new(e.status(), "BAD_REQUEST", e.body_text()))?;
        let env: Envelope<P> = serde_json::from_slice(&bytes).map_err(|e| {
            let id = state.request_id(fallback.clone());
            ApiError::schema(e.to_string()).with_id(&id)
        })?;
        let id = state.request_id(env.request_id.or(fallback));
        if env.version != API_VERSION {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "UNSUPPORTED_VERSION",
                format!("schema version {} is not supported; expected {API_VERSION}", env.version),
            )
            .with_id(&id));
        }
        Ok(Api { id, expected: env.expected_revision, payload: env.payload })
    }
}

type ApiResult<T> = Result<Json<Reply<T>>, ApiError>;

async fn run<T, F>(st: &AppState, id: String, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Engine) -> Result<(u64, T), EngineError> + Send + 'static,
{
    let engine = st.engine.clone();
    let out = tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()).with_id(&id))?;
    match out {
        Ok((revision, payload)) => Ok(Json(Reply { version: API_VERSION, request_id: id, revision, payload })),
        Err(e) => Err(ApiError::from(e).with_id(&id)),
    }
}

fn get_id(st: &AppState, headers: &HeaderMap) -> String {
    st.request_id(header_id(headers))
}

pub fn routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/documents", post(ingest))
        .route("/documents/:doc_id", get(document))
        .route("/papers/open", post(open_paper))
        .route("/highlights", post(highlight))
        .route("/tank", get(tank))
        .route("/tank/deselect", post(tank_deselect))
        .route("/tank/reselect", post(tank_reselect))
        .route("/tank/commit", post(commit))
        .route("/drawer", get(drawer))
        .route("/threads", get(drawer).post(create_thread))
        .route("/threads/:id", get(thread).patch(rename_thread).delete(delete_thread))
        .route("/threads/:id/move", post(move_thread))
        .route("/threads/:id/papers", post(add_paper))
        .route("/threads/:id/papers/remove", post(remove_paper))
        .route("/threads/:id/papers/move", post(move_paper))
        .route("/threads/:id/overview", get(overview))
        .route("/threads/:id/export", get(export_thread))
        .route("/threads/:id/recommendations", get(recommendations))
        .route("/threads/:id/recommendations/refresh", post(refresh))
        .route("/threads/:id/recommendations/add", post(add_recommendation))
        .route("/clips/:id", patch(edit_clip))
        .route("/suggest", post(suggest))
        .route("/export", get(export_all))
        .route("/assets/:sha", get(asset))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    workspace_id: String,
}

async fn health(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Health> {
    run(&st, get_id(&st, &headers), |e| {
        Ok((e.revision(), Health { status: "ok", workspace_id: e.config().workspace.clone() }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestPayload {
    /// A native parse as a JSON object, or the raw text of a JSON or TEI parse.
    content: Value,
}

async fn ingest(State(st): State<AppState>, api: Api<IngestPayload>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let raw = match api.payload.content {
            Value::String(s) => s.into_bytes(),
            other => serde_json::to_vec(&other).expect("value serializes"),
        };
        let summary = e.ingest(&raw)?;
        Ok((e.revision(), serde_json::to_value(summary).expect("summary serializes")))
    })
    .await
}

async fn document(State(st): State<AppState>, headers: HeaderMap, Path(doc_id): Path<String>) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), move |e| {
        let doc = e.document(&doc_id)?;
        let text = threadloom_core::doc_model::to_native_json(&doc);
        Ok((e.revision(), serde_json::from_str(&text).expect("native json parses")))
    })
    .await
}

#[derive(Serialize)]
struct Identity {
    identity: String,
}

async fn open_paper(State(st): State<AppState>, api: Api<OpenPaper>) -> ApiResult<Identity> {
    run(&st, api.id, move |e| {
        let m = e.open_paper(api.expected, &api.payload)?;
        Ok((m.revision, Identity { identity: m.value }))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighlightRequest {
    pub highlight: Highlight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ViewportTransform>,
    /// Base64 image for area highlights; a `data:` URL is accepted too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_base64: Option<String>,
}

fn decode_image(s: &str) -> Result<Vec<u8>, EngineError> {
    let data = if s.starts_with("data:") { s.split_once(',').map_or("", |(_, d)| d) } else { s };
    base64::engine::general_purpose::STANDARD
        .decode(data.trim())
        .map_err(|e| EngineError::InvalidRequest(format!("image_base64: {e}")))
}

async fn highlight(State(st): State<AppState>, api: Api<HighlightRequest>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let req = api.payload;
        let image = req.image_base64.as_deref().map(decode_image).transpose()?;
        let view = e.highlight(api.expected, &req.highlight, req.transform.as_ref(), image)?;
        Ok((view.revision, serde_json::to_value(view).expect("tank serializes")))
    })
    .await
}

async fn tank(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), |e| {
        let view = e.tank();
        Ok((view.revision, serde_json::to_value(view).expect("tank serializes")))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RefKey {
    key: String,
}

async fn tank_deselect(State(st): State<AppState>, api: Api<RefKey>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let view = e.tank_deselect(api.expected, &api.payload.key)?;
        Ok((view.revision, serde_json::to_value(view).expect("tank serializes")))
    })
    .await
}

async fn tank_reselect(State(st): State<AppState>, api: Api<RefKey>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let view = e.tank_reselect(api.expected, &api.payload.key)?;
        Ok((view.revision, serde_json::to_value(view).expect("tank serializes")))
    })
    .await
}

async fn commit(State(st): State<AppState>, api: Api<CommitMode>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let r = e.commit(api.expected, &api.payload)?;
        Ok((r.revision, serde_json::to_value(r).expect("commit serializes")))
    })
    .await
}

async fn drawer(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), |e| {
        let d = e.drawer();
        Ok((d.revision, serde_json::to_value(d).expect("drawer serializes")))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateThread {
    label: String,
    #[serde(default)]
    parent: Option<String>,
}

#[derive(Serialize)]
struct ThreadId {
    thread_id: String,
}

async fn create_thread(State(st): State<AppState>, api: Api<CreateThread>) -> ApiResult<ThreadId> {
    run(&st, api.id, move |e| {
        let p = api.payload;
        let m = e.create_thread(api.expected, &p.label, p.parent.as_deref())?;
        Ok((m.revision, ThreadId { thread_id: m.value }))
    })
    .await
}

async fn thread(State(st): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), move |e| {
        let rev = e.revision();
        Ok((rev, serde_json::to_value(e.thread(&id)?).expect("thread serializes")))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Rename {
    label: String,
}

async fn rename_thread(State(st): State<AppState>, Path(id): Path<String>, api: Api<Rename>) -> ApiResult<()> {
    run(&st, api.id, move |e| Ok((e.rename_thread(api.expected, &id, &api.payload.label)?.revision, ()))).await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DeleteThread {
    #[serde(default)]
    confirm: bool,
}

async fn delete_thread(State(st): State<AppState>, Path(id): Path<String>, api: Api<DeleteThread>) -> ApiResult<()> {
    run(&st, api.id, move |e| Ok((e.delete_thread(api.expected, &id, api.payload.confirm)?.revision, ()))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveThread {
    /// `null` moves to the top level.
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    position: Option<usize>,
}

async fn move_thread(State(st): State<AppState>, Path(id): Path<String>, api: Api<MoveThread>) -> ApiResult<()> {
    run(&st, api.id, move |e| {
        let p = api.payload;
        Ok((e.move_thread(api.expected, &id, p.parent.as_deref(), p.position)?.revision, ()))
    })
    .await
}

async fn add_paper(State(st): State<AppState>, Path(id): Path<String>, api: Api<PaperRef>) -> ApiResult<Identity> {
    run(&st, api.id, move |e| {
        let m = e.add_paper(api.expected, &id, api.payload)?;
        Ok((m.revision, Identity { identity: m.value }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PaperIdentity {
    identity: String,
}

async fn remove_paper(State(st): State<AppState>, Path(id): Path<String>, api: Api<PaperIdentity>) -> ApiResult<()> {
    run(&st, api.id, move |e| Ok((e.remove_paper(api.expected, &id, &api.payload.identity)?.revision, ()))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MovePaper {
    identity: String,
    to: String,
}

async fn move_paper(State(st): State<AppState>, Path(id): Path<String>, api: Api<MovePaper>) -> ApiResult<()> {
    run(&st, api.id, move |e| {
        let p = api.payload;
        Ok((e.move_paper(api.expected, &id, &p.identity, &p.to)?.revision, ()))
    })
    .await
}

async fn overview(State(st): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), move |e| {
        let o = e.overview(&id)?;
        Ok((o.revision, serde_json::to_value(o).expect("overview serializes")))
    })
    .await
}

#[derive(Deserialize)]
struct FormatQuery {
    #[serde(default)]
    format: Option<ExportFormat>,
}

#[derive(Serialize)]
struct Exported {
    format: ExportFormat,
    content: String,
}

async fn export(st: AppState, id: String, thread: Option<String>, q: FormatQuery) -> ApiResult<Exported> {
    let format = q.format.unwrap_or(ExportFormat::Outline);
    run(&st, id, move |e| {
        let rev = e.revision();
        Ok((rev, Exported { format, content: e.export(thread.as_deref(), format)? }))
    })
    .await
}

async fn export_thread(
    State(st): State<AppState>,
    headers: HeaderMap,
    Path(thread): Path<String>,
    Query(q): Query<FormatQuery>,
) -> ApiResult<Exported> {
    let id = get_id(&st, &headers);
    export(st, id, Some(thread), q).await
}

async fn export_all(State(st): State<AppState>, headers: HeaderMap, Query(q): Query<FormatQuery>) -> ApiResult<Exported> {
    let id = get_id(&st, &headers);
    export(st, id, None, q).await
}

async fn recommendations(State(st): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Value> {
    run(&st, get_id(&st, &headers), move |e| {
        e.thread(&id)?;
        let set = e.recommendations(&id)?;
        let rev = set.as_ref().map_or_else(|| e.revision(), |s| s.revision);
        Ok((rev, serde_json::to_value(set).expect("recommendations serialize")))
    })
    .await
}

async fn refresh(State(st): State<AppState>, Path(id): Path<String>, api: Api<Value>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let set = e.refresh_recommendations(&id)?;
        Ok((set.revision, serde_json::to_value(set).expect("recommendations serialize")))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddRecommendation {
    paper_id: String,
}

async fn add_recommendation(
    State(st): State<AppState>,
    Path(id): Path<String>,
    api: Api<AddRecommendation>,
) -> ApiResult<Identity> {
    run(&st, api.id, move |e| {
        let m = e.add_recommendation(api.expected, &id, &api.payload.paper_id)?;
        Ok((m.revision, Identity { identity: m.value }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditClip {
    text: String,
}

async fn edit_clip(State(st): State<AppState>, Path(id): Path<String>, api: Api<EditClip>) -> ApiResult<()> {
    run(&st, api.id, move |e| Ok((e.edit_clip(api.expected, &id, &api.payload.text)?.revision, ()))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestPayload {
    text: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn suggest(State(st): State<AppState>, api: Api<SuggestPayload>) -> ApiResult<Value> {
    run(&st, api.id, move |e| {
        let p = api.payload;
        let rev = e.revision();
        let out = e.suggest(&p.text, p.k.unwrap_or(threadloom_core::suggest::DEFAULT_SUGGESTIONS));
        Ok((rev, serde_json::to_value(out).expect("suggestions serialize")))
    })
    .await
}

async fn asset(State(st): State<AppState>, headers: HeaderMap, Path(sha): Path<String>) -> Response {
    let id = get_id(&st, &headers);
    let engine = st.engine.clone();
    let found = tokio::task::spawn_blocking(move || engine.snapshot().asset(&sha).cloned()).await.ok().flatten();
    match found {
        Some(bytes) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes.to_vec()).into_response(),
        None => ApiError::new(StatusCode::NOT_FOUND, "NO_SUCH_ASSET", "no such asset").with_id(&id).into_response(),
    }
}
