//! HTTP routes.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use hypotree_core::analytics::{session_report, SessionReport};
use hypotree_core::dataset::{ingest, summary_text, DataSummary};
use hypotree_core::generation::{branch_hypotheses, initial_hypotheses, HypothesisDraft};
use hypotree_core::hints::{
    compute_payload, derive_spec, fetch_supporting_text, query_for, ChartPayload, ChartSpec, SpecOrigin,
    SupportingText,
};
use hypotree_core::model::{HypothesisNode, NodeId};
use hypotree_core::{Session, SessionMeta};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

use crate::error::ApiError;
use crate::schema::schema_document;
use crate::state::{relayout, AppState, LayoutView, SessionSlot};

/// Upload limit for datasets.
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/analytics", get(analytics))
        .route("/sessions/{id}/nodes/{node_id}/branch", post(branch))
        .route("/sessions/{id}/nodes/{node_id}/regenerate", post(regenerate))
        .route("/sessions/{id}/nodes/{node_id}/hints", get(hints))
        .route("/sessions/{id}/nodes/{node_id}/collapse", post(collapse))
        .route("/sessions/{id}/nodes/{node_id}/bookmark", post(bookmark))
        .route("/schema", get(schema))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(CorsLayer::permissive())
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeView {
    pub root_id: NodeId,
    pub nodes: Vec<HypothesisNode>,
}

fn tree_view(session: &Session) -> TreeView {
    TreeView {
        root_id: session.tree.root_id().clone(),
        nodes: session.tree.preorder().into_iter().cloned().collect(),
    }
}

#[derive(Debug, Serialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub tree: TreeView,
    pub layout: LayoutView,
    pub summary: DataSummary,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub intent_text: String,
    pub focus: NodeId,
    pub event_count: u64,
    pub tree: TreeView,
    pub layout: LayoutView,
}

#[derive(Debug, Serialize)]
pub struct BranchResult {
    pub new_nodes: Vec<HypothesisNode>,
    pub layout: LayoutView,
}

#[derive(Debug, Serialize)]
pub struct RegenerateResult {
    pub new_nodes: Vec<HypothesisNode>,
    pub removed_count: usize,
    pub layout: LayoutView,
}

#[derive(Debug, Serialize)]
pub struct HintsResult {
    pub node_id: NodeId,
    pub chart: Option<ChartPayload>,
    pub spec_origin: Option<SpecOrigin>,
    pub text: Option<SupportingText>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct GenerateBody {
    #[serde(default)]
    pub user_input: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct BookmarkBody {
    pub flag: bool,
}

#[derive(Debug, Default, Deserialize)]
pub struct HintsQuery {
    #[serde(default)]
    pub expand: bool,
}

/// Runs blocking generator or retriever work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn text_field(bytes: &[u8], name: &str) -> Result<String, ApiError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::bad_request("InvalidField", format!("{name} is not UTF-8")))
}

async fn create_session(State(state): Shared, mut form: Multipart) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let mut dataset: Option<(Vec<u8>, String)> = None;
    let mut intent: Option<String> = None;
    let mut session_id: Option<String> = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("InvalidMultipart", e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_owned();
        let file_name = field.file_name().map(str::to_owned);
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("InvalidMultipart", e.to_string()))?;
        match name.as_str() {
            "dataset" => {
                let stem = file_name
                    .as_deref()
                    .and_then(|f| std::path::Path::new(f).file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into());
                dataset = Some((bytes.to_vec(), stem));
            }
            "intent" => intent = Some(text_field(&bytes, "intent")?),
            "session_id" => session_id = Some(text_field(&bytes, "session_id")?),
            _ => {}
        }
    }
    let intent = intent.unwrap_or_default();
    if intent.trim().is_empty() {
        return Err(ApiError::bad_request("EmptyIntent", "analysis intent is empty"));
    }
    let (bytes, dataset_name) =
        dataset.ok_or_else(|| ApiError::bad_request("MissingDataset", "multipart field \"dataset\" is required"))?;
    let session_id = session_id
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    state.store.session_dir(&session_id)?;
    if state.store.exists(&session_id) {
        return Err(hypotree_core::persistence::StoreError::SessionExists(session_id).into());
    }
    let (summary, handle) = ingest(&bytes, &dataset_name)?;

    let generator = state.generator.clone();
    let text = summary_text(&summary);
    let persona = format!("data analyst interested in {}", intent.trim());
    let columns = summary.column_names();
    let drafts: Vec<HypothesisDraft> =
        blocking(move || initial_hypotheses(generator.as_ref(), &text, &persona, columns)).await??;

    let now = state.now();
    let mut meta = SessionMeta::new(&session_id, intent.trim(), now);
    meta.extra.insert("dataset_name".into(), json!(dataset_name));
    meta.extra.insert("layout".into(), serde_json::to_value(state.config.layout).expect("layout config"));
    let mut session = Session::start(meta, &drafts, now)?;
    state.store.create(&session.meta, &bytes)?;
    let lock = state.store.lock(&session_id)?;
    for event in session.events() {
        state.store.append_event(&session_id, event)?;
    }
    let layout = relayout(&mut session, &state.config.layout);
    state.store.save_diagram(&session_id, &session.tree, session.last_event_id())?;
    let tree = tree_view(&session);
    state.insert_new(session, handle, lock);
    tracing::info!(session = %session_id, "session created");
    Ok((StatusCode::CREATED, Json(CreatedSession { session_id, tree, layout, summary })))
}

async fn list_sessions(State(state): Shared) -> ApiResult<Value> {
    Ok(Json(json!({ "sessions": state.store.list()? })))
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> ApiResult<SessionView> {
    let slot = state.slot(&id)?;
    let mut session = slot.snapshot();
    let layout = relayout(&mut session, &slot.layout);
    Ok(Json(SessionView {
        session_id: id,
        intent_text: session.meta.intent_text.clone(),
        focus: session.focus().current_node_id.clone(),
        event_count: session.last_event_id(),
        tree: tree_view(&session),
        layout,
    }))
}

fn node_of(slot: &SessionSlot, node_id: &str) -> Result<HypothesisNode, ApiError> {
    let session = slot.snapshot();
    Ok(session.tree.get(&NodeId::new(node_id))?.clone())
}

fn generate_body(body: Option<Json<GenerateBody>>) -> Option<String> {
    body.and_then(|Json(b)| b.user_input).map(|s| s.trim().to_owned()).filter(|s| !s.is_empty())
}

async fn branch(
    State(state): Shared,
    Path((id, node_id)): Path<(String, String)>,
    body: Option<Json<GenerateBody>>,
) -> ApiResult<BranchResult> {
    let slot = state.slot(&id)?;
    let node = node_of(&slot, &node_id)?;
    if node.is_root() {
        return Err(hypotree_core::session::SessionError::RootNotBranchable.into());
    }
    let user_input = generate_body(body);
    let _busy = slot.begin_generation()?;
    let generator = state.generator.clone();
    let columns = slot.dataset.summary().column_names();
    let (selected, input) = (node.clone(), user_input.clone());
    let drafts =
        blocking(move || branch_hypotheses(generator.as_ref(), &selected, input.as_deref(), columns)).await??;
    let now = state.now();
    let (created, layout) = state.commit(&slot, |s| {
        let (outcome, _) = s.branch(&node.node_id, &drafts, user_input.as_deref(), now)?;
        Ok(outcome
            .created
            .iter()
            .map(|c| s.tree.get(c).cloned())
            .collect::<Result<Vec<_>, _>>()?)
    })?;
    Ok(Json(BranchResult { new_nodes: created, layout }))
}

async fn regenerate(
    State(state): Shared,
    Path((id, node_id)): Path<(String, String)>,
    body: Option<Json<GenerateBody>>,
) -> ApiResult<RegenerateResult> {
    let slot = state.slot(&id)?;
    let node = node_of(&slot, &node_id)?;
    let user_input = generate_body(body);
    let _busy = slot.begin_generation()?;
    let generator = state.generator.clone();
    let summary = slot.dataset.summary().clone();
    let intent = slot.snapshot().meta.intent_text;
    let (selected, input) = (node.clone(), user_input.clone());
    let drafts = blocking(move || {
        let columns = summary.column_names();
        if selected.is_root() {
            let persona = format!("data analyst interested in {intent}");
            initial_hypotheses(generator.as_ref(), &summary_text(&summary), &persona, columns)
        } else {
            branch_hypotheses(generator.as_ref(), &selected, input.as_deref(), columns)
        }
    })
    .await??;
    let now = state.now();
    let ((created, removed_count), layout) = state.commit(&slot, |s| {
        let (outcome, _) = s.regenerate(&node.node_id, &drafts, user_input.as_deref(), now)?;
        let created = outcome
            .created
            .iter()
            .map(|c| s.tree.get(c).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok((created, outcome.removed.len()))
    })?;
    Ok(Json(RegenerateResult { new_nodes: created, removed_count, layout }))
}

/// Cached or freshly derived chart spec for `node`.
async fn chart_spec(
    state: &Arc<AppState>,
    slot: &Arc<SessionSlot>,
    node: &HypothesisNode,
) -> Result<(ChartSpec, SpecOrigin), String> {
    if let Some(cached) = slot.hints.spec(&node.node_id) {
        return Ok(cached);
    }
    if let Ok(Some(stored)) = state.store.load_hint(&slot.id, &node.node_id) {
        let spec = serde_json::from_value::<ChartSpec>(stored["spec"].clone());
        let origin = serde_json::from_value::<SpecOrigin>(stored["origin"].clone());
        if let (Ok(spec), Ok(origin)) = (spec, origin) {
            if spec.validate(slot.dataset.summary()).is_ok() {
                slot.hints.put_spec(&node.node_id, spec.clone(), origin);
                return Ok((spec, origin));
            }
        }
    }
    let generator = state.generator.clone();
    let summary = slot.dataset.summary().clone();
    let target = node.clone();
    let (spec, origin) = blocking(move || derive_spec(&target, &summary, generator.as_ref()))
        .await
        .map_err(|e| e.message)?
        .map_err(|e| e.to_string())?;
    slot.hints.put_spec(&node.node_id, spec.clone(), origin);
    if let Err(e) = state.store.save_hint(&slot.id, &node.node_id, &json!({"spec": spec, "origin": origin})) {
        tracing::warn!(error = %e, "could not cache chart spec");
    }
    Ok((spec, origin))
}

async fn hints(
    State(state): Shared,
    Path((id, node_id)): Path<(String, String)>,
    Query(query): Query<HintsQuery>,
) -> ApiResult<HintsResult> {
    let expand = query.expand;
    let slot = state.slot(&id)?;
    let node = node_of(&slot, &node_id)?;
    if node.is_root() {
        return Err(ApiError::bad_request("RootHasNoHints", "the intent node has no chart or supporting text"));
    }
    let now = state.now();
    state.commit(&slot, |s| {
        s.click(&node.node_id, now)?;
        if expand {
            s.expand_chart(&node.node_id, now)?;
        }
        Ok(())
    })?;

    let mut warnings = Vec::new();
    let (chart, spec_origin) = match chart_spec(&state, &slot, &node).await {
        Ok((spec, origin)) => match slot.hints.payload(&node.node_id, &spec) {
            Some(p) => (Some(p), Some(origin)),
            None => match compute_payload(&spec, &slot.dataset, &node.visualization_idea) {
                Ok(p) => {
                    slot.hints.put_payload(&node.node_id, p.clone());
                    (Some(p), Some(origin))
                }
                Err(e) => {
                    warnings.push(format!("chart: {e}"));
                    (None, Some(origin))
                }
            },
        },
        Err(e) => {
            warnings.push(format!("chart: {e}"));
            (None, None)
        }
    };

    let retriever = state.retriever.clone();
    let corpus = state.corpus.clone();
    let target = node.clone();
    let fetched = blocking(move || fetch_supporting_text(&target, &retriever, corpus.as_deref())).await?;
    let text = match fetched {
        Ok(t) => t,
        Err(e) => {
            warnings.push(format!("text: {e}"));
            SupportingText { snippets: Vec::new(), query: query_for(&node) }
        }
    };
    Ok(Json(HintsResult { node_id: node.node_id, chart, spec_origin, text: Some(text), warnings }))
}

async fn collapse(State(state): Shared, Path((id, node_id)): Path<(String, String)>) -> ApiResult<Value> {
    let slot = state.slot(&id)?;
    let now = state.now();
    let node = NodeId::new(node_id);
    let (event_id, _) = state.commit(&slot, |s| Ok(s.collapse_chart(&node, now)?.event_id))?;
    Ok(Json(json!({"node_id": node, "event_id": event_id})))
}

async fn bookmark(
    State(state): Shared,
    Path((id, node_id)): Path<(String, String)>,
    Json(body): Json<BookmarkBody>,
) -> ApiResult<HypothesisNode> {
    let slot = state.slot(&id)?;
    let now = state.now();
    let node = NodeId::new(node_id);
    let (updated, _) = state.commit(&slot, |s| Ok(s.set_bookmark(&node, body.flag, now)?.0))?;
    Ok(Json(updated))
}

async fn analytics(State(state): Shared, Path(id): Path<String>) -> ApiResult<SessionReport> {
    let slot = state.slot(&id)?;
    // Reports come from the persisted log, as the offline CLI computes them.
    let session = state.with_session(&slot, |_| state.store.load_session(&id))?;
    Ok(Json(session_report(&session)?))
}

async fn schema() -> Json<Value> {
    Json(schema_document())
}
