//! HTTP API.
//!
//! Each session has a writer lock and a published snapshot. Mutations queue
//! on the writer lock, run against a copy of the snapshot on the blocking
//! pool, persist it, and publish it only on success, so a failed request
//! leaves the session untouched. Reads take the current snapshot and never
//! wait for a writer.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metablend::blend::{BlendPair, BlendPlan, BlendScheme, ConceptChoice, ImagePrompt};
use metablend::expression::ConceptToken;
use metablend::mapping::ObjectCandidate;
use metablend::scoring::AnalysisDiagram;
use metablend::studio::{pair_key, CanvasItem, HistoryEntry, Session, Studio, Tombstone};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

type IdSource = Box<dyn Fn() -> String + Send + Sync>;

struct Slot {
    writer: Arc<tokio::sync::Mutex<()>>,
    snapshot: RwLock<Arc<Session>>,
}

/// Shared server state.
pub struct AppState {
    studio: Arc<Studio>,
    sessions_dir: PathBuf,
    slots: RwLock<HashMap<String, Arc<Slot>>>,
    jobs: Mutex<BTreeMap<String, Job>>,
    ids: IdSource,
}

impl AppState {
    /// Sessions are persisted as `<data_dir>/sessions/<id>.json`.
    pub fn new(studio: Arc<Studio>, data_dir: impl Into<PathBuf>) -> Self {
        AppState {
            studio,
            sessions_dir: data_dir.into().join("sessions"),
            slots: RwLock::new(HashMap::new()),
            jobs: Mutex::new(BTreeMap::new()),
            ids: Box::new(|| uuid::Uuid::new_v4().simple().to_string()),
        }
    }

    /// Replaces the session id generator.
    pub fn with_ids(mut self, ids: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.ids = Box::new(ids);
        self
    }

    pub fn studio(&self) -> &Studio {
        &self.studio
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.sessions_dir.join(format!("{id}.json"))
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        if let Some(slot) = self.slots.read().get(id) {
            return Ok(slot.clone());
        }
        if !valid_id(id) {
            return Err(ApiError::unknown_session(id));
        }
        // Not in memory; a previous server process may have left it on disk.
        let path = self.session_path(id);
        if !path.exists() {
            return Err(ApiError::unknown_session(id));
        }
        let session = Session::load(&path).map_err(metablend::Error::from)?;
        let mut slots = self.slots.write();
        let slot = slots
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Slot::new(session)));
        Ok(slot.clone())
    }

    fn insert(&self, session: Session) -> Result<(), ApiError> {
        session
            .save(&self.session_path(&session.id))
            .map_err(metablend::Error::from)?;
        self.slots
            .write()
            .insert(session.id.clone(), Arc::new(Slot::new(session)));
        Ok(())
    }

    /// Current snapshot of a session.
    pub fn snapshot(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        Ok(self.slot(id)?.snapshot.read().clone())
    }

    /// Runs `f` as the next mutation of session `id`.
    pub async fn mutate<T, F>(self: &Arc<Self>, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Studio, &mut Session) -> Result<T, metablend::Error> + Send + 'static,
    {
        let slot = self.slot(id)?;
        let guard = slot.writer.clone().lock_owned().await;
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let _guard = guard;
            let mut draft = Session::clone(&slot.snapshot.read());
            let out = f(&state.studio, &mut draft)?;
            draft
                .save(&state.session_path(&draft.id))
                .map_err(metablend::Error::from)?;
            *slot.snapshot.write() = Arc::new(draft);
            Ok(out)
        })
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
    }

    /// Runs provider work that needs no session access on the blocking pool.
    async fn blocking<T, F>(self: &Arc<Self>, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Studio) -> Result<T, metablend::Error> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || f(&state.studio).map_err(ApiError::from))
            .await
            .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
    }
}

impl Slot {
    fn new(session: Session) -> Self {
        Slot {
            writer: Arc::new(tokio::sync::Mutex::new(())),
            snapshot: RwLock::new(Arc::new(session)),
        }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Like [`parse`], but an empty body means all defaults.
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/summary", get(get_summary))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}/concepts", post(select_concepts))
        .route("/sessions/{id}/theme", post(infer_theme))
        .route("/sessions/{id}/concepts/{concept}/objects", post(suggest_objects))
        .route("/sessions/{id}/objects/attributes", post(assign_attributes))
        .route("/sessions/{id}/objects/preview", post(preview))
        .route("/sessions/{id}/objects/replace", post(replace_object))
        .route("/sessions/{id}/analysis/objects", get(objects_diagram))
        .route("/sessions/{id}/analysis/attributes", get(attributes_diagram))
        .route("/sessions/{id}/schemes", post(generate_schemes))
        .route("/sessions/{id}/prompts", post(compose_prompt))
        .route("/sessions/{id}/images", post(generate_image))
        .route("/sessions/{id}/canvas", get(canvas))
        .route("/sessions/{id}/plan-multi", post(plan_multi))
        .route("/sessions/{id}/plan-multi/prompt", post(compose_multi))
        .route("/images/{artifact_id}", get(image_bytes))
        .route("/jobs/{job_id}", get(job_status))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "UnknownEndpoint", "no such endpoint") })
        .with_state(state)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    expression: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<ConceptToken>,
}

async fn create_session(State(state): Shared, body: Bytes) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req: CreateSession = parse(&body)?;
    let id = (state.ids)();
    let session = state
        .blocking(move |studio| studio.create_session(&id, &req.expression))
        .await?;
    let created = SessionCreated {
        id: session.id.clone(),
        raw: session.expression.raw.clone(),
        tokens: session.expression.tokens.clone(),
    };
    let state2 = state.clone();
    tokio::task::spawn_blocking(move || state2.insert(session))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> ApiResult<Session> {
    let snap = state.snapshot(&id)?;
    Ok(Json(Session::clone(&snap)))
}

/// Compact view of a session.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub expression: String,
    pub selected: Vec<String>,
    #[serde(default)]
    pub theme: Option<String>,
    pub candidates: BTreeMap<String, Vec<String>>,
    pub prompts: usize,
    pub canvas: Vec<CanvasView>,
    pub events: usize,
}

impl SessionSummary {
    pub fn of(s: &Session) -> Self {
        SessionSummary {
            id: s.id.clone(),
            expression: s.expression.raw.clone(),
            selected: s.expression.selected_concepts(),
            theme: s.theme.as_ref().map(|t| t.sentence.clone()),
            candidates: s
                .candidates
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|c| c.name.clone()).collect()))
                .collect(),
            prompts: s.prompts.len(),
            canvas: canvas_view(s),
            events: s.event_log.len(),
        }
    }
}

async fn get_summary(State(state): Shared, Path(id): Path<String>) -> ApiResult<SessionSummary> {
    let snap = state.snapshot(&id)?;
    Ok(Json(SessionSummary::of(&snap)))
}

async fn get_history(State(state): Shared, Path(id): Path<String>) -> ApiResult<Vec<HistoryEntry>> {
    Ok(Json(state.snapshot(&id)?.list_history()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectConcepts {
    indices: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Selected {
    pub selected: Vec<String>,
}

async fn select_concepts(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Selected> {
    let req: SelectConcepts = parse(&body)?;
    let selected = state
        .mutate(&id, move |studio, s| studio.select_concepts(s, &req.indices))
        .await?;
    Ok(Json(Selected { selected }))
}

async fn infer_theme(State(state): Shared, Path(id): Path<String>) -> ApiResult<metablend::mapping::ThemeInference> {
    Ok(Json(state.mutate(&id, |studio, s| studio.infer_theme(s)).await?))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestObjects {
    #[serde(default)]
    iteration: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Suggestions {
    pub concept: String,
    pub iteration: u32,
    pub candidates: Vec<ObjectCandidate>,
}

async fn suggest_objects(
    State(state): Shared,
    Path((id, concept)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Suggestions> {
    let req: SuggestObjects = parse_or_default(&body)?;
    let out = state
        .mutate(&id, move |studio, s| {
            let next = s.iterations(&concept) + 1;
            if let Some(asked) = req.iteration {
                if asked != next {
                    return Ok(Err(ApiError::new(
                        StatusCode::CONFLICT,
                        "IterationMismatch",
                        format!("next iteration for '{concept}' is {next}, not {asked}"),
                    )));
                }
            }
            let candidates = studio.suggest_objects(s, &concept)?;
            Ok(Ok(Suggestions {
                concept,
                iteration: next,
                candidates,
            }))
        })
        .await??;
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignAttributes {
    names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Candidates {
    pub candidates: Vec<ObjectCandidate>,
}

async fn assign_attributes(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Candidates> {
    let req: AssignAttributes = parse(&body)?;
    if req.names.is_empty() {
        return Err(ApiError::bad_request("names must not be empty"));
    }
    let candidates = state
        .mutate(&id, move |studio, s| studio.assign_attributes(s, &req.names))
        .await?;
    Ok(Json(Candidates { candidates }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    name: String,
}

async fn preview(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<metablend::oracle::ImageArtifact> {
    let req: PreviewRequest = parse(&body)?;
    Ok(Json(
        state.mutate(&id, move |studio, s| studio.preview(s, &req.name)).await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplaceRequest {
    concept: String,
    old: String,
    new: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Replaced {
    pub candidate: ObjectCandidate,
    pub tombstones: Vec<Tombstone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub session: SessionSummary,
}

async fn replace_object(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Replaced> {
    let req: ReplaceRequest = parse(&body)?;
    let out = state
        .mutate(&id, move |studio, s| {
            let outcome = studio.replace_object(s, &req.concept, &req.old, &req.new)?;
            Ok(Replaced {
                candidate: outcome.candidate,
                tombstones: outcome.tombstones,
                warning: outcome.warning,
                session: SessionSummary::of(s),
            })
        })
        .await?;
    Ok(Json(out))
}

/// Returns the stored objects diagram, building it on first request.
async fn objects_diagram(State(state): Shared, Path(id): Path<String>) -> ApiResult<AnalysisDiagram> {
    if let Some(d) = &state.snapshot(&id)?.objects_diagram {
        return Ok(Json(d.clone()));
    }
    Ok(Json(
        state
            .mutate(&id, |studio, s| match &s.objects_diagram {
                Some(d) => Ok(d.clone()),
                None => studio.objects_diagram(s),
            })
            .await?,
    ))
}

#[derive(Deserialize)]
struct PairQuery {
    pair: Option<String>,
}

async fn attributes_diagram(
    State(state): Shared,
    Path(id): Path<String>,
    Query(q): Query<PairQuery>,
) -> ApiResult<AnalysisDiagram> {
    let raw = q
        .pair
        .ok_or_else(|| ApiError::bad_request("query parameter 'pair=a,b' is required"))?;
    let (a, b) = raw
        .split_once(',')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| ApiError::bad_request(format!("pair must be 'a,b', got '{raw}'")))?;
    if let Some(d) = state.snapshot(&id)?.attribute_diagrams.get(&pair_key(&a, &b)) {
        return Ok(Json(d.clone()));
    }
    Ok(Json(
        state
            .mutate(&id, move |studio, s| {
                match s.attribute_diagrams.get(&pair_key(&a, &b)) {
                    Some(d) => Ok(d.clone()),
                    None => studio.attributes_diagram(s, &a, &b),
                }
            })
            .await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemesRequest {
    pair: BlendPair,
    #[serde(default)]
    n: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Schemes {
    pub pair: BlendPair,
    pub schemes: Vec<BlendScheme>,
}

async fn generate_schemes(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<Schemes> {
    let req: SchemesRequest = parse(&body)?;
    let n = req.n.unwrap_or(state.studio.engine().scheme_count);
    let pair = req.pair.clone();
    let schemes = state
        .mutate(&id, move |studio, s| studio.generate_schemes(s, &pair, n))
        .await?;
    Ok(Json(Schemes {
        pair: req.pair,
        schemes,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptRequest {
    pair: BlendPair,
    scheme_index: usize,
}

async fn compose_prompt(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<ImagePrompt> {
    let req: PromptRequest = parse(&body)?;
    Ok(Json(
        state
            .mutate(&id, move |studio, s| {
                studio.compose_prompt(s, &req.pair, req.scheme_index)
            })
            .await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageRequest {
    prompt_id: String,
    #[serde(default, rename = "async")]
    run_async: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Job {
    Pending {
        job_id: String,
        session_id: String,
        prompt_id: String,
    },
    Done {
        job_id: String,
        session_id: String,
        prompt_id: String,
        item: CanvasItem,
    },
    Failed {
        job_id: String,
        session_id: String,
        prompt_id: String,
        error: ApiError,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub status_url: String,
}

async fn generate_image(State(state): Shared, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: ImageRequest = parse(&body)?;
    let snap = state.snapshot(&id)?;
    let prompt = state.studio.prompt_for_image(&snap, &req.prompt_id)?;
    if !req.run_async {
        let item = render_and_place(&state, &id, prompt).await?;
        return Ok(Json(item).into_response());
    }
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    let status_url = format!("/jobs/{job_id}");
    state.jobs.lock().insert(
        job_id.clone(),
        Job::Pending {
            job_id: job_id.clone(),
            session_id: id.clone(),
            prompt_id: req.prompt_id.clone(),
        },
    );
    let task_state = state.clone();
    let task_job = job_id.clone();
    tokio::spawn(async move {
        let result = render_and_place(&task_state, &id, prompt).await;
        let (job_id, session_id, prompt_id) = (task_job.clone(), id, req.prompt_id);
        let job = match result {
            Ok(item) => Job::Done {
                job_id,
                session_id,
                prompt_id,
                item,
            },
            Err(error) => Job::Failed {
                job_id,
                session_id,
                prompt_id,
                error,
            },
        };
        task_state.jobs.lock().insert(task_job, job);
    });
    let accepted = JobAccepted {
        job_id,
        status_url: status_url.clone(),
    };
    Ok((StatusCode::ACCEPTED, [(header::LOCATION, status_url)], Json(accepted)).into_response())
}

/// Renders outside the writer lock, then places under it. Placement checks
/// again that the prompt is still live.
async fn render_and_place(state: &Arc<AppState>, id: &str, prompt: ImagePrompt) -> Result<CanvasItem, ApiError> {
    let prompt_id = prompt.id.clone();
    let artifact = state.blocking(move |studio| studio.render_image(&prompt)).await?;
    state
        .mutate(id, move |studio, s| studio.place_image(s, &prompt_id, artifact))
        .await
}

async fn job_status(State(state): Shared, Path(job_id): Path<String>) -> ApiResult<Job> {
    state
        .jobs
        .lock()
        .get(&job_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownJob", format!("no job {job_id}")))
}

/// A canvas item with its frozen coordinates and where it would land now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasView {
    pub prompt_id: String,
    pub coords: [f64; 2],
    #[serde(default)]
    pub current_coords: Option<[f64; 2]>,
    pub image_refs: Vec<String>,
    pub count: usize,
}

fn canvas_view(s: &Session) -> Vec<CanvasView> {
    s.canvas
        .iter()
        .map(|item| CanvasView {
            prompt_id: item.prompt_id.clone(),
            coords: item.coords,
            current_coords: s.current_coords(item),
            image_refs: item.image_refs.clone(),
            count: item.count,
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Canvas {
    pub items: Vec<CanvasView>,
}

async fn canvas(State(state): Shared, Path(id): Path<String>) -> ApiResult<Canvas> {
    let snap = state.snapshot(&id)?;
    Ok(Json(Canvas {
        items: canvas_view(&snap),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    choices: Vec<ConceptChoice>,
}

async fn plan_multi(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<BlendPlan> {
    let req: PlanRequest = parse(&body)?;
    let snapshot = state.snapshot(&id)?;
    Ok(Json(
        state
            .blocking(move |studio| studio.plan_multi(&snapshot, &req.choices))
            .await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiPromptRequest {
    plan: BlendPlan,
    scheme: BlendScheme,
}

async fn compose_multi(State(state): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<ImagePrompt> {
    let req: MultiPromptRequest = parse(&body)?;
    Ok(Json(
        state
            .mutate(&id, move |studio, s| studio.compose_multi(s, &req.plan, &req.scheme))
            .await?,
    ))
}

async fn image_bytes(State(state): Shared, Path(artifact_id): Path<String>) -> Result<Response, ApiError> {
    let id = artifact_id.trim_end_matches(".png").to_string();
    let bytes = state
        .blocking(move |studio| Ok(studio.engine().oracle.store().read(&id)))
        .await?
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UnknownArtifact",
                format!("no image {artifact_id}"),
            )
        })?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}
