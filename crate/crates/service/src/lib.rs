//! The dungeon HTTP service: teach and play sessions over generated worlds,
//! round intake and advancement, and the leaderboard.

mod config;
mod store;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dungeon_api::{
    ActionRequest, ActionResponse, AdvanceResponse, ApiError, CreateSession, ExampleRecord, FeedbackKind, Leaderboard,
    LeaderboardEntry, RoundStatus, SessionMode, SessionView, TeachRequest, TeachResponse, ADMIN_HEADER,
};
use dungeon_core::annotators::{generate_pilot, TemplateBank};
use dungeon_core::data::Example;
use dungeon_core::graphworld::fixtures::walkthrough_world;
use dungeon_core::graphworld::{
    describe_outcome, execute, generate_world, parse_action_with, render, render_inventory, valid_actions, Catalog,
    GraphError, GroundedAction, PhraseMatcher, WorldGraph,
};
use dungeon_core::models::{Model, MAX_ACTIONS};
use dungeon_core::mtd::{model_feedback, run_round, AnnotatorDataset, Feedback, MtdConfig, SharedPools};
use tracing::{info, warn};

pub use config::ServiceConfig;
pub use store::{Manifest, RoundRecord, SessionEvent, Store};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{message}")]
    Parse { message: String, position: Option<usize> },
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Conflict(&'static str, String),
    #[error("no such session {0}")]
    NotFound(String),
    #[error("missing or wrong admin token")]
    Unauthorized,
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code, position) = match &self {
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", None),
            ServiceError::Parse { position, .. } => (StatusCode::BAD_REQUEST, "parse", *position),
            ServiceError::Precondition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "precondition", None),
            ServiceError::Conflict(code, _) => (StatusCode::CONFLICT, *code, None),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", None),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized", None),
            ServiceError::Internal(e) => {
                warn!(error = %e, "internal error");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", None)
            }
        };
        let body = ApiError { code: code.to_string(), message: self.to_string(), position };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

#[derive(Debug, Clone)]
struct Session {
    id: String,
    number: u64,
    annotator: String,
    mode: SessionMode,
    round: u32,
    seed: Option<u64>,
    fixture: Option<String>,
    taught: u64,
    /// State before the pending buffer.
    start: WorldGraph,
    world: WorldGraph,
    pending: Vec<GroundedAction>,
}

impl Session {
    fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            annotator: self.annotator.clone(),
            mode: self.mode,
            round: self.round,
            world_seed: self.seed,
            render: render(&self.world),
            valid_actions: valid_actions(&self.world).iter().map(ToString::to_string).collect(),
            pending: self.pending.iter().map(ToString::to_string).collect(),
        }
    }

    fn event(&self) -> SessionEvent {
        SessionEvent {
            session: self.id.clone(),
            annotator: self.annotator.clone(),
            mode: self.mode,
            round: self.round,
            seed: self.seed,
            fixture: self.fixture.clone(),
            taught: self.taught,
        }
    }
}

struct Inner {
    manifest: Manifest,
    open: bool,
    advancing: bool,
    opened_at: Instant,
    sessions: BTreeMap<String, Session>,
    submissions: BTreeMap<String, Vec<Example>>,
    pools: SharedPools,
    model: Option<Arc<Model>>,
}

pub struct Service {
    config: ServiceConfig,
    catalog: Catalog,
    matcher: PhraseMatcher,
    store: Store,
    inner: Mutex<Inner>,
}

pub type AppState = Arc<Service>;

fn world_seed(base: u64, session: u64, taught: u64) -> u64 {
    let mut z = base ^ session.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ taught.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn valid_annotator(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Service {
    /// Opens (or initializes) the data directory and recovers committed
    /// state: round, pools, model, this round's submissions and sessions.
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        let catalog = match &config.catalog {
            Some(p) => Catalog::load(p)?,
            None => Catalog::default(),
        };
        let store = Store::new(&config.data_dir)?;
        let (manifest, pools, model) = match store.load_manifest()? {
            Some(m) => (m, store.load_pools()?, store.load_model()?),
            None => {
                let manifest = Manifest::default();
                let mut pools = SharedPools::default();
                let mut model = None;
                if config.pilot_count > 0 {
                    let bank = match &config.templates {
                        Some(p) => TemplateBank::load(p)?,
                        None => TemplateBank::default(),
                    };
                    let pilot = generate_pilot(config.pilot_count, &catalog, &bank, config.seed)?;
                    pools = SharedPools::initial(&pilot, config.mtd.split_fraction, config.seed);
                    let trained = Model::fit(config.mtd.learner, &catalog, &pools.train, config.seed)?.0;
                    store.save_model(&trained)?;
                    model = Some(trained);
                }
                store.save_pools(&pools)?;
                store.save_manifest(&manifest)?;
                (manifest, pools, model)
            }
        };
        let submissions = store.load_round(manifest.round)?;
        let matcher = PhraseMatcher::new(&catalog);
        let mut sessions = BTreeMap::new();
        for (number, event) in store.load_sessions()?.into_iter().enumerate() {
            let world = Self::make_world(&catalog, event.seed, event.fixture.as_deref())?;
            sessions.insert(
                event.session.clone(),
                Session {
                    id: event.session,
                    number: number as u64,
                    annotator: event.annotator,
                    mode: event.mode,
                    round: event.round,
                    seed: event.seed,
                    fixture: event.fixture,
                    taught: event.taught,
                    start: world.clone(),
                    world,
                    pending: Vec::new(),
                },
            );
        }
        info!(round = manifest.round, sessions = sessions.len(), "service state recovered");
        let inner = Inner {
            manifest,
            open: true,
            advancing: false,
            opened_at: Instant::now(),
            sessions,
            submissions,
            pools,
            model: model.map(Arc::new),
        };
        Ok(Service { config, catalog, matcher, store, inner: Mutex::new(inner) })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn make_world(catalog: &Catalog, seed: Option<u64>, fixture: Option<&str>) -> anyhow::Result<WorldGraph> {
        match (fixture, seed) {
            (Some("walkthrough"), _) => Ok(walkthrough_world()),
            (Some(other), _) => anyhow::bail!("unknown fixture world {other:?}"),
            (None, Some(seed)) => Ok(generate_world(seed, catalog)?),
            (None, None) => anyhow::bail!("session has neither a seed nor a fixture"),
        }
    }

    fn intake_open(&self, inner: &Inner) -> bool {
        let expired = self.config.enforce_deadline
            && inner.opened_at.elapsed() > Duration::from_secs(u64::from(self.config.mtd.time_budget_minutes) * 60);
        inner.open && !inner.advancing && !expired
    }

    fn status(inner: &Inner, open: bool) -> RoundStatus {
        RoundStatus {
            round: inner.manifest.round,
            open,
            advancing: inner.advancing,
            submissions: inner.submissions.iter().map(|(a, v)| (a.clone(), v.len())).collect(),
            train_pool: inner.pools.train.len(),
            test_pool: inner.pools.test.len(),
            has_model: inner.model.is_some(),
        }
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ServiceError> {
        if !valid_annotator(&req.annotator) {
            return Err(ServiceError::BadRequest("annotator ids use letters, digits, '-' and '_'".into()));
        }
        let mut inner = self.lock();
        let round = inner.manifest.round;
        if let Some(r) = req.round {
            if r != round {
                return Err(ServiceError::Conflict("unknown_round", format!("round {r} is not open; round {round} is")));
            }
        }
        if req.mode == SessionMode::Teach && !self.intake_open(&inner) {
            return Err(ServiceError::Conflict("round_closed", format!("round {round} is not accepting examples")));
        }
        let number = inner.sessions.len() as u64;
        let seed = req.world.is_none().then(|| world_seed(self.config.seed, number, 0));
        let world = Self::make_world(&self.catalog, seed, req.world.as_deref()).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let session = Session {
            id: format!("s{number:06}"),
            number,
            annotator: req.annotator,
            mode: req.mode,
            round,
            seed,
            fixture: req.world,
            taught: 0,
            start: world.clone(),
            world,
            pending: Vec::new(),
        };
        self.store.append_session(&session.event()).map_err(anyhow::Error::from)?;
        let view = session.view();
        inner.sessions.insert(session.id.clone(), session);
        Ok(view)
    }

    pub fn session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let inner = self.lock();
        inner.sessions.get(id).map(Session::view).ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn reset(&self, id: &str) -> Result<SessionView, ServiceError> {
        let mut inner = self.lock();
        let session = inner.sessions.get_mut(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        session.pending.clear();
        session.world = session.start.clone();
        Ok(session.view())
    }

    pub fn action(&self, id: &str, text: &str) -> Result<ActionResponse, ServiceError> {
        let command = text.trim().to_lowercase();
        if command == "reset" {
            let session = self.reset(id)?;
            return Ok(ActionResponse { message: session.render.clone(), session });
        }
        let mut inner = self.lock();
        let session = inner.sessions.get_mut(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        if command == "inventory" || command == "i" {
            return Ok(ActionResponse { message: render_inventory(&session.world), session: session.view() });
        }
        let action = parse_action_with(&command, &self.matcher).map_err(|e| {
            let position = match &e {
                GraphError::UnknownVerb { position, .. }
                | GraphError::UnknownEntityAt { position, .. }
                | GraphError::AmbiguousParse { position, .. } => Some(*position),
                _ => None,
            };
            ServiceError::Parse { message: e.to_string(), position }
        })?;
        if session.mode == SessionMode::Teach && session.pending.len() >= MAX_ACTIONS {
            return Err(ServiceError::Conflict(
                "buffer_full",
                format!("at most {MAX_ACTIONS} actions per example; teach or reset first"),
            ));
        }
        let after = match execute(&session.world, &action) {
            Ok(w) => w,
            Err(e @ (GraphError::PreconditionFailed { .. } | GraphError::UnknownEntity(_))) => {
                return Err(ServiceError::Precondition(e.to_string()))
            }
            Err(e) => return Err(ServiceError::Internal(e.into())),
        };
        let message = describe_outcome(&session.world, &action, &after);
        session.world = after;
        if session.mode == SessionMode::Teach {
            session.pending.push(action);
        }
        Ok(ActionResponse { message, session: session.view() })
    }

    pub fn teach(&self, id: &str, command: &str) -> Result<TeachResponse, ServiceError> {
        let command = command.trim();
        let mut inner = self.lock();
        let open = self.intake_open(&inner);
        let round = inner.manifest.round;
        let model = inner.model.clone();
        let session = inner.sessions.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        if session.mode != SessionMode::Teach {
            return Err(ServiceError::Conflict("play_session", "play sessions do not record examples".into()));
        }
        if !open {
            return Err(ServiceError::Conflict("round_closed", format!("round {round} is not accepting examples")));
        }
        if session.pending.is_empty() {
            return Err(ServiceError::Conflict("empty_buffer", "perform at least one action before teaching".into()));
        }
        if command.is_empty() {
            return Err(ServiceError::BadRequest("the command is empty".into()));
        }
        let annotator = session.annotator.clone();
        let ordinal = inner.submissions.get(&annotator).map_or(0, Vec::len) as u64;
        let session = inner.sessions.get(id).expect("checked above");
        let mut example = Example::new(command, session.pending.clone(), session.start.clone(), &annotator, round, ordinal);
        example.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        self.store.append_example(&example)?;
        let report = model_feedback(model.as_deref(), &example);
        inner.submissions.entry(annotator.clone()).or_default().push(example.clone());

        let session = inner.sessions.get_mut(id).expect("checked above");
        session.taught += 1;
        session.round = round;
        if session.fixture.is_none() {
            let seed = world_seed(self.config.seed, session.number, session.taught);
            session.seed = Some(seed);
            session.start = generate_world(seed, &self.catalog).map_err(anyhow::Error::from)?;
        }
        session.world = session.start.clone();
        session.pending.clear();
        self.store.append_session(&session.event()).map_err(anyhow::Error::from)?;
        Ok(TeachResponse {
            example: ExampleRecord {
                id: example.id.clone(),
                command: example.command.clone(),
                actions: example.actions.iter().map(ToString::to_string).collect(),
                annotator,
                round,
            },
            feedback: match report.feedback {
                Feedback::Correct => FeedbackKind::Correct,
                Feedback::Incorrect => FeedbackKind::Incorrect,
                Feedback::Unavailable => FeedbackKind::Unavailable,
            },
            predicted: report.predicted.map(|p| p.iter().map(ToString::to_string).collect()),
            session: session.view(),
        })
    }

    pub fn round_status(&self) -> RoundStatus {
        let inner = self.lock();
        Self::status(&inner, self.intake_open(&inner))
    }

    pub fn leaderboard(&self) -> Leaderboard {
        let inner = self.lock();
        leaderboard_of(inner.manifest.history.last())
    }

    fn check_admin(&self, headers: &HeaderMap) -> Result<(), ServiceError> {
        match headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok()) {
            Some(token) if token == self.config.admin_token => Ok(()),
            _ => Err(ServiceError::Unauthorized),
        }
    }

    /// Closes intake, scores and merges the round on a blocking worker,
    /// trains the next pooled model, then opens the following round. A
    /// failure reopens the same round with pools untouched.
    pub async fn advance(self: Arc<Self>) -> Result<AdvanceResponse, ServiceError> {
        let (pools, datasets, model, round) = {
            let mut inner = self.lock();
            if inner.advancing {
                return Err(ServiceError::Conflict("advancing", "the round is already being advanced".into()));
            }
            if inner.submissions.is_empty() {
                return Err(ServiceError::Conflict("no_submissions", "nobody has taught anything this round".into()));
            }
            inner.advancing = true;
            let round = inner.manifest.round;
            let datasets: Vec<AnnotatorDataset> = inner
                .submissions
                .iter()
                .map(|(a, ex)| AnnotatorDataset { annotator: a.clone(), round, examples: ex.clone() })
                .collect();
            (inner.pools.clone(), datasets, inner.model.clone(), round)
        };
        let worker = Arc::clone(&self);
        let result = tokio::task::spawn_blocking(move || {
            let config = MtdConfig { seed: worker.config.seed ^ u64::from(round), ..worker.config.mtd.clone() };
            let (state, pools) = run_round(&pools, datasets, &config, &worker.catalog, round, model.as_deref())?;
            let next = if pools.train.is_empty() {
                None
            } else {
                Some(Model::fit(config.learner, &worker.catalog, &pools.train, config.seed)?.0)
            };
            anyhow::Ok((state, pools, next))
        })
        .await
        .map_err(|e| anyhow::anyhow!("round worker failed: {e}"));

        let mut inner = self.lock();
        inner.advancing = false;
        let (state, pools, next) = match result.and_then(|r| r) {
            Ok(v) => v,
            Err(e) => return Err(ServiceError::Conflict("round_failed", e.to_string())),
        };
        let record = RoundRecord {
            round,
            submissions: state.submissions.iter().map(|(a, d)| (a.clone(), d.examples.len())).collect(),
            scores: state.scores.clone(),
            leaderboard: state.leaderboard.clone(),
            bonus: state.bonus.clone(),
            excluded: state.excluded.clone(),
            train_pool: pools.train.len(),
            test_pool: pools.test.len(),
        };
        if let Some(m) = &next {
            self.store.save_model(m)?;
        }
        self.store.save_pools(&pools).map_err(anyhow::Error::from)?;
        let mut manifest = inner.manifest.clone();
        manifest.history.push(record);
        manifest.round = round + 1;
        self.store.save_manifest(&manifest).map_err(anyhow::Error::from)?;
        inner.manifest = manifest;
        inner.pools = pools;
        if let Some(m) = next {
            inner.model = Some(Arc::new(m));
        }
        inner.submissions.clear();
        inner.open = true;
        inner.opened_at = Instant::now();
        info!(round, "round advanced");
        let status = Self::status(&inner, self.intake_open(&inner));
        Ok(AdvanceResponse {
            completed_round: round,
            leaderboard: leaderboard_of(inner.manifest.history.last()),
            excluded: state.excluded.into_iter().collect(),
            status,
        })
    }
}

fn leaderboard_of(record: Option<&RoundRecord>) -> Leaderboard {
    let Some(r) = record else {
        return Leaderboard { round: None, entries: Vec::new() };
    };
    let entries = r
        .leaderboard
        .iter()
        .enumerate()
        .map(|(i, a)| LeaderboardEntry {
            rank: i + 1,
            annotator: a.clone(),
            score: r.scores[a],
            bonus: r.bonus.contains(a),
        })
        .collect();
    Leaderboard { round: Some(r.round), entries }
}

async fn create_session(State(s): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<SessionView> {
    s.create_session(req).map(Json)
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    s.session(&id).map(Json)
}

async fn post_action(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ActionRequest>,
) -> ApiResult<ActionResponse> {
    s.action(&id, &req.action).map(Json)
}

async fn post_teach(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TeachRequest>,
) -> ApiResult<TeachResponse> {
    s.teach(&id, &req.command).map(Json)
}

async fn post_reset(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    s.reset(&id).map(Json)
}

async fn get_leaderboard(State(s): State<AppState>) -> Json<Leaderboard> {
    Json(s.leaderboard())
}

async fn get_round(State(s): State<AppState>) -> Json<RoundStatus> {
    Json(s.round_status())
}

async fn post_advance(State(s): State<AppState>, headers: HeaderMap) -> ApiResult<AdvanceResponse> {
    s.check_admin(&headers)?;
    s.advance().await.map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/action", post(post_action))
        .route("/sessions/{id}/teach", post(post_teach))
        .route("/sessions/{id}/reset", post(post_reset))
        .route("/leaderboard", get(get_leaderboard))
        .route("/round", get(get_round))
        .route("/round/advance", post(post_advance))
        .with_state(state)
}

/// Serves on `listener` until the process receives ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, service: Service) -> anyhow::Result<()> {
    let app = router(Arc::new(service));
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
