//! HTTP annotation service.
//!
//! Reads are served from an immutable snapshot swapped in after every
//! change, so they never wait on retraining. Writes serialize through the
//! session mutex and run on the blocking pool.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use altc_core::active_learning::{IterationRecord, Strategy};
use altc_core::corpus::{self, PoolEntry};
use altc_core::{Format, LabeledDocument, PrepConfig};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::args::{resolve_format, ServeCmd, StrategyChoice};
use crate::error::CliError;
use crate::session::{PendingDoc, Session, SessionConfig, SessionError, SubmitOutcome};

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub schema: Vec<String>,
    pub t: usize,
    pub labeled: usize,
    pub pool_remaining: usize,
    pub batch_size: usize,
    pub strategy: String,
    pub pending: usize,
    pub received: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchView {
    pub t: usize,
    pub finished: bool,
    pub docs: Vec<PendingDoc>,
    /// Labels received so far for this batch, by class name.
    pub received: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub session: SessionView,
    pub batch: BatchView,
    pub history: Vec<IterationRecord>,
    pub labeled: Vec<LabeledDocument>,
}

impl Snapshot {
    fn of(s: &Session) -> Self {
        let schema = &s.config().schema;
        let name = |l: usize| schema.name(l).unwrap_or_default().to_string();
        Self {
            session: SessionView {
                session_id: s.id().to_string(),
                schema: schema.names().to_vec(),
                t: s.t(),
                labeled: s.labeled().len(),
                pool_remaining: s.pool_remaining(),
                batch_size: s.config().acquisition.batch_size,
                strategy: s.config().acquisition.strategy.to_string(),
                pending: s.pending().len(),
                received: s.received().len(),
                finished: s.finished(),
            },
            batch: BatchView {
                t: s.t(),
                finished: s.finished(),
                docs: s.pending().to_vec(),
                received: s.received().iter().map(|(id, &l)| (id.clone(), name(l))).collect(),
            },
            history: s.history().to_vec(),
            labeled: s.labeled().to_vec(),
        }
    }
}

pub struct AppState {
    writer: Mutex<Session>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AppState {
    pub fn new(session: Session) -> Arc<Self> {
        let snapshot = Arc::new(Snapshot::of(&session));
        Arc::new(Self {
            writer: Mutex::new(session),
            snapshot: RwLock::new(snapshot),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn write<T>(&self, f: impl FnOnce(&mut Session) -> Result<T, SessionError>) -> Result<T, SessionError> {
        let mut session = self
            .writer
            .lock()
            .map_err(|_| SessionError::Internal("session writer poisoned".into()))?;
        let out = f(&mut session);
        // publish even on error: a failed retrain may follow accepted labels
        *self.snapshot.write().expect("snapshot lock") = Arc::new(Snapshot::of(&session));
        out
    }
}

struct ApiError(StatusCode, Value);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::Invalid(_) => Self(
                StatusCode::BAD_REQUEST,
                json!({ "error": "InvalidLabel", "message": message }),
            ),
            SessionError::NotPending(ids) => Self(
                StatusCode::CONFLICT,
                json!({ "error": "NotPending", "message": message, "ids": ids }),
            ),
            SessionError::Incomplete(ids) => Self(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "IncompleteBatch", "message": message, "missing": ids }),
            ),
            SessionError::Internal(_) => Self(
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": "Internal", "message": message }),
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type Shared = Arc<AppState>;

async fn get_session(State(app): State<Shared>) -> Json<SessionView> {
    Json(app.snapshot().session.clone())
}

async fn get_batch(State(app): State<Shared>) -> Json<BatchView> {
    Json(app.snapshot().batch.clone())
}

async fn get_metrics(State(app): State<Shared>) -> Json<Value> {
    Json(json!({ "history": app.snapshot().history }))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<Format>,
}

async fn get_export(State(app): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let snap = app.snapshot();
    let format = q.format.unwrap_or(Format::Jsonl);
    let schema = altc_core::LabelSchema::new(snap.session.schema.clone())
        .map_err(|e| SessionError::Internal(e.to_string()))?;
    let mut buf = Vec::new();
    corpus::export(&mut buf, format, &schema, &snap.labeled)
        .map_err(|e| SessionError::Internal(e.to_string()))?;
    let content_type = match format {
        Format::Jsonl => "application/x-ndjson",
        Format::Csv => "text/csv; charset=utf-8",
        Format::Tsv => "text/tab-separated-values; charset=utf-8",
    };
    let disposition = format!("attachment; filename=\"labeled.{format}\"");
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        buf,
    )
        .into_response())
}

async fn run_write<T: Send + 'static>(
    app: Shared,
    f: impl FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(move || app.write(f))
        .await
        .map_err(|e| SessionError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

async fn post_labels(State(app): State<Shared>, body: Bytes) -> Result<Json<SubmitOutcome>, ApiError> {
    let labels = match serde_json::from_slice::<Value>(&body) {
        Ok(Value::Object(map)) => map,
        _ => {
            return Err(SessionError::Invalid(
                "body must be a JSON object mapping document ids to labels".into(),
            )
            .into())
        }
    };
    Ok(Json(run_write(app, move |s| s.submit(&labels)).await?))
}

async fn post_commit(State(app): State<Shared>) -> Result<Json<SubmitOutcome>, ApiError> {
    Ok(Json(run_write(app, |s| s.commit()).await?))
}

pub fn router(state: Shared, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/session", get(get_session))
        .route("/batch", get(get_batch))
        .route("/labels", post(post_labels))
        .route("/commit", post(post_commit))
        .route("/metrics", get(get_metrics))
        .route("/export", get(get_export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Builds the session for `altc serve`: labeled records of the input form the
/// initial labeled set, unlabeled ones the pool. The journal lives in
/// `<data_dir>/session`.
pub fn open_session(data_dir: &Path, cmd: &ServeCmd) -> Result<Shared, CliError> {
    let schema = cmd.corpus.schema()?;
    let format = cmd.corpus.format()?;
    let entries = corpus::ingest_pool(&cmd.corpus.input, format, &schema)?.records;
    let (labeled, pool): (Vec<PoolEntry>, Vec<PoolEntry>) =
        entries.into_iter().partition(|e| e.label.is_some());
    let labeled: Vec<LabeledDocument> = labeled
        .into_iter()
        .map(|e| LabeledDocument::new(e.doc, e.label.expect("partitioned")))
        .collect();
    let pool: Vec<_> = pool.into_iter().map(|e| e.doc).collect();
    let eval = match &cmd.eval {
        Some(path) => {
            corpus::ingest(path, resolve_format(cmd.corpus.format, path)?, &schema)?.records
        }
        None => Vec::new(),
    };
    let strategy = match cmd.strategy {
        StrategyChoice::Random => Strategy::Random,
        StrategyChoice::Entropy => Strategy::Entropy,
        StrategyChoice::Both => {
            return Err(CliError::Usage("serve takes a single strategy".into()));
        }
    };
    let config = SessionConfig {
        schema,
        prep: PrepConfig::default(),
        tfidf: cmd.features.config(),
        acquisition: altc_core::AcquisitionConfig {
            batch_size: cmd.batch_size,
            max_iterations: cmd.iterations,
            seed_size: labeled.len(),
            strategy,
            entropy_mode: cmd.entropy.into(),
            seed: cmd.seed,
            warm_start: cmd.warm_start,
        },
        train: cmd.optim.config(cmd.train_batch_size, cmd.seed),
        sizes: [labeled.len(), pool.len(), eval.len()],
    };
    let session = Session::open(config, labeled, pool, &eval, Some(&data_dir.join("session")))
        .map_err(|e| CliError::Session(e.to_string()))?;
    Ok(AppState::new(session))
}
