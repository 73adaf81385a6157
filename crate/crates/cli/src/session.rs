//! Human-oracle annotation session.
//!
//! A session owns the active learner, the pending batch and the labels
//! received for it so far. Every accepted label and every commit is appended
//! to a journal before it takes effect; reopening a session replays the
//! journal on a freshly built learner, which reproduces the same batches
//! because batch selection and training are deterministic.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use altc_core::active_learning::{uncertainty, ActiveLearner, ActiveLearningState, IterationRecord};
use altc_core::{
    AcquisitionConfig, Document, LabelSchema, LabeledDocument, PrepConfig, TfidfConfig,
    TrainConfig, Vectorizer,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Inputs that fully determine a session's trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub schema: LabelSchema,
    pub prep: PrepConfig,
    pub tfidf: TfidfConfig,
    pub acquisition: AcquisitionConfig,
    pub train: TrainConfig,
    /// Number of initially labeled, pool and evaluation documents; a cheap
    /// guard against reopening a journal with different data.
    pub sizes: [usize; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionFile {
    session_id: String,
    config: SessionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum JournalEntry {
    Label { t: usize, id: String, label: usize },
    Commit { t: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingDoc {
    pub id: String,
    pub text: String,
    pub probs: Vec<f64>,
    pub uncertainty: f64,
}

#[derive(Debug)]
pub enum SessionError {
    /// Malformed request or label outside the schema.
    Invalid(String),
    /// Label for a document that is not in the pending batch.
    NotPending(Vec<String>),
    /// Explicit commit while some pending documents lack labels.
    Incomplete(Vec<String>),
    Internal(String),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "{m}"),
            Self::NotPending(ids) => write!(f, "not in the pending batch: {}", ids.join(", ")),
            Self::Incomplete(ids) => write!(f, "batch incomplete; missing labels for {}", ids.join(", ")),
            Self::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl From<CliError> for SessionError {
    fn from(e: CliError) -> Self {
        Self::Internal(e.to_string())
    }
}

impl From<altc_core::active_learning::AlError> for SessionError {
    fn from(e: altc_core::active_learning::AlError) -> Self {
        Self::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitOutcome {
    pub accepted: usize,
    pub committed: bool,
    pub t: usize,
    pub received: usize,
    pub pending: usize,
}

pub struct Session {
    id: String,
    config: SessionConfig,
    learner: ActiveLearner,
    pending: Vec<PendingDoc>,
    received: BTreeMap<String, usize>,
    journal: Option<File>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SessionError + '_ {
    move |e| SessionError::Internal(format!("{}: {e}", path.display()))
}

fn new_session_id() -> String {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    format!("{:016x}", (nanos as u64) ^ ((std::process::id() as u64) << 48))
}

impl Session {
    /// Builds the learner and prepares the first batch. With `dir`, the
    /// session is persisted there and an existing journal is replayed.
    pub fn open(
        config: SessionConfig,
        labeled: Vec<LabeledDocument>,
        pool: Vec<Document>,
        eval: &[LabeledDocument],
        dir: Option<&Path>,
    ) -> Result<Self, SessionError> {
        let texts: Vec<&str> = labeled
            .iter()
            .map(|d| d.doc.text.as_str())
            .chain(pool.iter().map(|d| d.text.as_str()))
            .collect();
        let vectorizer = Vectorizer::fit(&texts, config.prep.clone(), config.tfidf.clone())
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        config
            .acquisition
            .validate(config.schema.len())
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        let state = ActiveLearningState::new(labeled, pool)?;
        let learner = ActiveLearner::new(
            config.schema.len(),
            vectorizer,
            state,
            eval,
            config.acquisition.clone(),
            config.train.clone(),
        )?;

        let mut session = Self {
            id: new_session_id(),
            config,
            learner,
            pending: Vec::new(),
            received: BTreeMap::new(),
            journal: None,
        };
        session.prepare_batch()?;

        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let meta_path = dir.join("session.json");
            if meta_path.exists() {
                let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
                let meta: SessionFile = serde_json::from_str(&text)
                    .map_err(|e| SessionError::Internal(format!("{}: {e}", meta_path.display())))?;
                if meta.config != session.config {
                    return Err(SessionError::Invalid(format!(
                        "{} was created with a different configuration or corpus",
                        meta_path.display()
                    )));
                }
                session.id = meta.session_id;
            } else {
                let meta = SessionFile {
                    session_id: session.id.clone(),
                    config: session.config.clone(),
                };
                let text = serde_json::to_string_pretty(&meta)
                    .map_err(|e| SessionError::Internal(e.to_string()))?;
                fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;
            }
            let journal_path = dir.join("journal.jsonl");
            if journal_path.exists() {
                session.replay(&journal_path)?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&journal_path)
                .map_err(io_err(&journal_path))?;
            session.journal = Some(file);
            // labels may have been journaled right before a crash that
            // prevented the commit
            if session.batch_complete() {
                session.commit_pending()?;
            }
        }
        Ok(session)
    }

    fn replay(&mut self, path: &PathBuf) -> Result<(), SessionError> {
        let file = File::open(path).map_err(io_err(path))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry = match serde_json::from_str(&line) {
                Ok(e) => e,
                // a torn final line from a crash mid-write carries nothing
                // that was acknowledged
                Err(_) => continue,
            };
            let bad = |what: &str| {
                SessionError::Internal(format!("{} line {}: {what}", path.display(), i + 1))
            };
            match entry {
                JournalEntry::Label { t, id, label } => {
                    if t != self.t() || !self.pending.iter().any(|d| d.id == id) {
                        return Err(bad("label does not match the replayed batch"));
                    }
                    if label >= self.config.schema.len() {
                        return Err(bad("label out of range"));
                    }
                    self.received.insert(id, label);
                }
                JournalEntry::Commit { t } => {
                    if t != self.t() || !self.batch_complete() {
                        return Err(bad("commit does not match the replayed batch"));
                    }
                    self.apply_commit()?;
                }
            }
        }
        Ok(())
    }

    fn append(&mut self, entries: &[JournalEntry]) -> Result<(), SessionError> {
        let Some(file) = self.journal.as_mut() else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for e in entries {
            serde_json::to_writer(&mut buf, e).map_err(|e| SessionError::Internal(e.to_string()))?;
            buf.push(b'\n');
        }
        file.write_all(&buf)
            .and_then(|_| file.sync_data())
            .map_err(|e| SessionError::Internal(format!("journal: {e}")))
    }

    fn prepare_batch(&mut self) -> Result<(), SessionError> {
        self.pending.clear();
        self.received.clear();
        if self.learner.finished() {
            return Ok(());
        }
        let mode = self.config.acquisition.entropy_mode;
        for doc in self.learner.propose_batch()? {
            let x = self.learner.features(&doc.id).expect("pool document has features");
            let probs = self
                .learner
                .model()
                .predict_proba(x)
                .map_err(|e| SessionError::Internal(e.to_string()))?;
            let u = uncertainty(&probs, mode)?;
            self.pending.push(PendingDoc {
                id: doc.id,
                text: doc.text,
                probs,
                uncertainty: u,
            });
        }
        Ok(())
    }

    fn batch_complete(&self) -> bool {
        !self.pending.is_empty() && self.pending.iter().all(|d| self.received.contains_key(&d.id))
    }

    fn apply_commit(&mut self) -> Result<(), SessionError> {
        let by_id: HashMap<&str, &Document> = self
            .learner
            .state()
            .pool
            .iter()
            .map(|d| (d.id.as_str(), d))
            .collect();
        let batch: Vec<LabeledDocument> = self
            .pending
            .iter()
            .map(|p| LabeledDocument::new(by_id[p.id.as_str()].clone(), self.received[&p.id]))
            .collect();
        self.learner.commit(batch)?;
        self.prepare_batch()
    }

    fn commit_pending(&mut self) -> Result<(), SessionError> {
        let t = self.t();
        self.append(&[JournalEntry::Commit { t }])?;
        self.apply_commit()
    }

    fn parse_label(&self, value: &Value) -> Option<usize> {
        let k = self.config.schema.len();
        match value {
            Value::String(s) => self
                .config
                .schema
                .index_of(s)
                .or_else(|| s.trim().parse::<usize>().ok().filter(|&i| i < k)),
            Value::Number(n) => n.as_u64().map(|i| i as usize).filter(|&i| i < k),
            _ => None,
        }
    }

    /// Stores labels for pending documents; later labels for the same id
    /// replace earlier ones. The whole request is rejected if any entry is
    /// invalid. Completing the batch commits it and prepares the next one.
    pub fn submit(&mut self, labels: &serde_json::Map<String, Value>) -> Result<SubmitOutcome, SessionError> {
        if labels.is_empty() {
            return Err(SessionError::Invalid("no labels in request".into()));
        }
        let mut parsed = Vec::with_capacity(labels.len());
        let mut invalid = Vec::new();
        for (id, value) in labels {
            match self.parse_label(value) {
                Some(l) => parsed.push((id.clone(), l)),
                None => invalid.push(format!("{id}: {value}")),
            }
        }
        if !invalid.is_empty() {
            return Err(SessionError::Invalid(format!(
                "labels must be one of {:?} or an index below {}; got {}",
                self.config.schema.names(),
                self.config.schema.len(),
                invalid.join(", ")
            )));
        }
        let not_pending: Vec<String> = parsed
            .iter()
            .filter(|(id, _)| !self.pending.iter().any(|d| &d.id == id))
            .map(|(id, _)| id.clone())
            .collect();
        if !not_pending.is_empty() {
            return Err(SessionError::NotPending(not_pending));
        }
        let t = self.t();
        let entries: Vec<JournalEntry> = parsed
            .iter()
            .map(|(id, label)| JournalEntry::Label {
                t,
                id: id.clone(),
                label: *label,
            })
            .collect();
        self.append(&entries)?;
        for (id, label) in parsed {
            self.received.insert(id, label);
        }
        let committed = self.batch_complete();
        if committed {
            self.commit_pending()?;
        }
        Ok(SubmitOutcome {
            accepted: labels.len(),
            committed,
            t: self.t(),
            received: self.received.len(),
            pending: self.pending.len(),
        })
    }

    /// Explicit commit of a fully labeled batch.
    pub fn commit(&mut self) -> Result<SubmitOutcome, SessionError> {
        if self.pending.is_empty() {
            return Err(SessionError::NotPending(Vec::new()));
        }
        let missing: Vec<String> = self
            .pending
            .iter()
            .filter(|d| !self.received.contains_key(&d.id))
            .map(|d| d.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(SessionError::Incomplete(missing));
        }
        let accepted = self.received.len();
        self.commit_pending()?;
        Ok(SubmitOutcome {
            accepted,
            committed: true,
            t: self.t(),
            received: self.received.len(),
            pending: self.pending.len(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn t(&self) -> usize {
        self.learner.state().iteration
    }

    pub fn pending(&self) -> &[PendingDoc] {
        &self.pending
    }

    pub fn received(&self) -> &BTreeMap<String, usize> {
        &self.received
    }

    pub fn finished(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn labeled(&self) -> &[LabeledDocument] {
        &self.learner.state().labeled
    }

    pub fn pool_remaining(&self) -> usize {
        self.learner.state().pool.len()
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.learner.state().history
    }

    pub fn learner(&self) -> &ActiveLearner {
        &self.learner
    }
}
