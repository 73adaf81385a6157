//! Pool-based active learning with entropy uncertainty sampling.
//!
//! Each round scores the unlabeled pool, picks the `b` documents whose
//! predictive entropy is highest, asks an [`Oracle`] for their labels, moves
//! them into the labeled set and retrains. Because the per-document scores
//! are independent, the top-`b` set is also the batch with the largest total
//! uncertainty.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::mpsc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, LabeledDocument};
use crate::linear_model::{self, ModelError, OvrLinearModel, ProbabilitySource, TrainConfig};
use crate::metrics::{self, EvaluationReport, MetricsError};
use crate::tfidf::{SparseVector, Vectorizer};

#[derive(Debug, Error)]
pub enum AlError {
    #[error("probability vector sums to zero; cannot renormalize")]
    AllZeroVector,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("unlabeled pool is empty")]
    EmptyPool,
    #[error("no gold label for document {0:?}")]
    MissingGoldLabel(String),
    #[error("annotation session cancelled")]
    SessionCancelled,
    #[error("document {0:?} is not in the unlabeled pool")]
    UnknownDocument(String),
    #[error("document {0:?} appears more than once")]
    DuplicateDocument(String),
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("no example of class {0} available for the seed set")]
    MissingClass(usize),
    #[error("invalid acquisition config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How per-class probabilities are turned into a single entropy score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// Rescale the independent head outputs to sum to one, then take the
    /// categorical entropy.
    #[default]
    CategoricalNormalized,
    /// Sum of the binary entropies of each head.
    BinarySum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Entropy,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = AlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy" => Ok(Strategy::Entropy),
            "random" => Ok(Strategy::Random),
            other => Err(AlError::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Entropy => "entropy",
            Strategy::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub batch_size: usize,
    /// Number of acquisition rounds; `None` runs until the pool is empty.
    pub max_iterations: Option<usize>,
    pub seed_size: usize,
    pub strategy: Strategy,
    pub entropy_mode: EntropyMode,
    pub seed: u64,
    /// Continue from the previous model instead of retraining from zeros.
    pub warm_start: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            max_iterations: None,
            seed_size: 20,
            strategy: Strategy::Entropy,
            entropy_mode: EntropyMode::CategoricalNormalized,
            seed: 0,
            warm_start: false,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self, num_classes: usize) -> Result<(), AlError> {
        if self.batch_size == 0 {
            return Err(AlError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(AlError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.seed_size < num_classes {
            return Err(AlError::InvalidConfig(format!(
                "seed_size {} is smaller than the number of classes {num_classes}",
                self.seed_size
            )));
        }
        Ok(())
    }
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Natural-log predictive entropy of `p`. A zero entropy is returned as +0.0.
pub fn uncertainty(p: &[f64], mode: EntropyMode) -> Result<f64, AlError> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AlError::InvalidProbability(*bad));
    }
    match mode {
        EntropyMode::CategoricalNormalized => {
            let sum: f64 = p.iter().sum();
            if sum == 0.0 {
                return Err(AlError::AllZeroVector);
            }
            Ok(0.0 - p.iter().map(|v| xlnx(v / sum)).sum::<f64>())
        }
        EntropyMode::BinarySum => Ok(0.0 - p.iter().map(|&v| xlnx(v) + xlnx(1.0 - v)).sum::<f64>()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub probs: Vec<f64>,
    pub uncertainty: f64,
}

/// Scores every pool document; `features[i]` belongs to `pool[i]`.
pub fn score_pool(
    source: &dyn ProbabilitySource,
    pool: &[Document],
    features: &[&SparseVector],
    mode: EntropyMode,
) -> Result<Vec<ScoredDoc>, AlError> {
    assert_eq!(pool.len(), features.len(), "one feature vector per pool document");
    pool.par_iter()
        .zip(features.par_iter())
        .map(|(doc, x)| {
            let probs = source.probabilities(doc, x)?;
            let u = uncertainty(&probs, mode)?;
            Ok(ScoredDoc {
                id: doc.id.clone(),
                probs,
                uncertainty: u,
            })
        })
        .collect()
}

/// Ids of the `b` highest-scoring documents, highest first; equal scores are
/// ordered by ascending id.
pub fn top_uncertain(scored: &[ScoredDoc], b: usize) -> Vec<String> {
    let mut order: Vec<&ScoredDoc> = scored.iter().collect();
    order.sort_by(|x, y| {
        y.uncertainty
            .total_cmp(&x.uncertainty)
            .then_with(|| x.id.cmp(&y.id))
    });
    order.into_iter().take(b).map(|s| s.id.clone()).collect()
}

/// Uniform sample of `b` ids without replacement.
pub fn random_batch(pool: &[Document], b: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    pool.choose_multiple(rng, b.min(pool.len()))
        .map(|d| d.id.clone())
        .collect()
}

/// Picks the next batch `B_t` from `pool`. Returns the whole pool when
/// `b >= pool.len()`.
pub fn select_batch(
    source: &dyn ProbabilitySource,
    pool: &[Document],
    features: &[&SparseVector],
    b: usize,
    strategy: Strategy,
    mode: EntropyMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>, AlError> {
    if pool.is_empty() {
        return Err(AlError::EmptyPool);
    }
    match strategy {
        Strategy::Entropy => Ok(top_uncertain(&score_pool(source, pool, features, mode)?, b)),
        Strategy::Random => Ok(random_batch(pool, b, rng)),
    }
}

/// Source of labels for a selected batch.
pub trait Oracle {
    fn label(&mut self, batch: &[Document]) -> Result<Vec<LabeledDocument>, AlError>;
}

/// Reveals labels from a hidden gold map.
#[derive(Debug, Clone, Default)]
pub struct SimulatedOracle {
    gold: HashMap<String, usize>,
}

impl SimulatedOracle {
    pub fn new(gold: HashMap<String, usize>) -> Self {
        Self { gold }
    }

    pub fn from_documents(docs: &[LabeledDocument]) -> Self {
        Self::new(docs.iter().map(|d| (d.doc.id.clone(), d.label)).collect())
    }
}

impl Oracle for SimulatedOracle {
    fn label(&mut self, batch: &[Document]) -> Result<Vec<LabeledDocument>, AlError> {
        batch
            .iter()
            .map(|d| {
                self.gold
                    .get(&d.id)
                    .map(|&l| LabeledDocument::new(d.clone(), l))
                    .ok_or_else(|| AlError::MissingGoldLabel(d.id.clone()))
            })
            .collect()
    }
}

/// A batch waiting for human labels, handed to whoever drives annotation.
#[derive(Debug)]
pub struct AnnotationRequest {
    pub batch: Vec<Document>,
    pub reply: mpsc::Sender<HashMap<String, usize>>,
}

/// Human-in-the-loop oracle: sends each batch over a channel and blocks
/// until a complete id→label map comes back. A dropped channel on either
/// side cancels the session.
pub struct ChannelOracle {
    requests: mpsc::Sender<AnnotationRequest>,
    num_classes: usize,
}

impl ChannelOracle {
    pub fn new(num_classes: usize) -> (Self, mpsc::Receiver<AnnotationRequest>) {
        let (tx, rx) = mpsc::channel();
        (
            Self {
                requests: tx,
                num_classes,
            },
            rx,
        )
    }
}

impl Oracle for ChannelOracle {
    fn label(&mut self, batch: &[Document]) -> Result<Vec<LabeledDocument>, AlError> {
        let (reply_tx, reply_rx) = mpsc::channel();
        self.requests
            .send(AnnotationRequest {
                batch: batch.to_vec(),
                reply: reply_tx,
            })
            .map_err(|_| AlError::SessionCancelled)?;
        let labels = reply_rx.recv().map_err(|_| AlError::SessionCancelled)?;
        batch
            .iter()
            .map(|d| {
                let label = *labels
                    .get(&d.id)
                    .ok_or_else(|| AlError::MissingGoldLabel(d.id.clone()))?;
                if label >= self.num_classes {
                    return Err(AlError::LabelOutOfRange {
                        label,
                        k: self.num_classes,
                    });
                }
                Ok(LabeledDocument::new(d.clone(), label))
            })
            .collect()
    }
}

/// One line of the learning-curve history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub labeled: usize,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub mean_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveLearningState {
    pub labeled: Vec<LabeledDocument>,
    pub pool: Vec<Document>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl ActiveLearningState {
    pub fn new(labeled: Vec<LabeledDocument>, pool: Vec<Document>) -> Result<Self, AlError> {
        let mut seen = HashSet::new();
        for id in labeled.iter().map(|d| &d.doc.id).chain(pool.iter().map(|d| &d.id)) {
            if !seen.insert(id.as_str()) {
                return Err(AlError::DuplicateDocument(id.clone()));
            }
        }
        Ok(Self {
            labeled,
            pool,
            iteration: 0,
            history: Vec::new(),
        })
    }
}

pub fn write_history_jsonl<W: Write>(mut w: W, history: &[IterationRecord]) -> std::io::Result<()> {
    for rec in history {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Labeled-set size at the first record whose macro-F1 reaches `target`.
pub fn labels_to_reach(history: &[IterationRecord], target: f64) -> Option<usize> {
    history.iter().find(|r| r.macro_f1 >= target).map(|r| r.labeled)
}

/// Splits `docs` into an initial labeled set of `seed_size` documents (at
/// least one per class) and the remaining pool. Both keep input order.
pub fn stratified_seed(
    docs: &[LabeledDocument],
    seed_size: usize,
    num_classes: usize,
    seed: u64,
) -> Result<(Vec<LabeledDocument>, Vec<LabeledDocument>), AlError> {
    if seed_size < num_classes {
        return Err(AlError::InvalidConfig(format!(
            "seed_size {seed_size} is smaller than the number of classes {num_classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, d) in docs.iter().enumerate() {
        if d.label >= num_classes {
            return Err(AlError::LabelOutOfRange {
                label: d.label,
                k: num_classes,
            });
        }
        by_class[d.label].push(i);
    }
    let mut chosen = vec![false; docs.len()];
    for (class, members) in by_class.iter().enumerate() {
        let pick = members.choose(&mut rng).ok_or(AlError::MissingClass(class))?;
        chosen[*pick] = true;
    }
    let rest: Vec<usize> = (0..docs.len()).filter(|&i| !chosen[i]).collect();
    for &i in rest.choose_multiple(&mut rng, (seed_size - num_classes).min(rest.len())) {
        chosen[i] = true;
    }
    let (seed_set, pool): (Vec<_>, Vec<_>) = docs.iter().zip(chosen).partition(|(_, c)| *c);
    Ok((
        seed_set.into_iter().map(|(d, _)| d.clone()).collect(),
        pool.into_iter().map(|(d, _)| d.clone()).collect(),
    ))
}

/// Drives the acquisition loop over one labeled set and pool.
///
/// Features are computed once, up front, for every labeled, pool and
/// evaluation document. Construction trains the seed-only model and records
/// it as history entry `t = 0`.
pub struct ActiveLearner {
    num_classes: usize,
    vectorizer: Vectorizer,
    features: HashMap<String, SparseVector>,
    eval: Vec<(SparseVector, usize)>,
    acquisition: AcquisitionConfig,
    train: TrainConfig,
    state: ActiveLearningState,
    model: OvrLinearModel,
    last_train_loss: f64,
    rng: ChaCha8Rng,
}

impl ActiveLearner {
    pub fn new(
        num_classes: usize,
        vectorizer: Vectorizer,
        state: ActiveLearningState,
        eval: &[LabeledDocument],
        acquisition: AcquisitionConfig,
        train: TrainConfig,
    ) -> Result<Self, AlError> {
        if acquisition.batch_size == 0 {
            return Err(AlError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if acquisition.max_iterations == Some(0) {
            return Err(AlError::InvalidConfig("max_iterations must be positive".into()));
        }
        if state.labeled.is_empty() {
            return Err(AlError::InvalidConfig("the seed labeled set is empty".into()));
        }
        let check = |label: usize| {
            if label >= num_classes {
                Err(AlError::LabelOutOfRange {
                    label,
                    k: num_classes,
                })
            } else {
                Ok(())
            }
        };
        for d in state.labeled.iter().chain(eval) {
            check(d.label)?;
        }
        let pool_ids: HashSet<&str> = state
            .labeled
            .iter()
            .map(|d| d.doc.id.as_str())
            .chain(state.pool.iter().map(|d| d.id.as_str()))
            .collect();
        if let Some(overlap) = eval.iter().find(|d| pool_ids.contains(d.doc.id.as_str())) {
            return Err(AlError::InvalidConfig(format!(
                "evaluation document {:?} also appears in the labeled set or pool",
                overlap.doc.id
            )));
        }

        let docs: Vec<&Document> = state
            .labeled
            .iter()
            .map(|d| &d.doc)
            .chain(state.pool.iter())
            .collect();
        let features: HashMap<String, SparseVector> = docs
            .par_iter()
            .map(|d| (d.id.clone(), vectorizer.transform(&d.text)))
            .collect();
        let eval: Vec<(SparseVector, usize)> = eval
            .par_iter()
            .map(|d| (vectorizer.transform(&d.doc.text), d.label))
            .collect();

        let rng = ChaCha8Rng::seed_from_u64(acquisition.seed);
        let model = OvrLinearModel::zeros(num_classes, vectorizer.dim());
        let mut learner = Self {
            num_classes,
            vectorizer,
            features,
            eval,
            acquisition,
            train,
            state,
            model,
            last_train_loss: f64::NAN,
            rng,
        };
        learner.retrain()?;
        if learner.state.history.is_empty() {
            let record = learner.record()?;
            learner.state.history.push(record);
        }
        Ok(learner)
    }

    pub fn state(&self) -> &ActiveLearningState {
        &self.state
    }

    pub fn model(&self) -> &OvrLinearModel {
        &self.model
    }

    pub fn vectorizer(&self) -> &Vectorizer {
        &self.vectorizer
    }

    pub fn acquisition(&self) -> &AcquisitionConfig {
        &self.acquisition
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self, id: &str) -> Option<&SparseVector> {
        self.features.get(id)
    }

    /// True once the iteration budget is spent or the pool is empty.
    pub fn finished(&self) -> bool {
        self.state.pool.is_empty()
            || self
                .acquisition
                .max_iterations
                .is_some_and(|t| self.state.iteration >= t)
    }

    fn pool_features(&self) -> Vec<&SparseVector> {
        self.state
            .pool
            .iter()
            .map(|d| &self.features[&d.id])
            .collect()
    }

    /// Current model's probabilities and uncertainty for every pool document,
    /// in pool order.
    pub fn score_pool(&self) -> Result<Vec<ScoredDoc>, AlError> {
        score_pool(
            &self.model,
            &self.state.pool,
            &self.pool_features(),
            self.acquisition.entropy_mode,
        )
    }

    /// Chooses the next batch without changing the labeled set or pool.
    pub fn propose_batch(&mut self) -> Result<Vec<Document>, AlError> {
        let features: Vec<&SparseVector> = self
            .state
            .pool
            .iter()
            .map(|d| &self.features[&d.id])
            .collect();
        let ids = select_batch(
            &self.model,
            &self.state.pool,
            &features,
            self.acquisition.batch_size,
            self.acquisition.strategy,
            self.acquisition.entropy_mode,
            &mut self.rng,
        )?;
        let by_id: HashMap<&str, &Document> =
            self.state.pool.iter().map(|d| (d.id.as_str(), d)).collect();
        Ok(ids.iter().map(|id| by_id[id.as_str()].clone()).collect())
    }

    /// Moves a labeled batch from the pool into the labeled set, retrains,
    /// evaluates and appends one history record.
    pub fn commit(&mut self, batch: Vec<LabeledDocument>) -> Result<&IterationRecord, AlError> {
        if batch.is_empty() {
            return Err(AlError::InvalidConfig("cannot commit an empty batch".into()));
        }
        let mut incoming = HashSet::new();
        for d in &batch {
            if d.label >= self.num_classes {
                return Err(AlError::LabelOutOfRange {
                    label: d.label,
                    k: self.num_classes,
                });
            }
            if !incoming.insert(d.doc.id.as_str()) {
                return Err(AlError::DuplicateDocument(d.doc.id.clone()));
            }
        }
        let pool_ids: HashSet<&str> = self.state.pool.iter().map(|d| d.id.as_str()).collect();
        if let Some(d) = batch.iter().find(|d| !pool_ids.contains(d.doc.id.as_str())) {
            return Err(AlError::UnknownDocument(d.doc.id.clone()));
        }
        let incoming: HashSet<String> = incoming.into_iter().map(str::to_string).collect();
        self.state.pool.retain(|d| !incoming.contains(&d.id));
        self.state.labeled.extend(batch);
        self.state.iteration += 1;
        self.retrain()?;
        let record = self.record()?;
        self.state.history.push(record);
        Ok(self.state.history.last().expect("just pushed"))
    }

    fn retrain(&mut self) -> Result<(), AlError> {
        let train: Vec<(SparseVector, usize)> = self
            .state
            .labeled
            .iter()
            .map(|d| (self.features[&d.doc.id].clone(), d.label))
            .collect();
        let labels: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
        let cw = linear_model::training_weights(&labels, self.num_classes, &self.train)?;
        let init = self.acquisition.warm_start.then_some(&self.model);
        let (model, losses) = linear_model::fit(&train, &self.train, &cw, init)?;
        self.model = model;
        self.last_train_loss = losses.last().copied().unwrap_or(f64::NAN);
        Ok(())
    }

    /// Report on the evaluation set, or on the labeled set when no
    /// evaluation set was given.
    pub fn evaluate(&self) -> Result<EvaluationReport, AlError> {
        let labeled_fallback: Vec<(SparseVector, usize)>;
        let data = if self.eval.is_empty() {
            labeled_fallback = self
                .state
                .labeled
                .iter()
                .map(|d| (self.features[&d.doc.id].clone(), d.label))
                .collect();
            &labeled_fallback
        } else {
            &self.eval
        };
        let mut gold = Vec::with_capacity(data.len());
        let mut pred = Vec::with_capacity(data.len());
        for (x, label) in data {
            gold.push(*label);
            pred.push(self.model.predict_label(x)?);
        }
        Ok(metrics::report(&metrics::confusion(&gold, &pred, self.num_classes)?)?)
    }

    fn record(&self) -> Result<IterationRecord, AlError> {
        let report = self.evaluate()?;
        Ok(IterationRecord {
            t: self.state.iteration,
            labeled: self.state.labeled.len(),
            macro_f1: report.macro_avg.f1,
            micro_f1: report.micro_avg.f1,
            accuracy: report.accuracy,
            mean_train_loss: self.last_train_loss,
        })
    }

    /// Runs acquisition rounds until [`finished`](Self::finished).
    pub fn run_loop(&mut self, oracle: &mut dyn Oracle) -> Result<(), AlError> {
        while !self.finished() {
            let batch = self.propose_batch()?;
            let labeled = oracle.label(&batch)?;
            self.commit(labeled)?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (OvrLinearModel, ActiveLearningState) {
        (self.model, self.state)
    }
}

/// Simulated run: stratified seed set from `train_docs`, the rest as pool,
/// labels revealed by a [`SimulatedOracle`]. The seed-set draw, random
/// sampling and training shuffles all derive from `acquisition.seed` /
/// `train.seed`.
pub fn run_simulation(
    num_classes: usize,
    vectorizer: Vectorizer,
    train_docs: &[LabeledDocument],
    eval: &[LabeledDocument],
    acquisition: AcquisitionConfig,
    train: TrainConfig,
) -> Result<(OvrLinearModel, ActiveLearningState), AlError> {
    acquisition.validate(num_classes)?;
    let (seed_set, pool) =
        stratified_seed(train_docs, acquisition.seed_size, num_classes, acquisition.seed)?;
    let mut oracle = SimulatedOracle::from_documents(&pool);
    let state = ActiveLearningState::new(seed_set, pool.into_iter().map(|d| d.doc).collect())?;
    let mut learner = ActiveLearner::new(num_classes, vectorizer, state, eval, acquisition, train)?;
    learner.run_loop(&mut oracle)?;
    Ok(learner.into_parts())
}
