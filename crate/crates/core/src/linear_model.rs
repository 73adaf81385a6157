//! One-vs-rest logistic regression over sparse features.
//!
//! Each class `k` has an independent sigmoid head `p_k = σ(w_k·x + b_k)`.
//! Training minimizes the class-weighted binary cross-entropy summed over
//! heads, plus `l2/2 · Σ‖w_k‖²`, by mini-batch gradient descent:
//!
//! ```text
//! L(x, y) = -Σ_k cw_k [ y_k ln p_k + (1 - y_k) ln(1 - p_k) ]
//! ∂L/∂z_k = cw_k (p_k - y_k)          z_k = w_k·x + b_k
//! ```
//!
//! Ground-truth labels are single class indices, one-hot encoded for the loss.
//! The predicted label is the argmax over heads (lowest index on ties).

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassDistribution, Document};
use crate::tfidf::SparseVector;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("class {0} has zero examples; cannot compute a balanced weight")]
    ZeroClassCount(usize),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became non-finite in epoch {epoch}; learning rate too high?")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid class weights: {0}")]
    InvalidWeights(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("probability source: {0}")]
    Source(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Positive, finite per-class loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::InvalidWeights("no classes".into()));
        }
        if let Some((k, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(ModelError::InvalidWeights(format!("weight {k} = {w}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ClassWeights {
    type Error = ModelError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ClassWeights> for Vec<f64> {
    fn from(w: ClassWeights) -> Self {
        w.0
    }
}

/// Balanced inverse-frequency weights: `total / (K * count_k)`.
pub fn compute_class_weights(dist: &ClassDistribution) -> Result<ClassWeights, ModelError> {
    let k = dist.counts.len() as f64;
    if let Some(zero) = dist.counts.iter().position(|&c| c == 0) {
        return Err(ModelError::ZeroClassCount(zero));
    }
    ClassWeights::new(
        dist.counts
            .iter()
            .map(|&c| dist.total as f64 / (k * c as f64))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrLinearModel {
    heads: Vec<Head>,
    feature_dim: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(label: usize, k: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    y[label] = 1.0;
    y
}

impl OvrLinearModel {
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Self {
        Self {
            heads: (0..num_classes)
                .map(|_| Head {
                    w: vec![0.0; feature_dim],
                    b: 0.0,
                })
                .collect(),
            feature_dim,
        }
    }

    pub fn from_heads(heads: Vec<Head>, feature_dim: usize) -> Result<Self, ModelError> {
        if heads.is_empty() {
            return Err(ModelError::InvalidConfig("model needs at least one head".into()));
        }
        for h in &heads {
            if h.w.len() != feature_dim {
                return Err(ModelError::DimensionMismatch {
                    expected: feature_dim,
                    got: h.w.len(),
                });
            }
            if !h.b.is_finite() || h.w.iter().any(|w| !w.is_finite()) {
                return Err(ModelError::InvalidConfig("non-finite parameter".into()));
            }
        }
        Ok(Self { heads, feature_dim })
    }

    pub fn num_classes(&self) -> usize {
        self.heads.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [Head] {
        &mut self.heads
    }

    pub fn into_heads(self) -> Vec<Head> {
        self.heads
    }

    fn check_dim(&self, x: &SparseVector) -> Result<(), ModelError> {
        if x.dim() != self.feature_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.feature_dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Pre-activations `w_k·x + b_k`.
    pub fn decision_function(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        Ok(self.heads.iter().map(|h| x.dot(&h.w) + h.b).collect())
    }

    /// Independent per-head probabilities; they need not sum to one.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ModelError> {
        Ok(self.decision_function(x)?.into_iter().map(sigmoid).collect())
    }

    pub fn predict_label(&self, x: &SparseVector) -> Result<usize, ModelError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    fn squared_weight_norm(&self) -> f64 {
        self.heads
            .iter()
            .map(|h| h.w.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }
}

/// Class-weighted binary cross-entropy of one prediction. `p` is clamped to
/// `[eps, 1 - eps]` before taking logarithms.
pub fn weighted_bce_loss(
    p: &[f64],
    y: &[f64],
    cw: &ClassWeights,
    eps: f64,
) -> Result<f64, ModelError> {
    if y.len() != p.len() {
        return Err(ModelError::LengthMismatch {
            expected: p.len(),
            got: y.len(),
        });
    }
    if cw.len() != p.len() {
        return Err(ModelError::LengthMismatch {
            expected: p.len(),
            got: cw.len(),
        });
    }
    let mut loss = 0.0;
    for ((&pk, &yk), &wk) in p.iter().zip(y).zip(cw.as_slice()) {
        let pk = pk.clamp(eps, 1.0 - eps);
        loss -= wk * (yk * pk.ln() + (1.0 - yk) * (1.0 - pk).ln());
    }
    Ok(loss.max(0.0))
}

/// Per-example objective: weighted BCE plus `l2/2 · Σ‖w_k‖²`.
pub fn regularized_loss(
    model: &OvrLinearModel,
    x: &SparseVector,
    y: &[f64],
    cw: &ClassWeights,
    l2: f64,
    eps: f64,
) -> Result<f64, ModelError> {
    let p = model.predict_proba(x)?;
    Ok(weighted_bce_loss(&p, y, cw, eps)? + 0.5 * l2 * model.squared_weight_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Gradient of [`regularized_loss`] for one example (unclamped sigmoid).
pub fn loss_gradient(
    model: &OvrLinearModel,
    x: &SparseVector,
    y: &[f64],
    cw: &ClassWeights,
    l2: f64,
) -> Result<Vec<HeadGradient>, ModelError> {
    let k = model.num_classes();
    for len in [y.len(), cw.len()] {
        if len != k {
            return Err(ModelError::LengthMismatch { expected: k, got: len });
        }
    }
    let p = model.predict_proba(x)?;
    Ok(model
        .heads
        .iter()
        .enumerate()
        .map(|(j, head)| {
            let dz = cw.as_slice()[j] * (p[j] - y[j]);
            let mut w: Vec<f64> = head.w.iter().map(|w| l2 * w).collect();
            for (i, v) in x.iter() {
                w[i] += dz * v;
            }
            HeadGradient { w, b: dz }
        })
        .collect())
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
    pub seed: u64,
    pub prob_clamp: f64,
    /// Epochs without held-out improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// Balanced inverse-frequency class weights when true, uniform otherwise.
    #[serde(default = "default_true")]
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 64,
            l2_penalty: 1e-4,
            seed: 0,
            prob_clamp: 1e-7,
            early_stop_patience: 5,
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return bad("l2_penalty must be non-negative");
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return bad("prob_clamp must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// Loss curves from one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean objective per epoch, measured at the parameters each batch saw.
    pub train: Vec<f64>,
    /// Mean held-out weighted BCE after each epoch (empty without a holdout).
    pub holdout: Vec<f64>,
}

/// Weights for a labeled training set under `cfg.class_weighting`.
pub fn training_weights(
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<ClassWeights, ModelError> {
    if !cfg.class_weighting {
        return Ok(ClassWeights::uniform(num_classes));
    }
    let mut counts = vec![0; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(ModelError::LabelOutOfRange { label: l, k: num_classes });
        }
        counts[l] += 1;
    }
    compute_class_weights(&ClassDistribution {
        counts,
        total: labels.len(),
    })
}

pub fn fit(
    train: &[(SparseVector, usize)],
    cfg: &TrainConfig,
    cw: &ClassWeights,
    init: Option<&OvrLinearModel>,
) -> Result<(OvrLinearModel, Vec<f64>), ModelError> {
    let (model, history) = fit_with_holdout(train, None, cfg, cw, init)?;
    Ok((model, history.train))
}

fn mean_loss(
    model: &OvrLinearModel,
    data: &[(SparseVector, usize)],
    cw: &ClassWeights,
    eps: f64,
) -> Result<f64, ModelError> {
    let k = model.num_classes();
    let mut total = 0.0;
    for (x, label) in data {
        let p = model.predict_proba(x)?;
        total += weighted_bce_loss(&p, &one_hot(*label, k), cw, eps)?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Mini-batch gradient descent with a fixed learning rate.
///
/// Starts from `init` or from zeros. Examples are reshuffled every epoch by a
/// generator seeded from `cfg.seed`, so equal inputs give bitwise-equal
/// models. With a holdout set and `early_stop_patience > 0`, training stops
/// once the held-out loss has not improved for that many epochs and the best
/// parameters are returned.
pub fn fit_with_holdout(
    train: &[(SparseVector, usize)],
    holdout: Option<&[(SparseVector, usize)]>,
    cfg: &TrainConfig,
    cw: &ClassWeights,
    init: Option<&OvrLinearModel>,
) -> Result<(OvrLinearModel, TrainHistory), ModelError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let k = cw.len();
    let dim = train[0].0.dim();
    let mut model = match init {
        Some(m) => {
            if m.num_classes() != k {
                return Err(ModelError::LengthMismatch {
                    expected: m.num_classes(),
                    got: k,
                });
            }
            m.clone()
        }
        None => OvrLinearModel::zeros(k, dim),
    };
    for (x, label) in train.iter().chain(holdout.unwrap_or(&[]).iter()) {
        model.check_dim(x)?;
        if *label >= k {
            return Err(ModelError::LabelOutOfRange { label: *label, k });
        }
    }

    let n = train.len();
    let lr = cfg.learning_rate;
    let l2 = cfg.l2_penalty;
    let eps = cfg.prob_clamp;
    let weights = cw.as_slice();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![vec![0.0; dim]; k];
    let mut touched: Vec<usize> = Vec::new();
    let mut mark = vec![false; dim];
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, OvrLinearModel)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let m = batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut bias_grad = vec![0.0; k];
            for &idx in batch {
                let (x, label) = &train[idx];
                let z = model.decision_function(x)?;
                for (j, &zj) in z.iter().enumerate() {
                    let p = sigmoid(zj);
                    let y = if j == *label { 1.0 } else { 0.0 };
                    let pc = p.clamp(eps, 1.0 - eps);
                    batch_loss -= weights[j] * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
                    let dz = weights[j] * (p - y);
                    bias_grad[j] += dz;
                    for (i, v) in x.iter() {
                        grad[j][i] += dz * v;
                    }
                }
                for &i in x.indices() {
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                }
            }
            let reg = if l2 > 0.0 {
                0.5 * l2 * model.squared_weight_norm()
            } else {
                0.0
            };
            epoch_loss += batch_loss + m * reg;

            let shrink = 1.0 - lr * l2;
            for (j, head) in model.heads.iter_mut().enumerate() {
                if l2 > 0.0 {
                    for w in head.w.iter_mut() {
                        *w *= shrink;
                    }
                }
                for &i in &touched {
                    head.w[i] -= lr * grad[j][i] / m;
                    grad[j][i] = 0.0;
                }
                head.b -= lr * bias_grad[j] / m;
            }
            for &i in &touched {
                mark[i] = false;
            }
            touched.clear();
        }
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        history.train.push(epoch_loss);

        if let Some(held) = holdout.filter(|h| !h.is_empty()) {
            let loss = mean_loss(&model, held, cw, eps)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            history.holdout.push(loss);
            if cfg.early_stop_patience > 0 {
                match &best {
                    Some((b, _)) if loss >= *b => {
                        stale += 1;
                        if stale >= cfg.early_stop_patience {
                            break;
                        }
                    }
                    _ => {
                        best = Some((loss, model.clone()));
                        stale = 0;
                    }
                }
            }
        }
    }
    if let Some((_, best_model)) = best {
        model = best_model;
    }
    if model
        .heads
        .iter()
        .any(|h| !h.b.is_finite() || h.w.iter().any(|w| !w.is_finite()))
    {
        return Err(ModelError::NonFiniteLoss {
            epoch: history.train.len(),
        });
    }
    Ok((model, history))
}

/// Anything that maps a document to `K` per-class probabilities in `[0, 1]`.
///
/// The linear model reads the featurized vector; external scorers may use the
/// raw text instead.
pub trait ProbabilitySource: Send + Sync {
    fn num_classes(&self) -> usize;

    fn probabilities(&self, doc: &Document, features: &SparseVector)
        -> Result<Vec<f64>, ModelError>;
}

impl ProbabilitySource for OvrLinearModel {
    fn num_classes(&self) -> usize {
        self.heads.len()
    }

    fn probabilities(
        &self,
        _doc: &Document,
        features: &SparseVector,
    ) -> Result<Vec<f64>, ModelError> {
        self.predict_proba(features)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    id: String,
    probs: Vec<f64>,
}

struct LineChannel {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
}

/// Probability source backed by a line-oriented JSON exchange, typically an
/// external scoring process. Each request is `{"id":..,"text":..}` on one
/// line and each reply is `{"id":..,"probs":[..]}` on one line.
pub struct LineProtocolSource {
    num_classes: usize,
    channel: Mutex<LineChannel>,
    child: Option<Mutex<Child>>,
}

impl LineProtocolSource {
    pub fn from_streams(
        reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
        num_classes: usize,
    ) -> Self {
        Self {
            num_classes,
            channel: Mutex::new(LineChannel {
                reader: Box::new(reader),
                writer: Box::new(writer),
            }),
            child: None,
        }
    }

    /// Spawns `program args...` and talks to it over stdin/stdout.
    pub fn spawn(program: &str, args: &[String], num_classes: usize) -> Result<Self, ModelError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout: ChildStdout = child.stdout.take().expect("piped stdout");
        let mut source = Self::from_streams(BufReader::new(stdout), stdin, num_classes);
        source.child = Some(Mutex::new(child));
        Ok(source)
    }
}

impl Drop for LineProtocolSource {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut child) = child.lock() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

impl ProbabilitySource for LineProtocolSource {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn probabilities(
        &self,
        doc: &Document,
        _features: &SparseVector,
    ) -> Result<Vec<f64>, ModelError> {
        let mut chan = self
            .channel
            .lock()
            .map_err(|_| ModelError::Source("channel poisoned".into()))?;
        let request = serde_json::to_string(&ScoreRequest {
            id: &doc.id,
            text: &doc.text,
        })
        .map_err(|e| ModelError::Source(e.to_string()))?;
        chan.writer.write_all(request.as_bytes())?;
        chan.writer.write_all(b"\n")?;
        chan.writer.flush()?;
        let mut line = String::new();
        if chan.reader.read_line(&mut line)? == 0 {
            return Err(ModelError::Source("scorer closed its output".into()));
        }
        let reply: ScoreResponse =
            serde_json::from_str(line.trim_end()).map_err(|e| ModelError::Source(e.to_string()))?;
        if reply.id != doc.id {
            return Err(ModelError::Source(format!(
                "reply for {:?} while waiting for {:?}",
                reply.id, doc.id
            )));
        }
        if reply.probs.len() != self.num_classes {
            return Err(ModelError::LengthMismatch {
                expected: self.num_classes,
                got: reply.probs.len(),
            });
        }
        if reply.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ModelError::Source(format!(
                "probabilities outside [0, 1] for {:?}",
                doc.id
            )));
        }
        Ok(reply.probs)
    }
}
