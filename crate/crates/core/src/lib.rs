//! Active-learning toolkit for imbalanced multiclass text classification.
//!
//! The pipeline runs corpus ingestion ([`corpus`]), normalization and
//! tokenization ([`textprep`]), TF-IDF features ([`tfidf`]), one-vs-rest
//! logistic regression on a class-weighted loss ([`linear_model`]),
//! entropy-driven acquisition ([`active_learning`]) and evaluation
//! ([`metrics`]).

pub mod active_learning;
pub mod artifact;
pub mod corpus;
pub mod linear_model;
pub mod metrics;
pub mod synth;
pub mod textprep;
pub mod tfidf;

pub use active_learning::{
    AcquisitionConfig, ActiveLearner, ActiveLearningState, EntropyMode, IterationRecord, Oracle,
    SimulatedOracle, Strategy,
};
pub use artifact::Classifier;
pub use corpus::{ClassDistribution, Document, Format, LabelSchema, LabeledDocument};
pub use linear_model::{ClassWeights, OvrLinearModel, ProbabilitySource, TrainConfig};
pub use metrics::{ConfusionMatrix, EvaluationReport};
pub use textprep::PrepConfig;
pub use tfidf::{SparseVector, TfidfConfig, Vectorizer, Vocabulary};
