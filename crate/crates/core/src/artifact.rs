//! On-disk model artifact.
//!
//! `model.json` holds the label schema, preprocessing and TF-IDF settings,
//! the OvR heads and the training config. The vocabulary lives in a sibling
//! file named by `vocab_ref`, so inference replays the train-time pipeline
//! exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, LabelSchema};
use crate::linear_model::{Head, ModelError, OvrLinearModel, ProbabilitySource, TrainConfig};
use crate::textprep::PrepConfig;
use crate::tfidf::{SparseVector, TfidfConfig, TfidfError, Vectorizer, Vocabulary};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("unsupported model artifact version {0}")]
    UnsupportedVersion(u32),
    #[error("artifact is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocabulary(#[from] TfidfError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub schema: LabelSchema,
    pub prep: PrepConfig,
    pub tfidf: TfidfConfig,
    pub vocab_ref: String,
    pub feature_dim: usize,
    pub heads: Vec<Head>,
    pub train_config: TrainConfig,
}

/// Everything needed to go from raw text to a label.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub schema: LabelSchema,
    pub vectorizer: Vectorizer,
    pub model: OvrLinearModel,
    pub train_config: TrainConfig,
}

impl Classifier {
    pub fn new(
        schema: LabelSchema,
        vectorizer: Vectorizer,
        model: OvrLinearModel,
        train_config: TrainConfig,
    ) -> Result<Self, ArtifactError> {
        if model.num_classes() != schema.len() {
            return Err(ArtifactError::Inconsistent(format!(
                "{} heads for {} classes",
                model.num_classes(),
                schema.len()
            )));
        }
        if model.feature_dim() != vectorizer.dim() {
            return Err(ArtifactError::Inconsistent(format!(
                "model dimension {} but vocabulary size {}",
                model.feature_dim(),
                vectorizer.dim()
            )));
        }
        Ok(Self {
            schema,
            vectorizer,
            model,
            train_config,
        })
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        self.vectorizer.transform(text)
    }

    pub fn predict_proba(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        self.model.predict_proba(&self.featurize(text))
    }

    pub fn predict_label(&self, text: &str) -> Result<usize, ModelError> {
        self.model.predict_label(&self.featurize(text))
    }

    /// Writes `<dir>/<stem>.json` and `<dir>/<stem>.vocab.json`; returns the
    /// model path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf, ArtifactError> {
        let dir = dir.as_ref();
        let vocab_name = format!("{stem}.vocab.json");
        self.vectorizer.vocab.save(dir.join(&vocab_name))?;
        let artifact = ModelArtifact {
            version: ARTIFACT_VERSION,
            schema: self.schema.clone(),
            prep: self.vectorizer.prep.clone(),
            tfidf: self.vectorizer.config.clone(),
            vocab_ref: vocab_name,
            feature_dim: self.model.feature_dim(),
            heads: self.model.heads().to_vec(),
            train_config: self.train_config.clone(),
        };
        let path = dir.join(format!("{stem}.json"));
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer(&mut w, &artifact)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        let path = path.as_ref();
        let artifact: ModelArtifact = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(artifact.version));
        }
        let vocab_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&artifact.vocab_ref);
        let vocab = Vocabulary::load(vocab_path)?;
        let model = OvrLinearModel::from_heads(artifact.heads, artifact.feature_dim)?;
        let vectorizer = Vectorizer {
            prep: artifact.prep,
            config: artifact.tfidf,
            vocab,
        };
        Self::new(artifact.schema, vectorizer, model, artifact.train_config)
    }
}

impl ProbabilitySource for Classifier {
    fn num_classes(&self) -> usize {
        self.schema.len()
    }

    fn probabilities(&self, _doc: &Document, features: &SparseVector) -> Result<Vec<f64>, ModelError> {
        self.model.predict_proba(features)
    }
}
