use std::path::Path;

use altc_core::active_learning::AlError;
use altc_core::artifact::ArtifactError;
use altc_core::corpus::CorpusError;
use altc_core::linear_model::ModelError;
use altc_core::metrics::MetricsError;
use altc_core::tfidf::TfidfError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    ActiveLearning(#[from] AlError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Vocabulary(#[from] TfidfError),
    #[error("schema mismatch: model has {model:?}, corpus was read with {corpus:?}")]
    SchemaMismatch {
        model: Vec<String>,
        corpus: Vec<String>,
    },
    #[error("{0}")]
    Usage(String),
    #[error("session: {0}")]
    Session(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Corpus(e) => match e {
                CorpusError::UnknownLabel { .. } => "UnknownLabel",
                CorpusError::DuplicateId(_) => "DuplicateId",
                CorpusError::MalformedRecord { .. } => "MalformedRecord",
                CorpusError::MissingColumn(_) => "MissingColumn",
                CorpusError::MissingLabel(_) => "MissingLabel",
                CorpusError::EmptyCorpus => "EmptyCorpus",
                CorpusError::InvalidSchema(_) => "InvalidSchema",
                CorpusError::InvalidFraction(_) => "InvalidFraction",
                CorpusError::UnknownFormat(_) => "UnknownFormat",
                CorpusError::LabelOutOfRange { .. } => "LabelOutOfRange",
                CorpusError::Io(_) => "Io",
            },
            Self::Model(_) => "ModelError",
            Self::Artifact(_) => "ArtifactError",
            Self::ActiveLearning(_) => "ActiveLearningError",
            Self::Metrics(_) => "MetricsError",
            Self::Vocabulary(_) => "VocabularyError",
            Self::SchemaMismatch { .. } => "SchemaMismatch",
            Self::Usage(_) => "Usage",
            Self::Session(_) => "SessionError",
            Self::Io { .. } => "Io",
            Self::Json(_) => "Json",
        }
    }

    /// 2 for bad input data or arguments, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Corpus(_) | Self::Usage(_) | Self::SchemaMismatch { .. } => 2,
            _ => 1,
        }
    }

    /// The offending record, when the error points at one.
    pub fn record(&self) -> Option<String> {
        match self {
            Self::Corpus(CorpusError::UnknownLabel { id, .. })
            | Self::Corpus(CorpusError::DuplicateId(id))
            | Self::Corpus(CorpusError::MissingLabel(id)) => Some(id.clone()),
            Self::Corpus(CorpusError::MalformedRecord { line, .. }) => Some(format!("line {line}")),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let Some(r) = self.record() {
            v["record"] = json!(r);
        }
        v.to_string()
    }
}
