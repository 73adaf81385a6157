//! Vocabulary construction and TF-IDF featurization.
//!
//! `value(t) = tf(t) * idf(t)` with raw counts for `tf` (or `1 + ln tf` when
//! sublinear scaling is on) and the smoothed
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`. Vectors are L2-normalized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{self, PrepConfig};

#[derive(Debug, Error)]
pub enum TfidfError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("min_df must be at least 1")]
    InvalidMinDf,
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("unsupported vocabulary version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse vector with strictly increasing indices and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self, TfidfError> {
        if indices.len() != values.len() {
            return Err(TfidfError::InvalidVector("index/value length mismatch".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TfidfError::InvalidVector("indices not strictly increasing".into()));
        }
        if indices.last().is_some_and(|&i| i >= dim) {
            return Err(TfidfError::InvalidVector("index out of range".into()));
        }
        if values.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(TfidfError::InvalidVector("zero or non-finite value".into()));
        }
        Ok(Self { dim, indices, values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a sparse vector from a dense slice, dropping zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Self {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Dot product with a dense vector of the same dimension.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    fn normalize_in_place(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NgramRange {
    #[default]
    Unigrams,
    UnigramsAndBigrams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub min_df: usize,
    pub max_vocab: Option<usize>,
    pub sublinear_tf: bool,
    pub ngrams: NgramRange,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            min_df: 1,
            max_vocab: None,
            sublinear_tf: false,
            ngrams: NgramRange::Unigrams,
        }
    }
}

/// Expands tokens into the terms counted by the vectorizer. Bigrams are the
/// two tokens joined by a single space; tokens never contain whitespace, so
/// the join is unambiguous.
pub fn terms(tokens: &[String], ngrams: NgramRange) -> Vec<String> {
    let mut out = tokens.to_vec();
    if ngrams == NgramRange::UnigramsAndBigrams {
        out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    out
}

/// Term index with document frequencies. Indices follow sorted term order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<usize>,
    corpus_size: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TermEntry {
    t: String,
    df: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    version: u32,
    corpus_size: usize,
    terms: Vec<TermEntry>,
}

impl Vocabulary {
    fn from_parts(entries: Vec<(String, usize)>, corpus_size: usize) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        let (terms, document_frequency) = entries.into_iter().unzip();
        Self {
            terms,
            document_frequency,
            corpus_size,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        smooth_idf(self.corpus_size, self.document_frequency[index])
    }

    pub fn to_json(&self) -> Result<String, TfidfError> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(json: &str) -> Result<Self, TfidfError> {
        Self::from_file(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TfidfError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &self.to_file())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TfidfError> {
        let file: VocabularyFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_file(file)
    }

    fn to_file(&self) -> VocabularyFile {
        VocabularyFile {
            version: 1,
            corpus_size: self.corpus_size,
            terms: self
                .terms
                .iter()
                .zip(&self.document_frequency)
                .map(|(t, &df)| TermEntry { t: t.clone(), df })
                .collect(),
        }
    }

    fn from_file(file: VocabularyFile) -> Result<Self, TfidfError> {
        if file.version != 1 {
            return Err(TfidfError::UnsupportedVersion(file.version));
        }
        let mut seen = HashSet::new();
        for e in &file.terms {
            if e.df == 0 || e.df > file.corpus_size {
                return Err(TfidfError::InvalidVocabulary(format!(
                    "term {:?} has df {} outside 1..={}",
                    e.t, e.df, file.corpus_size
                )));
            }
            if !seen.insert(e.t.as_str()) {
                return Err(TfidfError::InvalidVocabulary(format!("duplicate term {:?}", e.t)));
            }
        }
        Ok(Self::from_parts(
            file.terms.into_iter().map(|e| (e.t, e.df)).collect(),
            file.corpus_size,
        ))
    }
}

pub fn smooth_idf(corpus_size: usize, df: usize) -> f64 {
    ((1.0 + corpus_size as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Builds a vocabulary from per-document term lists.
///
/// Keeps terms with `df >= min_df`; with `max_vocab`, the highest-df terms
/// survive, ties going to the lexicographically smaller term.
pub fn fit_vocabulary<T: AsRef<[String]>>(
    corpus: &[T],
    min_df: usize,
    max_vocab: Option<usize>,
) -> Result<Vocabulary, TfidfError> {
    if corpus.is_empty() {
        return Err(TfidfError::EmptyCorpus);
    }
    if min_df == 0 {
        return Err(TfidfError::InvalidMinDf);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|(_, n)| *n >= min_df).collect();
    if let Some(max) = max_vocab {
        if kept.len() > max {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            kept.truncate(max);
            kept.sort_by(|a, b| a.0.cmp(b.0));
        }
    }
    Ok(Vocabulary::from_parts(
        kept.into_iter().map(|(t, n)| (t.to_string(), n)).collect(),
        corpus.len(),
    ))
}

/// TF-IDF vector for one document's terms. Out-of-vocabulary terms are
/// dropped; a document with no known terms maps to the zero vector.
pub fn transform(terms: &[String], vocab: &Vocabulary, sublinear_tf: bool) -> SparseVector {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in terms {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let (indices, values) = counts
        .into_iter()
        .map(|(i, c)| {
            let tf = if sublinear_tf {
                1.0 + (c as f64).ln()
            } else {
                c as f64
            };
            (i, tf * vocab.idf(i))
        })
        .unzip();
    let mut v = SparseVector {
        dim: vocab.len(),
        indices,
        values,
    };
    v.normalize_in_place();
    v
}

/// Text-to-vector pipeline: preprocessing, n-gram expansion and a fitted
/// vocabulary.
#[derive(Debug, Clone)]
pub struct Vectorizer {
    pub prep: PrepConfig,
    pub config: TfidfConfig,
    pub vocab: Vocabulary,
}

impl Vectorizer {
    pub fn fit<S: AsRef<str>>(
        texts: &[S],
        prep: PrepConfig,
        config: TfidfConfig,
    ) -> Result<Self, TfidfError> {
        let docs: Vec<Vec<String>> = texts
            .iter()
            .map(|t| terms(&textprep::prepare(t.as_ref(), &prep), config.ngrams))
            .collect();
        let vocab = fit_vocabulary(&docs, config.min_df, config.max_vocab)?;
        Ok(Self { prep, config, vocab })
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn transform(&self, text: &str) -> SparseVector {
        let tokens = textprep::prepare(text, &self.prep);
        transform(&terms(&tokens, self.config.ngrams), &self.vocab, self.config.sublinear_tf)
    }

    pub fn transform_many<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<SparseVector> {
        use rayon::prelude::*;
        texts.par_iter().map(|t| self.transform(t.as_ref())).collect()
    }
}
