//! Dataset ingestion, label schema, stratified splitting and class-distribution
//! auditing.
//!
//! Three on-disk formats share one record contract: `id`, `text`, `label`,
//! plus an optional `language` tag.
//!
//! ```text
//! csv / tsv : header row containing at least id,text,label
//! jsonl     : {"id": "...", "text": "...", "label": "...", "language": "en"}
//! ```
//!
//! Labels are matched against the [`LabelSchema`] by exact string comparison
//! after trimming surrounding whitespace. Pools of unlabeled documents use the
//! same formats with an empty (or null) label.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class names used by the multiclass hope-speech task.
pub const HOPE_LABELS: [&str; 4] = [
    "Not Hope",
    "Generalized Hope",
    "Realistic Hope",
    "Unrealistic Hope",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record {id}: unknown label {label:?}")]
    UnknownLabel { id: String, label: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("record {0}: missing label")]
    MissingLabel(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid label schema: {0}")]
    InvalidSchema(String),
    #[error("split fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("unknown format {0:?} (expected csv, tsv or jsonl)")]
    UnknownFormat(String),
    #[error("label index {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered list of class names. The position of a name is its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSchema {
    names: Vec<String>,
}

impl LabelSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(CorpusError::InvalidSchema(format!(
                "need at least 2 classes, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(CorpusError::InvalidSchema("empty class name".into()));
            }
            if name.trim() != name {
                return Err(CorpusError::InvalidSchema(format!(
                    "class name {name:?} has surrounding whitespace"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(CorpusError::InvalidSchema(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// The four hope-speech classes.
    pub fn hope() -> Self {
        Self {
            names: HOPE_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parses a comma-separated list of class names.
    pub fn parse_list(list: &str) -> Result<Self, CorpusError> {
        Self::new(list.split(',').map(|s| s.trim().to_string()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    /// Exact lookup after trimming surrounding whitespace from `label`.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        let label = label.trim();
        self.names.iter().position(|n| n == label)
    }
}

impl Default for LabelSchema {
    fn default() -> Self {
        Self::hope()
    }
}

impl TryFrom<Vec<String>> for LabelSchema {
    type Error = CorpusError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(names)
    }
}

impl From<LabelSchema> for Vec<String> {
    fn from(schema: LabelSchema) -> Self {
        schema.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            language: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub doc: Document,
    pub label: usize,
}

impl LabeledDocument {
    pub fn new(doc: Document, label: usize) -> Self {
        Self { doc, label }
    }

    pub fn id(&self) -> &str {
        &self.doc.id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl ClassDistribution {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

/// JSON form of a distribution: `{"schema": [...], "counts": [...], "total": n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub schema: Vec<String>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl DistributionReport {
    pub fn new(schema: &LabelSchema, dist: &ClassDistribution) -> Self {
        Self {
            schema: schema.names().to_vec(),
            counts: dist.counts.clone(),
            total: dist.total,
        }
    }

    /// Plain-text table, one class per row.
    pub fn to_table(&self) -> String {
        let width = self
            .schema
            .iter()
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = format!("{:<width$}  {:>8}\n", "class", "count");
        for (name, count) in self.schema.iter().zip(&self.counts) {
            out.push_str(&format!("{name:<width$}  {count:>8}\n"));
        }
        out.push_str(&format!("{:<width$}  {:>8}\n", "total", self.total));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Tsv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "tsv" => Some(Format::Tsv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            Format::Tsv => b'\t',
            _ => b',',
        }
    }
}

impl FromStr for Format {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Tsv => "tsv",
            Format::Jsonl => "jsonl",
        })
    }
}

/// Result of reading a file: the records plus the number of records whose
/// text was empty (these are kept and featurize to the zero vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub empty_text: usize,
}

/// A pool entry: a document with its label when the file carried one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub doc: Document,
    pub label: Option<usize>,
}

struct RawRecord {
    line: u64,
    id: String,
    text: String,
    label: Option<String>,
    language: Option<String>,
}

#[derive(Deserialize)]
struct JsonRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    language: Option<String>,
}

fn read_raw<R: Read>(reader: R, format: Format) -> Result<Vec<RawRecord>, CorpusError> {
    match format {
        Format::Csv | Format::Tsv => read_delimited(reader, format.delimiter()),
        Format::Jsonl => read_jsonl(reader),
    }
}

fn read_delimited<R: Read>(reader: R, delimiter: u8) -> Result<Vec<RawRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        // zero-byte file: an empty corpus rather than a missing header
        return Ok(Vec::new());
    }
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id").ok_or_else(|| CorpusError::MissingColumn("id".into()))?;
    let text_col = column("text").ok_or_else(|| CorpusError::MissingColumn("text".into()))?;
    let label_col = column("label").ok_or_else(|| CorpusError::MissingColumn("label".into()))?;
    let lang_col = column("language");

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or_default().to_string();
        let id = field(id_col);
        if id.is_empty() {
            return Err(malformed(line, "empty id".into()));
        }
        let label = field(label_col);
        let language = lang_col.map(field).filter(|l| !l.trim().is_empty());
        out.push(RawRecord {
            line,
            id,
            text: field(text_col),
            label: (!label.trim().is_empty()).then_some(label),
            language,
        });
    }
    Ok(out)
}

fn read_jsonl<R: Read>(reader: R) -> Result<Vec<RawRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let id = match rec.id {
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(_) => return Err(malformed(line_no, "id must be a string or number".into())),
            None => return Err(CorpusError::MissingColumn("id".into())),
        };
        if id.is_empty() {
            return Err(malformed(line_no, "empty id".into()));
        }
        let text = rec.text.ok_or_else(|| CorpusError::MissingColumn("text".into()))?;
        out.push(RawRecord {
            line: line_no,
            id,
            text,
            label: rec.label.filter(|l| !l.trim().is_empty()),
            language: rec.language.filter(|l| !l.trim().is_empty()),
        });
    }
    Ok(out)
}

fn malformed(line: u64, reason: String) -> CorpusError {
    CorpusError::MalformedRecord { line, reason }
}

fn check_unique(records: &[RawRecord]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

fn to_pool_entry(r: RawRecord, schema: &LabelSchema) -> Result<PoolEntry, CorpusError> {
    let label = match &r.label {
        Some(l) => Some(schema.index_of(l).ok_or_else(|| CorpusError::UnknownLabel {
            id: r.id.clone(),
            label: l.clone(),
        })?),
        None => None,
    };
    Ok(PoolEntry {
        doc: Document {
            id: r.id,
            text: r.text,
            language: r.language,
        },
        label,
    })
}

/// Reads a labeled corpus. Every record must carry a schema label.
pub fn read_labeled<R: Read>(
    reader: R,
    format: Format,
    schema: &LabelSchema,
) -> Result<Ingested<LabeledDocument>, CorpusError> {
    let raw = read_raw(reader, format)?;
    check_unique(&raw)?;
    let mut empty_text = 0;
    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        if r.label.is_none() {
            return Err(CorpusError::MissingLabel(format!("{} (line {})", r.id, r.line)));
        }
        let entry = to_pool_entry(r, schema)?;
        if entry.doc.text.is_empty() {
            empty_text += 1;
        }
        let label = entry.label.expect("checked above");
        records.push(LabeledDocument::new(entry.doc, label));
    }
    Ok(Ingested { records, empty_text })
}

/// Reads a pool where the label column may be empty.
pub fn read_pool<R: Read>(
    reader: R,
    format: Format,
    schema: &LabelSchema,
) -> Result<Ingested<PoolEntry>, CorpusError> {
    let raw = read_raw(reader, format)?;
    check_unique(&raw)?;
    let records = raw
        .into_iter()
        .map(|r| to_pool_entry(r, schema))
        .collect::<Result<Vec<_>, _>>()?;
    let empty_text = records.iter().filter(|e| e.doc.text.is_empty()).count();
    Ok(Ingested { records, empty_text })
}

/// Ingests a labeled corpus file.
pub fn ingest(
    path: impl AsRef<Path>,
    format: Format,
    schema: &LabelSchema,
) -> Result<Ingested<LabeledDocument>, CorpusError> {
    read_labeled(File::open(path)?, format, schema)
}

/// Ingests a pool file; records with an empty label become unlabeled entries.
pub fn ingest_pool(
    path: impl AsRef<Path>,
    format: Format,
    schema: &LabelSchema,
) -> Result<Ingested<PoolEntry>, CorpusError> {
    read_pool(File::open(path)?, format, schema)
}

#[derive(Serialize)]
struct JsonOut<'a> {
    id: &'a str,
    text: &'a str,
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    language: Option<&'a str>,
}

/// Writes entries in the ingest format. `None` labels are written empty.
pub fn write_entries<'a, W: Write>(
    writer: W,
    format: Format,
    schema: &LabelSchema,
    entries: impl IntoIterator<Item = (&'a Document, Option<usize>)>,
) -> Result<(), CorpusError> {
    let entries: Vec<_> = entries.into_iter().collect();
    let label_name = |label: Option<usize>| -> Result<&str, CorpusError> {
        match label {
            None => Ok(""),
            Some(l) => schema.name(l).ok_or(CorpusError::LabelOutOfRange {
                label: l,
                k: schema.len(),
            }),
        }
    };
    match format {
        Format::Jsonl => {
            let mut w = BufWriter::new(writer);
            for (doc, label) in entries {
                let rec = JsonOut {
                    id: &doc.id,
                    text: &doc.text,
                    label: label_name(label)?,
                    language: doc.language.as_deref(),
                };
                serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Format::Csv | Format::Tsv => {
            let with_lang = entries.iter().any(|(d, _)| d.language.is_some());
            let mut w = csv::WriterBuilder::new()
                .delimiter(format.delimiter())
                .from_writer(writer);
            let csv_err = |e: csv::Error| CorpusError::Io(e.into());
            if with_lang {
                w.write_record(["id", "text", "label", "language"]).map_err(csv_err)?;
            } else {
                w.write_record(["id", "text", "label"]).map_err(csv_err)?;
            }
            for (doc, label) in entries {
                let name = label_name(label)?;
                if with_lang {
                    let lang = doc.language.as_deref().unwrap_or("");
                    w.write_record([doc.id.as_str(), doc.text.as_str(), name, lang])
                        .map_err(csv_err)?;
                } else {
                    w.write_record([doc.id.as_str(), doc.text.as_str(), name])
                        .map_err(csv_err)?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes a labeled corpus in the same schema `ingest` reads.
pub fn export<W: Write>(
    writer: W,
    format: Format,
    schema: &LabelSchema,
    docs: &[LabeledDocument],
) -> Result<(), CorpusError> {
    write_entries(
        writer,
        format,
        schema,
        docs.iter().map(|d| (&d.doc, Some(d.label))),
    )
}

pub fn export_to_path(
    path: impl AsRef<Path>,
    format: Format,
    schema: &LabelSchema,
    docs: &[LabeledDocument],
) -> Result<(), CorpusError> {
    export(File::create(path)?, format, schema, docs)
}

/// Per-class counts of `docs`.
///
/// Labels must be valid for `schema`; this holds for anything produced by
/// [`ingest`]. Out-of-range labels panic.
pub fn distribution(docs: &[LabeledDocument], schema: &LabelSchema) -> ClassDistribution {
    let mut counts = vec![0; schema.len()];
    for d in docs {
        counts[d.label] += 1;
    }
    ClassDistribution {
        counts,
        total: docs.len(),
    }
}

/// Splits `docs` per class: `floor(fraction * class_count)` members of each
/// class go to the first half, chosen by a seeded shuffle. Both halves keep
/// the input order.
pub fn stratified_split(
    docs: &[LabeledDocument],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledDocument>, Vec<LabeledDocument>), CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        by_class.entry(d.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; docs.len()];
    for members in by_class.values_mut() {
        let take = (fraction * members.len() as f64).floor() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_train[i] = true;
        }
    }
    let (train, held): (Vec<_>, Vec<_>) = docs
        .iter()
        .zip(in_train)
        .partition(|(_, train)| *train);
    Ok((
        train.into_iter().map(|(d, _)| d.clone()).collect(),
        held.into_iter().map(|(d, _)| d.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, label: usize) -> LabeledDocument {
        LabeledDocument::new(Document::new(id, text), label)
    }

    #[test]
    fn schema_rejects_duplicates_and_short_lists() {
        assert!(LabelSchema::new(["a"]).is_err());
        assert!(LabelSchema::new(["a", "a"]).is_err());
        assert!(LabelSchema::new(["a", ""]).is_err());
        assert_eq!(LabelSchema::hope().len(), 4);
        assert_eq!(LabelSchema::hope().index_of("  Realistic Hope "), Some(2));
        assert_eq!(LabelSchema::hope().index_of("realistic hope"), None);
    }

    #[test]
    fn empty_file_with_header() {
        let got = read_labeled("id,text,label\n".as_bytes(), Format::Csv, &LabelSchema::hope())
            .unwrap();
        assert!(got.records.is_empty());
        let dist = distribution(&got.records, &LabelSchema::hope());
        assert_eq!(dist.counts, vec![0, 0, 0, 0]);
        assert_eq!(dist.total, 0);
        for fmt in [Format::Csv, Format::Tsv, Format::Jsonl] {
            let got = read_labeled("".as_bytes(), fmt, &LabelSchema::hope()).unwrap();
            assert!(got.records.is_empty());
        }
    }

    #[test]
    fn unknown_label_names_record() {
        let data = "id,text,label\nr1,hi,Not Hope\nr2,yo,Hopeful\n";
        match read_labeled(data.as_bytes(), Format::Csv, &LabelSchema::hope()) {
            Err(CorpusError::UnknownLabel { id, label }) => {
                assert_eq!(id, "r2");
                assert_eq!(label, "Hopeful");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_missing_column() {
        let dup = "id,text,label\na,x,Not Hope\na,y,Not Hope\n";
        assert!(matches!(
            read_labeled(dup.as_bytes(), Format::Csv, &LabelSchema::hope()),
            Err(CorpusError::DuplicateId(id)) if id == "a"
        ));
        let missing = "id,body,label\na,x,Not Hope\n";
        assert!(matches!(
            read_labeled(missing.as_bytes(), Format::Csv, &LabelSchema::hope()),
            Err(CorpusError::MissingColumn(c)) if c == "text"
        ));
        let jsonl = "{\"id\":\"a\",\"label\":\"Not Hope\"}\n";
        assert!(matches!(
            read_labeled(jsonl.as_bytes(), Format::Jsonl, &LabelSchema::hope()),
            Err(CorpusError::MissingColumn(c)) if c == "text"
        ));
    }

    #[test]
    fn malformed_rows_report_line() {
        let data = "id,text,label\na,x,Not Hope\nb,y\n";
        match read_labeled(data.as_bytes(), Format::Csv, &LabelSchema::hope()) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let jsonl = "{\"id\":\"a\",\"text\":\"x\",\"label\":\"Not Hope\"}\n{oops\n";
        match read_labeled(jsonl.as_bytes(), Format::Jsonl, &LabelSchema::hope()) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pools_accept_empty_labels() {
        let data = "id\ttext\tlabel\nu1\tsome text\t\nu2\tmore\tNot Hope\n";
        let got = read_pool(data.as_bytes(), Format::Tsv, &LabelSchema::hope()).unwrap();
        assert_eq!(got.records[0].label, None);
        assert_eq!(got.records[1].label, Some(0));
        assert!(read_labeled(data.as_bytes(), Format::Tsv, &LabelSchema::hope()).is_err());
    }

    #[test]
    fn empty_text_is_counted_not_dropped() {
        let data = "{\"id\":\"a\",\"text\":\"\",\"label\":\"Not Hope\"}\n{\"id\":1,\"text\":\"ok\",\"label\":\"Realistic Hope\",\"language\":\"en\"}\n";
        let got = read_labeled(data.as_bytes(), Format::Jsonl, &LabelSchema::hope()).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.empty_text, 1);
        assert_eq!(got.records[1].doc.id, "1");
        assert_eq!(got.records[1].doc.language.as_deref(), Some("en"));
    }

    #[test]
    fn distribution_small_cases() {
        let schema = LabelSchema::hope();
        assert_eq!(distribution(&[doc("a", "t", 2)], &schema).counts, vec![0, 0, 1, 0]);
        let dist = distribution(&[doc("a", "same", 0), doc("b", "same", 3)], &schema);
        assert_eq!(dist.counts, vec![1, 0, 0, 1]);
        assert_eq!(dist.total, 2);
    }

    #[test]
    fn split_floor_arithmetic() {
        let mut docs = Vec::new();
        for (label, n) in [50, 30, 10, 10].into_iter().enumerate() {
            for i in 0..n {
                docs.push(doc(&format!("{label}-{i}"), "x", label));
            }
        }
        for seed in [0, 1, 99] {
            let (train, held) = stratified_split(&docs, 0.8, seed).unwrap();
            let schema = LabelSchema::hope();
            assert_eq!(distribution(&train, &schema).counts, vec![40, 24, 8, 8]);
            assert_eq!(distribution(&held, &schema).counts, vec![10, 6, 2, 2]);
        }
        let (a, _) = stratified_split(&docs, 0.8, 7).unwrap();
        let (b, _) = stratified_split(&docs, 0.8, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_half_of_two() {
        let docs = vec![doc("a", "x", 1), doc("b", "y", 1)];
        let (train, held) = stratified_split(&docs, 0.5, 3).unwrap();
        assert_eq!((train.len(), held.len()), (1, 1));
        assert!(matches!(stratified_split(&[], 0.5, 0), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            stratified_split(&docs, 1.0, 0),
            Err(CorpusError::InvalidFraction(_))
        ));
    }

    #[test]
    fn distribution_report_json_shape() {
        let schema = LabelSchema::new(["a", "b"]).unwrap();
        let dist = distribution(&[doc("x", "t", 1)], &schema);
        let json = serde_json::to_string(&DistributionReport::new(&schema, &dist)).unwrap();
        assert_eq!(json, r#"{"schema":["a","b"],"counts":[0,1],"total":1}"#);
    }
}
