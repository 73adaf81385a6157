use std::path::PathBuf;

use altc_core::active_learning::EntropyMode;
use altc_core::linear_model::TrainConfig;
use altc_core::tfidf::NgramRange;
use altc_core::{Format, LabelSchema, TfidfConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "altc", version, about = "Active-learning text classification toolkit")]
pub struct Cli {
    /// Root directory for written artifacts.
    #[arg(long, env = "ALTC_DATA_DIR", default_value = ".", global = true)]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a corpus, write it back as JSON lines plus its class distribution.
    Ingest(CorpusArgs),
    /// Print the class distribution of a corpus.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Fit the vectorizer and classifier on a labeled corpus.
    Train(TrainCmd),
    /// Score a saved model on a labeled corpus.
    Eval(EvalCmd),
    /// Simulate active learning with labels revealed from the corpus.
    AlSim(AlSimCmd),
    /// Write a synthetic labeled corpus.
    Synth(SynthCmd),
    /// Run the HTTP annotation service.
    Serve(ServeCmd),
}

#[derive(Debug, Args, Clone)]
pub struct CorpusArgs {
    pub input: PathBuf,
    /// csv, tsv or jsonl; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    /// Comma-separated class names, in index order.
    #[arg(long)]
    pub schema: Option<String>,
}

impl CorpusArgs {
    pub fn format(&self) -> Result<Format, CliError> {
        resolve_format(self.format, &self.input)
    }

    pub fn schema(&self) -> Result<LabelSchema, CliError> {
        match &self.schema {
            Some(list) => Ok(LabelSchema::parse_list(list)?),
            None => Ok(LabelSchema::hope()),
        }
    }
}

pub fn resolve_format(explicit: Option<Format>, path: &std::path::Path) -> Result<Format, CliError> {
    explicit.or_else(|| Format::from_path(path)).ok_or_else(|| {
        CliError::Usage(format!(
            "cannot tell the format of {}; pass --format",
            path.display()
        ))
    })
}

#[derive(Debug, Args, Clone)]
pub struct FeatureArgs {
    /// Drop terms seen in fewer documents.
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
    /// Keep only the most frequent terms.
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Add word bigrams.
    #[arg(long)]
    pub bigrams: bool,
    /// Use 1 + ln(tf) instead of raw counts.
    #[arg(long)]
    pub sublinear_tf: bool,
}

impl FeatureArgs {
    pub fn config(&self) -> TfidfConfig {
        TfidfConfig {
            min_df: self.min_df,
            max_vocab: self.max_vocab,
            sublinear_tf: self.sublinear_tf,
            ngrams: if self.bigrams {
                NgramRange::UnigramsAndBigrams
            } else {
                NgramRange::Unigrams
            },
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    /// Train with uniform instead of balanced class weights.
    #[arg(long)]
    pub no_class_weights: bool,
    /// Held-out epochs without improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
}

impl OptimArgs {
    pub fn config(&self, batch_size: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size,
            l2_penalty: self.l2,
            seed,
            early_stop_patience: self.patience,
            class_weighting: !self.no_class_weights,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Mini-batch size.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction held out (stratified) for early stopping; 0 trains on all.
    #[arg(long, default_value_t = 0.0)]
    pub holdout: f64,
    /// File stem for the model artifact.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model artifact; defaults to <data-dir>/model.json.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Entropy,
    Random,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyChoice {
    Categorical,
    BinarySum,
}

impl From<EntropyChoice> for EntropyMode {
    fn from(c: EntropyChoice) -> Self {
        match c {
            EntropyChoice::Categorical => EntropyMode::CategoricalNormalized,
            EntropyChoice::BinarySum => EntropyMode::BinarySum,
        }
    }
}

#[derive(Debug, Args)]
pub struct AlSimCmd {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Separate evaluation corpus; otherwise a stratified share of the input.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Share of the input held out for evaluation when --eval is absent.
    #[arg(long, default_value_t = 0.2)]
    pub eval_fraction: f64,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 20)]
    pub seed_size: usize,
    /// Documents acquired per round.
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    /// Acquisition rounds; runs until the pool is empty when omitted.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum, default_value_t = StrategyChoice::Both)]
    pub strategy: StrategyChoice,
    #[arg(long, value_enum, default_value_t = EntropyChoice::Categorical)]
    pub entropy: EntropyChoice,
    /// Seed for a single run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated seeds; overrides --seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Mini-batch size for retraining.
    #[arg(long, default_value_t = 64)]
    pub train_batch_size: usize,
    /// Continue from the previous round's model.
    #[arg(long)]
    pub warm_start: bool,
    /// Macro-F1 level for the labels-to-target column.
    #[arg(long, default_value_t = 0.8)]
    pub target_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Separable,
    Imbalanced,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthKind::Imbalanced)]
    pub kind: SynthKind,
    #[arg(long)]
    pub format: Option<Format>,
    /// Documents per class (separable).
    #[arg(long, default_value_t = 250)]
    pub per_class: usize,
    /// Total documents (imbalanced).
    #[arg(long, default_value_t = 4000)]
    pub total: usize,
    /// Class proportions (imbalanced).
    #[arg(long, value_delimiter = ',', default_value = "2245,1284,540,472")]
    pub ratio: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Document id prefix.
    #[arg(long)]
    pub prefix: Option<String>,
    #[arg(long)]
    pub schema: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    /// Pool file; records that carry a label form the initial labeled set.
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Labeled corpus for the learning curve; the labeled set is used otherwise.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum, default_value_t = StrategyChoice::Entropy)]
    pub strategy: StrategyChoice,
    #[arg(long, value_enum, default_value_t = EntropyChoice::Categorical)]
    pub entropy: EntropyChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub train_batch_size: usize,
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory with a built annotation UI (index.html) to serve at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}
