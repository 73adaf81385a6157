use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use altc_core::active_learning::Strategy;
use altc_core::artifact::Classifier;
use altc_core::corpus::{self, DistributionReport};
use altc_core::linear_model::{self, fit_with_holdout};
use altc_core::metrics;
use altc_core::synth::{self, SyntheticConfig};
use altc_core::{AcquisitionConfig, Format, LabelSchema, LabeledDocument, PrepConfig, Vectorizer};
use serde_json::json;

use crate::al_sim::{self, SimPlan};
use crate::args::{
    resolve_format, AlSimCmd, Cli, Command, CorpusArgs, EvalCmd, ServeCmd, StrategyChoice,
    SynthCmd, SynthKind, TrainCmd,
};
use crate::error::CliError;
use crate::service;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Ingest(args) => ingest(&data_dir, &args),
        Command::Stats { corpus, json } => stats(&corpus, json),
        Command::Train(cmd) => train(&data_dir, &cmd),
        Command::Eval(cmd) => eval(&data_dir, &cmd),
        Command::AlSim(cmd) => al_sim(&data_dir, &cmd),
        Command::Synth(cmd) => synth(&cmd),
        Command::Serve(cmd) => serve(&data_dir, cmd),
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Run metadata kept apart from the reproducible artifacts.
fn write_meta(dir: &Path, command: &str, extra: serde_json::Value) -> Result<(), CliError> {
    let ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix_ms": ms,
        "args": extra,
    });
    write_file(
        &dir.join(format!("{command}.meta.json")),
        serde_json::to_string_pretty(&meta)? + "\n",
    )
}

fn read_labeled(args: &CorpusArgs, schema: &LabelSchema) -> Result<Vec<LabeledDocument>, CliError> {
    read_labeled_path(&args.input, args.format, schema)
}

fn read_labeled_path(
    path: &Path,
    format: Option<Format>,
    schema: &LabelSchema,
) -> Result<Vec<LabeledDocument>, CliError> {
    let format = resolve_format(format, path)?;
    let got = corpus::ingest(path, format, schema).map_err(|e| match e {
        corpus::CorpusError::Io(io) => CliError::io(path, io),
        other => CliError::Corpus(other),
    })?;
    if got.empty_text > 0 {
        eprintln!("note: {} record(s) with empty text", got.empty_text);
    }
    Ok(got.records)
}

fn ingest(data_dir: &Path, args: &CorpusArgs) -> Result<(), CliError> {
    let schema = args.schema()?;
    let docs = read_labeled(args, &schema)?;
    ensure_dir(data_dir)?;
    let out = data_dir.join("corpus.jsonl");
    let mut buf = Vec::new();
    corpus::export(&mut buf, Format::Jsonl, &schema, &docs)?;
    write_file(&out, buf)?;
    let report = DistributionReport::new(&schema, &corpus::distribution(&docs, &schema));
    write_file(
        &data_dir.join("distribution.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    print!("{}", report.to_table());
    Ok(())
}

fn stats(args: &CorpusArgs, as_json: bool) -> Result<(), CliError> {
    let schema = args.schema()?;
    let docs = read_labeled(args, &schema)?;
    let report = DistributionReport::new(&schema, &corpus::distribution(&docs, &schema));
    if as_json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn train(data_dir: &Path, cmd: &TrainCmd) -> Result<(), CliError> {
    let schema = cmd.corpus.schema()?;
    let docs = read_labeled(&cmd.corpus, &schema)?;
    if docs.is_empty() {
        return Err(CliError::Corpus(corpus::CorpusError::EmptyCorpus));
    }
    let (train_docs, holdout_docs) = if cmd.holdout > 0.0 {
        corpus::stratified_split(&docs, 1.0 - cmd.holdout, cmd.seed)?
    } else {
        (docs, Vec::new())
    };
    let texts: Vec<&str> = train_docs.iter().map(|d| d.doc.text.as_str()).collect();
    let vectorizer = Vectorizer::fit(&texts, PrepConfig::default(), cmd.features.config())?;
    let featurize = |set: &[LabeledDocument]| {
        let texts: Vec<&str> = set.iter().map(|d| d.doc.text.as_str()).collect();
        vectorizer
            .transform_many(&texts)
            .into_iter()
            .zip(set.iter().map(|d| d.label))
            .collect::<Vec<_>>()
    };
    let train_set = featurize(&train_docs);
    let holdout_set = featurize(&holdout_docs);
    let cfg = cmd.optim.config(cmd.batch_size, cmd.seed);
    let labels: Vec<usize> = train_set.iter().map(|(_, l)| *l).collect();
    let cw = linear_model::training_weights(&labels, schema.len(), &cfg)?;
    let holdout = (!holdout_set.is_empty()).then_some(holdout_set.as_slice());
    let (model, history) = fit_with_holdout(&train_set, holdout, &cfg, &cw, None)?;

    let gold: Vec<usize> = labels.clone();
    let pred = train_set
        .iter()
        .map(|(x, _)| model.predict_label(x))
        .collect::<Result<Vec<_>, _>>()?;
    let train_report = metrics::report(&metrics::confusion(&gold, &pred, schema.len())?)?;

    ensure_dir(data_dir)?;
    let classifier = Classifier::new(schema, vectorizer, model, cfg)?;
    let path = classifier.save(data_dir, &cmd.name)?;
    write_file(
        &data_dir.join(format!("{}.loss.json", cmd.name)),
        serde_json::to_string(&history)? + "\n",
    )?;
    write_meta(
        data_dir,
        "train",
        json!({ "input": cmd.corpus.input, "seed": cmd.seed, "holdout": cmd.holdout }),
    )?;
    println!(
        "trained on {} documents ({} epochs), train accuracy {:.4}, wrote {}",
        train_set.len(),
        history.train.len(),
        train_report.accuracy,
        path.display()
    );
    Ok(())
}

fn eval(data_dir: &Path, cmd: &EvalCmd) -> Result<(), CliError> {
    let model_path = cmd
        .model
        .clone()
        .unwrap_or_else(|| data_dir.join("model.json"));
    let classifier = Classifier::load(&model_path)?;
    if let Some(list) = &cmd.corpus.schema {
        let requested = LabelSchema::parse_list(list)?;
        if requested != classifier.schema {
            return Err(CliError::SchemaMismatch {
                model: classifier.schema.names().to_vec(),
                corpus: requested.names().to_vec(),
            });
        }
    }
    let docs = read_labeled(&cmd.corpus, &classifier.schema)?;
    let texts: Vec<&str> = docs.iter().map(|d| d.doc.text.as_str()).collect();
    let features = classifier.vectorizer.transform_many(&texts);
    let pred = features
        .iter()
        .map(|x| classifier.model.predict_label(x))
        .collect::<Result<Vec<_>, _>>()?;
    let gold: Vec<usize> = docs.iter().map(|d| d.label).collect();
    let report = metrics::report(&metrics::confusion(&gold, &pred, classifier.schema.len())?)?;
    ensure_dir(data_dir)?;
    write_file(&data_dir.join("report.json"), report.to_json() + "\n")?;
    write_file(
        &data_dir.join("confusion.csv"),
        report.confusion.to_csv(classifier.schema.names()),
    )?;
    print!("{}", report.to_text(classifier.schema.names()));
    Ok(())
}

fn strategies(choice: StrategyChoice) -> Vec<Strategy> {
    match choice {
        StrategyChoice::Entropy => vec![Strategy::Entropy],
        StrategyChoice::Random => vec![Strategy::Random],
        StrategyChoice::Both => vec![Strategy::Entropy, Strategy::Random],
    }
}

/// Seed of the train/evaluation split when no evaluation file is given.
/// Fixed so every run of a simulation sees the same evaluation set.
const EVAL_SPLIT_SEED: u64 = 0;

fn al_sim(data_dir: &Path, cmd: &AlSimCmd) -> Result<(), CliError> {
    let schema = cmd.corpus.schema()?;
    let docs = read_labeled(&cmd.corpus, &schema)?;
    let (train_docs, eval_docs) = match &cmd.eval {
        Some(path) => (docs, read_labeled_path(path, cmd.corpus.format, &schema)?),
        None => corpus::stratified_split(&docs, 1.0 - cmd.eval_fraction, EVAL_SPLIT_SEED)?,
    };
    // the vectorizer is unsupervised, so it sees the whole training pool
    let texts: Vec<&str> = train_docs.iter().map(|d| d.doc.text.as_str()).collect();
    let vectorizer = Vectorizer::fit(&texts, PrepConfig::default(), cmd.features.config())?;
    let seeds = if cmd.seeds.is_empty() {
        vec![cmd.seed]
    } else {
        cmd.seeds.clone()
    };
    let plan = SimPlan {
        num_classes: schema.len(),
        acquisition: AcquisitionConfig {
            batch_size: cmd.batch_size,
            max_iterations: cmd.iterations,
            seed_size: cmd.seed_size,
            entropy_mode: cmd.entropy.into(),
            warm_start: cmd.warm_start,
            ..AcquisitionConfig::default()
        },
        train: cmd.optim.config(cmd.train_batch_size, 0),
        strategies: strategies(cmd.strategy),
        seeds,
    };
    let runs = al_sim::simulate_all(&vectorizer, &train_docs, &eval_docs, &plan)?;

    ensure_dir(data_dir)?;
    for run in &runs {
        write_file(&data_dir.join(run.history_file()), run.history_jsonl())?;
    }
    write_file(
        &data_dir.join("comparison.csv"),
        al_sim::comparison_csv(&runs, cmd.target_f1),
    )?;
    write_file(&data_dir.join("curves.csv"), al_sim::curves_csv(&runs))?;
    let summary = al_sim::summarize(&runs, &plan.strategies, cmd.target_f1);
    write_file(
        &data_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_meta(
        data_dir,
        "al_sim",
        json!({ "input": cmd.corpus.input, "seeds": plan.seeds }),
    )?;
    for s in &summary.strategies {
        let reach = s
            .median_labels_to_target
            .map_or("not reached".to_string(), |m| format!("{m}"));
        println!(
            "{:<8} runs {:>3}  median labels to macro-F1 {}: {:<12}  median final macro-F1 {:.4}",
            s.strategy, s.runs, cmd.target_f1, reach, s.median_final_macro_f1
        );
    }
    Ok(())
}

fn synth(cmd: &SynthCmd) -> Result<(), CliError> {
    let schema = match &cmd.schema {
        Some(list) => LabelSchema::parse_list(list)?,
        None => LabelSchema::hope(),
    };
    let mut cfg = match cmd.kind {
        SynthKind::Separable => SyntheticConfig::separable(cmd.per_class, cmd.seed),
        SynthKind::Imbalanced => SyntheticConfig::imbalanced(&cmd.ratio, cmd.total, cmd.seed),
    };
    if cfg.class_counts.len() != schema.len() {
        return Err(CliError::Usage(format!(
            "{} classes generated but the schema has {}",
            cfg.class_counts.len(),
            schema.len()
        )));
    }
    if let Some(p) = &cmd.prefix {
        cfg.id_prefix = p.clone();
    }
    let format = resolve_format(cmd.format, &cmd.output)?;
    let docs = synth::generate(&cfg);
    let mut buf = Vec::new();
    corpus::export(&mut buf, format, &schema, &docs)?;
    write_file(&cmd.output, buf)?;
    println!("wrote {} documents to {}", docs.len(), cmd.output.display());
    Ok(())
}

fn serve(data_dir: &Path, cmd: ServeCmd) -> Result<(), CliError> {
    let session = service::open_session(data_dir, &cmd)?;
    let addr = format!("{}:{}", cmd.host, cmd.port);
    let ui: Option<PathBuf> = cmd.ui_dir.clone();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Session(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Session(format!("cannot bind {addr}: {e}")))?;
        eprintln!("serving on http://{addr}");
        let app = service::router(session, ui.as_deref());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Session(e.to_string()))
    })
}
