//! Simulated active-learning runs and their summary tables.

use std::fmt::Write as _;

use altc_core::active_learning::{
    labels_to_reach, stratified_seed, write_history_jsonl, ActiveLearner, ActiveLearningState,
    IterationRecord, SimulatedOracle, Strategy,
};
use altc_core::metrics::{compare_runs, EvaluationReport};
use altc_core::{AcquisitionConfig, LabeledDocument, TrainConfig, Vectorizer};
use serde::Serialize;

use crate::error::CliError;

/// Everything shared by the runs of one simulation.
#[derive(Debug, Clone)]
pub struct SimPlan {
    pub num_classes: usize,
    pub acquisition: AcquisitionConfig,
    pub train: TrainConfig,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub history: Vec<IterationRecord>,
    /// Report of the final model on the evaluation set.
    pub report: EvaluationReport,
}

impl RunResult {
    pub fn name(&self) -> String {
        format!("{}_seed{}", self.strategy, self.seed)
    }

    pub fn history_file(&self) -> String {
        format!("history_{}.jsonl", self.name())
    }

    pub fn history_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_history_jsonl(&mut buf, &self.history).expect("writing to memory");
        buf
    }
}

/// One run. The seed set depends only on `seed`, so runs that share a seed
/// start from the same labeled documents whatever the strategy.
pub fn simulate(
    vectorizer: &Vectorizer,
    train_docs: &[LabeledDocument],
    eval_docs: &[LabeledDocument],
    plan: &SimPlan,
    strategy: Strategy,
    seed: u64,
) -> Result<RunResult, CliError> {
    let acquisition = AcquisitionConfig {
        strategy,
        seed,
        ..plan.acquisition.clone()
    };
    let train = TrainConfig {
        seed,
        ..plan.train.clone()
    };
    acquisition.validate(plan.num_classes)?;
    let (seed_set, pool) =
        stratified_seed(train_docs, acquisition.seed_size, plan.num_classes, seed)?;
    let mut oracle = SimulatedOracle::from_documents(&pool);
    let state = ActiveLearningState::new(seed_set, pool.into_iter().map(|d| d.doc).collect())?;
    let mut learner = ActiveLearner::new(
        plan.num_classes,
        vectorizer.clone(),
        state,
        eval_docs,
        acquisition,
        train,
    )?;
    learner.run_loop(&mut oracle)?;
    let report = learner.evaluate()?;
    let (_, state) = learner.into_parts();
    Ok(RunResult {
        strategy,
        seed,
        history: state.history,
        report,
    })
}

pub fn simulate_all(
    vectorizer: &Vectorizer,
    train_docs: &[LabeledDocument],
    eval_docs: &[LabeledDocument],
    plan: &SimPlan,
) -> Result<Vec<RunResult>, CliError> {
    let mut out = Vec::new();
    for &strategy in &plan.strategies {
        for &seed in &plan.seeds {
            out.push(simulate(vectorizer, train_docs, eval_docs, plan, strategy, seed)?);
        }
    }
    Ok(out)
}

/// Median with missing values ranked above every present one; `None` when
/// the middle falls on a missing value.
pub fn median_labels(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    m.is_finite().then_some(m)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Metric columns of every run plus the labeled-set size at which it first
/// reached `target` macro-F1 (empty if never).
pub fn comparison_csv(runs: &[RunResult], target: f64) -> String {
    let names: Vec<String> = runs.iter().map(RunResult::name).collect();
    let pairs: Vec<(&str, &EvaluationReport)> = names
        .iter()
        .map(String::as_str)
        .zip(runs.iter().map(|r| &r.report))
        .collect();
    let table = compare_runs(&pairs).to_csv();
    let mut out = String::new();
    for (i, line) in table.lines().enumerate() {
        let extra = if i == 0 {
            "labels_to_target".to_string()
        } else {
            labels_to_reach(&runs[i - 1].history, target)
                .map(|n| n.to_string())
                .unwrap_or_default()
        };
        let _ = writeln!(out, "{line},{extra}");
    }
    out
}

/// Long-format learning curves: one row per (run, iteration).
pub fn curves_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("strategy,seed,t,labeled,macro_f1,micro_f1,accuracy,mean_train_loss\n");
    for run in runs {
        for r in &run.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                run.strategy,
                run.seed,
                r.t,
                r.labeled,
                r.macro_f1,
                r.micro_f1,
                r.accuracy,
                r.mean_train_loss
            );
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    pub median_labels_to_target: Option<f64>,
    pub median_final_macro_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub target_f1: f64,
    pub strategies: Vec<StrategySummary>,
}

pub fn summarize(runs: &[RunResult], strategies: &[Strategy], target: f64) -> SimSummary {
    SimSummary {
        target_f1: target,
        strategies: strategies
            .iter()
            .map(|&s| {
                let mine: Vec<&RunResult> = runs.iter().filter(|r| r.strategy == s).collect();
                let reach: Vec<Option<usize>> =
                    mine.iter().map(|r| labels_to_reach(&r.history, target)).collect();
                let finals: Vec<f64> = mine.iter().map(|r| r.report.macro_avg.f1).collect();
                StrategySummary {
                    strategy: s.to_string(),
                    runs: mine.len(),
                    median_labels_to_target: median_labels(&reach),
                    median_final_macro_f1: median(&finals),
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median_labels(&[Some(3), None, Some(1)]), Some(3.0));
        assert_eq!(median_labels(&[Some(3), Some(1)]), Some(2.0));
        assert_eq!(median_labels(&[None, Some(1)]), None);
        assert_eq!(median_labels(&[]), None);
        assert_eq!(median(&[0.3, 0.1, 0.2]), 0.2);
        assert_eq!(median(&[0.4, 0.2]), 0.30000000000000004);
    }
}
