//! Confusion matrices, per-class precision/recall/F1, and macro, micro and
//! support-weighted aggregates for single-label multiclass evaluation.
//!
//! Undefined ratios (0/0) are reported as 0 and counted in
//! [`EvaluationReport::undefined_classes`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("gold and predicted lengths differ ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("confusion matrix has no samples")]
    EmptyMatrix,
}

/// `counts[i][j]` = documents of gold class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(MetricsError::LengthMismatch {
                gold: k,
                pred: row.len(),
            });
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, gold: usize, pred: usize) -> Result<(), MetricsError> {
        let k = self.num_classes();
        for label in [gold, pred] {
            if label >= k {
                return Err(MetricsError::LabelOutOfRange { label, k });
            }
        }
        self.counts[gold][pred] += 1;
        Ok(())
    }

    /// CSV with a header row of predicted class names and one row per gold
    /// class.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("gold\\pred");
        for n in names {
            out.push(',');
            out.push_str(&csv_field(n));
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(&csv_field(name));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn confusion(gold: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&g, &p) in gold.iter().zip(pred) {
        cm.add(g, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScores>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub total: u64,
    /// Classes where precision or recall was 0/0 and reported as 0.
    pub undefined_classes: usize,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<EvaluationReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let k = cm.num_classes();
    let mut per_class = Vec::with_capacity(k);
    let mut undefined_classes = 0;
    for c in 0..k {
        let tp = cm.get(c, c);
        let predicted: u64 = (0..k).map(|g| cm.get(g, c)).sum();
        let support: u64 = cm.rows()[c].iter().sum();
        let (precision, p_undef) = ratio(tp, predicted);
        let (recall, r_undef) = ratio(tp, support);
        if p_undef || r_undef {
            undefined_classes += 1;
        }
        per_class.push(ClassScores {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support,
        });
    }
    let kf = k as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|s| s.precision).sum::<f64>() / kf,
        recall: per_class.iter().map(|s| s.recall).sum::<f64>() / kf,
        f1: per_class.iter().map(|s| s.f1).sum::<f64>() / kf,
    };
    let tf = total as f64;
    let weighted = |f: fn(&ClassScores) -> f64| {
        per_class.iter().map(|s| f(s) * s.support as f64).sum::<f64>() / tf
    };
    let weighted_avg = Averages {
        precision: weighted(|s| s.precision),
        recall: weighted(|s| s.recall),
        f1: weighted(|s| s.f1),
    };
    let accuracy = cm.trace() as f64 / tf;
    Ok(EvaluationReport {
        version: 1,
        confusion: cm.clone(),
        per_class,
        macro_avg,
        // each document contributes one prediction, so pooled precision,
        // recall and F1 all reduce to accuracy
        micro_avg: Averages {
            precision: accuracy,
            recall: accuracy,
            f1: accuracy,
        },
        weighted_avg,
        accuracy,
        total,
        undefined_classes,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable classification report.
    pub fn to_text(&self, names: &[String]) -> String {
        let width = names
            .iter()
            .map(|n| n.chars().count())
            .chain([12])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        );
        for (name, s) in names.iter().zip(&self.per_class) {
            let _ = writeln!(
                out,
                "{:>width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}",
                name, s.precision, s.recall, s.f1, s.support
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>width$}  {:>9}  {:>9}  {:>9.4}  {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        );
        for (label, avg) in [
            ("macro avg", &self.macro_avg),
            ("micro avg", &self.micro_avg),
            ("weighted avg", &self.weighted_avg),
        ] {
            let _ = writeln!(
                out,
                "{:>width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}",
                label, avg.precision, avg.recall, avg.f1, self.total
            );
        }
        out
    }
}

/// One row of a run comparison. `precision`, `recall` and `f1` are the
/// support-weighted aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_HEADER: &str = "run,precision,recall,f1,accuracy,macro_f1,micro_f1";

pub fn compare_runs<S: AsRef<str>>(reports: &[(S, &EvaluationReport)]) -> ComparisonTable {
    ComparisonTable {
        rows: reports
            .iter()
            .map(|(name, r)| ComparisonRow {
                run: name.as_ref().to_string(),
                precision: r.weighted_avg.precision,
                recall: r.weighted_avg.recall,
                f1: r.weighted_avg.f1,
                accuracy: r.accuracy,
                macro_f1: r.macro_avg.f1,
                micro_f1: r.micro_avg.f1,
            })
            .collect(),
    }
}

impl ComparisonTable {
    /// Values are written with Rust's shortest round-trip float formatting,
    /// so parsing them back yields the exact report fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&r.run),
                r.precision,
                r.recall,
                r.f1,
                r.accuracy,
                r.macro_f1,
                r.micro_f1
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 1], &[0, 1], 2).unwrap();
        assert_eq!(cm.rows(), &[vec![1, 0], vec![0, 1]]);
        let cm = confusion(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.rows(), &[vec![0, 2], vec![0, 0]]);
        assert_eq!(
            confusion(&[0], &[0, 1], 2),
            Err(MetricsError::LengthMismatch { gold: 1, pred: 2 })
        );
        assert_eq!(
            confusion(&[0, 2], &[0, 1], 2),
            Err(MetricsError::LabelOutOfRange { label: 2, k: 2 })
        );
    }

    #[test]
    fn two_class_hand_values() {
        let cm = ConfusionMatrix::from_counts(vec![vec![50, 10], vec![5, 35]]).unwrap();
        let r = report(&cm).unwrap();
        assert_abs_diff_eq!(r.accuracy, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class[0].precision, 50.0 / 55.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class[0].recall, 50.0 / 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class[0].f1, 0.8696, epsilon = 5e-5);
        assert_abs_diff_eq!(r.per_class[1].precision, 0.7778, epsilon = 5e-5);
        assert_abs_diff_eq!(r.per_class[1].recall, 0.875, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class[1].f1, 0.8235, epsilon = 5e-5);
        assert_abs_diff_eq!(r.macro_avg.f1, 0.8465, epsilon = 5e-5);
        assert_eq!(r.micro_avg.f1, r.accuracy);
        assert_eq!(r.undefined_classes, 0);
    }

    #[test]
    fn perfect_diagonal() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        let r = report(&cm).unwrap();
        for s in &r.per_class {
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.macro_avg.f1, 1.0);
        assert_eq!(r.weighted_avg.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn zero_support_class_counts_as_zero() {
        let cm = confusion(&[0, 1, 0, 1], &[0, 1, 0, 1], 3).unwrap();
        let r = report(&cm).unwrap();
        assert_eq!(r.per_class[2].f1, 0.0);
        assert_eq!(r.per_class[2].support, 0);
        assert_eq!(r.undefined_classes, 1);
        assert_abs_diff_eq!(r.macro_avg.f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.weighted_avg.f1, 1.0);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert_eq!(report(&ConfusionMatrix::new(3)), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn comparison_rows_pass_through() {
        let a = report(&confusion(&[0, 1, 1], &[0, 1, 0], 2).unwrap()).unwrap();
        let b = report(&confusion(&[0, 1], &[0, 1], 2).unwrap()).unwrap();
        let table = compare_runs(&[("lr", &a), ("other", &b)]);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].run, "lr");
        assert_eq!(table.rows[0].macro_f1, a.macro_avg.f1);
        assert_eq!(table.rows[0].f1, a.weighted_avg.f1);
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), COMPARISON_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[5].parse::<f64>().unwrap(), a.macro_avg.f1);
        assert_eq!(compare_runs(&[("solo", &b)]).rows.len(), 1);
    }

    #[test]
    fn confusion_csv_layout() {
        let cm = confusion(&[0, 1], &[1, 1], 2).unwrap();
        let names = vec!["Not Hope".to_string(), "a,b".to_string()];
        assert_eq!(cm.to_csv(&names), "gold\\pred,Not Hope,\"a,b\"\nNot Hope,0,1\n\"a,b\",0,1\n");
    }
}
