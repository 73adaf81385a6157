//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use altc_cli::al_sim::{self, SimPlan};
use altc_cli::args::Cli;
use altc_core::active_learning::{labels_to_reach, select_batch, uncertainty, EntropyMode, Strategy};
use altc_core::corpus::{self, ClassDistribution};
use altc_core::linear_model::{
    self, compute_class_weights, fit, loss_gradient, one_hot, regularized_loss, weighted_bce_loss,
    ClassWeights, Head, ModelError, OvrLinearModel, ProbabilitySource,
};
use altc_core::metrics::{confusion, report};
use altc_core::synth::{generate, SyntheticConfig};
use altc_core::{
    AcquisitionConfig, Document, Format, LabelSchema, PrepConfig, SparseVector, TfidfConfig,
    TrainConfig, Vectorizer,
};
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Two-sum compensated summation, exact to well below f64 rounding for the
/// short sums used here.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for v in values {
        let s = hi + v;
        let bp = s - hi;
        lo += (hi - (s - bp)) + (v - bp);
        hi = s;
    }
    hi + lo
}

fn entropy_oracle(p: &[f64]) -> f64 {
    let total = compensated_sum(p.iter().copied());
    -compensated_sum(p.iter().map(|&v| {
        let q = v / total;
        if q > 0.0 {
            q * q.ln()
        } else {
            0.0
        }
    }))
}

fn entropy_correctness() -> Outcome {
    let mode = EntropyMode::CategoricalNormalized;
    let uniform = uncertainty(&[0.25; 4], mode).unwrap();
    let onehot = uncertainty(&[0.0, 0.0, 1.0, 0.0], mode).unwrap();
    let p = [0.7, 0.1, 0.1, 0.1];
    let skewed = uncertainty(&p, mode).unwrap();
    let oracle = entropy_oracle(&p);
    let pass = (uniform - 4f64.ln()).abs() < 1e-9
        && onehot == 0.0
        && (skewed - oracle).abs() < 1e-6
        && (skewed - 0.940448).abs() < 1e-6;
    outcome(
        pass,
        format!("uniform {uniform:.12}, one-hot {onehot}, [0.7,0.1,0.1,0.1] {skewed:.9} (oracle {oracle:.9})"),
    )
}

fn random_model(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> OvrLinearModel {
    let heads = (0..k)
        .map(|_| Head {
            w: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            b: rng.gen_range(-1.0..1.0),
        })
        .collect();
    OvrLinearModel::from_heads(heads, dim).unwrap()
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=10);
        let model = random_model(&mut rng, k, dim);
        let dense: Vec<f64> = (0..dim)
            .map(|_| if rng.gen_bool(0.6) { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let x = SparseVector::from_dense(&dense);
        let y = one_hot(rng.gen_range(0..k), k);
        let cw = ClassWeights::new((0..k).map(|_| rng.gen_range(0.2..3.0)).collect()).unwrap();
        let l2 = rng.gen_range(0.0..0.1);
        let grad = loss_gradient(&model, &x, &y, &cw, l2).unwrap();
        let (mut sq_diff, mut sq_a, mut sq_n) = (0.0, 0.0, 0.0);
        for (j, g) in grad.iter().enumerate() {
            for i in 0..=dim {
                let at = |delta: f64| {
                    let mut m = model.clone();
                    let head = &mut m.heads_mut()[j];
                    if i == dim {
                        head.b += delta;
                    } else {
                        head.w[i] += delta;
                    }
                    regularized_loss(&m, &x, &y, &cw, l2, 1e-300).unwrap()
                };
                let numeric = (at(h) - at(-h)) / (2.0 * h);
                let analytic = if i == dim { g.b } else { g.w[i] };
                sq_diff += (analytic - numeric).powi(2);
                sq_a += analytic * analytic;
                sq_n += numeric * numeric;
            }
        }
        let rel = sq_diff.sqrt() / (sq_a.sqrt() + sq_n.sqrt()).max(1e-12);
        worst = worst.max(rel);
    }
    outcome(worst < 1e-5, format!("100 instances, worst relative error {worst:.3e} (< 1e-5)"))
}

fn loss_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=6);
        let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.001..0.999)).collect();
        let y = one_hot(rng.gen_range(0..k), k);
        let weighted = weighted_bce_loss(&p, &y, &ClassWeights::uniform(k), 1e-7).unwrap();
        let plain: f64 = p
            .iter()
            .zip(&y)
            .map(|(&p, &y)| if y == 1.0 { -p.ln() } else { -(1.0 - p).ln() })
            .sum();
        worst = worst.max((weighted - plain).abs());
    }
    outcome(worst < 1e-12, format!("1000 draws, max abs diff {worst:.3e} (< 1e-12)"))
}

struct FixedScores(std::collections::HashMap<String, Vec<f64>>);

impl ProbabilitySource for FixedScores {
    fn num_classes(&self) -> usize {
        4
    }

    fn probabilities(&self, doc: &Document, _: &SparseVector) -> Result<Vec<f64>, ModelError> {
        Ok(self.0[&doc.id].clone())
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| b.total_cmp(a));
    v.into_iter().sum()
}

fn batch_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let zero = SparseVector::zeros(1);
    let mode = EntropyMode::CategoricalNormalized;
    let mut cases = 0;
    for _ in 0..50 {
        let probs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.gen_range(1..=5) as f64 / 5.0).collect())
            .collect();
        for n in 1..=12usize {
            let pool: Vec<Document> = (0..n).map(|i| Document::new(format!("p{i:02}"), "")).collect();
            let source = FixedScores(
                pool.iter().map(|d| d.id.clone()).zip(probs.iter().cloned()).collect(),
            );
            let scores: Vec<f64> = probs[..n].iter().map(|p| uncertainty(p, mode).unwrap()).collect();
            let features = vec![&zero; n];
            for b in 1..=4usize {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let ids = select_batch(&source, &pool, &features, b, Strategy::Entropy, mode, &mut rng)
                    .unwrap();
                let got = sorted_sum(
                    ids.iter()
                        .map(|id| scores[id[1..].parse::<usize>().unwrap()])
                        .collect(),
                );
                let mut best = f64::NEG_INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize == b.min(n) {
                        let subset = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).collect();
                        best = best.max(sorted_sum(subset));
                    }
                }
                if got != best {
                    return outcome(false, format!("pool {n}, b {b}: selected {got} < optimum {best}"));
                }
                cases += 1;
            }
        }
    }
    outcome(true, format!("{cases} (score set, pool, b) cases match exhaustive enumeration exactly"))
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst: f64 = 0.0;
    let mut micro_exact = true;
    for _ in 0..200 {
        let k = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=1000);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = gold
            .iter()
            .map(|&g| if rng.gen_bool(0.5) { g } else { rng.gen_range(0..k) })
            .collect();
        let r = report(&confusion(&gold, &pred, k).unwrap()).unwrap();
        let mut diffs = Vec::new();
        let (mut sum_p, mut sum_r, mut sum_f) = (0.0, 0.0, 0.0);
        let (mut w_p, mut w_r, mut w_f) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = (0..n).filter(|&i| gold[i] == c && pred[i] == c).count() as f64;
            let pp = (0..n).filter(|&i| pred[i] == c).count() as f64;
            let sup = (0..n).filter(|&i| gold[i] == c).count() as f64;
            let p = if pp == 0.0 { 0.0 } else { tp / pp };
            let rc = if sup == 0.0 { 0.0 } else { tp / sup };
            let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            let s = &r.per_class[c];
            diffs.extend([s.precision - p, s.recall - rc, s.f1 - f, s.support as f64 - sup]);
            sum_p += p;
            sum_r += rc;
            sum_f += f;
            w_p += p * sup;
            w_r += rc * sup;
            w_f += f * sup;
        }
        let kf = k as f64;
        let nf = n as f64;
        let acc = (0..n).filter(|&i| gold[i] == pred[i]).count() as f64 / nf;
        diffs.extend([
            r.macro_avg.precision - sum_p / kf,
            r.macro_avg.recall - sum_r / kf,
            r.macro_avg.f1 - sum_f / kf,
            r.weighted_avg.precision - w_p / nf,
            r.weighted_avg.recall - w_r / nf,
            r.weighted_avg.f1 - w_f / nf,
            r.accuracy - acc,
            r.micro_avg.f1 - acc,
        ]);
        worst = diffs.iter().fold(worst, |m, d| m.max(d.abs()));
        micro_exact &= r.micro_avg.f1 == r.accuracy
            && r.micro_avg.precision == r.accuracy
            && r.micro_avg.recall == r.accuracy;
    }
    outcome(
        worst < 1e-12 && micro_exact,
        format!("200 samples, max deviation {worst:.3e} (< 1e-12), micro-F1 == accuracy: {micro_exact}"),
    )
}

fn class_weights() -> Outcome {
    let dist = ClassDistribution {
        counts: vec![2245, 1284, 540, 472],
        total: 4541,
    };
    let got = compute_class_weights(&dist).unwrap();
    let expected = [0.5057, 0.8842, 2.1023, 2.4051];
    let diffs: Vec<f64> = got.as_slice().iter().zip(expected).map(|(g, e)| (g - e).abs()).collect();
    let pass = diffs.iter().all(|d| *d <= 5e-5);
    outcome(
        pass,
        format!(
            "got [{}] vs expected {expected:?}, max |diff| {:.3e} (tolerance 5e-5)",
            got.as_slice().iter().map(|w| format!("{w:.6}")).collect::<Vec<_>>().join(", "),
            diffs.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn pipeline_sanity(work: &Path) -> Outcome {
    let schema = LabelSchema::hope();
    let path = work.join("separable.csv");
    corpus::export_to_path(&path, Format::Csv, &schema, &generate(&SyntheticConfig::separable(250, 7)))
        .unwrap();
    let docs = corpus::ingest(&path, Format::Csv, &schema).unwrap().records;
    let (train, held) = corpus::stratified_split(&docs, 0.8, 7).unwrap();
    let texts: Vec<&str> = train.iter().map(|d| d.doc.text.as_str()).collect();
    let vec = Vectorizer::fit(&texts, PrepConfig::default(), TfidfConfig::default()).unwrap();
    let feats = |set: &[altc_core::LabeledDocument]| {
        set.iter().map(|d| (vec.transform(&d.doc.text), d.label)).collect::<Vec<_>>()
    };
    let (tr, he) = (feats(&train), feats(&held));
    let cfg = TrainConfig::default();
    let labels: Vec<usize> = tr.iter().map(|(_, l)| *l).collect();
    let cw = linear_model::training_weights(&labels, 4, &cfg).unwrap();
    let (model, _) = fit(&tr, &cfg, &cw, None).unwrap();
    let score = |set: &[(SparseVector, usize)]| {
        let gold: Vec<usize> = set.iter().map(|(_, l)| *l).collect();
        let pred: Vec<usize> = set.iter().map(|(x, _)| model.predict_label(x).unwrap()).collect();
        report(&confusion(&gold, &pred, 4).unwrap()).unwrap()
    };
    let (train_acc, held_f1) = (score(&tr).accuracy, score(&he).macro_avg.f1);
    outcome(
        train_acc >= 0.99 && held_f1 >= 0.95,
        format!(
            "{} docs: train accuracy {train_acc:.4} (>= 0.99), held-out macro-F1 {held_f1:.4} (>= 0.95)",
            docs.len()
        ),
    )
}

fn al_benefit() -> Outcome {
    let ratio = [2245, 1284, 540, 472];
    let pool_docs = generate(&SyntheticConfig::imbalanced(&ratio, 4000, 1));
    let mut eval_cfg = SyntheticConfig::imbalanced(&ratio, 1000, 2);
    eval_cfg.id_prefix = "ev".into();
    let eval_docs = generate(&eval_cfg);
    let texts: Vec<&str> = pool_docs.iter().map(|d| d.doc.text.as_str()).collect();
    let vec = Vectorizer::fit(&texts, PrepConfig::default(), TfidfConfig::default()).unwrap();
    let target = 0.80;
    let plan = SimPlan {
        num_classes: 4,
        acquisition: AcquisitionConfig {
            batch_size: 50,
            max_iterations: Some(40),
            seed_size: 20,
            ..AcquisitionConfig::default()
        },
        train: TrainConfig {
            learning_rate: 2.0,
            ..TrainConfig::default()
        },
        strategies: vec![Strategy::Entropy, Strategy::Random],
        seeds: (0..10).collect(),
    };
    let runs = al_sim::simulate_all(&vec, &pool_docs, &eval_docs, &plan).unwrap();
    let pick = |s: Strategy| runs.iter().filter(move |r| r.strategy == s);
    let reach = |s: Strategy| pick(s).map(|r| labels_to_reach(&r.history, target)).collect::<Vec<_>>();
    let finals = |s: Strategy| pick(s).map(|r| r.report.macro_avg.f1).collect::<Vec<_>>();
    let (me, mr) = (
        al_sim::median_labels(&reach(Strategy::Entropy)),
        al_sim::median_labels(&reach(Strategy::Random)),
    );
    let (fe, fr) = (
        al_sim::median(&finals(Strategy::Entropy)),
        al_sim::median(&finals(Strategy::Random)),
    );
    let fewer = match (me, mr) {
        (Some(e), Some(r)) => e < r,
        (Some(_), None) => true,
        _ => false,
    };
    let diff = (fe - fr).abs();
    let show = |m: Option<f64>| m.map_or("never".into(), |v| v.to_string());
    outcome(
        fewer && diff < 0.02,
        format!(
            "median labels to macro-F1 {target}: entropy {} vs random {}; final macro-F1 {fe:.4} vs {fr:.4} (|diff| {diff:.4} < 0.02)",
            show(me),
            show(mr)
        ),
    )
}

/// Runs the command-line entry point in-process, exactly as `altc` would.
fn altc(args: &[&str]) {
    let cli = Cli::try_parse_from(std::iter::once("altc").chain(args.iter().copied()))
        .expect("valid arguments");
    altc_cli::run(cli).expect("command succeeds");
}

fn determinism(work: &Path) -> Outcome {
    let corpus = work.join("det.csv");
    altc(&["synth", corpus.to_str().unwrap(), "--total", "1200", "--seed", "4"]);
    let mut dirs = Vec::new();
    for i in 0..2 {
        let dir = work.join(format!("det{i}"));
        altc(&[
            "--data-dir", dir.to_str().unwrap(), "al-sim", corpus.to_str().unwrap(),
            "--seeds", "0,1", "--iterations", "5", "--batch-size", "20", "--lr", "2",
        ]);
        dirs.push(dir);
    }
    let mut files: Vec<String> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("history_"))
        .collect();
    files.sort();
    let identical = !files.is_empty()
        && files.iter().all(|f| {
            std::fs::read(dirs[0].join(f)).unwrap() == std::fs::read(dirs[1].join(f)).unwrap()
        });
    outcome(identical, format!("{} history files compared byte for byte", files.len()))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    type Check<'a> = (&'a str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("entropy correctness", Duration::from_secs(1), Box::new(entropy_correctness)),
        ("gradient check", Duration::from_secs(10), Box::new(gradient_check)),
        ("loss equivalence", Duration::MAX, Box::new(loss_equivalence)),
        ("batch optimality", Duration::MAX, Box::new(batch_optimality)),
        ("metrics oracle", Duration::MAX, Box::new(metrics_oracle)),
        ("class weights", Duration::MAX, Box::new(class_weights)),
        ("pipeline sanity", Duration::from_secs(60), Box::new(|| pipeline_sanity(work.path()))),
        ("active-learning benefit", Duration::from_secs(600), Box::new(al_benefit)),
        ("determinism", Duration::MAX, Box::new(|| determinism(work.path()))),
    ];
    let mut failed = 0;
    println!("acceptance criteria");
    for (name, limit, check) in &checks {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let limit_note = if *limit == Duration::MAX {
            String::new()
        } else {
            format!(", limit {}s", limit.as_secs())
        };
        println!(
            "{} {name}: {} [{:.2}s{limit_note}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
