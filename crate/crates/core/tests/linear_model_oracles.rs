use altc_core::corpus::{stratified_split, LabelSchema};
use altc_core::linear_model::{
    self, argmax, fit, loss_gradient, one_hot, regularized_loss, weighted_bce_loss, ClassWeights,
    Head, OvrLinearModel, TrainConfig,
};
use altc_core::metrics;
use altc_core::synth::{generate, SyntheticConfig};
use altc_core::{PrepConfig, SparseVector, TfidfConfig, Vectorizer};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, k: usize, dim: usize, scale: f64) -> OvrLinearModel {
    let heads = (0..k)
        .map(|_| Head {
            w: (0..dim).map(|_| rng.gen_range(-scale..scale)).collect(),
            b: rng.gen_range(-scale..scale),
        })
        .collect();
    OvrLinearModel::from_heads(heads, dim).unwrap()
}

fn random_sparse(rng: &mut ChaCha8Rng, dim: usize) -> SparseVector {
    let dense: Vec<f64> = (0..dim)
        .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    SparseVector::from_dense(&dense)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    let eps = 1e-300;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=8);
        let model = random_model(&mut rng, k, dim, 1.0);
        let x = random_sparse(&mut rng, dim);
        let y = one_hot(rng.gen_range(0..k), k);
        let cw = ClassWeights::new((0..k).map(|_| rng.gen_range(0.2..3.0)).collect()).unwrap();
        let l2 = rng.gen_range(0.0..0.1);
        let grad = loss_gradient(&model, &x, &y, &cw, l2).unwrap();

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for (j, g) in grad.iter().enumerate() {
            for i in 0..=dim {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    let head = &mut m.heads_mut()[j];
                    if i == dim {
                        head.b += delta;
                    } else {
                        head.w[i] += delta;
                    }
                    regularized_loss(&m, &x, &y, &cw, l2, eps).unwrap()
                };
                numeric.push((bump(h) - bump(-h)) / (2.0 * h));
                analytic.push(if i == dim { g.b } else { g.w[i] });
            }
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        worst = worst.max(diff / scale.max(1e-12));
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

fn unweighted_bce(p: &[f64], y: &[f64]) -> f64 {
    p.iter()
        .zip(y)
        .map(|(&p, &y)| if y == 1.0 { -p.ln() } else { -(1.0 - p).ln() })
        .sum()
}

#[test]
fn unit_weights_reduce_to_plain_bce() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut max_diff: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=6);
        let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y = one_hot(rng.gen_range(0..k), k);
        let got = weighted_bce_loss(&p, &y, &ClassWeights::uniform(k), 1e-7).unwrap();
        max_diff = max_diff.max((got - unweighted_bce(&p, &y)).abs());
    }
    assert!(max_diff < 1e-12, "max diff {max_diff:e}");
}

#[test]
fn predict_proba_matches_dense_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let k = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=20);
        let model = random_model(&mut rng, k, dim, 3.0);
        let x = random_sparse(&mut rng, dim);
        let dense = x.to_dense();
        let p = model.predict_proba(&x).unwrap();
        for (j, head) in model.heads().iter().enumerate() {
            let z: f64 = head.w.iter().zip(&dense).map(|(w, v)| w * v).sum::<f64>() + head.b;
            let expected = 1.0 / (1.0 + (-z).exp());
            assert!((p[j] - expected).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn predicted_label_is_argmax_of_scores(
        seed in any::<u64>(),
        k in 2usize..6,
        dim in 1usize..10,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, k, dim, 2.0);
        let x = random_sparse(&mut rng, dim);
        let label = model.predict_label(&x).unwrap();
        prop_assert_eq!(label, argmax(&model.predict_proba(&x).unwrap()));
        prop_assert_eq!(label, argmax(&model.decision_function(&x).unwrap()));
    }
}

type Examples = Vec<(SparseVector, usize)>;

fn separable_split() -> (Vectorizer, Examples, Examples) {
    let docs = generate(&SyntheticConfig::separable(250, 4));
    let (train, held) = stratified_split(&docs, 0.8, 4).unwrap();
    let texts: Vec<&str> = train.iter().map(|d| d.doc.text.as_str()).collect();
    let vec = Vectorizer::fit(&texts, PrepConfig::default(), TfidfConfig::default()).unwrap();
    let feats = |set: &[altc_core::LabeledDocument]| {
        set.iter()
            .map(|d| (vec.transform(&d.doc.text), d.label))
            .collect::<Vec<_>>()
    };
    let (tr, he) = (feats(&train), feats(&held));
    (vec, tr, he)
}

#[test]
fn full_batch_loss_is_non_increasing_early_on() {
    let (_, train, _) = separable_split();
    let labels: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let cfg = TrainConfig {
        batch_size: train.len(),
        epochs: 10,
        ..TrainConfig::default()
    };
    let cw = linear_model::training_weights(&labels, 4, &cfg).unwrap();
    let (_, losses) = fit(&train, &cfg, &cw, None).unwrap();
    assert_eq!(losses.len(), 10);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{losses:?}");
    }
}

#[test]
fn separable_corpus_is_learned_and_training_is_deterministic() {
    let (_, train, held) = separable_split();
    let labels: Vec<usize> = train.iter().map(|(_, l)| *l).collect();
    let cfg = TrainConfig::default();
    let cw = linear_model::training_weights(&labels, 4, &cfg).unwrap();
    let (model, losses) = fit(&train, &cfg, &cw, None).unwrap();
    let (again, losses_again) = fit(&train, &cfg, &cw, None).unwrap();
    assert_eq!(model, again);
    assert_eq!(
        losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>(),
        losses_again.iter().map(|l| l.to_bits()).collect::<Vec<_>>()
    );

    let score = |data: &[(SparseVector, usize)]| {
        let gold: Vec<usize> = data.iter().map(|(_, l)| *l).collect();
        let pred: Vec<usize> = data.iter().map(|(x, _)| model.predict_label(x).unwrap()).collect();
        metrics::report(&metrics::confusion(&gold, &pred, 4).unwrap()).unwrap()
    };
    assert!(score(&train).accuracy >= 0.99);
    assert!(score(&held).macro_avg.f1 >= 0.95);
    assert_eq!(LabelSchema::hope().len(), 4);
}
