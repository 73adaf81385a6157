//! Synthetic labeled corpora for experiments and self-checks.
//!
//! Every class owns a private vocabulary; a shared vocabulary supplies
//! background words. Each document draws a clarity level from a Gaussian:
//! a token comes from the document's own class vocabulary with that
//! probability, otherwise from a randomly chosen other class (with
//! probability `confusion`) or from the shared pool. Within a vocabulary,
//! word ranks follow a half-normal, so low ranks are frequent.
//!
//! Words are spelled with letters only so they survive preprocessing
//! untouched.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledDocument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub class_counts: Vec<usize>,
    pub words_per_class: usize,
    pub shared_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Mean probability that a token comes from the document's own class.
    pub clarity_mean: f64,
    /// Standard deviation of the per-document clarity.
    pub clarity_std: f64,
    /// Share of non-class tokens taken from another class's vocabulary.
    pub confusion: f64,
    /// Standard deviation of the half-normal word-rank distribution, as a
    /// fraction of the vocabulary size.
    pub rank_spread: f64,
    pub id_prefix: String,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Clean four-class data where every document carries several class
    /// words; linearly separable in TF-IDF space with overwhelming
    /// probability.
    pub fn separable(per_class: usize, seed: u64) -> Self {
        Self {
            class_counts: vec![per_class; 4],
            words_per_class: 30,
            shared_words: 200,
            min_len: 12,
            max_len: 24,
            clarity_mean: 0.5,
            clarity_std: 0.0,
            confusion: 0.0,
            rank_spread: 0.5,
            id_prefix: "sep".into(),
            seed,
        }
    }

    /// Noisy data with class sizes proportional to `ratio`, scaled to `total`
    /// documents (rounded, remainder assigned to the largest class).
    pub fn imbalanced(ratio: &[usize], total: usize, seed: u64) -> Self {
        let sum: usize = ratio.iter().sum();
        let mut counts: Vec<usize> = ratio
            .iter()
            .map(|&r| ((r as f64 / sum as f64) * total as f64).round() as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        let largest = (0..counts.len()).max_by_key(|&i| ratio[i]).unwrap_or(0);
        counts[largest] = (counts[largest] + total).saturating_sub(assigned);
        Self {
            class_counts: counts,
            words_per_class: 60,
            shared_words: 400,
            min_len: 8,
            max_len: 20,
            clarity_mean: 0.5,
            clarity_std: 0.2,
            confusion: 0.35,
            rank_spread: 0.35,
            id_prefix: "syn".into(),
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.class_counts.iter().sum()
    }
}

fn letters(mut n: usize) -> String {
    // base-16 over a..p; q..z stay free for separators
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (n % 16) as u8);
        n /= 16;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn class_word(class: usize, rank: usize) -> String {
    format!("q{}r{}", letters(class), letters(rank))
}

pub fn shared_word(rank: usize) -> String {
    format!("s{}", letters(rank))
}

fn draw_rank(rng: &mut ChaCha8Rng, size: usize, spread: f64) -> usize {
    let sd = (spread * size as f64).max(1e-9);
    let normal = Normal::new(0.0, sd).expect("finite positive sd");
    loop {
        let r = normal.sample(rng).abs().floor() as usize;
        if r < size {
            return r;
        }
    }
}

/// Generates the corpus. Document order is shuffled; ids are
/// `<prefix><index>` with the index zero-padded to six digits.
pub fn generate(cfg: &SyntheticConfig) -> Vec<LabeledDocument> {
    let k = cfg.class_counts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut labels: Vec<usize> = cfg
        .class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    labels.shuffle(&mut rng);
    let clarity = Normal::new(cfg.clarity_mean, cfg.clarity_std.max(0.0))
        .expect("finite clarity parameters");

    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let len = rng.gen_range(cfg.min_len..=cfg.max_len.max(cfg.min_len));
            let c = clarity.sample(&mut rng).clamp(0.0, 1.0);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    if u < c {
                        class_word(label, draw_rank(&mut rng, cfg.words_per_class, cfg.rank_spread))
                    } else if k > 1 && rng.gen::<f64>() < cfg.confusion {
                        let mut other = rng.gen_range(0..k - 1);
                        if other >= label {
                            other += 1;
                        }
                        class_word(other, draw_rank(&mut rng, cfg.words_per_class, cfg.rank_spread))
                    } else {
                        shared_word(draw_rank(&mut rng, cfg.shared_words, cfg.rank_spread))
                    }
                })
                .collect();
            LabeledDocument::new(
                Document::new(format!("{}{:06}", cfg.id_prefix, i), words.join(" ")),
                label,
            )
        })
        .collect()
}
