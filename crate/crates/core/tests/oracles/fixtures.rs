//! Seeded generators for oracle comparisons.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use landscape_core::ingest::{Dataset, Sample};
use landscape_core::matrix::Matrix;

use super::{dataset, sample, Scoped};

pub fn word(k: usize) -> String {
    format!("w{k:02}")
}

/// Samples around eight cluster centers in a 100×100 square, one in five
/// placed uniformly instead. Clustered samples favor their cluster's words
/// among `w00..w23`; other picks come from the remaining, unclustered words.
pub fn lwc_corpus(seed: u64, samples: usize, vocab: usize) -> Vec<Scoped> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; 2]> = (0..8)
        .map(|_| [rng.random_range(10.0..90.0), rng.random_range(10.0..90.0)])
        .collect();
    let noise = Normal::new(0.0, 4.0).unwrap();
    let local = vocab.min(24);
    (0..samples)
        .map(|_| {
            let c = rng.random_range(0..8);
            let scattered = rng.random_bool(0.2);
            let pos = if scattered {
                vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]
            } else {
                vec![centers[c][0] + noise.sample(&mut rng), centers[c][1] + noise.sample(&mut rng)]
            };
            let n = rng.random_range(3..=8);
            let words = (0..n)
                .map(|_| {
                    let own: Vec<usize> = (0..local).filter(|k| k % 8 == c).collect();
                    if !scattered && rng.random_bool(0.6) && !own.is_empty() {
                        word(own[rng.random_range(0..own.len())])
                    } else if vocab > local {
                        word(rng.random_range(local..vocab))
                    } else {
                        word(rng.random_range(0..vocab))
                    }
                })
                .collect();
            (pos, words)
        })
        .collect()
}

/// Uniform background corpus plus a word occurring `count` times inside a
/// Gaussian cluster (σ = `sigma_frac` of the background's scale) and a
/// word occurring `count` times at uniform positions.
pub fn planted_corpus(seed: u64, count: usize, sigma: f64) -> Vec<Scoped> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Scoped> = (0..500)
        .map(|_| {
            let pos = vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)];
            let words = (0..4).map(|_| word(rng.random_range(0..40))).collect();
            (pos, words)
        })
        .collect();
    let noise = Normal::new(0.0, sigma).unwrap();
    for _ in 0..count {
        let pos = vec![30.0 + noise.sample(&mut rng), 70.0 + noise.sample(&mut rng)];
        out.push((pos, vec!["planted".into(), word(rng.random_range(0..40))]));
    }
    for _ in 0..count {
        let i = rng.random_range(0..500);
        out[i].1.push("diffuse".into());
    }
    out
}

/// Ten lexicon entries mapping clustered words to shared concepts.
pub fn lexicon() -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for k in 0..10 {
        let concepts = match k % 3 {
            0 => vec![format!("group {}", k % 8), "thing".to_string()],
            1 => vec![format!("group {}", k % 8)],
            _ => vec!["thing".to_string(), format!("kind {}", k % 2)],
        };
        out.insert(word(k), concepts);
    }
    out
}

pub const CONFUSION_LABELS: [&str; 6] = ["alpha", "beta", "delta", "gamma", "kappa", "omega"];

/// 100 scripted errors with a skewed pair distribution, plus 60 correct
/// samples. Confidence steps through [0, 1).
pub fn scripted_samples() -> Vec<Sample> {
    let l = CONFUSION_LABELS;
    let mut out = Vec::new();
    for i in 0..100usize {
        let gold = l[(i * i) % 6];
        let mut pred = l[(i / 7 + 1) % 6];
        if pred == gold {
            pred = l[((i * i) % 6 + 1) % 6];
        }
        out.push(sample(&format!("e{i:03}"), &["x"], gold, pred, (i % 37) as f64 / 37.0));
    }
    for i in 0..60usize {
        out.push(sample(&format!("c{i:03}"), &["x"], l[i % 6], l[i % 6], (i % 11) as f64 / 11.0));
    }
    out
}

pub fn scripted_dataset() -> Dataset {
    let samples = scripted_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let tokens = samples
        .iter()
        .map(|_| Matrix::from_rows(&[(0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()]))
        .collect();
    dataset(samples, tokens)
}

/// Two groups of 200 samples over a shared 30-word background; "signal"
/// appears in 50 samples of group A and 10 of group B. Returns the dataset
/// and the two groups' indices.
pub fn divergence_corpus(seed: u64) -> (Dataset, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Sample> = Vec::new();
    let mut tokens = Vec::new();
    for (group, plant) in [("a", 50), ("b", 10)] {
        for i in 0..200 {
            let mut words: Vec<String> = (0..6).map(|_| format!("bg{:02}", rng.random_range(0..30))).collect();
            if i < plant {
                words.push("signal".into());
            }
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            samples.push(sample(&format!("{group}{i:03}"), &refs, group, group, 0.5));
            let rows: Vec<[f64; 2]> = words.iter().map(|_| [rng.random_range(-1.0..1.0), 1.0]).collect();
            tokens.push(Matrix::from_rows(&rows));
        }
    }
    (dataset(samples, tokens), (0..200).collect(), (200..400).collect())
}
