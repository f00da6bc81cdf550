//! Seeded synthetic corpora for demos and tests.
//!
//! Each label owns a center in embedding space and a few characteristic
//! words; token embeddings sit near their label center, shifted by a
//! per-word direction, so labels form clusters and words are localized.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::binary::write_token_embeddings;
use crate::ingest::{CorpusSources, Sample};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub labels: usize,
    pub samples_per_label: usize,
    pub dim: usize,
    /// Probability that a sample's prediction differs from its gold label.
    pub error_rate: f64,
    pub tokens_per_sample: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            labels: 4,
            samples_per_label: 12,
            dim: 8,
            error_rate: 0.2,
            tokens_per_sample: (3, 7),
            seed: 7,
        }
    }
}

const SHARED: &[&str] = &["card", "account", "money", "help", "please"];
const FUNCTION: &[&str] = &["the", "my", "is", "to", "a"];

/// Generated corpus with per-sample token embeddings.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub samples: Vec<Sample>,
    pub tokens: Vec<Matrix>,
    pub dim: usize,
    /// `(word, concepts)` for every label word and shared word.
    pub lexicon: Vec<(String, Vec<String>)>,
}

pub fn label_name(i: usize) -> String {
    format!("label_{i:02}")
}

fn label_word(label: usize, k: usize) -> String {
    format!("w{label}x{k}")
}

impl SyntheticCorpus {
    pub fn generate(spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let gauss = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
            (0..spec.dim).map(|_| unit.sample(rng) * scale).collect()
        };
        let centers: Vec<Vec<f64>> = (0..spec.labels).map(|_| gauss(&mut rng, 3.0)).collect();
        let mut words: Vec<String> = Vec::new();
        for l in 0..spec.labels {
            words.extend((0..4).map(|k| label_word(l, k)));
        }
        words.extend(SHARED.iter().map(|s| s.to_string()));
        words.extend(FUNCTION.iter().map(|s| s.to_string()));
        let offsets: Vec<Vec<f64>> = words.iter().map(|_| gauss(&mut rng, 0.6)).collect();
        let offset = |w: &str| &offsets[words.iter().position(|x| x == w).expect("known word")];

        let mut samples = Vec::new();
        let mut tokens = Vec::new();
        for l in 0..spec.labels {
            for j in 0..spec.samples_per_label {
                let (lo, hi) = spec.tokens_per_sample;
                let n = rng.random_range(lo..=hi.max(lo));
                let mut toks = Vec::with_capacity(n);
                for t in 0..n {
                    let w = match (t, rng.random_range(0..10)) {
                        (0, _) | (_, 0..=4) => label_word(l, rng.random_range(0..4)),
                        (_, 5..=7) => SHARED.choose(&mut rng).expect("nonempty").to_string(),
                        _ => FUNCTION.choose(&mut rng).expect("nonempty").to_string(),
                    };
                    toks.push(w);
                }
                let mut m = Matrix::zeros(n, spec.dim);
                for (r, w) in toks.iter().enumerate() {
                    let noise = gauss(&mut rng, 0.2);
                    let row = m.row_mut(r);
                    for k in 0..spec.dim {
                        row[k] = centers[l][k] + offset(w)[k] + noise[k];
                    }
                }
                let pred = if spec.labels > 1 && rng.random_bool(spec.error_rate) {
                    let other = rng.random_range(1..spec.labels);
                    (l + other) % spec.labels
                } else {
                    l
                };
                let display: Vec<String> = toks
                    .iter()
                    .enumerate()
                    .map(|(i, w)| if i == 0 { capitalize(w) } else { w.clone() })
                    .collect();
                samples.push(Sample {
                    id: format!("s{l:02}_{j:03}"),
                    text: display.join(" "),
                    tokens: display,
                    gold_label: label_name(l),
                    pred_label: label_name(pred),
                    confidence: rng.random_range(0.3..1.0),
                    domain_tag: None,
                });
                tokens.push(m);
            }
        }
        let mut lexicon: Vec<(String, Vec<String>)> = Vec::new();
        for l in 0..spec.labels {
            for k in 0..4 {
                lexicon.push((label_word(l, k), vec![format!("topic {l}"), "a term".into()]));
            }
        }
        for s in SHARED {
            lexicon.push((s.to_string(), vec!["banking".into()]));
        }
        Self {
            samples,
            tokens,
            dim: spec.dim,
            lexicon,
        }
    }

    /// Writes corpus, token embeddings, lexicon and one external metric for
    /// the first few samples; sample embeddings are left to be derived.
    pub fn write(&self, dir: &Path) -> io::Result<CorpusSources> {
        fs::create_dir_all(dir)?;
        let corpus = dir.join("corpus.jsonl");
        let mut text = String::new();
        for s in &self.samples {
            text.push_str(&serde_json::to_string(s).map_err(io::Error::other)?);
            text.push('\n');
        }
        fs::write(&corpus, text)?;
        let token_embeddings = dir.join("tokens.semt");
        write_token_embeddings(&token_embeddings, self.dim, &self.tokens)?;
        let lexicon = dir.join("lexicon.jsonl");
        let mut text = String::new();
        for (w, c) in &self.lexicon {
            text.push_str(&serde_json::json!({"word": w, "concepts": c}).to_string());
            text.push('\n');
        }
        fs::write(&lexicon, text)?;
        let importance = dir.join("importance.jsonl");
        let mut text = String::new();
        for s in self.samples.iter().take(3) {
            let n = s.tokens.len();
            let scores: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
            text.push_str(&serde_json::json!({"id": s.id, "metric": "gradient", "scores": scores}).to_string());
            text.push('\n');
        }
        fs::write(&importance, text)?;
        Ok(CorpusSources {
            corpus,
            sample_embeddings: None,
            token_embeddings,
            lexicon: Some(lexicon),
            importance: Some(importance),
            stopwords: None,
        })
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
