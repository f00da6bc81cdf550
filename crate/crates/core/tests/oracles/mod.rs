//! Independent reference computations used as test oracles. Nothing here
//! calls into the library's analytics; they re-derive results from
//! definitions with simple (often slow) algorithms.

#![allow(dead_code)]

pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};

use landscape_core::ingest::{derive_sample_embeddings, ConceptLexicon, Dataset, EmbeddingStore, ExternalImportance, Sample};
use landscape_core::matrix::Matrix;
use landscape_core::text::default_stopwords;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

pub fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

/// Hull vertices by checking every ordered pair as a candidate edge
/// against every point: O(n³). Returned sorted lexicographically.
pub fn brute_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut vertices: BTreeSet<(u64, u64)> = BTreeSet::new();
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let (a, b) = (pts[i], pts[j]);
            let edge = pts.iter().enumerate().all(|(k, &c)| {
                if k == i || k == j {
                    return true;
                }
                let cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if cr > 0.0 {
                    true
                } else if cr < 0.0 {
                    false
                } else {
                    let t = (c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1]);
                    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                    t > 0.0 && t < len2
                }
            });
            if edge {
                vertices.insert(key(a));
                vertices.insert(key(b));
            }
        }
    }
    let mut out: Vec<[f64; 2]> = vertices
        .into_iter()
        .map(|(x, y)| [f64::from_bits(x), f64::from_bits(y)])
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

pub fn median_cost(points: &[[f64; 2]], m: [f64; 2]) -> f64 {
    points.iter().map(|p| dist(p, &m)).sum()
}

/// Minimum of the sum-of-distances objective by successively refined grid
/// search over the bounding box.
pub fn grid_median(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut best = ([(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0], f64::INFINITY);
    let steps = 40;
    for _ in 0..12 {
        for i in 0..=steps {
            for j in 0..=steps {
                let m = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64,
                ];
                let c = median_cost(points, m);
                if c < best.1 {
                    best = (m, c);
                }
            }
        }
        let span = [(hi[0] - lo[0]) / 8.0, (hi[1] - lo[1]) / 8.0];
        lo = [best.0[0] - span[0], best.0[1] - span[1]];
        hi = [best.0[0] + span[0], best.0[1] + span[1]];
    }
    best
}

/// High-accuracy geometric median: Weiszfeld from the coordinate-wise
/// median, skipping coincident points, for many iterations.
pub fn precise_median(points: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let mut m: Vec<f64> = (0..dim)
        .map(|k| {
            let mut col: Vec<f64> = points.iter().map(|p| p[k]).collect();
            col.sort_by(f64::total_cmp);
            col[col.len() / 2]
        })
        .collect();
    for _ in 0..5000 {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for p in points {
            let d = dist(p, &m);
            if d < 1e-12 {
                continue;
            }
            for k in 0..dim {
                num[k] += p[k] / d;
            }
            den += 1.0 / d;
        }
        if den == 0.0 {
            break;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let cur: f64 = points.iter().map(|p| dist(p, &m)).sum();
        let new: f64 = points.iter().map(|p| dist(p, &next)).sum();
        if new >= cur {
            break;
        }
        m = next;
    }
    m
}

/// Linear interpolation between closest ranks (0-based position `q·(n−1)`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    v[below] * (1.0 - (pos - below as f64)) + v[above] * (pos - below as f64)
}

pub fn spread(points: &[Vec<f64>], q: f64) -> f64 {
    let c = precise_median(points);
    let d: Vec<f64> = points.iter().map(|p| dist(p, &c)).collect();
    quantile(&d, q)
}

/// One scoped sample: its position and normalized words.
pub type Scoped = (Vec<f64>, Vec<String>);

pub fn global_scale(samples: &[Scoped], q: f64) -> f64 {
    let pts: Vec<Vec<f64>> = samples.iter().map(|(p, _)| p.clone()).collect();
    let s = spread(&pts, q);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Localized items with their frequency and locality, given per-sample
/// item lists.
pub fn brute_localize(
    samples: &[Scoped],
    scale: f64,
    freq: usize,
    lambda: f64,
    q: f64,
    excluded: &BTreeSet<String>,
) -> BTreeMap<String, (usize, f64)> {
    let vocab: BTreeSet<&String> = samples.iter().flat_map(|(_, w)| w).collect();
    let mut out = BTreeMap::new();
    for word in vocab {
        if excluded.contains(word) {
            continue;
        }
        let mut occ = Vec::new();
        for (pos, words) in samples {
            for w in words {
                if w == word {
                    occ.push(pos.clone());
                }
            }
        }
        if occ.len() <= freq {
            continue;
        }
        let loc = spread(&occ, q) / scale;
        if loc <= lambda {
            out.insert(word.clone(), (occ.len(), loc));
        }
    }
    out
}

/// Words within `margin` of the locality bound, whose membership may
/// legitimately flip with median round-off.
pub fn borderline(samples: &[Scoped], scale: f64, freq: usize, lambda: f64, q: f64, margin: f64) -> BTreeSet<String> {
    let vocab: BTreeSet<&String> = samples.iter().flat_map(|(_, w)| w).collect();
    let mut out = BTreeSet::new();
    for word in vocab {
        let occ: Vec<Vec<f64>> = samples
            .iter()
            .flat_map(|(p, ws)| ws.iter().filter(|w| *w == word).map(move |_| p.clone()))
            .collect();
        if occ.len() > freq && (spread(&occ, q) / scale - lambda).abs() < margin {
            out.insert(word.clone());
        }
    }
    out
}

/// Two-stage concepts: local words first, then every occurrence of a local
/// word becomes an occurrence of each of its concepts.
pub fn brute_concepts(
    samples: &[Scoped],
    lexicon: &BTreeMap<String, Vec<String>>,
    word_stage: (usize, f64),
    concept_stage: (usize, f64),
    q: f64,
) -> BTreeMap<String, (usize, f64)> {
    let scale = global_scale(samples, q);
    let none = BTreeSet::new();
    let words = brute_localize(samples, scale, word_stage.0, word_stage.1, q, &none);
    let concept_samples: Vec<Scoped> = samples
        .iter()
        .map(|(p, ws)| {
            let cs = ws
                .iter()
                .filter(|w| words.contains_key(*w))
                .flat_map(|w| lexicon.get(w).cloned().unwrap_or_default())
                .collect();
            (p.clone(), cs)
        })
        .collect();
    brute_localize(&concept_samples, scale, concept_stage.0, concept_stage.1, q, &none)
}

/// KL(P‖Q) with the Student-t kernel, straight from the definition.
pub fn kl(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += 1.0 / (1.0 + dist(&y[i], &y[j]).powi(2));
            }
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[i][j] > 0.0 {
                let q = 1.0 / (1.0 + dist(&y[i], &y[j]).powi(2)) / z;
                total += p[i][j] * (p[i][j] / q).ln();
            }
        }
    }
    total
}

/// Central finite differences of [`kl`].
pub fn kl_gradient_fd(p: &[Vec<f64>], y: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; y.len()];
    for i in 0..y.len() {
        for k in 0..2 {
            let mut plus = y.to_vec();
            let mut minus = y.to_vec();
            plus[i][k] += h;
            minus[i][k] -= h;
            g[i][k] = (kl(p, &plus) - kl(p, &minus)) / (2.0 * h);
        }
    }
    g
}

/// Increase of cosine distance to `proto` when each token is left out of
/// the mean pool, recomputing each reduced pool from scratch.
pub fn leave_one_out(tokens: &[Vec<f64>], proto: &[f64]) -> Vec<f64> {
    let full = 1.0 - cosine(&mean(tokens), proto);
    (0..tokens.len())
        .map(|i| {
            if tokens.len() == 1 {
                return 0.0;
            }
            let rest: Vec<Vec<f64>> = tokens
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, t)| t.clone())
                .collect();
            (1.0 - cosine(&mean(&rest), proto)) - full
        })
        .collect()
}

pub fn confusion_pairs(samples: &[Sample]) -> BTreeMap<(String, String), usize> {
    let mut out = BTreeMap::new();
    for s in samples {
        if s.gold_label != s.pred_label {
            *out.entry((s.gold_label.clone(), s.pred_label.clone())).or_insert(0) += 1;
        }
    }
    out
}

/// Weighted log-odds z for one item with an informative Dirichlet prior of
/// total mass `a0` spread by pooled frequency.
pub fn log_odds_z(ya: f64, yb: f64, na: f64, nb: f64, a0: f64) -> f64 {
    if ya + yb == na + nb {
        return 0.0;
    }
    let aw = a0 * (ya + yb) / (na + nb);
    let delta = ((ya + aw) / (na + a0 - ya - aw)).ln() - ((yb + aw) / (nb + a0 - yb - aw)).ln();
    let var = 1.0 / (ya + aw) + 1.0 / (yb + aw);
    delta / var.sqrt()
}

/// Average-linkage agglomeration over cosine distance, recomputing every
/// cluster distance from member pairs; merges while the closest pair is
/// closer than `cut`.
pub fn naive_average_linkage(items: &[(String, Vec<f64>)], cut: f64) -> BTreeSet<BTreeSet<String>> {
    let d = |a: &[f64], b: &[f64]| 1.0 - cosine(a, b);
    let mut clusters: Vec<Vec<usize>> = (0..items.len()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += d(&items[i].1, &items[j].1);
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                if best.is_none_or(|(x, _, _)| avg < x) {
                    best = Some((avg, a, b));
                }
            }
        }
        match best {
            Some((avg, a, b)) if avg < cut => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
            }
            _ => break,
        }
    }
    clusters
        .into_iter()
        .map(|c| c.into_iter().map(|i| items[i].0.clone()).collect())
        .collect()
}

/// Non-zero winding number test; agrees with even-odd on simple polygons.
pub fn winding_inside(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut wn = 0i32;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

/// In-memory dataset with sample embeddings derived from tokens.
pub fn dataset(samples: Vec<Sample>, tokens: Vec<Matrix>) -> Dataset {
    let store = derive_sample_embeddings(EmbeddingStore::new(None, tokens).unwrap()).unwrap();
    Dataset::new(
        samples,
        store,
        ConceptLexicon::default(),
        ExternalImportance::default(),
        default_stopwords(),
    )
    .unwrap()
}

pub fn sample(id: &str, tokens: &[&str], gold: &str, pred: &str, confidence: f64) -> Sample {
    Sample {
        id: id.into(),
        text: tokens.join(" "),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        gold_label: gold.into(),
        pred_label: pred.into(),
        confidence,
        domain_tag: None,
    }
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}
