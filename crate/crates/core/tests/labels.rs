mod oracles;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use landscape_core::ingest::Sample;
use landscape_core::labels::{
    available_prototypes, cluster_labels, confusion_table, error_shares, filter_samples, filter_samples_by,
    sort_confusions, ConfidenceBand, ConfusionEntry, ConfusionSort, LabelField, LabelPrototype,
};
use landscape_core::matrix::Matrix;
use oracles::fixtures::{scripted_dataset, CONFUSION_LABELS};
use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LABELS: [&str; 6] = CONFUSION_LABELS;

fn as_counts(table: &[ConfusionEntry]) -> BTreeMap<(String, String), usize> {
    table.iter().map(|e| ((e.gold.clone(), e.pred.clone()), e.frequency)).collect()
}

#[test]
fn confusion_table_equals_pair_counting() {
    let ds = scripted_dataset();
    let table = confusion_table(&ds, None);
    assert_eq!(table.iter().map(|e| e.frequency).sum::<usize>(), 100);
    assert_eq!(as_counts(&table), confusion_pairs(ds.samples()));
    for e in &table {
        assert_eq!(e.sample_ids.len(), e.frequency);
        let mut sorted = e.sample_ids.clone();
        sorted.sort();
        assert_eq!(sorted, e.sample_ids);
        for id in &e.sample_ids {
            let s = ds.sample(ds.index_of(id).unwrap());
            assert_eq!((&s.gold_label, &s.pred_label), (&e.gold, &e.pred));
        }
    }
}

#[test]
fn confidence_band_restricts_the_counted_errors() {
    let ds = scripted_dataset();
    for (lo, hi) in [(0.0, 1.0), (0.2, 0.5), (0.5, 0.5), (0.9, 1.0)] {
        let band = ConfidenceBand::new(lo, hi).unwrap();
        let inside: Vec<Sample> = ds
            .samples()
            .iter()
            .filter(|s| s.confidence >= lo && s.confidence <= hi)
            .cloned()
            .collect();
        assert_eq!(as_counts(&confusion_table(&ds, Some(band))), confusion_pairs(&inside));
    }
    assert!(ConfidenceBand::new(0.6, 0.4).is_err());
}

fn reference_order(a: &ConfusionEntry, b: &ConfusionEntry, keys: &[ConfusionSort]) -> Ordering {
    for k in keys {
        let o = match k {
            ConfusionSort::Freq => b.frequency.cmp(&a.frequency),
            ConfusionSort::Gold => a.gold.cmp(&b.gold),
            ConfusionSort::Pred => a.pred.cmp(&b.pred),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    (&a.gold, &a.pred).cmp(&(&b.gold, &b.pred))
}

#[test]
fn sorting_is_a_total_order_with_pair_tie_break() {
    let ds = scripted_dataset();
    let base = confusion_table(&ds, None);
    let all = [ConfusionSort::Freq, ConfusionSort::Gold, ConfusionSort::Pred];
    for primary in all {
        for secondary in [None, Some(ConfusionSort::Freq), Some(ConfusionSort::Gold), Some(ConfusionSort::Pred)] {
            let mut keys = vec![primary];
            keys.extend(secondary);
            let mut got = base.clone();
            got.reverse();
            sort_confusions(&mut got, primary, secondary);
            for w in got.windows(2) {
                assert_eq!(reference_order(&w[0], &w[1], &keys), Ordering::Less, "{keys:?}");
            }
            let mut again = got.clone();
            again.rotate_left(3);
            sort_confusions(&mut again, primary, secondary);
            assert_eq!(again, got);
        }
    }
    for w in base.windows(2) {
        assert_eq!(reference_order(&w[0], &w[1], &[ConfusionSort::Freq]), Ordering::Less);
    }
}

#[test]
fn error_shares_sum_to_one_and_match_counts() {
    let ds = scripted_dataset();
    let shares = error_shares(&ds);
    assert_eq!(shares.total_errors, 100);
    for (side, get) in [
        (&shares.false_negatives, (|s: &Sample| s.gold_label.clone()) as fn(&Sample) -> String),
        (&shares.false_positives, |s: &Sample| s.pred_label.clone()),
    ] {
        assert!((side.iter().map(|s| s.share).sum::<f64>() - 1.0).abs() <= 1e-9);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in ds.samples().iter().filter(|s| s.gold_label != s.pred_label) {
            *counts.entry(get(s)).or_default() += 1;
        }
        let got: BTreeMap<String, usize> = side.iter().map(|s| (s.label.clone(), s.count)).collect();
        assert_eq!(got, counts);
        for w in side.windows(2) {
            assert!(w[0].count > w[1].count || (w[0].count == w[1].count && w[0].label < w[1].label));
        }
    }
}

#[test]
fn error_free_corpus_has_empty_shares() {
    let samples: Vec<Sample> = (0..6).map(|i| sample(&format!("s{i}"), &["x"], LABELS[i], LABELS[i], 0.5)).collect();
    let tokens = (0..6).map(|i| Matrix::from_rows(&[[1.0, i as f64]])).collect();
    let ds = dataset(samples, tokens);
    let shares = error_shares(&ds);
    assert!(shares.is_empty());
    assert!(shares.false_negatives.is_empty() && shares.false_positives.is_empty());
    assert!(confusion_table(&ds, None).is_empty());
}

#[test]
fn prototypes_are_gold_means_of_sample_embeddings() {
    let ds = scripted_dataset();
    for p in available_prototypes(&ds) {
        let members: Vec<Vec<f64>> = (0..ds.len())
            .filter(|&i| ds.sample(i).gold_label == p.label)
            .map(|i| ds.embeddings().sample(i).to_vec())
            .collect();
        assert_eq!(p.support, members.len());
        for (a, b) in p.vector.iter().zip(mean(&members)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn random_prototypes(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<LabelPrototype> {
    (0..n)
        .map(|i| LabelPrototype {
            label: format!("l{i:02}"),
            vector: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            support: 1,
        })
        .collect()
}

fn partition(clusters: &[landscape_core::labels::LabelCluster]) -> BTreeSet<BTreeSet<String>> {
    clusters.iter().map(|c| c.members.iter().cloned().collect()).collect()
}

#[test]
fn clustering_matches_naive_average_linkage() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..60 {
        let n = rng.random_range(1..14);
        let protos = random_prototypes(&mut rng, n, 4);
        let cut = rng.random_range(0.1..1.6);
        let got = cluster_labels(&protos, cut).unwrap();
        let items: Vec<(String, Vec<f64>)> = protos.iter().map(|p| (p.label.clone(), p.vector.clone())).collect();
        assert_eq!(partition(&got), naive_average_linkage(&items, cut), "cut {cut}");
        for (i, c) in got.iter().enumerate() {
            assert_eq!((c.id, c.color_index), (i, i));
            assert!(c.members.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(got.windows(2).all(|w| w[0].members[0] < w[1].members[0]));
    }
}

#[test]
fn invalid_cut_is_rejected() {
    let protos = random_prototypes(&mut ChaCha8Rng::seed_from_u64(1), 3, 2);
    for cut in [0.0, -1.0, 2.0, f64::NAN] {
        assert!(cluster_labels(&protos, cut).is_err());
    }
    assert!(cluster_labels(&[], 0.5).is_err());
}

#[test]
fn filters_combine_as_conjunction() {
    let ds = scripted_dataset();
    let band = ConfidenceBand::new(0.1, 0.6).unwrap();
    let labels: BTreeSet<String> = ["beta", "omega"].iter().map(|s| s.to_string()).collect();
    let got = filter_samples(&ds, true, Some(band), Some(&labels));
    let expected: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            let s = ds.sample(i);
            s.gold_label != s.pred_label
                && band.contains(s.confidence)
                && (labels.contains(&s.gold_label) || labels.contains(&s.pred_label))
        })
        .collect();
    assert_eq!(got, expected);
    let gold_only = filter_samples_by(&ds, false, None, Some(&labels), LabelField::Gold);
    assert!(gold_only.iter().all(|&i| labels.contains(&ds.sample(i).gold_label)));
    assert_eq!(filter_samples(&ds, false, None, None), (0..ds.len()).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn raising_the_cut_only_merges_clusters(seed in 0u64..5000, n in 2usize..10, cut in 0.05f64..1.0, extra in 0.0f64..0.9) {
        let protos = random_prototypes(&mut ChaCha8Rng::seed_from_u64(seed), n, 3);
        let fine = partition(&cluster_labels(&protos, cut).unwrap());
        let coarse = partition(&cluster_labels(&protos, cut + extra).unwrap());
        prop_assert!(fine.len() >= coarse.len());
        let members: BTreeSet<String> = fine.iter().flatten().cloned().collect();
        prop_assert_eq!(members.len(), n);
    }

    #[test]
    fn table_frequencies_total_the_error_count(seed in 0u64..5000, m in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..m)
            .map(|i| sample(&format!("s{i}"), &["x"], LABELS[rng.random_range(0..4)], LABELS[rng.random_range(0..4)], rng.random_range(0.0..1.0)))
            .collect();
        let errors = samples.iter().filter(|s| s.gold_label != s.pred_label).count();
        let tokens = (0..m).map(|_| Matrix::from_rows(&[[rng.random_range(0.1..1.0), 1.0]])).collect();
        let ds = dataset(samples, tokens);
        let table = confusion_table(&ds, None);
        prop_assert_eq!(table.iter().map(|e| e.frequency).sum::<usize>(), errors);
        let shares = error_shares(&ds);
        if errors > 0 {
            prop_assert!((shares.false_positives.iter().map(|s| s.share).sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
