mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use landscape_core::ingest::ConceptLexicon;
use landscape_core::lwc::{local_concepts, local_words, LocalWord, LwcParams, OccurrenceIndex};
use oracles::fixtures::{lexicon, lwc_corpus, planted_corpus};
use oracles::*;
use proptest::prelude::*;

fn index(samples: &[Scoped], stopwords: BTreeSet<String>) -> OccurrenceIndex {
    OccurrenceIndex::from_samples(2, samples.iter().cloned(), stopwords)
}

fn params(freq: usize, lambda: f64) -> LwcParams {
    LwcParams {
        freq_threshold: freq,
        locality_max: lambda,
        ..LwcParams::default()
    }
}

fn names(words: &[LocalWord]) -> BTreeSet<String> {
    words.iter().map(|w| w.word.clone()).collect()
}

/// Asserts set identity up to borderline words and agreement of frequency
/// and locality on the common words.
fn assert_matches(got: &[LocalWord], expected: &BTreeMap<String, (usize, f64)>, borderline: &BTreeSet<String>) {
    let got_set = names(got);
    let exp_set: BTreeSet<String> = expected.keys().cloned().collect();
    let diff: BTreeSet<&String> = got_set.symmetric_difference(&exp_set).collect();
    assert!(diff.iter().all(|w| borderline.contains(*w)), "differ on {diff:?}");
    for w in got {
        if let Some((freq, loc)) = expected.get(&w.word) {
            assert_eq!(w.frequency, *freq, "{}", w.word);
            assert!((w.locality - loc).abs() <= 1e-6 * loc.max(1.0), "{}: {} vs {loc}", w.word, w.locality);
            assert_eq!(w.scale_hint, (1.0 + *freq as f64).ln());
        }
    }
}

#[test]
fn local_words_match_brute_force() {
    for seed in 0..5 {
        let corpus = lwc_corpus(seed, 500, 40);
        let idx = index(&corpus, BTreeSet::new());
        let start = Instant::now();
        let got = local_words(&idx, &params(5, 0.5)).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0);
        let scale = global_scale(&corpus, 0.8);
        let expected = brute_localize(&corpus, scale, 5, 0.5, 0.8, &BTreeSet::new());
        assert!(!expected.is_empty());
        let border = borderline(&corpus, scale, 5, 0.5, 0.8, 1e-6);
        assert_matches(&got, &expected, &border);
    }
}

#[test]
fn local_words_are_sorted_by_frequency_then_word() {
    let corpus = lwc_corpus(3, 500, 40);
    let got = local_words(&index(&corpus, BTreeSet::new()), &params(5, 0.8)).unwrap();
    for pair in got.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(a.frequency > b.frequency || (a.frequency == b.frequency && a.word < b.word));
    }
}

#[test]
fn stopwords_are_dropped_only_when_ignored() {
    let corpus = lwc_corpus(4, 500, 40);
    let stop: BTreeSet<String> = ["w00", "w01", "w02"].iter().map(|s| s.to_string()).collect();
    let idx = index(&corpus, stop.clone());
    let keep = local_words(&idx, &params(5, 0.5)).unwrap();
    let mut ignoring = params(5, 0.5);
    ignoring.ignore_stopwords = true;
    let dropped = local_words(&idx, &ignoring).unwrap();
    let expected: BTreeSet<String> = names(&keep).difference(&stop).cloned().collect();
    assert_eq!(names(&dropped), expected);
}

#[test]
fn planted_cluster_word_is_local_and_diffuse_word_is_not() {
    let background = planted_corpus(5, 0, 1.0);
    let scale = global_scale(&background, 0.8);
    let corpus = planted_corpus(5, 40, 0.05 * scale);
    let idx = index(&corpus, BTreeSet::new());
    let got = names(&local_words(&idx, &params(20, 0.5)).unwrap());
    assert!(got.contains("planted"));
    assert!(!got.contains("diffuse"));
}

#[test]
fn raising_the_threshold_only_removes_words() {
    let corpus = lwc_corpus(6, 500, 40);
    let idx = index(&corpus, BTreeSet::new());
    let mut prev: Option<BTreeSet<String>> = None;
    for t in [5, 10, 20, 30] {
        let cur = names(&local_words(&idx, &params(t, 0.5)).unwrap());
        if let Some(p) = &prev {
            assert!(cur.is_subset(p), "T={t}");
        }
        prev = Some(cur);
    }
}

#[test]
fn concepts_match_two_stage_brute_force() {
    for seed in 0..5 {
        let corpus = lwc_corpus(10 + seed, 500, 40);
        let lex = lexicon();
        let idx = index(&corpus, BTreeSet::new());
        let lexicon = ConceptLexicon::from_entries(lex.clone());
        let got = local_concepts(&idx, &lexicon, &params(5, 0.5), &params(5, 0.5)).unwrap();
        let expected = brute_concepts(&corpus, &lex, (5, 0.5), (5, 0.5), 0.8);
        assert!(!expected.is_empty());
        let got_map: BTreeMap<String, (usize, f64)> = got.iter().map(|w| (w.word.clone(), (w.frequency, w.locality))).collect();
        assert_eq!(got_map.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>(), "seed {seed}");
        for (k, (f, l)) in &expected {
            assert_eq!(got_map[k].0, *f);
            assert!((got_map[k].1 - l).abs() < 1e-6);
        }
    }
}

#[test]
fn concept_frequency_sums_its_local_words() {
    let corpus = lwc_corpus(21, 500, 40);
    let idx = index(&corpus, BTreeSet::new());
    let lex = lexicon();
    let words = local_words(&idx, &params(5, 0.5)).unwrap();
    let loose = LwcParams {
        freq_threshold: 0,
        locality_max: 1e9,
        ..LwcParams::default()
    };
    let concepts = local_concepts(&idx, &ConceptLexicon::from_entries(lex.clone()), &params(5, 0.5), &loose).unwrap();
    for c in &concepts {
        let expected: usize = words
            .iter()
            .filter(|w| lex.get(&w.word).is_some_and(|cs| cs.contains(&c.word)))
            .map(|w| w.frequency)
            .sum();
        assert_eq!(c.frequency, expected, "{}", c.word);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let idx = index(&lwc_corpus(1, 50, 10), BTreeSet::new());
    assert!(local_words(&idx, &params(5, 0.0)).is_err());
    assert!(local_words(&idx, &LwcParams { locality_quantile: 1.5, ..LwcParams::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_is_monotone_in_both_thresholds(seed in 0u64..1000, t in 0usize..15, dt in 1usize..10, l in 0.1f64..1.0, dl in 0.0f64..0.5) {
        let corpus = lwc_corpus(seed, 150, 20);
        let idx = index(&corpus, BTreeSet::new());
        let base = names(&local_words(&idx, &params(t, l)).unwrap());
        let stricter_t = names(&local_words(&idx, &params(t + dt, l)).unwrap());
        let looser_l = names(&local_words(&idx, &params(t, l + dl)).unwrap());
        prop_assert!(stricter_t.is_subset(&base));
        prop_assert!(base.is_subset(&looser_l));
    }

    #[test]
    fn every_emitted_word_satisfies_both_filters(seed in 0u64..1000) {
        let corpus = lwc_corpus(seed, 150, 20);
        let idx = index(&corpus, BTreeSet::new());
        let p = params(4, 0.6);
        for w in local_words(&idx, &p).unwrap() {
            prop_assert!(w.frequency > p.freq_threshold);
            prop_assert!(w.locality <= p.locality_max);
            prop_assert_eq!(w.frequency, idx.frequency(&w.word));
        }
    }
}
