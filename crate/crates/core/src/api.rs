//! Query parameters, payloads and errors shared by the HTTP service and the
//! command line, so both render byte-identical results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compare::{count_items, divergence, resolve_group, CompareError, DivergenceItem, GroupSelector, ItemKind};
use crate::explain::{relation_graph, select_contrast, summarize, vifi, ContrastTriple, ExplainError, ImportanceProfile, RelationGraph, Summary, DEFAULT_TAU};
use crate::geometry::{convex_hull, geometric_median, select_region, Point2, ProjectionMethod, RegionSelector};
use crate::labels::{
    cluster_labels, error_shares, sort_confusions, ConfidenceBand, ConfusionEntry, ConfusionSort, ErrorShares,
    LabelCluster, LabelField, DEFAULT_CUT,
};
use crate::lwc::{build_index_for, local_concepts, local_words, LocalWord, LwcParams, OccurrenceIndex, Space};
use crate::num;
use crate::registry::LoadedDataset;

/// A failed request: HTTP status, stable machine code and a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

/// Every machine code with its HTTP status.
pub const ERROR_CODES: [(&str, u16); 14] = [
    ("dataset_not_found", 404),
    ("sample_not_found", 404),
    ("route_not_found", 404),
    ("invalid_parameter", 400),
    ("invalid_region", 400),
    ("invalid_body", 400),
    ("unknown_metric", 400),
    ("unknown_label", 400),
    ("dataset_exists", 409),
    ("empty_group", 422),
    ("no_candidate", 422),
    ("degenerate_sample", 422),
    ("load_failed", 422),
    ("internal", 500),
];

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        let status = ERROR_CODES
            .iter()
            .find(|(c, _)| *c == code)
            .map(|(_, s)| *s)
            .expect("registered error code");
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new("invalid_parameter", message)
    }

    pub fn dataset_not_found(id: &str) -> Self {
        Self::new("dataset_not_found", format!("dataset {id:?} is not loaded"))
    }

    /// `{"error": {"code": ..., "message": ...}}`
    pub fn body(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        let code = match &e {
            ExplainError::UnknownSample(_) => "sample_not_found",
            ExplainError::UnknownMetric(_) => "unknown_metric",
            ExplainError::UnknownLabel(_) => "unknown_label",
            ExplainError::NoPrototype(_) | ExplainError::NoCandidate(_) => "no_candidate",
            ExplainError::ContrastIsPrediction(_) | ExplainError::InvalidTau(_) => "invalid_parameter",
            ExplainError::ZeroNorm(_) => "degenerate_sample",
        };
        Self::new(code, e.to_string())
    }
}

impl From<CompareError> for ApiError {
    fn from(e: CompareError) -> Self {
        let code = match e {
            CompareError::EmptyGroup(_) => "empty_group",
            CompareError::InvalidSelector(_) => "invalid_parameter",
        };
        Self::new(code, e.to_string())
    }
}

/// Serializes a payload exactly as the service sends it.
pub fn to_json<T: Serialize>(payload: &T) -> String {
    serde_json::to_string(payload).expect("payloads serialize")
}

// ---------------------------------------------------------------------------
// Raw parameters

/// Query-string parameters. Empty values count as absent; parameters that
/// no field consumes are rejected by [`Params::finish`].
#[derive(Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    fn take(&mut self, name: &str) -> Option<String> {
        self.values.remove(name).filter(|v| !v.is_empty())
    }

    fn parse<T: std::str::FromStr>(&mut self, name: &str) -> Result<Option<T>, ApiError> {
        self.take(name)
            .map(|v| {
                v.parse()
                    .map_err(|_| ApiError::invalid(format!("parameter {name}: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn choice<T: Copy>(&mut self, name: &str, options: &[(&str, T)]) -> Result<Option<T>, ApiError> {
        let Some(v) = self.take(name) else { return Ok(None) };
        options.iter().find(|(k, _)| *k == v).map(|(_, t)| Some(*t)).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
            ApiError::invalid(format!("parameter {name}: expected one of {}, got {v:?}", names.join("|")))
        })
    }

    fn list(&mut self, name: &str) -> Option<Vec<String>> {
        self.take(name)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
    }

    pub fn finish(self) -> Result<(), ApiError> {
        match self.values.into_keys().next() {
            Some(k) => Err(ApiError::invalid(format!("unknown parameter {k:?}"))),
            None => Ok(()),
        }
    }
}

fn band_from(lo: Option<f64>, hi: Option<f64>) -> Result<Option<ConfidenceBand>, ApiError> {
    if lo.is_none() && hi.is_none() {
        return Ok(None);
    }
    ConfidenceBand::new(lo.unwrap_or(0.0), hi.unwrap_or(1.0))
        .map(Some)
        .map_err(|e| ApiError::invalid(e.to_string()))
}

pub fn parse_region(flat: &str) -> Result<RegionSelector, ApiError> {
    let coords: Vec<f64> = flat
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::new("invalid_region", format!("region {flat:?} is not a list of numbers")))?;
    RegionSelector::from_flat(&coords).map_err(|e| ApiError::new("invalid_region", e.to_string()))
}

const STOPWORD_MODES: [(&str, bool); 2] = [("keep", false), ("ignore", true)];

// ---------------------------------------------------------------------------
// Sample filters and points

/// Sample predicates shared by the map, local-word and list queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleFilter {
    pub errors_only: bool,
    pub confidence: Option<ConfidenceBand>,
    pub labels: Option<BTreeSet<String>>,
    pub label_field: LabelField,
    pub region: Option<RegionSelector>,
}

impl SampleFilter {
    fn from_params(p: &mut Params) -> Result<Self, ApiError> {
        let errors_only = p.parse::<bool>("errors_only")?.unwrap_or(false);
        let confidence = band_from(p.parse("conf_lo")?, p.parse("conf_hi")?)?;
        let labels = p.list("labels").map(|l| l.into_iter().collect());
        let label_field = p
            .choice(
                "label_field",
                &[("gold", LabelField::Gold), ("pred", LabelField::Pred), ("either", LabelField::Either)],
            )?
            .unwrap_or_default();
        let region = p.take("region").map(|r| parse_region(&r)).transpose()?;
        Ok(Self {
            errors_only,
            confidence,
            labels,
            label_field,
            region,
        })
    }

    /// Ascending indices of matching samples.
    pub fn apply(&self, entry: &LoadedDataset) -> Result<Vec<usize>, ApiError> {
        if let Some(labels) = &self.labels {
            check_labels(entry, labels)?;
        }
        let in_region: Option<BTreeSet<usize>> =
            self.region.as_ref().map(|r| select_region(&entry.layout, r).into_iter().collect());
        Ok(crate::labels::filter_samples_by(
            &entry.dataset,
            self.errors_only,
            self.confidence,
            self.labels.as_ref(),
            self.label_field,
        )
        .into_iter()
        .filter(|i| in_region.as_ref().is_none_or(|r| r.contains(i)))
        .collect())
    }
}

fn check_labels<'a>(entry: &LoadedDataset, labels: impl IntoIterator<Item = &'a String>) -> Result<(), ApiError> {
    for l in labels {
        if entry.dataset.label_set().binary_search(l).is_err() {
            return Err(ApiError::new("unknown_label", format!("label {l:?} is not in dataset {:?}", entry.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub id: String,
    pub sample_count: usize,
    pub label_count: usize,
    pub dim: usize,
    pub layout_id: String,
    pub method: ProjectionMethod,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn dataset_info(entry: &LoadedDataset) -> DatasetInfo {
    DatasetInfo {
        id: entry.id.clone(),
        sample_count: entry.dataset.len(),
        label_count: entry.dataset.label_set().len(),
        dim: entry.dataset.embeddings().dim(),
        layout_id: entry.layout_id.clone(),
        method: entry.layout.method,
        seed: entry.layout.seed,
        warning: entry.layout.warning.clone(),
    }
}

pub fn datasets(entries: &[Arc<LoadedDataset>]) -> Vec<DatasetInfo> {
    entries.iter().map(|e| dataset_info(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub index: usize,
    pub id: String,
    #[serde(serialize_with = "num::sig9")]
    pub x: f64,
    #[serde(serialize_with = "num::sig9")]
    pub y: f64,
    pub gold_label: String,
    pub pred_label: String,
    #[serde(serialize_with = "num::sig9")]
    pub confidence: f64,
    pub error: bool,
    /// Color index of the gold label's cluster.
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointsPayload {
    pub dataset: String,
    pub layout_id: String,
    pub count: usize,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointsQuery {
    pub filter: SampleFilter,
}

impl PointsQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let filter = SampleFilter::from_params(&mut p)?;
        p.finish()?;
        Ok(Self { filter })
    }
}

fn point_rows(entry: &LoadedDataset, indices: &[usize]) -> Vec<Point> {
    let cluster_of: BTreeMap<&str, usize> = entry
        .clusters
        .iter()
        .flat_map(|c| c.members.iter().map(move |m| (m.as_str(), c.color_index)))
        .collect();
    indices
        .iter()
        .map(|&i| {
            let s = entry.dataset.sample(i);
            let [x, y] = entry.layout.positions[i];
            Point {
                index: i,
                id: s.id.clone(),
                x,
                y,
                gold_label: s.gold_label.clone(),
                pred_label: s.pred_label.clone(),
                confidence: s.confidence,
                error: s.is_error(),
                cluster: cluster_of.get(s.gold_label.as_str()).copied(),
            }
        })
        .collect()
}

pub fn points(entry: &LoadedDataset, q: &PointsQuery) -> Result<PointsPayload, ApiError> {
    let idx = q.filter.apply(entry)?;
    let points = point_rows(entry, &idx);
    Ok(PointsPayload {
        dataset: entry.id.clone(),
        layout_id: entry.layout_id.clone(),
        count: points.len(),
        points,
    })
}

// ---------------------------------------------------------------------------
// Local words

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordMode {
    #[default]
    Words,
    Concepts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalWordsQuery {
    pub filter: SampleFilter,
    pub params: LwcParams,
    pub mode: WordMode,
    pub space: Space,
    /// Second-stage parameters for concepts; the word-stage ones when absent.
    pub concept_params: Option<LwcParams>,
}

impl Default for LocalWordsQuery {
    fn default() -> Self {
        Self {
            filter: SampleFilter::default(),
            params: LwcParams::default(),
            mode: WordMode::Words,
            space: Space::Layout,
            concept_params: None,
        }
    }
}

impl LocalWordsQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let filter = SampleFilter::from_params(&mut p)?;
        let d = LwcParams::default();
        let params = LwcParams {
            freq_threshold: p.parse("freq")?.unwrap_or(d.freq_threshold),
            locality_max: p.parse("locality")?.unwrap_or(d.locality_max),
            locality_quantile: p.parse("quantile")?.unwrap_or(d.locality_quantile),
            ignore_stopwords: p.choice("stopwords", &STOPWORD_MODES)?.unwrap_or(false),
        };
        let mode = p
            .choice("mode", &[("words", WordMode::Words), ("concepts", WordMode::Concepts)])?
            .unwrap_or_default();
        let space = p
            .choice("space", &[("layout", Space::Layout), ("embedding", Space::Embedding)])?
            .unwrap_or_default();
        let concept_freq: Option<usize> = p.parse("concept_freq")?;
        let concept_locality: Option<f64> = p.parse("concept_locality")?;
        let concept_params = (concept_freq.is_some() || concept_locality.is_some()).then(|| LwcParams {
            freq_threshold: concept_freq.unwrap_or(params.freq_threshold),
            locality_max: concept_locality.unwrap_or(params.locality_max),
            ..params.clone()
        });
        p.finish()?;
        Ok(Self {
            filter,
            params,
            mode,
            space,
            concept_params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWordRow {
    pub word: String,
    #[serde(serialize_with = "num::sig9")]
    pub x: f64,
    #[serde(serialize_with = "num::sig9")]
    pub y: f64,
    pub frequency: usize,
    #[serde(serialize_with = "num::sig9")]
    pub locality: f64,
    #[serde(serialize_with = "num::sig9")]
    pub scale_hint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWordsPayload {
    pub dataset: String,
    pub layout_id: String,
    pub mode: WordMode,
    pub space: Space,
    pub freq: usize,
    #[serde(serialize_with = "num::sig9")]
    pub locality: f64,
    #[serde(serialize_with = "num::sig9")]
    pub quantile: f64,
    pub stopwords: &'static str,
    pub sample_count: usize,
    pub words: Vec<LocalWordRow>,
}

fn run_lwc(index: &OccurrenceIndex, entry: &LoadedDataset, q: &LocalWordsQuery) -> Result<Vec<LocalWord>, ApiError> {
    let result = match q.mode {
        WordMode::Words => local_words(index, &q.params),
        WordMode::Concepts => local_concepts(
            index,
            entry.dataset.lexicon(),
            &q.params,
            q.concept_params.as_ref().unwrap_or(&q.params),
        ),
    };
    result.map_err(|e| ApiError::invalid(e.to_string()))
}

pub fn local_words_payload(entry: &LoadedDataset, q: &LocalWordsQuery) -> Result<LocalWordsPayload, ApiError> {
    let region = q.filter.region.clone();
    let scope = SampleFilter {
        region: None,
        ..q.filter.clone()
    }
    .apply(entry)?;
    let build = |space| {
        build_index_for(&entry.dataset, &entry.layout, &scope, region.as_ref(), space)
            .map_err(|e| ApiError::new("internal", e.to_string()))
    };
    let index = build(q.space)?;
    let found = run_lwc(&index, entry, q)?;

    let rows = match q.space {
        Space::Layout => found
            .into_iter()
            .map(|w| LocalWordRow {
                x: w.position[0],
                y: w.position[1],
                word: w.word,
                frequency: w.frequency,
                locality: w.locality,
                scale_hint: w.scale_hint,
            })
            .collect(),
        Space::Embedding => {
            // place each item at the geometric median of its occurrences on the map
            let map_index = build(Space::Layout)?;
            let contributing: BTreeMap<String, Vec<String>> = match q.mode {
                WordMode::Words => found.iter().map(|w| (w.word.clone(), vec![w.word.clone()])).collect(),
                WordMode::Concepts => {
                    let mut m: BTreeMap<String, Vec<String>> = BTreeMap::new();
                    for w in local_words(&index, &q.params).map_err(|e| ApiError::invalid(e.to_string()))? {
                        for c in entry.dataset.lexicon().concepts(&w.word) {
                            m.entry(c.clone()).or_default().push(w.word.clone());
                        }
                    }
                    m
                }
            };
            found
                .into_iter()
                .map(|w| {
                    let occ: Vec<&[f64]> = contributing[&w.word]
                        .iter()
                        .flat_map(|word| map_index.occurrences(word))
                        .collect();
                    let c = geometric_median(&occ);
                    LocalWordRow {
                        x: c[0],
                        y: c[1],
                        word: w.word,
                        frequency: w.frequency,
                        locality: w.locality,
                        scale_hint: w.scale_hint,
                    }
                })
                .collect()
        }
    };
    let sample_count = match &region {
        Some(r) => scope.iter().filter(|&&i| r.contains(entry.layout.positions[i])).count(),
        None => scope.len(),
    };
    Ok(LocalWordsPayload {
        dataset: entry.id.clone(),
        layout_id: entry.layout_id.clone(),
        mode: q.mode,
        space: q.space,
        freq: q.params.freq_threshold,
        locality: q.params.locality_max,
        quantile: q.params.locality_quantile,
        stopwords: if q.params.ignore_stopwords { "ignore" } else { "keep" },
        sample_count,
        words: rows,
    })
}

// ---------------------------------------------------------------------------
// Ranked lists

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ListsQuery {
    pub filter: SampleFilter,
    pub ignore_stopwords: bool,
    pub limit: Option<usize>,
}

impl ListsQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let filter = SampleFilter::from_params(&mut p)?;
        let ignore_stopwords = p.choice("stopwords", &STOPWORD_MODES)?.unwrap_or(false);
        let limit = p.parse("limit")?;
        p.finish()?;
        Ok(Self {
            filter,
            ignore_stopwords,
            limit,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub item: String,
    pub count: usize,
    #[serde(serialize_with = "num::sig9")]
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ListsPayload {
    pub dataset: String,
    pub sample_count: usize,
    pub words: Vec<RankedItem>,
    pub concepts: Vec<RankedItem>,
    pub gold_labels: Vec<RankedItem>,
    pub pred_labels: Vec<RankedItem>,
}

fn ranked(counts: BTreeMap<String, usize>, limit: Option<usize>) -> Vec<RankedItem> {
    let mut out: Vec<RankedItem> = crate::labels::ranked_shares(counts)
        .into_iter()
        .map(|s| RankedItem {
            item: s.label,
            count: s.count,
            share: s.share,
        })
        .collect();
    if let Some(n) = limit {
        out.truncate(n);
    }
    out
}

pub fn lists(entry: &LoadedDataset, q: &ListsQuery) -> Result<ListsPayload, ApiError> {
    let idx = q.filter.apply(entry)?;
    let count = |kind| ranked(count_items(&entry.dataset, &idx, kind, q.ignore_stopwords), q.limit);
    Ok(ListsPayload {
        dataset: entry.id.clone(),
        sample_count: idx.len(),
        words: count(ItemKind::Words),
        concepts: count(ItemKind::Concepts),
        gold_labels: count(ItemKind::Labels),
        pred_labels: count(ItemKind::PredLabels),
    })
}

// ---------------------------------------------------------------------------
// Confusions, clusters, hulls

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionsQuery {
    pub sort: ConfusionSort,
    pub secondary: Option<ConfusionSort>,
    pub confidence: Option<ConfidenceBand>,
}

impl Default for ConfusionsQuery {
    fn default() -> Self {
        Self {
            sort: ConfusionSort::Freq,
            secondary: None,
            confidence: None,
        }
    }
}

const SORT_KEYS: [(&str, ConfusionSort); 3] = [
    ("freq", ConfusionSort::Freq),
    ("gold", ConfusionSort::Gold),
    ("pred", ConfusionSort::Pred),
];

impl ConfusionsQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let sort = p.choice("sort", &SORT_KEYS)?.unwrap_or(ConfusionSort::Freq);
        let secondary = p.choice("secondary", &SORT_KEYS)?;
        let confidence = band_from(p.parse("conf_lo")?, p.parse("conf_hi")?)?;
        p.finish()?;
        Ok(Self {
            sort,
            secondary,
            confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionsPayload {
    pub dataset: String,
    pub sort: ConfusionSort,
    pub secondary: Option<ConfusionSort>,
    pub total_errors: usize,
    pub entries: Vec<ConfusionEntry>,
    pub error_shares: ErrorShares,
}

pub fn confusions(entry: &LoadedDataset, q: &ConfusionsQuery) -> Result<ConfusionsPayload, ApiError> {
    let mut entries = match q.confidence {
        None => entry.explain.confusions.clone(),
        Some(b) => crate::labels::confusion_table(&entry.dataset, Some(b)),
    };
    sort_confusions(&mut entries, q.sort, q.secondary);
    Ok(ConfusionsPayload {
        dataset: entry.id.clone(),
        sort: q.sort,
        secondary: q.secondary,
        total_errors: entries.iter().map(|e| e.frequency).sum(),
        entries,
        error_shares: error_shares(&entry.dataset),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClustersPayload {
    pub dataset: String,
    #[serde(serialize_with = "num::sig9")]
    pub cut: f64,
    pub clusters: Vec<LabelCluster>,
}

pub fn parse_cut(mut p: Params) -> Result<f64, ApiError> {
    let cut = p.parse("cut")?.unwrap_or(DEFAULT_CUT);
    p.finish()?;
    Ok(cut)
}

pub fn label_clusters(entry: &LoadedDataset, cut: f64) -> Result<ClustersPayload, ApiError> {
    let clusters = if cut == entry.cluster_cut && !entry.clusters.is_empty() {
        entry.clusters.clone()
    } else {
        cluster_labels(&entry.prototypes, cut).map_err(|e| ApiError::invalid(e.to_string()))?
    };
    Ok(ClustersPayload {
        dataset: entry.id.clone(),
        cut,
        clusters,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HullsQuery {
    pub labels: Option<BTreeSet<String>>,
    /// Group by predicted instead of gold label.
    pub by_pred: bool,
}

impl HullsQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let labels = p.list("labels").map(|l| l.into_iter().collect());
        let by_pred = p.choice("field", &[("gold", false), ("pred", true)])?.unwrap_or(false);
        p.finish()?;
        Ok(Self { labels, by_pred })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hull {
    pub label: String,
    pub count: usize,
    #[serde(serialize_with = "num::sig9_points")]
    pub vertices: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullsPayload {
    pub dataset: String,
    pub layout_id: String,
    pub field: &'static str,
    pub hulls: Vec<Hull>,
}

pub fn hulls(entry: &LoadedDataset, q: &HullsQuery) -> Result<HullsPayload, ApiError> {
    let labels: Vec<String> = match &q.labels {
        Some(l) => {
            check_labels(entry, l)?;
            l.iter().cloned().collect()
        }
        None => entry.dataset.label_set().to_vec(),
    };
    let hulls = labels
        .into_iter()
        .map(|label| {
            let pts: Vec<Point2> = entry
                .dataset
                .samples()
                .iter()
                .enumerate()
                .filter(|(_, s)| if q.by_pred { s.pred_label == label } else { s.gold_label == label })
                .map(|(i, _)| entry.layout.positions[i])
                .collect();
            Hull {
                count: pts.len(),
                vertices: convex_hull(&pts),
                label,
            }
        })
        .collect();
    Ok(HullsPayload {
        dataset: entry.id.clone(),
        layout_id: entry.layout_id.clone(),
        field: if q.by_pred { "pred" } else { "gold" },
        hulls,
    })
}

// ---------------------------------------------------------------------------
// Explanations

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainQuery {
    pub contrast_label: Option<String>,
    pub tau: f64,
    /// Empty selects the default metrics.
    pub metrics: Vec<String>,
}

impl Default for ExplainQuery {
    fn default() -> Self {
        Self {
            contrast_label: None,
            tau: DEFAULT_TAU,
            metrics: Vec::new(),
        }
    }
}

impl ExplainQuery {
    pub fn from_params(mut p: Params) -> Result<Self, ApiError> {
        let contrast_label = p.take("contrast_label");
        let tau = p.parse("tau")?.unwrap_or(DEFAULT_TAU);
        let metrics = p.list("metrics").unwrap_or_default();
        p.finish()?;
        Ok(Self {
            contrast_label,
            tau,
            metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationPayload {
    pub dataset: String,
    pub sample_id: String,
    /// Metric names in stacking order.
    pub metrics: Vec<String>,
    pub importance: ImportanceProfile,
    pub triple: ContrastTriple,
    pub graph: RelationGraph,
    pub summary: Summary,
}

pub fn explanation(entry: &LoadedDataset, sample_id: &str, q: &ExplainQuery) -> Result<ExplanationPayload, ApiError> {
    let ds = &entry.dataset;
    if ds.index_of(sample_id).is_none() {
        return Err(ApiError::new(
            "sample_not_found",
            format!("sample {sample_id:?} is not in dataset {:?}", entry.id),
        ));
    }
    let importance = vifi(ds, &entry.explain, sample_id, &q.metrics)?;
    let triple = select_contrast(ds, &entry.explain, sample_id, q.contrast_label.as_deref())?;
    let graph = relation_graph(ds, &triple, q.tau)?;
    let summary = summarize(&triple, &graph, &importance);
    Ok(ExplanationPayload {
        dataset: entry.id.clone(),
        sample_id: sample_id.to_string(),
        metrics: importance.metric_names().into_iter().map(str::to_string).collect(),
        importance,
        triple,
        graph,
        summary,
    })
}

// ---------------------------------------------------------------------------
// Comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    /// Dataset for sides that do not name one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub side_a: GroupSelector,
    pub side_b: GroupSelector,
    #[serde(default)]
    pub item_kind: ItemKind,
    #[serde(default = "keep")]
    pub stopwords: String,
}

fn keep() -> String {
    "keep".into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidePoint {
    pub id: String,
    #[serde(serialize_with = "num::sig9")]
    pub x: f64,
    #[serde(serialize_with = "num::sig9")]
    pub y: f64,
}

/// One side of a comparison: the selector echoed back, the layout the
/// side is drawn on and its members' positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSide {
    pub selector: GroupSelector,
    pub dataset: String,
    pub layout_id: String,
    pub sample_count: usize,
    pub points: Vec<SidePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparePayload {
    pub item_kind: ItemKind,
    pub stopwords: String,
    #[serde(serialize_with = "num::sig9")]
    pub z_crit: f64,
    pub side_a: CompareSide,
    pub side_b: CompareSide,
    pub items: Vec<DivergenceItem>,
}

fn side(
    selector: &GroupSelector,
    default: Option<&str>,
    name: &'static str,
    lookup: &dyn Fn(&str) -> Option<Arc<LoadedDataset>>,
) -> Result<(Arc<LoadedDataset>, Vec<usize>, CompareSide), ApiError> {
    let id = selector
        .dataset
        .as_deref()
        .or(default)
        .ok_or_else(|| ApiError::invalid(format!("side {name} names no dataset")))?;
    let entry = lookup(id).ok_or_else(|| ApiError::dataset_not_found(id))?;
    for labels in [&selector.gold_labels, &selector.pred_labels].into_iter().flatten() {
        check_labels(&entry, labels)?;
    }
    let idx = resolve_group(&entry.dataset, &entry.layout, selector, name)?;
    let points = idx
        .iter()
        .map(|&i| SidePoint {
            id: entry.dataset.sample(i).id.clone(),
            x: entry.layout.positions[i][0],
            y: entry.layout.positions[i][1],
        })
        .collect();
    let info = CompareSide {
        selector: selector.clone(),
        dataset: entry.id.clone(),
        layout_id: entry.layout_id.clone(),
        sample_count: idx.len(),
        points,
    };
    Ok((entry, idx, info))
}

/// Resolves both sides (each on its own dataset's layout) without
/// computing statistics.
pub fn dual_layout(
    req: &CompareRequest,
    lookup: &dyn Fn(&str) -> Option<Arc<LoadedDataset>>,
) -> Result<(CompareSide, CompareSide), ApiError> {
    let (_, _, a) = side(&req.side_a, req.dataset.as_deref(), "a", lookup)?;
    let (_, _, b) = side(&req.side_b, req.dataset.as_deref(), "b", lookup)?;
    Ok((a, b))
}

pub fn compare(
    req: &CompareRequest,
    lookup: &dyn Fn(&str) -> Option<Arc<LoadedDataset>>,
) -> Result<ComparePayload, ApiError> {
    let ignore = STOPWORD_MODES
        .iter()
        .find(|(k, _)| *k == req.stopwords)
        .map(|(_, v)| *v)
        .ok_or_else(|| ApiError::invalid(format!("stopwords must be keep or ignore, got {:?}", req.stopwords)))?;
    let (ea, ia, side_a) = side(&req.side_a, req.dataset.as_deref(), "a", lookup)?;
    let (eb, ib, side_b) = side(&req.side_b, req.dataset.as_deref(), "b", lookup)?;
    let items = divergence((&ea.dataset, &ia), (&eb.dataset, &ib), req.item_kind, ignore)?;
    Ok(ComparePayload {
        item_kind: req.item_kind,
        stopwords: req.stopwords.clone(),
        z_crit: crate::compare::Z_CRIT,
        side_a,
        side_b,
        items,
    })
}

// ---------------------------------------------------------------------------
// CSV

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn f(x: f64) -> String {
    num::round_sig9(x).to_string()
}

/// Tabular rendering of a payload.
pub trait ToCsv {
    fn to_csv(&self) -> String;
}

impl ToCsv for Vec<DatasetInfo> {
    fn to_csv(&self) -> String {
        csv_string(
            &["id", "sample_count", "label_count", "dim", "layout_id"],
            self.iter().map(|d| {
                vec![
                    d.id.clone(),
                    d.sample_count.to_string(),
                    d.label_count.to_string(),
                    d.dim.to_string(),
                    d.layout_id.clone(),
                ]
            }),
        )
    }
}

impl ToCsv for PointsPayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["index", "id", "x", "y", "gold_label", "pred_label", "confidence", "error", "cluster"],
            self.points.iter().map(|p| {
                vec![
                    p.index.to_string(),
                    p.id.clone(),
                    f(p.x),
                    f(p.y),
                    p.gold_label.clone(),
                    p.pred_label.clone(),
                    f(p.confidence),
                    p.error.to_string(),
                    p.cluster.map(|c| c.to_string()).unwrap_or_default(),
                ]
            }),
        )
    }
}

impl ToCsv for LocalWordsPayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["word", "x", "y", "frequency", "locality", "scale_hint"],
            self.words.iter().map(|w| {
                vec![
                    w.word.clone(),
                    f(w.x),
                    f(w.y),
                    w.frequency.to_string(),
                    f(w.locality),
                    f(w.scale_hint),
                ]
            }),
        )
    }
}

impl ToCsv for ListsPayload {
    fn to_csv(&self) -> String {
        let groups = [
            ("word", &self.words),
            ("concept", &self.concepts),
            ("gold_label", &self.gold_labels),
            ("pred_label", &self.pred_labels),
        ];
        csv_string(
            &["kind", "item", "count", "share"],
            groups.into_iter().flat_map(|(kind, items)| {
                items
                    .iter()
                    .map(move |i| vec![kind.to_string(), i.item.clone(), i.count.to_string(), f(i.share)])
            }),
        )
    }
}

impl ToCsv for ConfusionsPayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["gold", "pred", "frequency"],
            self.entries
                .iter()
                .map(|e| vec![e.gold.clone(), e.pred.clone(), e.frequency.to_string()]),
        )
    }
}

impl ToCsv for ClustersPayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["cluster", "label", "color_index", "color"],
            self.clusters.iter().flat_map(|c| {
                c.members
                    .iter()
                    .map(move |m| vec![c.id.to_string(), m.clone(), c.color_index.to_string(), c.color.clone()])
            }),
        )
    }
}

impl ToCsv for HullsPayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["label", "vertex", "x", "y"],
            self.hulls.iter().flat_map(|h| {
                h.vertices
                    .iter()
                    .enumerate()
                    .map(move |(k, v)| vec![h.label.clone(), k.to_string(), f(v[0]), f(v[1])])
            }),
        )
    }
}

impl ToCsv for ExplanationPayload {
    fn to_csv(&self) -> String {
        let mut header = vec!["index", "token"];
        header.extend(self.metrics.iter().map(String::as_str));
        header.extend(["closest_contribution", "contrast_contribution"]);
        let rows = self.importance.tokens.iter().enumerate().map(|(i, t)| {
            let mut row = vec![i.to_string(), t.clone()];
            row.extend(self.importance.metrics.iter().map(|m| f(m.scores[i])));
            row.push(f(self.graph.closest.query[i]));
            row.push(f(self.graph.contrast.query[i]));
            row
        });
        csv_string(&header, rows)
    }
}

impl ToCsv for ComparePayload {
    fn to_csv(&self) -> String {
        csv_string(
            &["item", "kind", "count_a", "count_b", "z", "verdict"],
            self.items.iter().map(|d| {
                vec![
                    d.item.clone(),
                    variant(&d.kind),
                    d.count_a.to_string(),
                    d.count_b.to_string(),
                    f(d.z),
                    variant(&d.verdict),
                ]
            }),
        )
    }
}

/// Serialized name of a unit enum variant.
fn variant<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
