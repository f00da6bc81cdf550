//! `landscape` command line.
//!
//! Exit status: 0 on success, 2 when inputs or parameters are invalid, 1 on
//! runtime failures, 64 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landscape_core::api::{self, ApiError, CompareRequest, Params, ToCsv};
use landscape_core::compare::{GroupSelector, ItemKind};
use landscape_core::geometry::{ProjectionMethod, ProjectionParams, DEFAULT_SEED};
use landscape_core::ingest::CorpusSources;
use landscape_core::registry::LoadedDataset;
use landscape_core::store::{Manifest, Store, StoreError};
use landscape_server::{load_store, serve, ServeConfig};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "landscape", version, about = "Explore a text classifier's embedding landscape")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate input files and add them to a store.
    Ingest(IngestArgs),
    /// Compute and save the layout and derived caches.
    Precompute(StoreArgs),
    /// Serve the HTTP API (and optionally a static UI bundle).
    Serve(ServeArgs),
    /// Write any query result to a file.
    Export {
        /// Destination file; `-` for standard output.
        #[arg(long)]
        out: PathBuf,
        #[command(subcommand)]
        query: Query,
    },
    #[command(flatten)]
    Query(Query),
}

#[derive(Debug, Subcommand)]
enum Query {
    /// List datasets in the store.
    Datasets(QueryArgs),
    /// Projected sample positions.
    Points(PointsArgs),
    /// Localized words or concepts.
    LocalWords(LocalWordsArgs),
    /// Ranked words, concepts and labels with shares.
    Lists(ListsArgs),
    /// Confusion table and error shares.
    Confusions(ConfusionsArgs),
    /// Label clusters by prototype similarity.
    Clusters(ClustersArgs),
    /// Convex hulls per label.
    Hulls(HullsArgs),
    /// Explain one sample.
    Explain(ExplainArgs),
    /// Compare two sample groups.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Store directory.
    #[arg(long, env = "LANDSCAPE_STORE")]
    store: PathBuf,
    /// Dataset id; optional when the store holds exactly one.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    sample_emb: Option<PathBuf>,
    #[arg(long)]
    token_emb: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    importance: Option<PathBuf>,
    /// Stopword list replacing the built-in one.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Store directory.
    #[arg(long, env = "LANDSCAPE_STORE")]
    out: PathBuf,
    #[arg(long, default_value = "default")]
    id: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Tsne)]
    method: MethodArg,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long)]
    pca_dims: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Pca,
    Tsne,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "LANDSCAPE_STORE")]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory with the built UI bundle.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    errors_only: bool,
    #[arg(long)]
    conf_lo: Option<f64>,
    #[arg(long)]
    conf_hi: Option<f64>,
    /// Comma-separated label ids.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, value_parser = ["gold", "pred", "either"])]
    label_field: Option<String>,
    /// Flat comma-separated coordinates: x1,y1,x2,y2[,...].
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
}

#[derive(Debug, Args)]
struct PointsArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Args)]
struct LocalWordsArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Words need more occurrences than this.
    #[arg(long)]
    freq: Option<usize>,
    #[arg(long)]
    locality: Option<f64>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long, value_parser = ["words", "concepts"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["keep", "ignore"])]
    stopwords: Option<String>,
    #[arg(long, value_parser = ["layout", "embedding"])]
    space: Option<String>,
    #[arg(long)]
    concept_freq: Option<usize>,
    #[arg(long)]
    concept_locality: Option<f64>,
}

#[derive(Debug, Args)]
struct ListsArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, value_parser = ["keep", "ignore"])]
    stopwords: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct ConfusionsArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, value_parser = ["freq", "gold", "pred"])]
    sort: Option<String>,
    #[arg(long, value_parser = ["freq", "gold", "pred"])]
    secondary: Option<String>,
    #[arg(long)]
    conf_lo: Option<f64>,
    #[arg(long)]
    conf_hi: Option<f64>,
}

#[derive(Debug, Args)]
struct ClustersArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    cut: Option<f64>,
}

#[derive(Debug, Args)]
struct HullsArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, value_parser = ["gold", "pred"])]
    field: Option<String>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Sample id.
    #[arg(long)]
    sample: String,
    #[arg(long)]
    contrast_label: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Comma-separated metric names in stacking order.
    #[arg(long)]
    metrics: Option<String>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// JSON request body (as posted to /api/compare); `-` reads stdin.
    /// Conflicts with the side flags.
    #[arg(long, conflicts_with_all = ["a_gold", "a_pred", "b_gold", "b_pred", "a_dataset", "b_dataset", "a_errors", "b_errors", "a_region", "b_region", "a_conf", "b_conf", "kind"])]
    request: Option<String>,
    #[arg(long)]
    a_dataset: Option<String>,
    #[arg(long)]
    b_dataset: Option<String>,
    /// Comma-separated gold labels for side A.
    #[arg(long)]
    a_gold: Option<String>,
    #[arg(long)]
    b_gold: Option<String>,
    /// Comma-separated predicted labels for side A.
    #[arg(long)]
    a_pred: Option<String>,
    #[arg(long)]
    b_pred: Option<String>,
    /// `true` for errors only, `false` for correct predictions only.
    #[arg(long)]
    a_errors: Option<bool>,
    #[arg(long)]
    b_errors: Option<bool>,
    #[arg(long, allow_hyphen_values = true)]
    a_region: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b_region: Option<String>,
    /// Confidence band `lo,hi`.
    #[arg(long)]
    a_conf: Option<String>,
    #[arg(long)]
    b_conf: Option<String>,
    #[arg(long, value_parser = ["words", "concepts", "labels", "pred_labels"])]
    kind: Option<String>,
    #[arg(long, value_parser = ["keep", "ignore"])]
    stopwords: Option<String>,
}

/// A failure with its exit status.
#[derive(Debug)]
struct Failure {
    status: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            status: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            status: 1,
            message: message.into(),
        }
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let status = if e.status < 500 { 2 } else { 1 };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Self {
            status: if e.is_validation() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

type Pairs = Vec<(&'static str, String)>;

fn push<T: ToString>(out: &mut Pairs, name: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((name, v.to_string()));
    }
}

impl FilterArgs {
    fn pairs(&self, out: &mut Pairs) {
        if self.errors_only {
            out.push(("errors_only", "true".into()));
        }
        push(out, "conf_lo", &self.conf_lo);
        push(out, "conf_hi", &self.conf_hi);
        push(out, "labels", &self.labels);
        push(out, "label_field", &self.label_field);
        push(out, "region", &self.region);
    }
}

fn params(pairs: Pairs) -> Params {
    Params::new(pairs)
}

impl StoreArgs {
    fn store(&self) -> Store {
        Store::open(&self.store)
    }

    fn dataset_id(&self) -> Result<String, Failure> {
        if let Some(id) = &self.dataset {
            return Ok(id.clone());
        }
        let ids = self.store().dataset_ids()?;
        match ids.as_slice() {
            [one] => Ok(one.clone()),
            [] => Err(Failure::validation(format!("store {} holds no datasets", self.store.display()))),
            many => Err(Failure::validation(format!(
                "store holds several datasets ({}); pass --dataset",
                many.join(", ")
            ))),
        }
    }

    fn load(&self) -> Result<Arc<LoadedDataset>, Failure> {
        let id = self.dataset_id()?;
        load_entry(&self.store(), &id)
    }
}

fn load_entry(store: &Store, id: &str) -> Result<Arc<LoadedDataset>, Failure> {
    let stored = match store.load(id) {
        Err(StoreError::NotFound(_)) => return Err(ApiError::dataset_not_found(id).into()),
        other => other?,
    };
    if !stored.precomputed {
        eprintln!("note: {id} has no up-to-date precomputed layout; computing it in memory");
    }
    Ok(Arc::new(LoadedDataset::new(stored)))
}

/// Rendered output of a query.
struct Rendered {
    json: String,
    csv: String,
}

fn render<T: Serialize + ToCsv>(payload: T) -> Rendered {
    Rendered {
        json: api::to_json(&payload),
        csv: payload.to_csv(),
    }
}

fn split_list(v: &Option<String>) -> Option<std::collections::BTreeSet<String>> {
    v.as_ref()
        .map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
}

fn selector(
    dataset: &Option<String>,
    gold: &Option<String>,
    pred: &Option<String>,
    errors: Option<bool>,
    region: &Option<String>,
    conf: &Option<String>,
) -> Result<GroupSelector, Failure> {
    let region = region.as_deref().map(api::parse_region).transpose()?;
    let confidence = match conf {
        Some(c) => {
            let v: Vec<f64> = c
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::validation(format!("confidence band {c:?} is not lo,hi")))?;
            match v.as_slice() {
                [lo, hi] => Some([*lo, *hi]),
                _ => return Err(Failure::validation(format!("confidence band {c:?} is not lo,hi"))),
            }
        }
        None => None,
    };
    Ok(GroupSelector {
        dataset: dataset.clone(),
        gold_labels: split_list(gold),
        pred_labels: split_list(pred),
        region,
        errors,
        confidence,
    })
}

impl CompareArgs {
    fn request(&self) -> Result<CompareRequest, Failure> {
        if let Some(src) = &self.request {
            let text = if src == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                s
            } else if src.trim_start().starts_with('{') {
                src.clone()
            } else {
                fs::read_to_string(src)?
            };
            return serde_json::from_str(&text).map_err(|e| ApiError::new("invalid_body", e.to_string()).into());
        }
        let kind = match self.kind.as_deref() {
            None | Some("words") => ItemKind::Words,
            Some("concepts") => ItemKind::Concepts,
            Some("labels") => ItemKind::Labels,
            Some(_) => ItemKind::PredLabels,
        };
        Ok(CompareRequest {
            dataset: None,
            side_a: selector(&self.a_dataset, &self.a_gold, &self.a_pred, self.a_errors, &self.a_region, &self.a_conf)?,
            side_b: selector(&self.b_dataset, &self.b_gold, &self.b_pred, self.b_errors, &self.b_region, &self.b_conf)?,
            item_kind: kind,
            stopwords: self.stopwords.clone().unwrap_or_else(|| "keep".into()),
        })
    }
}

fn run_compare(args: &CompareArgs) -> Result<Rendered, Failure> {
    let mut req = args.request()?;
    let store = args.query.store.store();
    let needs_default = req.side_a.dataset.is_none() || req.side_b.dataset.is_none();
    if req.dataset.is_none() && needs_default {
        req.dataset = Some(args.query.store.dataset_id()?);
    }
    let mut loaded: BTreeMap<String, Arc<LoadedDataset>> = BTreeMap::new();
    let ids = [&req.dataset, &req.side_a.dataset, &req.side_b.dataset];
    for id in ids.into_iter().flatten() {
        if !loaded.contains_key(id) {
            match load_entry(&store, id) {
                Ok(e) => {
                    loaded.insert(id.clone(), e);
                }
                Err(f) if f.status == 2 => {}
                Err(f) => return Err(f),
            }
        }
    }
    Ok(render(api::compare(&req, &|id| loaded.get(id).cloned())?))
}

fn run_query(query: &Query) -> Result<(Rendered, Format), Failure> {
    let mut pairs: Pairs = Vec::new();
    let out = match query {
        Query::Datasets(a) => {
            let store = a.store.store();
            let mut entries = Vec::new();
            for id in store.dataset_ids()? {
                entries.push(load_entry(&store, &id)?);
            }
            (render(api::datasets(&entries)), a.format)
        }
        Query::Points(a) => {
            a.filter.pairs(&mut pairs);
            let q = api::PointsQuery::from_params(params(pairs))?;
            (render(api::points(&*a.query.store.load()?, &q)?), a.query.format)
        }
        Query::LocalWords(a) => {
            a.filter.pairs(&mut pairs);
            push(&mut pairs, "freq", &a.freq);
            push(&mut pairs, "locality", &a.locality);
            push(&mut pairs, "quantile", &a.quantile);
            push(&mut pairs, "mode", &a.mode);
            push(&mut pairs, "stopwords", &a.stopwords);
            push(&mut pairs, "space", &a.space);
            push(&mut pairs, "concept_freq", &a.concept_freq);
            push(&mut pairs, "concept_locality", &a.concept_locality);
            let q = api::LocalWordsQuery::from_params(params(pairs))?;
            (render(api::local_words_payload(&*a.query.store.load()?, &q)?), a.query.format)
        }
        Query::Lists(a) => {
            a.filter.pairs(&mut pairs);
            push(&mut pairs, "stopwords", &a.stopwords);
            push(&mut pairs, "limit", &a.limit);
            let q = api::ListsQuery::from_params(params(pairs))?;
            (render(api::lists(&*a.query.store.load()?, &q)?), a.query.format)
        }
        Query::Confusions(a) => {
            push(&mut pairs, "sort", &a.sort);
            push(&mut pairs, "secondary", &a.secondary);
            push(&mut pairs, "conf_lo", &a.conf_lo);
            push(&mut pairs, "conf_hi", &a.conf_hi);
            let q = api::ConfusionsQuery::from_params(params(pairs))?;
            (render(api::confusions(&*a.query.store.load()?, &q)?), a.query.format)
        }
        Query::Clusters(a) => {
            push(&mut pairs, "cut", &a.cut);
            let cut = api::parse_cut(params(pairs))?;
            (render(api::label_clusters(&*a.query.store.load()?, cut)?), a.query.format)
        }
        Query::Hulls(a) => {
            push(&mut pairs, "labels", &a.labels);
            push(&mut pairs, "field", &a.field);
            let q = api::HullsQuery::from_params(params(pairs))?;
            (render(api::hulls(&*a.query.store.load()?, &q)?), a.query.format)
        }
        Query::Explain(a) => {
            push(&mut pairs, "contrast_label", &a.contrast_label);
            push(&mut pairs, "tau", &a.tau);
            push(&mut pairs, "metrics", &a.metrics);
            let q = api::ExplainQuery::from_params(params(pairs))?;
            (render(api::explanation(&*a.query.store.load()?, &a.sample, &q)?), a.query.format)
        }
        Query::Compare(a) => (run_compare(a)?, a.query.format),
    };
    Ok(out)
}

fn emit(rendered: &Rendered, format: Format, out: &mut dyn Write) -> io::Result<()> {
    match format {
        Format::Json => writeln!(out, "{}", rendered.json),
        Format::Csv => write!(out, "{}", rendered.csv),
    }
}

fn ingest(a: &IngestArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new(
        a.id.clone(),
        CorpusSources {
            corpus: a.corpus.clone(),
            sample_embeddings: a.sample_emb.clone(),
            token_embeddings: a.token_emb.clone(),
            lexicon: a.lexicon.clone(),
            importance: a.importance.clone(),
            stopwords: a.stopwords.clone(),
        },
    );
    manifest.projection = ProjectionParams {
        method: match a.method {
            MethodArg::Pca => ProjectionMethod::Pca,
            MethodArg::Tsne => ProjectionMethod::Tsne,
        },
        perplexity: a.perplexity,
        iterations: a.iterations,
        pca_dims: a.pca_dims,
        ..ProjectionParams::default()
    };
    manifest.seed = a.seed;
    let dataset = Store::open(&a.out).ingest(&manifest)?;
    println!(
        "M={}, labels={}, d={}",
        dataset.len(),
        dataset.label_set().len(),
        dataset.embeddings().dim()
    );
    Ok(())
}

fn precompute(a: &StoreArgs) -> Result<(), Failure> {
    let id = a.dataset_id()?;
    let stored = a.store().precompute(&id)?;
    let entry = LoadedDataset::new(stored);
    let method = match entry.layout.method {
        ProjectionMethod::Pca => "pca",
        ProjectionMethod::Tsne => "tsne",
    };
    println!("{id}: layout {} ({method}, seed {})", entry.layout_id, entry.layout.seed);
    if let Some(w) = &entry.layout.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run_serve(a: &ServeArgs) -> Result<(), Failure> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::validation(format!("invalid address: {e}")))?;
    let registry = load_store(&Store::open(&a.store))?;
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving {} dataset(s) on http://{addr}", registry.list().len());
    runtime
        .block_on(serve(
            ServeConfig {
                addr,
                static_dir: a.static_dir.clone(),
            },
            registry,
        ))
        .map_err(|e| Failure::runtime(format!("cannot serve on {addr}: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Precompute(a) => precompute(a),
        Command::Serve(a) => run_serve(a),
        Command::Query(q) => {
            let (rendered, format) = run_query(q)?;
            emit(&rendered, format, &mut io::stdout().lock())?;
            Ok(())
        }
        Command::Export { out, query } => {
            let (rendered, format) = run_query(query)?;
            if out.as_os_str() == "-" {
                emit(&rendered, format, &mut io::stdout().lock())?;
            } else {
                let mut buf = Vec::new();
                emit(&rendered, format, &mut buf)?;
                fs::write(out, buf)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}
