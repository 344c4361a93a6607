//! Synthetic data generation and the repeated-run benchmark harness.
//!
//! [`generate`] writes a seeded tweet corpus (`tweets.jsonl`,
//! `users.jsonl`, `follows.csv`). The same [`GenSpec`] always yields the
//! same bytes.
//!
//! [`run_bench`] times a matrix of `(task, engine)` cells. Before any timing,
//! every cell runs once untimed; the outputs of engines that serve the same
//! task are compared and any disagreement aborts the run. Each cell is then
//! timed `repetitions` times in sequence.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Zipf};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::BuildOptions;
use crate::tasks::{self, Formula, InfluenceEngine, TaskError, TermsEngine, TermsOptions};
use crate::Workspace;

/// Repetitions per cell when none are given.
pub const DEFAULT_REPETITIONS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unknown bench cell {0:?}")]
    UnknownCell(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("engines disagree on {task}:\n{diff}")]
    Mismatch { task: String, diff: String },
    #[error("report has no results")]
    EmptyReport,
    #[error("unknown report format {0:?} (expected csv, md or svg)")]
    UnknownFormat(String),
    #[error("bad bench report: {0}")]
    BadReport(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// Generator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_tweets: u64,
    pub n_users: u64,
    pub seed: u64,
    pub vocab_size: u64,
    /// Zipf exponent of the term distribution.
    pub zipf_s: f64,
    /// Probability that an ordered pair of authors is a follow edge.
    pub follow_density: f64,
    /// Token added to every tweet, to model a topic-scoped collection.
    pub topic: Option<String>,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n_tweets: 10_000,
            n_users: 1_000,
            seed: 7,
            vocab_size: 5_000,
            zipf_s: 1.1,
            follow_density: 0.01,
            topic: None,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidSpec(m.to_string()));
        if self.n_tweets > 0 && self.n_users == 0 {
            return bad("n_users must be at least 1 when there are tweets");
        }
        if self.vocab_size == 0 {
            return bad("vocab_size must be at least 1");
        }
        if !(self.zipf_s.is_finite() && self.zipf_s > 0.0) {
            return bad("zipf_s must be positive");
        }
        if !(0.0..=1.0).contains(&self.follow_density) {
            return bad("follow_density must be within [0, 1]");
        }
        if let Some(t) = &self.topic {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return bad("topic must be a single non-empty token");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub spec: GenSpec,
    pub tweets: u64,
    pub users: u64,
    pub follows: u64,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// The most frequent ranks map to common English function words so that
/// stopword filtering has something to remove.
const HEAD_WORDS: [&str; 16] = [
    "the", "a", "of", "and", "to", "in", "is", "it", "that", "for", "on", "with", "this", "was", "show", "episode",
];

fn word(rank: u64) -> String {
    match HEAD_WORDS.get(rank as usize - 1) {
        Some(w) => (*w).to_string(),
        None => format!("w{rank}"),
    }
}

#[derive(Serialize)]
struct GenMetrics {
    impression_count: u64,
    like_count: u64,
    quote_count: u64,
    reply_count: u64,
    retweet_count: u64,
}

#[derive(Serialize)]
struct GenTweet {
    id: String,
    author_id: String,
    username: String,
    text: String,
    created_at: String,
    public_metrics: GenMetrics,
}

#[derive(Serialize)]
struct GenUser {
    id: String,
    username: String,
}

fn user_id(k: u64) -> String {
    format!("u{k}")
}

fn username(k: u64) -> String {
    format!("user{k}")
}

/// Generated corpus held in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub tweets_jsonl: String,
    pub users_jsonl: String,
    pub follows_csv: String,
    pub tweets: u64,
    pub users: u64,
    pub follows: u64,
}

fn geometric(p: f64) -> Geometric {
    Geometric::new(p).expect("constant probability is valid")
}

/// Builds the corpus for `spec` without touching the file system.
pub fn generate_corpus(spec: &GenSpec) -> Result<Corpus, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = Zipf::new(spec.vocab_size as f64, spec.zipf_s).map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    let metric_dists = [geometric(0.002), geometric(0.05), geometric(0.5), geometric(0.25), geometric(0.1)];
    let start: DateTime<Utc> = "2023-01-15T00:00:00Z".parse().expect("constant timestamp");

    let mut tweets = String::new();
    let mut authors = std::collections::BTreeSet::new();
    for i in 0..spec.n_tweets {
        let author = rng.random_range(0..spec.n_users);
        authors.insert(author);
        let n_tokens = rng.random_range(5..=20usize);
        let mut tokens: Vec<String> = Vec::with_capacity(n_tokens + 1);
        for t in 0..n_tokens {
            let mut w = word(zipf.sample(&mut rng) as u64);
            if t == 0 && rng.random_bool(0.5) {
                w = capitalize(&w);
            }
            if rng.random_bool(0.03) {
                w.push('!');
            } else if t + 1 < n_tokens && rng.random_bool(0.1) {
                w.push(',');
            }
            tokens.push(w);
        }
        if let Some(topic) = &spec.topic {
            let at = rng.random_range(0..=tokens.len());
            tokens.insert(at, topic.clone());
        }
        let mut text = tokens.join(" ");
        if rng.random_bool(0.5) {
            text.push('.');
        }
        let m: Vec<u64> = metric_dists.iter().map(|d| d.sample(&mut rng)).collect();
        let tweet = GenTweet {
            id: format!("t{i}"),
            author_id: user_id(author),
            username: username(author),
            text,
            created_at: (start + TimeDelta::seconds(37 * i as i64)).to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            public_metrics: GenMetrics {
                impression_count: m[0],
                like_count: m[1],
                quote_count: m[2],
                reply_count: m[3],
                retweet_count: m[4],
            },
        };
        tweets.push_str(&serde_json::to_string(&tweet).expect("tweet serializes"));
        tweets.push('\n');
    }

    let authors: Vec<u64> = authors.into_iter().collect();
    let mut users = String::new();
    for k in &authors {
        users.push_str(&serde_json::to_string(&GenUser { id: user_id(*k), username: username(*k) }).expect("user serializes"));
        users.push('\n');
    }

    // Follow edges: every ordered pair of distinct authors independently
    // with probability `follow_density`. Gaps between chosen pairs are
    // geometric, so sparse graphs cost time proportional to their edges.
    let mut follow_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    follow_rng.set_stream(1);
    let mut follows = String::from("src,dst\n");
    let mut n_follows = 0u64;
    let m = authors.len() as u64;
    let pairs = m.saturating_mul(m.saturating_sub(1));
    if pairs > 0 && spec.follow_density > 0.0 {
        let gap = geometric(spec.follow_density);
        let mut idx = gap.sample(&mut follow_rng);
        while idx < pairs {
            let i = idx / (m - 1);
            let r = idx % (m - 1);
            let j = if r < i { r } else { r + 1 };
            let _ = writeln!(follows, "{},{}", user_id(authors[i as usize]), user_id(authors[j as usize]));
            n_follows += 1;
            idx = match idx.checked_add(1 + gap.sample(&mut follow_rng)) {
                Some(next) => next,
                None => break,
            };
        }
    }
    Ok(Corpus {
        tweets_jsonl: tweets,
        users_jsonl: users,
        follows_csv: follows,
        tweets: spec.n_tweets,
        users: m,
        follows: n_follows,
    })
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Writes the corpus and a `manifest.json` into `out_dir`.
pub fn generate(spec: &GenSpec, out_dir: &Path) -> Result<GenManifest, BenchError> {
    let corpus = generate_corpus(spec)?;
    fs::create_dir_all(out_dir)?;
    let mut files = BTreeMap::new();
    for (name, body) in [
        ("tweets.jsonl", &corpus.tweets_jsonl),
        ("users.jsonl", &corpus.users_jsonl),
        ("follows.csv", &corpus.follows_csv),
    ] {
        fs::write(out_dir.join(name), body)?;
        files.insert(name.to_string(), hex::encode(Sha256::digest(body.as_bytes())));
    }
    let manifest = GenManifest { spec: spec.clone(), tweets: corpus.tweets, users: corpus.users, follows: corpus.follows, files };
    fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Harness

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchTask {
    Influence,
    Terms,
    Graph,
}

impl fmt::Display for BenchTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchTask::Influence => "influence",
            BenchTask::Terms => "terms",
            BenchTask::Graph => "graph",
        })
    }
}

/// One benchmark cell: a task and the engine that runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cell {
    Influence(InfluenceEngine),
    Terms(TermsEngine),
    Graph,
}

impl Cell {
    pub fn all() -> Vec<Cell> {
        let mut cells: Vec<Cell> = InfluenceEngine::ALL.into_iter().map(Cell::Influence).collect();
        cells.extend(TermsEngine::ALL.into_iter().map(Cell::Terms));
        cells.push(Cell::Graph);
        cells
    }

    pub fn task(&self) -> BenchTask {
        match self {
            Cell::Influence(_) => BenchTask::Influence,
            Cell::Terms(_) => BenchTask::Terms,
            Cell::Graph => BenchTask::Graph,
        }
    }

    pub fn engine(&self) -> String {
        match self {
            Cell::Influence(e) => e.to_string(),
            Cell::Terms(e) => e.to_string(),
            Cell::Graph => "graph".to_string(),
        }
    }

    /// Parses `all` or a comma-separated list such as
    /// `influence:cf-scan,terms:mr,graph`. A bare task name selects every
    /// engine of that task.
    pub fn parse_matrix(text: &str) -> Result<Vec<Cell>, BenchError> {
        let mut cells = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let unknown = || BenchError::UnknownCell(item.to_string());
            let (task, engine) = match item.split_once(':') {
                Some((t, e)) => (t.trim(), Some(e.trim())),
                None => (item, None),
            };
            match (task.to_ascii_lowercase().as_str(), engine) {
                ("all", None) => cells.extend(Cell::all()),
                ("influence", None) => cells.extend(InfluenceEngine::ALL.map(Cell::Influence)),
                ("influence", Some(e)) => cells.push(Cell::Influence(e.parse().map_err(|_| unknown())?)),
                ("terms", None) => cells.extend(TermsEngine::ALL.map(Cell::Terms)),
                ("terms", Some(e)) => cells.push(Cell::Terms(e.parse().map_err(|_| unknown())?)),
                ("graph", None | Some("graph")) => cells.push(Cell::Graph),
                _ => return Err(unknown()),
            }
        }
        cells.sort();
        cells.dedup();
        if cells.is_empty() {
            return Err(BenchError::UnknownCell(text.to_string()));
        }
        Ok(cells)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.task(), self.engine())
    }
}

impl FromStr for Cell {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match Cell::parse_matrix(s)?.as_slice() {
            [one] => Ok(*one),
            _ => Err(BenchError::UnknownCell(s.to_string())),
        }
    }
}

/// Inputs shared by all cells of a run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub matrix: Vec<Cell>,
    pub repetitions: usize,
    pub dataset: String,
    pub formula: Formula,
    pub terms: TermsOptions,
    /// Follows CSV text, required by the graph cell.
    pub follows_csv: Option<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            matrix: Cell::all(),
            repetitions: DEFAULT_REPETITIONS,
            dataset: "default".to_string(),
            formula: Formula::default(),
            terms: TermsOptions::default(),
            follows_csv: None,
        }
    }
}

/// Executes one cell and returns its report bytes. The harness compares
/// these bytes across engines of the same task.
pub trait CellRunner {
    fn run(&self, ws: &Workspace, config: &BenchConfig, cell: Cell) -> Result<String, BenchError>;
}

/// Runs cells on the real engines.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineRunner;

impl CellRunner for EngineRunner {
    fn run(&self, ws: &Workspace, config: &BenchConfig, cell: Cell) -> Result<String, BenchError> {
        Ok(match cell {
            Cell::Influence(engine) => tasks::influence_csv(&tasks::task_influence(ws, engine, config.formula, None)?),
            Cell::Terms(engine) => tasks::terms_csv(&tasks::task_terms(ws, engine, &config.terms)?),
            Cell::Graph => {
                let follows = config
                    .follows_csv
                    .as_deref()
                    .ok_or_else(|| BenchError::MissingInput("the graph cell needs a follows CSV".into()))?;
                let out = tasks::task_graph(ws, follows, BuildOptions::default())?;
                let mut s = out.degrees_csv();
                s.push_str(&out.components_csv());
                s
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchResult {
    pub task: BenchTask,
    pub engine: String,
    pub dataset: String,
    pub repetitions: usize,
    /// Wall-clock time of each timed run, in nanoseconds.
    pub runs_ns: Vec<u64>,
    /// Integer mean of `runs_ns`.
    pub mean_ns: u64,
}

impl BenchResult {
    pub fn new(task: BenchTask, engine: &str, dataset: &str, runs: &[Duration]) -> Self {
        let runs_ns: Vec<u64> = runs.iter().map(|d| d.as_nanos().min(u64::MAX as u128) as u64).collect();
        BenchResult {
            task,
            engine: engine.to_string(),
            dataset: dataset.to_string(),
            repetitions: runs.len(),
            mean_ns: mean_ns(&runs_ns),
            runs_ns,
        }
    }

    pub fn runs(&self) -> Vec<Duration> {
        self.runs_ns.iter().map(|n| Duration::from_nanos(*n)).collect()
    }

    pub fn mean(&self) -> Duration {
        Duration::from_nanos(self.mean_ns)
    }

    /// Paper reference time in seconds for this cell at the 500K scale.
    pub fn paper_reference_s(&self) -> Option<u64> {
        paper_reference(self.task, &self.engine)
    }
}

/// Arithmetic mean in whole nanoseconds (rounded down); 0 for no runs.
pub fn mean_ns(runs: &[u64]) -> u64 {
    if runs.is_empty() {
        return 0;
    }
    (runs.iter().map(|r| *r as u128).sum::<u128>() / runs.len() as u128) as u64
}

/// Approximate timings reported for the 500K-tweet dataset on a 3-node
/// cluster. They are shown for orientation only.
pub fn paper_reference(task: BenchTask, engine: &str) -> Option<u64> {
    match (task, engine) {
        (BenchTask::Influence, "sql-external") => Some(11),
        (BenchTask::Influence, "cf-scan") => Some(16),
        (BenchTask::Terms, "mr") => Some(28),
        (BenchTask::Graph, _) => Some(42),
        _ => None,
    }
}

/// Reported ingest time for the 5M-tweet dataset, in seconds.
pub const PAPER_INGEST_5M_S: u64 = 7 * 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub cores: usize,
    pub memory_bytes: Option<u64>,
    pub version: String,
    pub os: String,
}

impl Environment {
    pub fn detect() -> Self {
        let memory_bytes = fs::read_to_string("/proc/meminfo").ok().and_then(|s| {
            let line = s.lines().find(|l| l.starts_with("MemTotal:"))?;
            let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
            Some(kb * 1024)
        });
        Environment {
            cores: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            memory_bytes,
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchReport {
    pub results: Vec<BenchResult>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn new(mut results: Vec<BenchResult>, environment: Environment) -> Self {
        results.sort_by(|a, b| (a.task, &a.engine, &a.dataset).cmp(&(b.task, &b.engine, &b.dataset)));
        BenchReport { results, environment }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::BadReport(e.to_string()))
    }
}

pub fn run_bench(ws: &Workspace, config: &BenchConfig) -> Result<BenchReport, BenchError> {
    run_bench_with(ws, config, &EngineRunner)
}

/// Like [`run_bench`] with a custom cell runner.
pub fn run_bench_with(ws: &Workspace, config: &BenchConfig, runner: &dyn CellRunner) -> Result<BenchReport, BenchError> {
    let mut cells = config.matrix.clone();
    cells.sort();
    cells.dedup();
    if config.repetitions == 0 {
        return Err(BenchError::InvalidSpec("repetitions must be at least 1".into()));
    }

    // untimed pass: warm-up and cross-engine check
    let mut outputs: BTreeMap<BenchTask, Vec<(Cell, String)>> = BTreeMap::new();
    for &cell in &cells {
        let out = runner.run(ws, config, cell)?;
        outputs.entry(cell.task()).or_default().push((cell, out));
    }
    for (task, outs) in &outputs {
        let (first_cell, first) = &outs[0];
        for (cell, out) in &outs[1..] {
            if out != first {
                return Err(BenchError::Mismatch {
                    task: task.to_string(),
                    diff: diff_report(&first_cell.engine(), first, &cell.engine(), out),
                });
            }
        }
    }

    let mut results = Vec::with_capacity(cells.len());
    for &cell in &cells {
        let mut runs = Vec::with_capacity(config.repetitions);
        for _ in 0..config.repetitions {
            let start = Instant::now();
            let out = runner.run(ws, config, cell)?;
            runs.push(start.elapsed());
            std::hint::black_box(out);
        }
        results.push(BenchResult::new(cell.task(), &cell.engine(), &config.dataset, &runs));
    }
    Ok(BenchReport::new(results, Environment::detect()))
}

/// Line-level differences between two reports, at most ten of them.
pub fn diff_report(left_name: &str, left: &str, right_name: &str, right: &str) -> String {
    let (l, r): (Vec<&str>, Vec<&str>) = (left.lines().collect(), right.lines().collect());
    let mut out = String::new();
    let mut shown = 0;
    for i in 0..l.len().max(r.len()) {
        let (a, b) = (l.get(i).copied(), r.get(i).copied());
        if a != b {
            if shown == 10 {
                out.push_str("  ...\n");
                break;
            }
            let _ = writeln!(out, "  line {}: {left_name}={:?} {right_name}={:?}", i + 1, a.unwrap_or("<none>"), b.unwrap_or("<none>"));
            shown += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "svg" | "svg-bars" => Ok(ReportFormat::Svg),
            other => Err(BenchError::UnknownFormat(other.to_string())),
        }
    }
}

fn ms(ns: u64) -> String {
    format!("{}.{:06}", ns / 1_000_000, ns % 1_000_000)
}

/// Renders a report. CSV columns are
/// `task,engine,dataset,mean_ms,paper_ref_s,run_1_ms,...`.
pub fn report(results: &BenchReport, format: ReportFormat) -> Result<String, BenchError> {
    if results.results.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    Ok(match format {
        ReportFormat::Csv => report_csv(results),
        ReportFormat::Markdown => report_md(results),
        ReportFormat::Svg => report_svg(results),
    })
}

fn report_csv(r: &BenchReport) -> String {
    let max_runs = r.results.iter().map(|x| x.runs_ns.len()).max().unwrap_or(0);
    let mut out = String::from("task,engine,dataset,mean_ms,paper_ref_s");
    for i in 1..=max_runs {
        let _ = write!(out, ",run_{i}_ms");
    }
    out.push('\n');
    for x in &r.results {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            x.task,
            x.engine,
            csv_field(&x.dataset),
            ms(x.mean_ns),
            x.paper_reference_s().map(|s| s.to_string()).unwrap_or_default()
        );
        for i in 0..max_runs {
            out.push(',');
            if let Some(n) = x.runs_ns.get(i) {
                out.push_str(&ms(*n));
            }
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Keeps only the columns of a CSV bench report that do not depend on
/// timing: `task,engine,dataset,paper_ref_s`.
pub fn strip_timings(csv_report: &str) -> String {
    let mut out = String::new();
    for line in csv_report.lines() {
        let fields: Vec<&str> = line.splitn(6, ',').collect();
        if fields.len() >= 5 {
            let _ = writeln!(out, "{},{},{},{}", fields[0], fields[1], fields[2], fields[4]);
        }
    }
    out
}

fn report_md(r: &BenchReport) -> String {
    let mut out = String::from("| task | engine | dataset | runs | mean (ms) | paper 500K (s) |\n|---|---|---|---:|---:|---:|\n");
    for x in &r.results {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            x.task,
            x.engine,
            x.dataset,
            x.repetitions,
            ms(x.mean_ns),
            x.paper_reference_s().map(|s| format!("~{s}")).unwrap_or_else(|| "-".into())
        );
    }
    let env = &r.environment;
    let _ = write!(
        out,
        "\nEnvironment: {} cores, {} memory, miniplex {} on {}.\n",
        env.cores,
        env.memory_bytes.map(|b| format!("{} MiB", b / (1 << 20))).unwrap_or_else(|| "unknown".into()),
        env.version,
        env.os
    );
    let _ = writeln!(
        out,
        "Paper references come from a 3-node cluster and are not targets here. The reported 5M-tweet ingest took about {} minutes.",
        PAPER_INGEST_5M_S / 60
    );
    out
}

fn report_svg(r: &BenchReport) -> String {
    let mut datasets: BTreeMap<&str, Vec<&BenchResult>> = BTreeMap::new();
    for x in &r.results {
        datasets.entry(x.dataset.as_str()).or_default().push(x);
    }
    const BAR: u32 = 28;
    const GAP: u32 = 18;
    const CHART_H: u32 = 220;
    const LEFT: u32 = 60;
    let width = datasets.values().map(|v| v.len() as u32).max().unwrap_or(1) * (BAR + GAP) + LEFT + 40;
    let height = datasets.len() as u32 * (CHART_H + 120);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for (d, (dataset, results)) in datasets.iter().enumerate() {
        let top = d as u32 * (CHART_H + 120) + 30;
        let max = results.iter().map(|x| x.mean_ns).max().unwrap_or(1).max(1);
        let _ = writeln!(out, "  <text x=\"{LEFT}\" y=\"{}\" font-size=\"14\">Mean execution time, dataset {}</text>", top - 10, xml(dataset));
        let base = top + CHART_H;
        let _ = writeln!(out, "  <line x1=\"{LEFT}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", width - 20);
        let _ = writeln!(out, "  <text x=\"4\" y=\"{}\">{} ms</text>", top + 10, ms(max));
        for (i, x) in results.iter().enumerate() {
            let h = ((x.mean_ns as u128 * CHART_H as u128) / max as u128) as u32;
            let bx = LEFT + 10 + i as u32 * (BAR + GAP);
            let color = match x.task {
                BenchTask::Influence => "#4e79a7",
                BenchTask::Terms => "#f28e2b",
                BenchTask::Graph => "#59a14f",
            };
            let _ = writeln!(
                out,
                "  <rect x=\"{bx}\" y=\"{}\" width=\"{BAR}\" height=\"{h}\" fill=\"{color}\"><title>{}:{} {} ms</title></rect>",
                base - h,
                x.task,
                xml(&x.engine),
                ms(x.mean_ns)
            );
            let _ = writeln!(
                out,
                "  <text transform=\"translate({},{}) rotate(45)\">{}:{}</text>",
                bx + 4,
                base + 12,
                x.task,
                xml(&x.engine)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
