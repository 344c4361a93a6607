//! The three analytic tasks and the backends each can run on.
//!
//! - Influence ranking: per-author engagement sums, via SQL over the
//!   external table, SQL over the managed table, or a streaming scan of the
//!   column-family table.
//! - Term frequency: word count over tweet texts, via the MapReduce engine
//!   or the dataflow engine.
//! - Follower graph: degrees, weak components and an edge-list export.
//!
//! Every engine of a task produces the same rows, and the CSV writers below
//! have a fixed layout, so cross-engine agreement can be checked by
//! comparing report bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::cf::{CfError, METRICS_FAMILY, TEXT_FAMILY, TWEET_QUALIFIERS};
use crate::dfs::DfsError;
use crate::flow::{self, FlowError};
use crate::graph::{self, BuildOptions, ComponentAssignment, DegreeReport, ExportFormat, GraphError, PropertyGraph};
use crate::ingest::{self, TWEETS_INTERNAL_TABLE, TWEETS_TABLE, USERS_TABLE};
use crate::mr::{JobInput, JobSpec, MrError, SumReducer, WordCountMapper};
use crate::table::{parse_sql, RowFilter, TableError, Value};
use crate::text::{Normalization, StopWords};
use crate::Workspace;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("backend not loaded: {0}")]
    NotLoaded(String),
    #[error("no batch has been loaded; run ingest first or pass an input path")]
    NoBatch,
    #[error("cannot read stopword file {path}: {source}")]
    Stopwords { path: String, source: io::Error },
    #[error("unknown {what} {value:?}")]
    UnknownChoice { what: &'static str, value: String },
    #[error("row {row}: bad value for {column}: {value:?}")]
    BadCell { row: String, column: String, value: String },
    #[error("integer overflow while summing metrics of {0}")]
    Overflow(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Mr(#[from] MrError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

macro_rules! choice {
    ($name:ident, $what:literal, { $($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $label),+ })
            }
        }

        impl FromStr for $name {
            type Err = TaskError;

            fn from_str(s: &str) -> Result<Self, TaskError> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($label $(| $alias)* => Ok($name::$variant),)+
                    other => Err(TaskError::UnknownChoice { what: $what, value: other.to_string() }),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum InfluenceEngine {
    SqlExternal,
    SqlInternal,
    CfScan,
}

impl InfluenceEngine {
    pub const ALL: [InfluenceEngine; 3] = [InfluenceEngine::SqlExternal, InfluenceEngine::SqlInternal, InfluenceEngine::CfScan];
}

choice!(InfluenceEngine, "influence engine", {
    SqlExternal => "sql-external" | "external" | "hive",
    SqlInternal => "sql-internal" | "internal",
    CfScan => "cf-scan" | "cf" | "hbase",
});

/// How the influence score combines the metric sums.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Formula {
    /// impressions + likes + quotes + replies + retweets
    #[default]
    Prose,
    /// impressions + likes + likes + replies + retweets, as printed in the
    /// original query listing
    Verbatim,
}

choice!(Formula, "formula", {
    Prose => "prose",
    Verbatim => "verbatim",
});

impl Formula {
    pub fn apply(self, m: &MetricSums) -> Option<i64> {
        let second = match self {
            Formula::Prose => m.quotes,
            Formula::Verbatim => m.likes,
        };
        m.impressions.checked_add(m.likes)?.checked_add(second)?.checked_add(m.replies)?.checked_add(m.retweets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TermsEngine {
    MapReduce,
    Dataflow,
}

impl TermsEngine {
    pub const ALL: [TermsEngine; 2] = [TermsEngine::MapReduce, TermsEngine::Dataflow];
}

choice!(TermsEngine, "terms engine", {
    MapReduce => "mr" | "mapreduce",
    Dataflow => "flow" | "dataflow" | "spark",
});

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MetricSums {
    pub impressions: i64,
    pub likes: i64,
    pub quotes: i64,
    pub replies: i64,
    pub retweets: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InfluenceRow {
    pub author_id: String,
    pub impressions: i64,
    pub likes: i64,
    pub quotes: i64,
    pub replies: i64,
    pub retweets: i64,
    pub influence: i64,
}

impl InfluenceRow {
    pub fn sums(&self) -> MetricSums {
        MetricSums {
            impressions: self.impressions,
            likes: self.likes,
            quotes: self.quotes,
            replies: self.replies,
            retweets: self.retweets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermRow {
    pub term: String,
    pub count: i64,
}

/// The influence query in the table store's SQL dialect.
pub fn influence_query(table: &str, formula: Formula) -> String {
    let second = match formula {
        Formula::Prose => "public_metrics.quote_count",
        Formula::Verbatim => "public_metrics.like_count",
    };
    format!(
        "SELECT author_id,
  SUM(public_metrics.impression_count) AS impressions,
  SUM(public_metrics.like_count) AS likes,
  SUM(public_metrics.quote_count) AS quotes,
  SUM(public_metrics.reply_count) AS replies,
  SUM(public_metrics.retweet_count) AS retweets,
  SUM(public_metrics.impression_count) + SUM(public_metrics.like_count) + SUM({second})
    + SUM(public_metrics.reply_count) + SUM(public_metrics.retweet_count) AS influence
FROM {table} GROUP BY author_id ORDER BY influence DESC"
    )
}

/// Per-author influence, highest first, ties by author id ascending.
///
/// `scope` keeps only tweets whose text contains the keyword, ignoring
/// case.
pub fn task_influence(
    ws: &Workspace,
    engine: InfluenceEngine,
    formula: Formula,
    scope: Option<&str>,
) -> Result<Vec<InfluenceRow>, TaskError> {
    let scope = scope.filter(|s| !s.is_empty());
    match engine {
        InfluenceEngine::SqlExternal => influence_sql(ws, TWEETS_TABLE, formula, scope),
        InfluenceEngine::SqlInternal => influence_sql(ws, TWEETS_INTERNAL_TABLE, formula, scope),
        InfluenceEngine::CfScan => influence_cf(ws, formula, scope),
    }
}

fn influence_sql(ws: &Workspace, table: &str, formula: Formula, scope: Option<&str>) -> Result<Vec<InfluenceRow>, TaskError> {
    let catalog = ws.catalog();
    if !catalog.contains(table) {
        return Err(TaskError::NotLoaded(format!("table {table}")));
    }
    let ast = parse_sql(&influence_query(table, formula))?;
    let filter = scope.map(|kw| RowFilter::text_contains("text", kw));
    let rs = catalog.execute(&ast, filter.as_ref())?;
    rs.rows
        .iter()
        .map(|row| {
            let author_id = row[0].to_string();
            let int = |i: usize| match &row[i] {
                Value::Int(v) => Ok(*v),
                Value::Null => Ok(0),
                other => Err(TaskError::BadCell { row: author_id.clone(), column: rs.columns[i].clone(), value: other.to_string() }),
            };
            Ok(InfluenceRow {
                impressions: int(1)?,
                likes: int(2)?,
                quotes: int(3)?,
                replies: int(4)?,
                retweets: int(5)?,
                influence: int(6)?,
                author_id,
            })
        })
        .collect()
}

fn influence_cf(ws: &Workspace, formula: Formula, scope: Option<&str>) -> Result<Vec<InfluenceRow>, TaskError> {
    let cf = ws.cf();
    if !cf.table_names().iter().any(|t| t == TWEETS_TABLE) {
        return Err(TaskError::NotLoaded(format!("cf table {TWEETS_TABLE}")));
    }
    let needle = scope.map(str::to_lowercase);
    let mut texts = match &needle {
        Some(_) => {
            if !cf.families(TWEETS_TABLE)?.iter().any(|f| f == TEXT_FAMILY) {
                return Err(TaskError::NotLoaded(format!("cf family {TEXT_FAMILY} (needed for --scope)")));
            }
            Some(cf.scan(TWEETS_TABLE, TEXT_FAMILY, Some(&["text"]), None, None)?.peekable())
        }
        None => None,
    };
    let rows = cf.scan(TWEETS_TABLE, METRICS_FAMILY, Some(&TWEET_QUALIFIERS[..]), None, None)?;
    drop(cf);

    let mut sums: BTreeMap<String, MetricSums> = BTreeMap::new();
    for (key, cells) in rows {
        let row_name = String::from_utf8_lossy(&key).into_owned();
        if let (Some(needle), Some(texts)) = (&needle, texts.as_mut()) {
            // both scans ascend by row key, so advance the text scan in step
            while texts.next_if(|(k, _)| *k < key).is_some() {}
            let hit = match texts.next_if(|(k, _)| *k == key) {
                Some((_, cells)) => cells.first().is_some_and(|c| c.text().to_lowercase().contains(needle.as_str())),
                None => false,
            };
            if !hit {
                continue;
            }
        }
        let mut author = None;
        let mut metrics = [0i64; 5];
        for cell in &cells {
            if cell.qualifier == "author_id" {
                author = Some(cell.text());
                continue;
            }
            let slot = TWEET_QUALIFIERS[1..].iter().position(|q| *q == cell.qualifier).expect("scan is projected");
            let text = cell.text();
            metrics[slot] = text.parse().map_err(|_| TaskError::BadCell {
                row: row_name.clone(),
                column: format!("{}:{}", cell.family, cell.qualifier),
                value: text.clone(),
            })?;
        }
        let author = author.ok_or_else(|| TaskError::BadCell { row: row_name.clone(), column: "m:author_id".into(), value: String::new() })?;
        let acc = sums.entry(author.clone()).or_default();
        let overflow = || TaskError::Overflow(author.clone());
        acc.impressions = acc.impressions.checked_add(metrics[0]).ok_or_else(overflow)?;
        acc.likes = acc.likes.checked_add(metrics[1]).ok_or_else(overflow)?;
        acc.quotes = acc.quotes.checked_add(metrics[2]).ok_or_else(overflow)?;
        acc.replies = acc.replies.checked_add(metrics[3]).ok_or_else(overflow)?;
        acc.retweets = acc.retweets.checked_add(metrics[4]).ok_or_else(overflow)?;
    }
    let mut out = sums
        .into_iter()
        .map(|(author_id, m)| {
            let influence = formula.apply(&m).ok_or_else(|| TaskError::Overflow(author_id.clone()))?;
            Ok(InfluenceRow {
                author_id,
                impressions: m.impressions,
                likes: m.likes,
                quotes: m.quotes,
                replies: m.replies,
                retweets: m.retweets,
                influence,
            })
        })
        .collect::<Result<Vec<_>, TaskError>>()?;
    // stable sort over author order gives the author_id tie-break
    out.sort_by_key(|r| std::cmp::Reverse(r.influence));
    Ok(out)
}

pub fn influence_csv(rows: &[InfluenceRow]) -> String {
    let mut w = csv_writer();
    w.write_record(["author_id", "impressions", "likes", "quotes", "replies", "retweets", "influence"]).expect("in memory");
    for r in rows {
        w.serialize((&r.author_id, r.impressions, r.likes, r.quotes, r.replies, r.retweets, r.influence)).expect("in memory");
    }
    finish(w)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in memory")).expect("UTF-8 input")
}

pub fn load_stopwords(path: &Path) -> Result<StopWords, TaskError> {
    StopWords::from_file(path).map_err(|source| TaskError::Stopwords { path: path.display().to_string(), source })
}

/// Settings for [`task_terms`].
#[derive(Debug, Clone, Default)]
pub struct TermsOptions {
    pub stopwords: StopWords,
    pub normalization: Normalization,
    /// Plain-text file in the block store; defaults to the texts of the
    /// current batch.
    pub input: Option<String>,
    /// Map splits for MapReduce; defaults to the worker count.
    pub splits: Option<usize>,
    /// Reducers for MapReduce and partitions for dataflow; defaults to the
    /// worker count.
    pub partitions: Option<usize>,
}

/// Term counts, highest first, ties by term ascending.
pub fn task_terms(ws: &Workspace, engine: TermsEngine, options: &TermsOptions) -> Result<Vec<TermRow>, TaskError> {
    let input = match &options.input {
        Some(path) => path.clone(),
        None => ingest::texts_path(&ws.current_batch().ok_or(TaskError::NoBatch)?),
    };
    if !ws.dfs().exists(&input) {
        return Err(DfsError::NotFound(input).into());
    }
    let partitions = options.partitions.unwrap_or(ws.workers()).max(1);
    match engine {
        TermsEngine::MapReduce => {
            let mapper = WordCountMapper { stopwords: options.stopwords.clone(), normalization: options.normalization };
            let spec = JobSpec::new(JobInput::Dfs(vec![input]), mapper, SumReducer)
                .splits(options.splits.unwrap_or(ws.workers()).max(1))
                .reducers(partitions);
            let result = ws.mr_engine().run_job(&spec)?;
            let mut rows: Vec<TermRow> = result.output.into_iter().map(|(term, count)| TermRow { term, count }).collect();
            rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
            Ok(rows)
        }
        TermsEngine::Dataflow => {
            let lines = ws.flow_context().text_file(ws.dfs(), &input, partitions);
            let counted = flow::word_count(&lines, options.stopwords.clone(), options.normalization).collect()?;
            Ok(counted.into_iter().map(|(count, term)| TermRow { term, count }).collect())
        }
    }
}

pub fn terms_csv(rows: &[TermRow]) -> String {
    let mut w = csv_writer();
    w.write_record(["term", "count"]).expect("in memory");
    for r in rows {
        w.serialize((&r.term, r.count)).expect("in memory");
    }
    finish(w)
}

#[derive(Debug, Clone)]
pub struct GraphOutput {
    pub graph: PropertyGraph,
    pub degrees: DegreeReport,
    pub components: ComponentAssignment,
}

impl GraphOutput {
    pub fn degrees_csv(&self) -> String {
        self.degrees.to_csv(&self.graph)
    }

    pub fn components_csv(&self) -> String {
        self.components.to_csv()
    }

    pub fn edge_list(&self) -> String {
        graph::export_graph(&self.graph, ExportFormat::EdgeList)
    }
}

/// Users as returned by `SELECT id, username FROM users`.
pub fn users_from_table(ws: &Workspace) -> Result<Vec<(String, String)>, TaskError> {
    if !ws.catalog().contains(USERS_TABLE) {
        return Err(TaskError::NotLoaded(format!("table {USERS_TABLE}")));
    }
    let rs = ws.catalog().sql(&format!("SELECT id, username FROM {USERS_TABLE}"))?;
    Ok(rs.rows.into_iter().map(|r| (r[0].to_string(), r[1].to_string())).collect())
}

/// Builds the follower graph from the users table and a follows CSV
/// (`src,dst`) and runs the degree and component analyses.
pub fn task_graph(ws: &Workspace, follows_csv: &str, options: BuildOptions) -> Result<GraphOutput, TaskError> {
    let users = users_from_table(ws)?;
    let follows = graph::parse_follows(follows_csv)?;
    let graph = graph::build_graph(users, follows, options)?;
    let degrees = graph::degrees(&graph);
    let components = graph::weak_components(&graph);
    Ok(GraphOutput { graph, degrees, components })
}

/// A directory receiving the report files of one run.
#[derive(Debug, Clone)]
pub struct ReportRun {
    pub run_id: String,
    pub dir: PathBuf,
}

impl ReportRun {
    /// Creates the next run directory under the workspace report dir.
    pub fn create(ws: &Workspace) -> io::Result<Self> {
        Self::create_in(&ws.report_dir())
    }

    pub fn create_in(parent: &Path) -> io::Result<Self> {
        let (run_id, dir) = Workspace::new_run_dir(parent)?;
        Ok(ReportRun { run_id, dir })
    }

    pub fn write(&self, name: &str, content: &str) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        Ok(path)
    }
}
