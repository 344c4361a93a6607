//! Tweet ingestion: landing, preprocessing and loading.
//!
//! A batch moves through three stages:
//!
//! 1. [`land`] copies a local JSON Lines file byte for byte into
//!    `/landing/<batch>/raw.jsonl` and writes a manifest next to it.
//! 2. [`preprocess`] drops malformed lines and duplicate ids, fills missing
//!    counters with zero, stamps each record with the batch id and the
//!    landing time, and writes `/data/<batch>/tweets.jsonl` and
//!    `/data/<batch>/users.jsonl`.
//! 3. [`load_all`] registers or loads the cleaned tweets into the table
//!    store and the column-family store and checks that every target ends
//!    up with the same row count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::cf::{CfError, METRICS_FAMILY, TEXT_FAMILY};
use crate::dfs::{Dfs, DfsError};
use crate::table::{SourceFormat, TableError, TableSchema};
use crate::Workspace;

/// Table and cf-table names used by [`load_all`].
pub const TWEETS_TABLE: &str = "tweets";
pub const USERS_TABLE: &str = "users";
pub const TWEETS_INTERNAL_TABLE: &str = "tweets_internal";
const STAGING_TABLE: &str = "tweets_staging";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: io::Error },
    #[error("unknown batch {0}")]
    UnknownBatch(String),
    #[error("batch {batch}: raw data missing at {path}")]
    RawMissing { batch: String, path: String },
    #[error("batch {0} has not been preprocessed")]
    NotPreprocessed(String),
    #[error("unknown load target {0:?} (expected external, internal or cf)")]
    UnknownTarget(String),
    #[error("row counts differ across targets: {0}")]
    CountMismatch(String),
    #[error("bad manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Cf(#[from] CfError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicMetrics {
    pub impression_count: i64,
    pub like_count: i64,
    pub quote_count: i64,
    pub reply_count: i64,
    pub retweet_count: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub author_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub created_at: String,
    #[serde(default)]
    pub public_metrics: PublicMetrics,
    /// Author username carried over from the payload, if it had one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingested_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub username: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub read: u64,
    pub malformed: u64,
    pub duplicates: u64,
    pub emitted_tweets: u64,
    pub emitted_users: u64,
}

impl BatchStats {
    /// Every line read was either rejected or emitted.
    pub fn is_conserved(&self) -> bool {
        self.read == self.malformed + self.duplicates + self.emitted_tweets
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub batch_id: String,
    /// RFC 3339, UTC.
    pub landed_at: String,
    pub raw_path: String,
    pub raw_sha256: String,
    pub raw_bytes: u64,
    pub preprocessed: bool,
    pub stats: BatchStats,
}

impl BatchManifest {
    pub fn tweets_path(&self) -> String {
        tweets_path(&self.batch_id)
    }

    pub fn users_path(&self) -> String {
        users_path(&self.batch_id)
    }
}

pub fn tweets_path(batch: &str) -> String {
    format!("/data/{batch}/tweets.jsonl")
}

pub fn users_path(batch: &str) -> String {
    format!("/data/{batch}/users.jsonl")
}

/// Plain tweet texts, one tweet per line, used as word-count input.
pub fn texts_path(batch: &str) -> String {
    format!("/data/{batch}/text.txt")
}

fn manifest_path(batch: &str) -> String {
    format!("/landing/{batch}/manifest.json")
}

fn batch_number(id: &str) -> Option<u64> {
    id.strip_prefix("batch-")?.parse().ok()
}

/// Batch ids known to the store, in landing order.
pub fn batches(dfs: &Dfs) -> Vec<String> {
    let mut ids: Vec<String> = dfs
        .list("/landing/")
        .into_iter()
        .filter_map(|f| f.path.strip_prefix("/landing/")?.split('/').next().map(str::to_string))
        .filter(|id| batch_number(id).is_some())
        .collect();
    ids.sort_by_key(|id| batch_number(id));
    ids.dedup();
    ids
}

/// Lands a local file as a new batch stamped with the current time.
pub fn land(dfs: &Dfs, source: &Path) -> Result<BatchManifest, IngestError> {
    land_at(dfs, source, &chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Lands a local file with an explicit landing timestamp.
pub fn land_at(dfs: &Dfs, source: &Path, landed_at: &str) -> Result<BatchManifest, IngestError> {
    let bytes = std::fs::read(source).map_err(|e| IngestError::Unreadable { path: source.display().to_string(), source: e })?;
    let next = batches(dfs).last().and_then(|b| batch_number(b)).unwrap_or(0) + 1;
    let batch_id = format!("batch-{next:06}");
    let raw_path = format!("/landing/{batch_id}/raw.jsonl");
    dfs.put(&raw_path, &bytes)?;
    let manifest = BatchManifest {
        batch_id,
        landed_at: landed_at.to_string(),
        raw_path,
        raw_sha256: hex::encode(Sha256::digest(&bytes)),
        raw_bytes: bytes.len() as u64,
        preprocessed: false,
        stats: BatchStats::default(),
    };
    write_manifest(dfs, &manifest)?;
    Ok(manifest)
}

fn write_manifest(dfs: &Dfs, manifest: &BatchManifest) -> Result<(), IngestError> {
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    for path in [manifest_path(&manifest.batch_id), format!("/data/{}/manifest.json", manifest.batch_id)] {
        if path.starts_with("/data/") && !manifest.preprocessed {
            continue;
        }
        if dfs.exists(&path) {
            dfs.delete(&path)?;
        }
        dfs.put(&path, &json)?;
    }
    Ok(())
}

pub fn manifest(dfs: &Dfs, batch: &str) -> Result<BatchManifest, IngestError> {
    let path = manifest_path(batch);
    if !dfs.exists(&path) {
        return Err(IngestError::UnknownBatch(batch.to_string()));
    }
    serde_json::from_slice(&dfs.get_file(&path)?).map_err(|e| IngestError::Manifest { path, reason: e.to_string() })
}

/// Result of cleaning one batch of lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Preprocessed {
    pub tweets: Vec<TweetRecord>,
    pub users: Vec<UserRecord>,
    pub stats: BatchStats,
}

impl Preprocessed {
    pub fn tweets_jsonl(&self) -> String {
        to_jsonl(&self.tweets)
    }

    pub fn users_jsonl(&self) -> String {
        to_jsonl(&self.users)
    }

    /// Tweet texts, one per line. Line breaks inside a text become spaces,
    /// which tokenization treats the same way.
    pub fn texts(&self) -> String {
        let mut out = String::new();
        for t in &self.tweets {
            out.extend(t.text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }));
            out.push('\n');
        }
        out
    }
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Cleans raw JSON Lines. Pure: the same input, batch id and timestamp
/// always give the same output.
pub fn preprocess_lines(raw: &str, batch_id: &str, ingested_at: &str) -> Preprocessed {
    let mut out = Preprocessed::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut authors: Vec<String> = Vec::new();
    let mut usernames: HashMap<String, Option<String>> = HashMap::new();
    for line in raw.lines() {
        out.stats.read += 1;
        let Some(mut tweet) = parse_tweet(line) else {
            out.stats.malformed += 1;
            continue;
        };
        if !seen.insert(tweet.id.clone()) {
            out.stats.duplicates += 1;
            continue;
        }
        match usernames.get_mut(&tweet.author_id) {
            None => {
                authors.push(tweet.author_id.clone());
                usernames.insert(tweet.author_id.clone(), tweet.username.clone());
            }
            Some(name @ None) => *name = tweet.username.clone(),
            Some(Some(_)) => {}
        }
        tweet.batch_id = Some(batch_id.to_string());
        tweet.ingested_at = Some(ingested_at.to_string());
        out.tweets.push(tweet);
    }
    out.users = authors
        .into_iter()
        .map(|id| {
            let username = usernames.remove(&id).flatten().unwrap_or_else(|| format!("user_{id}"));
            UserRecord { id, username }
        })
        .collect();
    out.stats.emitted_tweets = out.tweets.len() as u64;
    out.stats.emitted_users = out.users.len() as u64;
    out
}

fn id_field(v: Option<&Json>) -> Option<String> {
    match v? {
        Json::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Json::Number(n) if n.is_u64() => Some(n.to_string()),
        _ => None,
    }
}

fn text_field(v: Option<&Json>) -> Option<String> {
    match v {
        None | Some(Json::Null) => Some(String::new()),
        Some(Json::String(s)) => Some(s.clone()),
        _ => None,
    }
}

fn counter(v: Option<&Json>) -> Option<i64> {
    let n = match v {
        None | Some(Json::Null) => return Some(0),
        Some(Json::Number(n)) => n.as_i64()?,
        Some(Json::String(s)) => s.trim().parse().ok()?,
        _ => return None,
    };
    (n >= 0).then_some(n)
}

fn parse_tweet(line: &str) -> Option<TweetRecord> {
    let Json::Object(obj) = serde_json::from_str::<Json>(line).ok()? else { return None };
    let id = id_field(obj.get("id"))?;
    let author_id = id_field(obj.get("author_id"))?;
    let text = text_field(obj.get("text"))?;
    let created_at = text_field(obj.get("created_at"))?;
    let public_metrics = match obj.get("public_metrics") {
        None | Some(Json::Null) => PublicMetrics::default(),
        Some(Json::Object(m)) => PublicMetrics {
            impression_count: counter(m.get("impression_count"))?,
            like_count: counter(m.get("like_count"))?,
            quote_count: counter(m.get("quote_count"))?,
            reply_count: counter(m.get("reply_count"))?,
            retweet_count: counter(m.get("retweet_count"))?,
        },
        Some(_) => return None,
    };
    let username = obj
        .get("username")
        .or_else(|| obj.get("author").and_then(|a| a.get("username")))
        .and_then(Json::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    Some(TweetRecord { id, author_id, text, created_at, public_metrics, username, batch_id: None, ingested_at: None })
}

/// Cleans a landed batch and writes the tweets and users datasets.
/// Re-running replaces earlier outputs of the same batch.
pub fn preprocess(dfs: &Dfs, batch: &str) -> Result<BatchManifest, IngestError> {
    let mut manifest = manifest(dfs, batch)?;
    if !dfs.exists(&manifest.raw_path) {
        return Err(IngestError::RawMissing { batch: batch.to_string(), path: manifest.raw_path });
    }
    let raw = dfs.get_file(&manifest.raw_path)?;
    let out = preprocess_lines(&String::from_utf8_lossy(&raw), batch, &manifest.landed_at);
    let outputs = [
        (manifest.tweets_path(), out.tweets_jsonl()),
        (manifest.users_path(), out.users_jsonl()),
        (texts_path(batch), out.texts()),
    ];
    for (path, body) in outputs {
        if dfs.exists(&path) {
            dfs.delete(&path)?;
        }
        dfs.put(&path, body.as_bytes())?;
    }
    manifest.preprocessed = true;
    manifest.stats = out.stats;
    write_manifest(dfs, &manifest)?;
    Ok(manifest)
}

/// Reads the cleaned tweets of a batch.
pub fn read_tweets(dfs: &Dfs, batch: &str) -> Result<Vec<TweetRecord>, IngestError> {
    let path = tweets_path(batch);
    if !dfs.exists(&path) {
        return Err(IngestError::NotPreprocessed(batch.to_string()));
    }
    let text = dfs.read_to_string(&path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| IngestError::Manifest { path: format!("{path}:{}", i + 1), reason: e.to_string() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadTarget {
    /// External tables `tweets` and `users` over the batch files.
    External,
    /// Managed columnar table `tweets_internal`.
    Internal,
    /// Column-family table `tweets`.
    Cf,
}

impl LoadTarget {
    pub const ALL: [LoadTarget; 3] = [LoadTarget::External, LoadTarget::Internal, LoadTarget::Cf];
}

impl fmt::Display for LoadTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadTarget::External => "tablestore-external",
            LoadTarget::Internal => "tablestore-internal",
            LoadTarget::Cf => "cfstore",
        })
    }
}

impl FromStr for LoadTarget {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "external" | "tablestore-external" | "sql-external" => Ok(LoadTarget::External),
            "internal" | "tablestore-internal" | "sql-internal" => Ok(LoadTarget::Internal),
            "cf" | "cfstore" | "cf-scan" => Ok(LoadTarget::Cf),
            other => Err(IngestError::UnknownTarget(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub batch_id: String,
    /// Rows visible in each target after loading.
    pub counts: BTreeMap<LoadTarget, u64>,
}

/// Loads a preprocessed batch into every requested target, replacing
/// earlier loads, and makes it the workspace's current batch.
pub fn load_all(ws: &Workspace, batch: &str, targets: &[LoadTarget]) -> Result<LoadReport, IngestError> {
    let dfs = ws.dfs();
    let tweets_src = tweets_path(batch);
    let users_src = users_path(batch);
    if !dfs.exists(&tweets_src) || !dfs.exists(&users_src) {
        if !dfs.exists(&manifest_path(batch)) {
            return Err(IngestError::UnknownBatch(batch.to_string()));
        }
        return Err(IngestError::NotPreprocessed(batch.to_string()));
    }
    let catalog = ws.catalog();
    let replace = |name: &str| -> Result<(), IngestError> {
        if catalog.contains(name) {
            catalog.drop_table(name)?;
        }
        Ok(())
    };

    let mut counts = BTreeMap::new();
    let expected = dfs.read_to_string(&tweets_src)?.lines().count() as u64;
    for target in targets.iter().copied().collect::<std::collections::BTreeSet<_>>() {
        let count = match target {
            LoadTarget::External => {
                replace(TWEETS_TABLE)?;
                replace(USERS_TABLE)?;
                catalog.create_external_table(TableSchema::tweets(TWEETS_TABLE), &tweets_src, SourceFormat::Jsonl)?;
                catalog.create_external_table(TableSchema::users(USERS_TABLE), &users_src, SourceFormat::Jsonl)?;
                catalog.row_count(TWEETS_TABLE)?
            }
            LoadTarget::Internal => {
                replace(STAGING_TABLE)?;
                replace(TWEETS_INTERNAL_TABLE)?;
                catalog.create_external_table(TableSchema::tweets(STAGING_TABLE), &tweets_src, SourceFormat::Jsonl)?;
                let made = catalog.create_internal_table_as(TableSchema::tweets(TWEETS_INTERNAL_TABLE), STAGING_TABLE);
                catalog.drop_table(STAGING_TABLE)?;
                made?;
                catalog.row_count(TWEETS_INTERNAL_TABLE)?
            }
            LoadTarget::Cf => {
                let tweets = read_tweets(dfs, batch)?;
                let mut cf = ws.cf();
                if cf.table_names().iter().any(|t| t == TWEETS_TABLE) {
                    cf.drop_table(TWEETS_TABLE)?;
                }
                cf.create_table(TWEETS_TABLE, [METRICS_FAMILY, TEXT_FAMILY])?;
                cf.load_tweets(TWEETS_TABLE, &tweets)?;
                cf.flush(TWEETS_TABLE)?;
                cf.row_count(TWEETS_TABLE)?
            }
        };
        counts.insert(target, count);
    }
    if counts.values().any(|c| *c != expected) {
        let detail: Vec<String> = counts.iter().map(|(t, c)| format!("{t}={c}")).collect();
        return Err(IngestError::CountMismatch(format!("{} (batch has {expected} tweets)", detail.join(", "))));
    }
    ws.set_current_batch(batch).map_err(|e| IngestError::Dfs(DfsError::Io(e)))?;
    Ok(LoadReport { batch_id: batch.to_string(), counts })
}
