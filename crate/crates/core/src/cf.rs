//! Row-key sorted column-family store.
//!
//! Each table maps a byte-string row key to a set of cells addressed by
//! `(family, qualifier)`. Writes land in an in-memory buffer; [`CfStore::flush`]
//! merges the buffer with the table's current segment and writes a new sorted
//! segment file through the block store. There are no cell versions: the last
//! write to a coordinate wins.
//!
//! Scans work on a snapshot taken when the scan starts, and stream rows one at
//! a time in ascending key order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::ops::Bound;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dfs::{Dfs, DfsError};
use crate::ingest::TweetRecord;

/// Family that holds the engagement metrics of a tweet.
pub const METRICS_FAMILY: &str = "m";
/// Optional family holding tweet text, used for scope filtering.
pub const TEXT_FAMILY: &str = "t";
/// Qualifiers written under [`METRICS_FAMILY`] by [`CfStore::load_tweets`].
pub const TWEET_QUALIFIERS: [&str; 6] = ["author_id", "impressions", "likes", "quotes", "replies", "retweets"];

const DEFAULT_FLUSH_ROWS: usize = 65_536;
const MAGIC: &[u8; 5] = b"MXCF1";

#[derive(Debug, thiserror::Error)]
pub enum CfError {
    #[error("table {0} already exists")]
    DuplicateTable(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("table {table} has no family {family}")]
    UnknownFamily { table: String, family: String },
    #[error("a table needs at least one column family")]
    NoFamilies,
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("segment {path}: {reason}")]
    CorruptSegment { path: String, reason: String },
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub row_key: Vec<u8>,
    pub family: String,
    pub qualifier: String,
    pub value: Vec<u8>,
}

impl Cell {
    /// The value as UTF-8 text, lossily.
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.value).into_owned()
    }
}

type Row = BTreeMap<(String, String), Vec<u8>>;
type Rows = BTreeMap<Vec<u8>, Row>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableDef {
    name: String,
    families: BTreeSet<String>,
    segment: Option<String>,
    generation: u64,
}

#[derive(Debug)]
struct CfTable {
    def: TableDef,
    segment: Arc<Rows>,
    memtable: Rows,
}

impl CfTable {
    fn has_row(&self, key: &[u8]) -> bool {
        self.memtable.contains_key(key) || self.segment.contains_key(key)
    }
}

/// Result of [`CfStore::load_tweets`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub loaded: u64,
    pub rejected: u64,
}

#[derive(Debug)]
pub struct CfStore {
    dfs: Dfs,
    catalog: Option<PathBuf>,
    tables: BTreeMap<String, CfTable>,
    flush_rows: usize,
}

impl CfStore {
    pub fn in_memory(dfs: Dfs) -> Self {
        CfStore { dfs, catalog: None, tables: BTreeMap::new(), flush_rows: DEFAULT_FLUSH_ROWS }
    }

    /// Opens a store whose table list is persisted at `catalog`. Segments
    /// of existing tables are read back from the block store.
    pub fn open(dfs: Dfs, catalog: &Path) -> Result<Self, CfError> {
        let mut store = CfStore { dfs, catalog: Some(catalog.to_path_buf()), tables: BTreeMap::new(), flush_rows: DEFAULT_FLUSH_ROWS };
        if catalog.exists() {
            let defs: Vec<TableDef> = serde_json::from_slice(&fs::read(catalog)?).map_err(|e| CfError::CorruptSegment {
                path: catalog.display().to_string(),
                reason: e.to_string(),
            })?;
            for def in defs {
                let segment = match &def.segment {
                    Some(path) => decode_segment(path, &store.dfs.get_file(path)?)?,
                    None => Rows::new(),
                };
                store.tables.insert(def.name.clone(), CfTable { def, segment: Arc::new(segment), memtable: Rows::new() });
            }
        }
        Ok(store)
    }

    /// Number of buffered rows that triggers an automatic flush.
    pub fn set_flush_rows(&mut self, rows: usize) {
        self.flush_rows = rows.max(1);
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn families(&self, table: &str) -> Result<Vec<String>, CfError> {
        Ok(self.table(table)?.def.families.iter().cloned().collect())
    }

    fn table(&self, name: &str) -> Result<&CfTable, CfError> {
        self.tables.get(name).ok_or_else(|| CfError::UnknownTable(name.to_string()))
    }

    fn table_mut(&mut self, name: &str) -> Result<&mut CfTable, CfError> {
        self.tables.get_mut(name).ok_or_else(|| CfError::UnknownTable(name.to_string()))
    }

    pub fn create_table<I, S>(&mut self, name: &str, families: I) -> Result<(), CfError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if name.is_empty() || name.contains('/') {
            return Err(CfError::InvalidCell(format!("bad table name {name:?}")));
        }
        if self.tables.contains_key(name) {
            return Err(CfError::DuplicateTable(name.to_string()));
        }
        let families: BTreeSet<String> = families.into_iter().map(Into::into).collect();
        if families.is_empty() {
            return Err(CfError::NoFamilies);
        }
        if let Some(bad) = families.iter().find(|f| f.is_empty() || f.contains(':')) {
            return Err(CfError::InvalidCell(format!("bad family name {bad:?}")));
        }
        let def = TableDef { name: name.to_string(), families, segment: None, generation: 0 };
        self.tables.insert(name.to_string(), CfTable { def, segment: Arc::new(Rows::new()), memtable: Rows::new() });
        self.persist()
    }

    pub fn drop_table(&mut self, name: &str) -> Result<(), CfError> {
        let table = self.tables.remove(name).ok_or_else(|| CfError::UnknownTable(name.to_string()))?;
        if let Some(path) = &table.def.segment {
            if self.dfs.exists(path) {
                self.dfs.delete(path)?;
            }
        }
        self.persist()
    }

    pub fn put(&mut self, table: &str, row_key: &[u8], family: &str, qualifier: &str, value: &[u8]) -> Result<(), CfError> {
        if row_key.is_empty() || qualifier.is_empty() {
            return Err(CfError::InvalidCell("row key and qualifier must be non-empty".into()));
        }
        let flush_rows = self.flush_rows;
        let t = self.table_mut(table)?;
        if !t.def.families.contains(family) {
            return Err(CfError::UnknownFamily { table: table.to_string(), family: family.to_string() });
        }
        t.memtable
            .entry(row_key.to_vec())
            .or_default()
            .insert((family.to_string(), qualifier.to_string()), value.to_vec());
        if t.memtable.len() >= flush_rows {
            self.flush(table)?;
        }
        Ok(())
    }

    /// All cells of a row, sorted by `(family, qualifier)`.
    pub fn get(&self, table: &str, row_key: &[u8]) -> Result<Vec<Cell>, CfError> {
        let t = self.table(table)?;
        let mut merged: Row = t.segment.get(row_key).cloned().unwrap_or_default();
        if let Some(buffered) = t.memtable.get(row_key) {
            merged.extend(buffered.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        Ok(to_cells(row_key, merged))
    }

    /// Streams rows in `[start, end)` (either bound optional), restricted to
    /// one family and optionally to a set of qualifiers. Rows without any
    /// matching cell are skipped.
    pub fn scan(
        &self,
        table: &str,
        family: &str,
        qualifiers: Option<&[&str]>,
        start: Option<&[u8]>,
        end: Option<&[u8]>,
    ) -> Result<Scan, CfError> {
        let t = self.table(table)?;
        if !t.def.families.contains(family) {
            return Err(CfError::UnknownFamily { table: table.to_string(), family: family.to_string() });
        }
        Ok(Scan {
            segment: Arc::clone(&t.segment),
            memtable: Arc::new(t.memtable.clone()),
            family: family.to_string(),
            qualifiers: qualifiers.map(|q| q.iter().map(|s| s.to_string()).collect()),
            cursor: match start {
                Some(s) => Bound::Included(s.to_vec()),
                None => Bound::Unbounded,
            },
            end: end.map(<[u8]>::to_vec),
        })
    }

    /// Writes buffered rows into a fresh segment that replaces the old one.
    pub fn flush(&mut self, table: &str) -> Result<(), CfError> {
        let dfs = self.dfs.clone();
        let t = self.table_mut(table)?;
        if t.memtable.is_empty() {
            return Ok(());
        }
        let mut merged: Rows = (*t.segment).clone();
        for (key, row) in std::mem::take(&mut t.memtable) {
            merged.entry(key).or_default().extend(row);
        }
        let generation = t.def.generation + 1;
        let path = format!("/hbase/{}/seg-{generation:06}.sst", t.def.name);
        if dfs.exists(&path) {
            dfs.delete(&path)?;
        }
        dfs.put(&path, &encode_segment(&merged))?;
        if let Some(old) = t.def.segment.replace(path) {
            if dfs.exists(&old) {
                dfs.delete(&old)?;
            }
        }
        t.def.generation = generation;
        t.segment = Arc::new(merged);
        self.persist()
    }

    pub fn flush_all(&mut self) -> Result<(), CfError> {
        for name in self.table_names() {
            self.flush(&name)?;
        }
        Ok(())
    }

    pub fn row_count(&self, table: &str) -> Result<u64, CfError> {
        let t = self.table(table)?;
        let buffered_new = t.memtable.keys().filter(|k| !t.segment.contains_key(*k)).count();
        Ok((t.segment.len() + buffered_new) as u64)
    }

    /// Loads one row per tweet keyed by tweet id. Metrics go under family
    /// `m` as decimal text; when the table also has family `t`, the tweet
    /// text is stored there. Tweets whose id is already present are
    /// rejected and counted.
    pub fn load_tweets<'a, I>(&mut self, table: &str, tweets: I) -> Result<LoadReport, CfError>
    where
        I: IntoIterator<Item = &'a TweetRecord>,
    {
        let t = self.table(table)?;
        if !t.def.families.contains(METRICS_FAMILY) {
            return Err(CfError::UnknownFamily { table: table.to_string(), family: METRICS_FAMILY.to_string() });
        }
        let with_text = t.def.families.contains(TEXT_FAMILY);
        let mut report = LoadReport::default();
        for tweet in tweets {
            if tweet.id.is_empty() || self.table(table)?.has_row(tweet.id.as_bytes()) {
                report.rejected += 1;
                continue;
            }
            let m = &tweet.public_metrics;
            let values = [
                tweet.author_id.clone(),
                m.impression_count.to_string(),
                m.like_count.to_string(),
                m.quote_count.to_string(),
                m.reply_count.to_string(),
                m.retweet_count.to_string(),
            ];
            let key = tweet.id.as_bytes();
            for (q, v) in TWEET_QUALIFIERS.iter().zip(values) {
                self.put(table, key, METRICS_FAMILY, q, v.as_bytes())?;
            }
            if with_text {
                self.put(table, key, TEXT_FAMILY, "text", tweet.text.as_bytes())?;
            }
            report.loaded += 1;
        }
        Ok(report)
    }

    fn persist(&self) -> Result<(), CfError> {
        let Some(path) = &self.catalog else { return Ok(()) };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let defs: Vec<&TableDef> = self.tables.values().map(|t| &t.def).collect();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&defs).map_err(io::Error::other)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

fn to_cells(row_key: &[u8], row: Row) -> Vec<Cell> {
    row.into_iter()
        .map(|((family, qualifier), value)| Cell { row_key: row_key.to_vec(), family, qualifier, value })
        .collect()
}

/// Streaming scan over a snapshot of one table.
#[derive(Debug)]
pub struct Scan {
    segment: Arc<Rows>,
    memtable: Arc<Rows>,
    family: String,
    qualifiers: Option<BTreeSet<String>>,
    cursor: Bound<Vec<u8>>,
    end: Option<Vec<u8>>,
}

impl Iterator for Scan {
    type Item = (Vec<u8>, Vec<Cell>);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let range = (self.cursor.clone(), Bound::Unbounded);
            let a = self.segment.range::<Vec<u8>, _>(range.clone()).next().map(|(k, _)| k);
            let b = self.memtable.range::<Vec<u8>, _>(range).next().map(|(k, _)| k);
            let key = match (a, b) {
                (Some(a), Some(b)) => a.min(b).clone(),
                (Some(k), None) | (None, Some(k)) => k.clone(),
                (None, None) => return None,
            };
            if self.end.as_ref().is_some_and(|end| key >= *end) {
                return None;
            }
            self.cursor = Bound::Excluded(key.clone());

            let mut row: Row = Row::new();
            for source in [&self.segment, &self.memtable] {
                if let Some(cells) = source.get(&key) {
                    for ((f, q), v) in cells {
                        let wanted = *f == self.family && self.qualifiers.as_ref().is_none_or(|qs| qs.contains(q));
                        if wanted {
                            row.insert((f.clone(), q.clone()), v.clone());
                        }
                    }
                }
            }
            if !row.is_empty() {
                let cells = to_cells(&key, row);
                return Some((key, cells));
            }
        }
    }
}

fn encode_segment(rows: &Rows) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for (key, row) in rows {
        out.extend_from_slice(&(key.len() as u32).to_le_bytes());
        out.extend_from_slice(key);
        out.extend_from_slice(&(row.len() as u32).to_le_bytes());
        for ((f, q), v) in row {
            for part in [f.as_bytes(), q.as_bytes(), v.as_slice()] {
                out.extend_from_slice(&(part.len() as u32).to_le_bytes());
                out.extend_from_slice(part);
            }
        }
    }
    out
}

fn decode_segment(path: &str, bytes: &[u8]) -> Result<Rows, CfError> {
    let corrupt = |reason: &str| CfError::CorruptSegment { path: path.to_string(), reason: reason.to_string() };
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CfError> {
        let end = pos.checked_add(n).filter(|e| *e <= bytes.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    if take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let rows = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
    let mut out = Rows::new();
    let utf8 = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|_| corrupt("name is not UTF-8"));
    for _ in 0..rows {
        let len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let key = take(len)?.to_vec();
        let cells = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        let mut row = Row::new();
        for _ in 0..cells {
            let mut parts = Vec::with_capacity(3);
            for _ in 0..3 {
                let len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
                parts.push(take(len)?.to_vec());
            }
            let value = parts.pop().expect("three parts");
            let q = utf8(&parts.pop().expect("three parts"))?;
            let f = utf8(&parts.pop().expect("three parts"))?;
            row.insert((f, q), value);
        }
        out.insert(key, row);
    }
    if pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs::DfsConfig;
    use crate::ingest::PublicMetrics;

    fn store() -> (tempfile::TempDir, CfStore) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(DfsConfig::new(dir.path().join("dfs")).block_size(256)).unwrap();
        (dir, CfStore::in_memory(dfs))
    }

    fn tweet(id: &str, author: &str, m: [i64; 5]) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            author_id: author.into(),
            text: format!("text of {id}"),
            created_at: String::new(),
            public_metrics: PublicMetrics {
                impression_count: m[0],
                like_count: m[1],
                quote_count: m[2],
                reply_count: m[3],
                retweet_count: m[4],
            },
            username: None,
            batch_id: None,
            ingested_at: None,
        }
    }

    #[test]
    fn create_rules() {
        let (_d, mut s) = store();
        s.create_table("tweets", ["m"]).unwrap();
        assert_eq!(s.families("tweets").unwrap(), ["m"]);
        assert!(matches!(s.create_table("tweets", ["m"]), Err(CfError::DuplicateTable(_))));
        assert!(matches!(s.create_table("x", Vec::<String>::new()), Err(CfError::NoFamilies)));
    }

    #[test]
    fn put_get_last_write_wins() {
        let (_d, mut s) = store();
        s.create_table("t", ["m"]).unwrap();
        s.put("t", b"r1", "m", "likes", b"5").unwrap();
        let cells = s.get("t", b"r1").unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].value, b"5");
        s.flush("t").unwrap();
        s.put("t", b"r1", "m", "likes", b"6").unwrap();
        assert_eq!(s.get("t", b"r1").unwrap()[0].value, b"6");
        s.flush("t").unwrap();
        assert_eq!(s.get("t", b"r1").unwrap()[0].value, b"6");
        assert!(s.get("t", b"absent").unwrap().is_empty());
        assert!(matches!(s.put("t", b"r", "zz", "q", b"v"), Err(CfError::UnknownFamily { .. })));
        assert!(matches!(s.put("nope", b"r", "m", "q", b"v"), Err(CfError::UnknownTable(_))));
        assert!(matches!(s.put("t", b"r", "m", "", b"v"), Err(CfError::InvalidCell(_))));
    }

    #[test]
    fn get_sorts_cells() {
        let (_d, mut s) = store();
        s.create_table("t", ["b", "a"]).unwrap();
        s.put("t", b"r", "b", "x", b"1").unwrap();
        s.put("t", b"r", "a", "z", b"2").unwrap();
        s.put("t", b"r", "a", "y", b"3").unwrap();
        let coords: Vec<(String, String)> = s.get("t", b"r").unwrap().into_iter().map(|c| (c.family, c.qualifier)).collect();
        assert_eq!(coords, [("a".into(), "y".into()), ("a".into(), "z".into()), ("b".into(), "x".into())]);
    }

    #[test]
    fn scan_ranges_and_projection() {
        let (_d, mut s) = store();
        s.create_table("t", ["m"]).unwrap();
        for r in ["r3", "r1", "r2"] {
            s.put("t", r.as_bytes(), "m", "likes", b"1").unwrap();
            s.put("t", r.as_bytes(), "m", "quotes", b"2").unwrap();
        }
        s.flush("t").unwrap();
        s.put("t", b"r0", "m", "likes", b"9").unwrap();

        let keys: Vec<Vec<u8>> = s.scan("t", "m", None, None, None).unwrap().map(|(k, _)| k).collect();
        assert_eq!(keys, [b"r0".to_vec(), b"r1".to_vec(), b"r2".to_vec(), b"r3".to_vec()]);

        let from_r2: Vec<Vec<u8>> = s.scan("t", "m", None, Some(b"r2"), None).unwrap().map(|(k, _)| k).collect();
        assert_eq!(from_r2, [b"r2".to_vec(), b"r3".to_vec()]);
        let bounded: Vec<Vec<u8>> = s.scan("t", "m", None, Some(b"r1"), Some(b"r3")).unwrap().map(|(k, _)| k).collect();
        assert_eq!(bounded, [b"r1".to_vec(), b"r2".to_vec()]);

        for (_, cells) in s.scan("t", "m", Some(&["likes"]), None, None).unwrap() {
            assert!(cells.iter().all(|c| c.qualifier == "likes"));
        }
        assert_eq!(s.scan("t", "m", Some(&["quotes"]), None, None).unwrap().count(), 3);
    }

    #[test]
    fn scan_is_a_snapshot() {
        let (_d, mut s) = store();
        s.create_table("t", ["m"]).unwrap();
        s.put("t", b"a", "m", "q", b"1").unwrap();
        let scan = s.scan("t", "m", None, None, None).unwrap();
        s.put("t", b"b", "m", "q", b"2").unwrap();
        s.flush("t").unwrap();
        assert_eq!(scan.count(), 1);
    }

    #[test]
    fn load_tweets_counts_cells_and_rejects_duplicates() {
        let (_d, mut s) = store();
        s.create_table("tweets", ["m"]).unwrap();
        let tweets = [tweet("t1", "u1", [1; 5]), tweet("t2", "u1", [2; 5]), tweet("t3", "u2", [3; 5])];
        let report = s.load_tweets("tweets", &tweets).unwrap();
        assert_eq!(report, LoadReport { loaded: 3, rejected: 0 });
        let cells: usize = s.scan("tweets", "m", None, None, None).unwrap().map(|(_, c)| c.len()).sum();
        assert_eq!(cells, 18);

        s.create_table("dups", ["m", "t"]).unwrap();
        let dup = [tweet("t1", "u1", [1; 5]), tweet("t1", "u9", [5; 5])];
        assert_eq!(s.load_tweets("dups", &dup).unwrap(), LoadReport { loaded: 1, rejected: 1 });
        let row = s.get("dups", b"t1").unwrap();
        assert_eq!(row.len(), 7);
        assert!(row.iter().any(|c| c.family == "m" && c.qualifier == "author_id" && c.value == b"u1"));

        assert_eq!(s.load_tweets("tweets", std::iter::empty()).unwrap(), LoadReport::default());
        s.create_table("nometrics", ["x"]).unwrap();
        assert!(matches!(s.load_tweets("nometrics", &tweets), Err(CfError::UnknownFamily { .. })));
    }

    #[test]
    fn persisted_segments_reload() {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(DfsConfig::new(dir.path().join("dfs")).block_size(32)).unwrap();
        let catalog = dir.path().join("cf.json");
        {
            let mut s = CfStore::open(dfs.clone(), &catalog).unwrap();
            s.set_flush_rows(2);
            s.create_table("t", ["m"]).unwrap();
            for i in 0..5u8 {
                s.put("t", &[b'k', i], "m", "v", &[i]).unwrap();
            }
            s.flush_all().unwrap();
            assert_eq!(dfs.list("/hbase/t/").len(), 1);
        }
        let s = CfStore::open(dfs, &catalog).unwrap();
        assert_eq!(s.row_count("t").unwrap(), 5);
        assert_eq!(s.get("t", &[b'k', 3]).unwrap()[0].value, [3]);
    }

    #[test]
    fn drop_removes_segment() {
        let (_d, mut s) = store();
        s.create_table("t", ["m"]).unwrap();
        s.put("t", b"a", "m", "q", b"1").unwrap();
        s.flush("t").unwrap();
        s.drop_table("t").unwrap();
        assert!(s.dfs.list("/hbase/").is_empty());
        assert!(matches!(s.get("t", b"a"), Err(CfError::UnknownTable(_))));
    }
}
