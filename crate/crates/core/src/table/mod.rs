//! Schema-on-read tables and a small SQL evaluator.
//!
//! Two kinds of table live in a [`Catalog`]:
//!
//! - **external** tables are a schema laid over an existing block-store file
//!   (JSON Lines or CSV). Every query re-reads and re-parses the file, and the
//!   file is never modified or removed by the catalog;
//! - **internal** (managed) tables are materialized copies stored as one
//!   segment per leaf column: plain `i64` arrays with a validity mask, and
//!   dictionary-encoded text. Dropping an internal table deletes its segments.
//!
//! Queries are written in a small SQL subset, see [`parse_sql`].

mod exec;
mod segment;
mod sql;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::dfs::{Dfs, DfsError};

pub use exec::{ResultSet, RowFilter};
pub use segment::Segment;
pub use sql::{parse_sql, Expr, OrderItem, QueryAst, SelectItem, SelectList};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("table {0} already exists")]
    DuplicateTable(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("table {0} is in use by a running query")]
    InUse(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unsupported construct at position {position}: {construct}")]
    Unsupported { position: usize, construct: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow while evaluating {0}")]
    Overflow(String),
    #[error("{path} line {line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("segment {path}: {reason}")]
    CorruptSegment { path: String, reason: String },
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Type of a leaf column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafType {
    Int64,
    Text,
}

impl fmt::Display for LeafType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeafType::Int64 => "int64",
            LeafType::Text => "text",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int64,
    Text,
    Record(Vec<Column>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn int(name: &str) -> Self {
        Column { name: name.to_string(), ty: ColumnType::Int64 }
    }

    pub fn text(name: &str) -> Self {
        Column { name: name.to_string(), ty: ColumnType::Text }
    }

    pub fn record(name: &str, fields: Vec<Column>) -> Self {
        Column { name: name.to_string(), ty: ColumnType::Record(fields) }
    }
}

/// A scalar column reachable by a dotted path such as
/// `public_metrics.like_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub path: String,
    pub ty: LeafType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<Column>,
}

impl TableSchema {
    pub fn new(name: &str, columns: Vec<Column>) -> Result<Self, TableError> {
        let schema = TableSchema { name: name.to_string(), columns };
        schema.validate()?;
        Ok(schema)
    }

    /// Tweets as produced by ingestion.
    pub fn tweets(name: &str) -> Self {
        TableSchema {
            name: name.to_string(),
            columns: vec![
                Column::text("id"),
                Column::text("author_id"),
                Column::text("text"),
                Column::text("created_at"),
                Column::record(
                    "public_metrics",
                    vec![
                        Column::int("impression_count"),
                        Column::int("like_count"),
                        Column::int("quote_count"),
                        Column::int("reply_count"),
                        Column::int("retweet_count"),
                    ],
                ),
            ],
        }
    }

    pub fn users(name: &str) -> Self {
        TableSchema { name: name.to_string(), columns: vec![Column::text("id"), Column::text("username")] }
    }

    /// Parses a compact column list such as
    /// `id:text,public_metrics.like_count:int64`. Dotted names create nested
    /// record columns.
    pub fn parse(name: &str, spec: &str) -> Result<Self, TableError> {
        let mut columns: Vec<Column> = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (path, ty) = item
                .split_once(':')
                .ok_or_else(|| TableError::InvalidSchema(format!("expected name:type, got {item:?}")))?;
            let ty = match ty.trim().to_ascii_lowercase().as_str() {
                "int64" | "int" | "bigint" => ColumnType::Int64,
                "text" | "string" => ColumnType::Text,
                other => return Err(TableError::InvalidSchema(format!("unknown type {other:?}"))),
            };
            insert_path(&mut columns, &path.trim().split('.').collect::<Vec<_>>(), ty)?;
        }
        TableSchema::new(name, columns)
    }

    fn validate(&self) -> Result<(), TableError> {
        if self.columns.is_empty() {
            return Err(TableError::InvalidSchema("a table needs at least one column".into()));
        }
        fn check(cols: &[Column], prefix: &str) -> Result<(), TableError> {
            let mut seen = std::collections::HashSet::new();
            for c in cols {
                let valid = !c.name.is_empty() && c.name.chars().all(|ch| ch.is_alphanumeric() || ch == '_');
                if !valid {
                    return Err(TableError::InvalidSchema(format!("bad column name {:?}", c.name)));
                }
                if !seen.insert(c.name.to_ascii_lowercase()) {
                    return Err(TableError::InvalidSchema(format!("duplicate column {prefix}{}", c.name)));
                }
                if let ColumnType::Record(fields) = &c.ty {
                    if fields.is_empty() {
                        return Err(TableError::InvalidSchema(format!("record {prefix}{} has no fields", c.name)));
                    }
                    check(fields, &format!("{prefix}{}.", c.name))?;
                }
            }
            Ok(())
        }
        check(&self.columns, "")
    }

    /// Scalar columns in declaration order, nested fields flattened.
    pub fn leaves(&self) -> Vec<Leaf> {
        fn walk(cols: &[Column], prefix: &str, out: &mut Vec<Leaf>) {
            for c in cols {
                let path = format!("{prefix}{}", c.name);
                match &c.ty {
                    ColumnType::Int64 => out.push(Leaf { path, ty: LeafType::Int64 }),
                    ColumnType::Text => out.push(Leaf { path, ty: LeafType::Text }),
                    ColumnType::Record(fields) => walk(fields, &format!("{path}."), out),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.columns, "", &mut out);
        out
    }

    /// Index of a leaf column, matched case-insensitively.
    pub fn leaf_index(&self, path: &str) -> Option<usize> {
        self.leaves().iter().position(|l| l.path.eq_ignore_ascii_case(path))
    }
}

fn insert_path(columns: &mut Vec<Column>, path: &[&str], ty: ColumnType) -> Result<(), TableError> {
    let (head, rest) = path.split_first().expect("split yields at least one segment");
    if rest.is_empty() {
        if columns.iter().any(|c| c.name == *head) {
            return Err(TableError::InvalidSchema(format!("duplicate column {head}")));
        }
        columns.push(Column { name: head.to_string(), ty });
        return Ok(());
    }
    if !columns.iter().any(|c| c.name == *head) {
        columns.push(Column::record(head, Vec::new()));
    }
    match columns.iter_mut().find(|c| c.name == *head).map(|c| &mut c.ty) {
        Some(ColumnType::Record(fields)) => insert_path(fields, rest, ty),
        _ => Err(TableError::InvalidSchema(format!("{head} is both a scalar and a record"))),
    }
}

/// A typed SQL value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// Sorts before every other value.
    Null,
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for SourceFormat {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(SourceFormat::Jsonl),
            "csv" => Ok(SourceFormat::Csv),
            other => Err(TableError::InvalidSchema(format!("unknown source format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TableKind {
    External { source: String, format: SourceFormat },
    Internal { segments: Vec<String>, row_count: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub schema: TableSchema,
    pub kind: TableKind,
}

impl Table {
    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, TableKind::External { .. })
    }
}

/// A catalog entry shared with running queries; the reference count doubles
/// as the reader guard that blocks `drop_table`.
#[derive(Debug)]
pub(crate) struct Entry {
    table: Table,
    columns: Mutex<Option<Arc<Vec<Segment>>>>,
}

/// Table registry bound to a block store.
///
/// Catalog mutations are serialized; queries only hold a shared reference to
/// the tables they read.
#[derive(Debug)]
pub struct Catalog {
    dfs: Dfs,
    path: Option<PathBuf>,
    tables: RwLock<BTreeMap<String, Arc<Entry>>>,
}

impl Catalog {
    /// A catalog that lives only in memory.
    pub fn in_memory(dfs: Dfs) -> Self {
        Catalog { dfs, path: None, tables: RwLock::new(BTreeMap::new()) }
    }

    /// A catalog persisted as JSON at `path` (created on first change).
    pub fn open(dfs: Dfs, path: &Path) -> Result<Self, TableError> {
        let mut tables = BTreeMap::new();
        if path.exists() {
            let defs: Vec<Table> = serde_json::from_slice(&fs::read(path)?)
                .map_err(|e| TableError::InvalidSchema(format!("{}: {e}", path.display())))?;
            for table in defs {
                tables.insert(key(table.name()), Arc::new(Entry { table, columns: Mutex::new(None) }));
            }
        }
        Ok(Catalog { dfs, path: Some(path.to_path_buf()), tables: RwLock::new(tables) })
    }

    pub fn dfs(&self) -> &Dfs {
        &self.dfs
    }

    fn persist(&self, tables: &BTreeMap<String, Arc<Entry>>) -> Result<(), TableError> {
        if let Some(path) = &self.path {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let defs: Vec<&Table> = tables.values().map(|e| &e.table).collect();
            let json = serde_json::to_vec_pretty(&defs).map_err(io::Error::other)?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, json)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    pub fn tables(&self) -> Vec<Table> {
        self.tables.read().values().map(|e| e.table.clone()).collect()
    }

    pub fn table(&self, name: &str) -> Result<Table, TableError> {
        Ok(self.entry(name)?.table.clone())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.read().contains_key(&key(name))
    }

    pub(crate) fn entry(&self, name: &str) -> Result<Arc<Entry>, TableError> {
        self.tables.read().get(&key(name)).cloned().ok_or_else(|| TableError::UnknownTable(name.to_string()))
    }

    /// Registers a schema over an existing file. Nothing is read until the
    /// table is queried.
    pub fn create_external_table(
        &self,
        schema: TableSchema,
        source: &str,
        format: SourceFormat,
    ) -> Result<Table, TableError> {
        schema.validate()?;
        if !self.dfs.exists(source) {
            return Err(DfsError::NotFound(source.to_string()).into());
        }
        let table = Table { schema, kind: TableKind::External { source: source.to_string(), format } };
        self.register(table.clone())?;
        Ok(table)
    }

    /// Materializes `source_table` into a managed columnar table.
    ///
    /// `schema` supplies the new name and the columns to keep; every leaf must
    /// exist in the source table with the same type.
    pub fn create_internal_table_as(&self, schema: TableSchema, source_table: &str) -> Result<Table, TableError> {
        schema.validate()?;
        if self.contains(&schema.name) {
            return Err(TableError::DuplicateTable(schema.name.clone()));
        }
        let source = self.entry(source_table)?;
        let source_leaves = source.table.schema.leaves();
        let mut picks = Vec::new();
        for leaf in schema.leaves() {
            let idx = source
                .table
                .schema
                .leaf_index(&leaf.path)
                .ok_or_else(|| TableError::UnknownColumn(format!("{source_table}.{}", leaf.path)))?;
            if source_leaves[idx].ty != leaf.ty {
                return Err(TableError::TypeMismatch(format!(
                    "{} is {} in {source_table} but {} in {}",
                    leaf.path, source_leaves[idx].ty, leaf.ty, schema.name
                )));
            }
            picks.push(idx);
        }
        let columns = self.load_columns(&source)?;
        let row_count = columns.first().map_or(0, Segment::len) as u64;

        let base = format!("/warehouse/{}", schema.name.to_ascii_lowercase());
        let mut segments = Vec::new();
        for (n, idx) in picks.iter().enumerate() {
            let path = format!("{base}/{n:03}.seg");
            if self.dfs.exists(&path) {
                self.dfs.delete(&path)?;
            }
            self.dfs.put(&path, &columns[*idx].encode())?;
            segments.push(path);
        }
        let table = Table { schema, kind: TableKind::Internal { segments, row_count } };
        let picked: Vec<Segment> = picks.iter().map(|i| columns[*i].clone()).collect();
        let entry = Entry { table: table.clone(), columns: Mutex::new(Some(Arc::new(picked))) };
        if let Err(e) = self.insert(entry) {
            if let TableKind::Internal { segments, .. } = &table.kind {
                for p in segments {
                    let _ = self.dfs.delete(p);
                }
            }
            return Err(e);
        }
        Ok(table)
    }

    fn register(&self, table: Table) -> Result<(), TableError> {
        self.insert(Entry { table, columns: Mutex::new(None) })
    }

    fn insert(&self, entry: Entry) -> Result<(), TableError> {
        let mut tables = self.tables.write();
        let k = key(entry.table.name());
        if tables.contains_key(&k) {
            return Err(TableError::DuplicateTable(entry.table.name().to_string()));
        }
        tables.insert(k, Arc::new(entry));
        self.persist(&tables)
    }

    /// Removes a table. Internal tables lose their segments; external
    /// sources are left alone. Fails while a query still reads the table.
    pub fn drop_table(&self, name: &str) -> Result<(), TableError> {
        let mut tables = self.tables.write();
        let k = key(name);
        let entry = tables.get(&k).ok_or_else(|| TableError::UnknownTable(name.to_string()))?;
        if Arc::strong_count(entry) > 1 {
            return Err(TableError::InUse(name.to_string()));
        }
        let entry = tables.remove(&k).expect("checked above");
        self.persist(&tables)?;
        if let TableKind::Internal { segments, .. } = &entry.table.kind {
            for path in segments {
                if self.dfs.exists(path) {
                    self.dfs.delete(path)?;
                }
            }
        }
        Ok(())
    }

    /// Number of rows. External tables are scanned.
    pub fn row_count(&self, name: &str) -> Result<u64, TableError> {
        let entry = self.entry(name)?;
        match &entry.table.kind {
            TableKind::Internal { row_count, .. } => Ok(*row_count),
            TableKind::External { .. } => Ok(self.load_columns(&entry)?.first().map_or(0, Segment::len) as u64),
        }
    }

    /// All leaf columns of a table as segments. Internal tables are decoded
    /// once and cached; external tables are parsed on every call.
    pub(crate) fn load_columns(&self, entry: &Entry) -> Result<Arc<Vec<Segment>>, TableError> {
        match &entry.table.kind {
            TableKind::External { source, format } => {
                let text = self.dfs.read_to_string(source)?;
                let leaves = entry.table.schema.leaves();
                let cols = match format {
                    SourceFormat::Jsonl => segment::parse_jsonl(source, &text, &leaves)?,
                    SourceFormat::Csv => segment::parse_csv(source, &text, &leaves)?,
                };
                Ok(Arc::new(cols))
            }
            TableKind::Internal { segments, .. } => {
                let mut cache = entry.columns.lock();
                if let Some(cols) = cache.as_ref() {
                    return Ok(Arc::clone(cols));
                }
                let cols = segments
                    .iter()
                    .map(|p| Segment::decode(p, &self.dfs.get_file(p)?))
                    .collect::<Result<Vec<_>, _>>()?;
                let cols = Arc::new(cols);
                *cache = Some(Arc::clone(&cols));
                Ok(cols)
            }
        }
    }

    /// Parses and runs one query.
    pub fn sql(&self, query: &str) -> Result<ResultSet, TableError> {
        self.execute(&parse_sql(query)?, None)
    }

    /// Runs a parsed query; `filter` drops rows before any projection or
    /// aggregation.
    pub fn execute(&self, ast: &QueryAst, filter: Option<&RowFilter>) -> Result<ResultSet, TableError> {
        let entry = self.entry(&ast.from)?;
        let columns = self.load_columns(&entry)?;
        exec::execute(ast, &entry.table.schema, &columns, filter)
    }
}

fn key(name: &str) -> String {
    name.to_ascii_lowercase()
}
