//! Chunked, replicated block storage.
//!
//! Files are split into fixed-size blocks and each block is copied to several
//! simulated storage nodes. A node is a directory under the cluster root, and
//! the namespace (which blocks make up which file, and where their replicas
//! live) is kept in memory and persisted as an append-only journal.
//!
//! Node failure is modelled as an availability flag: a failed node keeps its
//! files, but readers skip it and fall through to the next replica.
//!
//! ```
//! use miniplex::dfs::{Dfs, DfsConfig};
//!
//! let dir = tempfile::tempdir().unwrap();
//! let dfs = Dfs::open(DfsConfig::new(dir.path()).nodes(3).block_size(4)).unwrap();
//! let meta = dfs.put("/hello.txt", b"hello world").unwrap();
//! assert_eq!(meta.blocks.len(), 3);
//! assert_eq!(dfs.get_file("/hello.txt").unwrap(), b"hello world");
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Default block size: 128 MiB.
pub const DEFAULT_BLOCK_SIZE: u64 = 128 * 1024 * 1024;
/// Default number of replicas per block.
pub const DEFAULT_REPLICATION: usize = 3;

const META_DIR: &str = "namenode";
const JOURNAL_FILE: &str = "journal.log";
const NODES_FILE: &str = "nodes.json";

#[derive(Debug, thiserror::Error)]
pub enum DfsError {
    #[error("path already exists: {0}")]
    DuplicatePath(String),
    #[error("no such file: {0}")]
    NotFound(String),
    #[error("invalid logical path {0:?}")]
    InvalidPath(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("cluster must have at least one node")]
    NoNodes,
    #[error("no storage node is available")]
    NoAvailableNodes,
    #[error("block size must be positive")]
    InvalidBlockSize,
    #[error("replication must be at least 1")]
    InvalidReplication,
    #[error("block {index} of {path} could not be written to any node")]
    WriteFailed { path: String, index: u64 },
    #[error("block {index} of {path} has no readable replica")]
    BlockUnavailable { path: String, index: u64 },
    #[error("metadata journal line {line}: {reason}")]
    Journal { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Identifier of a simulated storage node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub block_id: String,
    pub file_path: String,
    /// Position of the block within its file, starting at 0.
    pub index: u64,
    pub length: u64,
    /// Nodes holding a copy, in read-preference order.
    pub replicas: Vec<NodeId>,
    /// Hex SHA-256 of the block payload.
    pub checksum: String,
    /// Set when fewer replicas than requested could be placed.
    pub under_replicated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileMeta {
    pub path: String,
    pub total_length: u64,
    pub block_size: u64,
    pub replication: usize,
    pub blocks: Vec<BlockMeta>,
}

impl FileMeta {
    pub fn is_under_replicated(&self) -> bool {
        self.blocks.iter().any(|b| b.under_replicated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStatus {
    pub id: NodeId,
    pub available: bool,
}

/// Point-in-time copy of the cluster metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterState {
    pub nodes: Vec<NodeStatus>,
    pub namespace: BTreeMap<String, FileMeta>,
    pub default_block_size: u64,
    pub default_replication: usize,
}

#[derive(Debug, Clone)]
pub struct DfsConfig {
    pub root: PathBuf,
    pub nodes: usize,
    pub block_size: u64,
    pub replication: usize,
}

impl DfsConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DfsConfig {
            root: root.into(),
            nodes: 3,
            block_size: DEFAULT_BLOCK_SIZE,
            replication: DEFAULT_REPLICATION,
        }
    }

    pub fn nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn block_size(mut self, block_size: u64) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn replication(mut self, replication: usize) -> Self {
        self.replication = replication;
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum JournalRecord {
    Put { meta: FileMeta },
    Delete { path: String },
}

#[derive(Debug)]
struct Namespace {
    files: BTreeMap<String, FileMeta>,
    /// Number of blocks placed so far; drives the rotating start offset.
    rotation: u64,
    next_block: u64,
}

#[derive(Debug)]
struct Inner {
    root: PathBuf,
    default_block_size: u64,
    default_replication: usize,
    namespace: RwLock<Namespace>,
    nodes: RwLock<Vec<NodeStatus>>,
    journal: Mutex<fs::File>,
}

/// Handle to a block-store cluster rooted at one directory. Cloning is cheap
/// and all clones share the same namespace.
#[derive(Debug, Clone)]
pub struct Dfs {
    inner: Arc<Inner>,
}

impl Dfs {
    /// Opens the cluster at `config.root`, formatting it on first use.
    ///
    /// An existing cluster keeps the node count it was formatted with.
    pub fn open(config: DfsConfig) -> Result<Self, DfsError> {
        if config.nodes == 0 {
            return Err(DfsError::NoNodes);
        }
        if config.block_size == 0 {
            return Err(DfsError::InvalidBlockSize);
        }
        if config.replication == 0 {
            return Err(DfsError::InvalidReplication);
        }
        let meta_dir = config.root.join(META_DIR);
        fs::create_dir_all(&meta_dir)?;

        let nodes_path = meta_dir.join(NODES_FILE);
        let nodes: Vec<NodeStatus> = if nodes_path.exists() {
            serde_json::from_slice(&fs::read(&nodes_path)?).map_err(|e| DfsError::Journal {
                line: 0,
                reason: format!("{NODES_FILE}: {e}"),
            })?
        } else {
            let nodes: Vec<NodeStatus> = (0..config.nodes as u32)
                .map(|k| NodeStatus { id: NodeId(k), available: true })
                .collect();
            write_nodes(&nodes_path, &nodes)?;
            nodes
        };
        if nodes.is_empty() {
            return Err(DfsError::NoNodes);
        }
        for node in &nodes {
            fs::create_dir_all(node_dir(&config.root, node.id))?;
        }

        let journal_path = meta_dir.join(JOURNAL_FILE);
        let namespace = replay_journal(&journal_path)?;
        let journal = OpenOptions::new().create(true).append(true).open(&journal_path)?;

        Ok(Dfs {
            inner: Arc::new(Inner {
                root: config.root,
                default_block_size: config.block_size,
                default_replication: config.replication,
                namespace: RwLock::new(namespace),
                nodes: RwLock::new(nodes),
                journal: Mutex::new(journal),
            }),
        })
    }

    pub fn root(&self) -> &Path {
        &self.inner.root
    }

    pub fn default_block_size(&self) -> u64 {
        self.inner.default_block_size
    }

    pub fn default_replication(&self) -> usize {
        self.inner.default_replication
    }

    /// Stores `content` with the cluster's default block size and replication.
    pub fn put(&self, path: &str, content: &[u8]) -> Result<FileMeta, DfsError> {
        self.put_file(path, content, self.inner.default_block_size, self.inner.default_replication)
    }

    /// Splits `content` into blocks and writes each block to up to
    /// `replication` distinct available nodes.
    ///
    /// Placement walks the node ring from a start offset that advances by one
    /// for every block placed, so an identical sequence of puts on an
    /// identical cluster always produces identical metadata. When fewer nodes
    /// are available than requested the block is stored anyway and flagged
    /// as under-replicated.
    pub fn put_file(
        &self,
        path: &str,
        content: &[u8],
        block_size: u64,
        replication: usize,
    ) -> Result<FileMeta, DfsError> {
        validate_path(path)?;
        if block_size == 0 {
            return Err(DfsError::InvalidBlockSize);
        }
        if replication == 0 {
            return Err(DfsError::InvalidReplication);
        }

        let mut ns = self.inner.namespace.write();
        if ns.files.contains_key(path) {
            return Err(DfsError::DuplicatePath(path.to_string()));
        }
        let nodes = self.inner.nodes.read().clone();
        if !nodes.iter().any(|n| n.available) {
            return Err(DfsError::NoAvailableNodes);
        }

        let mut blocks = Vec::new();
        let mut rotation = ns.rotation;
        let mut next_block = ns.next_block;
        let mut written = Vec::new();
        for (index, chunk) in content.chunks(block_size as usize).enumerate() {
            let block_id = format!("blk_{next_block:010}");
            next_block += 1;
            let start = (rotation % nodes.len() as u64) as usize;
            rotation += 1;

            let mut replicas = Vec::new();
            for step in 0..nodes.len() {
                if replicas.len() == replication {
                    break;
                }
                let node = nodes[(start + step) % nodes.len()];
                if !node.available {
                    continue;
                }
                let file = block_path(&self.inner.root, node.id, &block_id);
                if fs::write(&file, chunk).is_ok() {
                    replicas.push(node.id);
                    written.push(file);
                }
            }
            if replicas.is_empty() {
                for file in &written {
                    let _ = fs::remove_file(file);
                }
                return Err(DfsError::WriteFailed { path: path.to_string(), index: index as u64 });
            }
            blocks.push(BlockMeta {
                block_id,
                file_path: path.to_string(),
                index: index as u64,
                length: chunk.len() as u64,
                under_replicated: replicas.len() < replication,
                replicas,
                checksum: checksum(chunk),
            });
        }

        let meta = FileMeta {
            path: path.to_string(),
            total_length: content.len() as u64,
            block_size,
            replication,
            blocks,
        };
        self.append_journal(&JournalRecord::Put { meta: meta.clone() })?;
        ns.rotation = rotation;
        ns.next_block = next_block;
        ns.files.insert(path.to_string(), meta.clone());
        Ok(meta)
    }

    /// Reads a whole file back, failing over between replicas.
    ///
    /// For each block the replicas are tried in list order; unavailable
    /// nodes, missing payloads and checksum mismatches all fall through to
    /// the next replica.
    pub fn get_file(&self, path: &str) -> Result<Vec<u8>, DfsError> {
        let meta = self.stat(path)?;
        let nodes = self.inner.nodes.read().clone();
        let mut out = Vec::with_capacity(meta.total_length as usize);
        for block in &meta.blocks {
            let bytes = self.read_block(block, &nodes).ok_or_else(|| DfsError::BlockUnavailable {
                path: path.to_string(),
                index: block.index,
            })?;
            out.extend_from_slice(&bytes);
        }
        Ok(out)
    }

    pub fn read_to_string(&self, path: &str) -> Result<String, DfsError> {
        let bytes = self.get_file(path)?;
        String::from_utf8(bytes)
            .map_err(|e| DfsError::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
    }

    fn read_block(&self, block: &BlockMeta, nodes: &[NodeStatus]) -> Option<Vec<u8>> {
        block.replicas.iter().find_map(|id| {
            let up = nodes.iter().any(|n| n.id == *id && n.available);
            if !up {
                return None;
            }
            let bytes = fs::read(block_path(&self.inner.root, *id, &block.block_id)).ok()?;
            (bytes.len() as u64 == block.length && checksum(&bytes) == block.checksum).then_some(bytes)
        })
    }

    /// Block metadata in file order. Never touches block payloads.
    pub fn locate(&self, path: &str) -> Result<Vec<BlockMeta>, DfsError> {
        Ok(self.stat(path)?.blocks)
    }

    pub fn stat(&self, path: &str) -> Result<FileMeta, DfsError> {
        self.inner
            .namespace
            .read()
            .files
            .get(path)
            .cloned()
            .ok_or_else(|| DfsError::NotFound(path.to_string()))
    }

    pub fn exists(&self, path: &str) -> bool {
        self.inner.namespace.read().files.contains_key(path)
    }

    /// Files whose path starts with `prefix`, sorted by path.
    pub fn list(&self, prefix: &str) -> Vec<FileMeta> {
        self.inner
            .namespace
            .read()
            .files
            .range(prefix.to_string()..)
            .take_while(|(p, _)| p.starts_with(prefix))
            .map(|(_, m)| m.clone())
            .collect()
    }

    /// Removes a file from the namespace and deletes its block payloads.
    pub fn delete(&self, path: &str) -> Result<(), DfsError> {
        let mut ns = self.inner.namespace.write();
        let meta = ns.files.get(path).cloned().ok_or_else(|| DfsError::NotFound(path.to_string()))?;
        self.append_journal(&JournalRecord::Delete { path: path.to_string() })?;
        ns.files.remove(path);
        for block in &meta.blocks {
            for node in &block.replicas {
                let _ = fs::remove_file(block_path(&self.inner.root, *node, &block.block_id));
            }
        }
        Ok(())
    }

    /// Marks a node unavailable. Idempotent.
    pub fn fail_node(&self, node: NodeId) -> Result<(), DfsError> {
        self.set_available(node, false)
    }

    /// Marks a node available again. Idempotent.
    pub fn recover_node(&self, node: NodeId) -> Result<(), DfsError> {
        self.set_available(node, true)
    }

    fn set_available(&self, node: NodeId, available: bool) -> Result<(), DfsError> {
        let mut nodes = self.inner.nodes.write();
        let status = nodes.iter_mut().find(|n| n.id == node).ok_or(DfsError::UnknownNode(node))?;
        if status.available != available {
            status.available = available;
            write_nodes(&self.inner.root.join(META_DIR).join(NODES_FILE), &nodes)?;
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<NodeStatus> {
        self.inner.nodes.read().clone()
    }

    pub fn state(&self) -> ClusterState {
        ClusterState {
            nodes: self.nodes(),
            namespace: self.inner.namespace.read().files.clone(),
            default_block_size: self.inner.default_block_size,
            default_replication: self.inner.default_replication,
        }
    }

    /// Local path of one replica's payload.
    pub fn block_file(&self, node: NodeId, block_id: &str) -> PathBuf {
        block_path(&self.inner.root, node, block_id)
    }

    fn append_journal(&self, record: &JournalRecord) -> Result<(), DfsError> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut journal = self.inner.journal.lock();
        journal.write_all(&line)?;
        journal.flush()?;
        Ok(())
    }
}

fn validate_path(path: &str) -> Result<(), DfsError> {
    let ok = path.starts_with('/')
        && path.len() > 1
        && !path.ends_with('/')
        && !path.contains('\n')
        && path.split('/').skip(1).all(|c| !c.is_empty() && c != "." && c != "..");
    if ok {
        Ok(())
    } else {
        Err(DfsError::InvalidPath(path.to_string()))
    }
}

fn node_dir(root: &Path, node: NodeId) -> PathBuf {
    root.join(node.to_string())
}

fn block_path(root: &Path, node: NodeId, block_id: &str) -> PathBuf {
    node_dir(root, node).join(format!("{block_id}.blk"))
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_nodes(path: &Path, nodes: &[NodeStatus]) -> Result<(), DfsError> {
    let json = serde_json::to_vec_pretty(nodes).map_err(io::Error::other)?;
    fs::write(path, json)?;
    Ok(())
}

fn replay_journal(path: &Path) -> Result<Namespace, DfsError> {
    let mut ns = Namespace { files: BTreeMap::new(), rotation: 0, next_block: 0 };
    if !path.exists() {
        return Ok(ns);
    }
    let reader = BufReader::new(fs::File::open(path)?);
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JournalRecord = serde_json::from_str(&line)
            .map_err(|e| DfsError::Journal { line: n + 1, reason: e.to_string() })?;
        match record {
            JournalRecord::Put { meta } => {
                ns.rotation += meta.blocks.len() as u64;
                ns.next_block += meta.blocks.len() as u64;
                ns.files.insert(meta.path.clone(), meta);
            }
            JournalRecord::Delete { path } => {
                ns.files.remove(&path);
            }
        }
    }
    Ok(ns)
}
