use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, MutexGuard};
use serde::{Deserialize, Serialize};

use crate::cf::CfStore;
use crate::config::Config;
use crate::dfs::{Dfs, DfsConfig};
use crate::error::Result;
use crate::flow::FlowContext;
use crate::mr::MrEngine;
use crate::table::Catalog;

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    current_batch: Option<String>,
}

/// Every engine bound to one root directory.
///
/// Layout under the root: `dfs/` holds the block store, `catalog/tables.json`
/// the table catalog, `cf/catalog.json` the column-family tables and
/// `state.json` the batch most recently loaded.
#[derive(Debug)]
pub struct Workspace {
    config: Config,
    dfs: Dfs,
    catalog: Catalog,
    cf: Mutex<CfStore>,
}

impl Workspace {
    /// Opens the workspace, formatting the block store on first use.
    pub fn open(config: Config) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(&config.root)?;
        let dfs = Dfs::open(
            DfsConfig::new(config.root.join("dfs"))
                .nodes(config.nodes)
                .block_size(config.block_size)
                .replication(config.replication),
        )?;
        let catalog = Catalog::open(dfs.clone(), &config.root.join("catalog").join("tables.json"))?;
        let cf = CfStore::open(dfs.clone(), &config.root.join("cf").join("catalog.json"))?;
        Ok(Workspace { config, dfs, catalog, cf: Mutex::new(cf) })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.config.root
    }

    pub fn dfs(&self) -> &Dfs {
        &self.dfs
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Exclusive access to the column-family store.
    pub fn cf(&self) -> MutexGuard<'_, CfStore> {
        self.cf.lock()
    }

    pub fn workers(&self) -> usize {
        self.config.workers
    }

    pub fn mr_engine(&self) -> MrEngine {
        MrEngine::new(self.config.workers).with_dfs(self.dfs.clone())
    }

    pub fn flow_context(&self) -> FlowContext {
        FlowContext::new(self.config.workers)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.config.report_dir()
    }

    fn state_path(&self) -> PathBuf {
        self.config.root.join("state.json")
    }

    fn state(&self) -> State {
        fs::read(self.state_path()).ok().and_then(|b| serde_json::from_slice(&b).ok()).unwrap_or_default()
    }

    /// The batch most recently loaded by [`crate::ingest::load_all`].
    pub fn current_batch(&self) -> Option<String> {
        self.state().current_batch
    }

    pub(crate) fn set_current_batch(&self, batch: &str) -> io::Result<()> {
        let state = State { current_batch: Some(batch.to_string()) };
        fs::write(self.state_path(), serde_json::to_vec_pretty(&state).map_err(io::Error::other)?)
    }

    /// Creates the next `run-NNNNNN` directory under `parent`.
    pub fn new_run_dir(parent: &Path) -> io::Result<(String, PathBuf)> {
        fs::create_dir_all(parent)?;
        let mut last = 0u64;
        for entry in fs::read_dir(parent)? {
            let name = entry?.file_name();
            if let Some(n) = name.to_str().and_then(|s| s.strip_prefix("run-")).and_then(|s| s.parse::<u64>().ok()) {
                last = last.max(n);
            }
        }
        loop {
            last += 1;
            let id = format!("run-{last:06}");
            let dir = parent.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => return Ok((id, dir)),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
    }
}
