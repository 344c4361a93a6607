//! Workspace configuration.
//!
//! Settings come from a small TOML file (`miniplex.toml`), and every key is
//! optional:
//!
//! ```toml
//! root = "./miniplex-data"
//! nodes = 3
//! block_size = 134217728
//! replication = 3
//! workers = 4
//! report_dir = "./reports"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dfs::{DEFAULT_BLOCK_SIZE, DEFAULT_REPLICATION};
use crate::error::{Error, Result};

/// Environment variable that overrides [`Config::root`].
pub const ROOT_ENV: &str = "MINIPLEX_ROOT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub root: PathBuf,
    /// Number of simulated storage nodes, used when the root is formatted.
    pub nodes: usize,
    pub block_size: u64,
    pub replication: usize,
    pub workers: usize,
    /// Where task and bench reports go; `<root>/reports` when unset.
    pub report_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            root: PathBuf::from("miniplex-data"),
            nodes: 3,
            block_size: DEFAULT_BLOCK_SIZE,
            replication: DEFAULT_REPLICATION,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            report_dir: None,
        }
    }
}

impl Config {
    pub fn with_root(root: impl Into<PathBuf>) -> Self {
        Config { root: root.into(), ..Config::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let problem = if self.nodes == 0 {
            "nodes must be at least 1"
        } else if self.block_size == 0 {
            "block_size must be positive"
        } else if self.replication == 0 {
            "replication must be at least 1"
        } else if self.workers == 0 {
            "workers must be at least 1"
        } else if self.root.as_os_str().is_empty() {
            "root must not be empty"
        } else {
            return Ok(());
        };
        Err(Error::Config(problem.to_string()))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.report_dir.clone().unwrap_or_else(|| self.root.join("reports"))
    }
}
