use std::io;

use crate::bench::BenchError;
use crate::cf::CfError;
use crate::dfs::DfsError;
use crate::flow::FlowError;
use crate::graph::GraphError;
use crate::ingest::IngestError;
use crate::mr::MrError;
use crate::table::TableError;
use crate::tasks::TaskError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any failure raised by one of the engines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Mr(#[from] MrError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
