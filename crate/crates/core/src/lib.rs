//! Desk-scale polyglot data processing.
//!
//! `miniplex` bundles a handful of small storage and compute engines that
//! mirror a Hadoop/Spark deployment on a single machine:
//!
//! - [`dfs`]: a chunked, replicated block store with replica failover.
//! - [`mr`]: a MapReduce engine (split, map, shuffle with sort, reduce).
//! - [`flow`]: a lazy in-memory dataset engine with Spark-style
//!   transformations.
//! - [`table`]: external and managed tables plus a small SQL evaluator.
//! - [`cf`]: a row-key sorted column-family store.
//! - [`graph`]: a follower graph with degree and weak-component analysis.
//! - [`ingest`]: landing, preprocessing and loading of tweet batches.
//! - [`tasks`]: the influence, term-frequency and graph tasks, routed to
//!   interchangeable backends.
//! - [`bench`]: a synthetic data generator and a repeated-run benchmark
//!   harness.
//!
//! A [`Workspace`] ties the engines to one root directory.

pub mod bench;
pub mod cf;
pub mod config;
pub mod dfs;
mod error;
pub mod flow;
pub mod graph;
pub mod ingest;
pub mod mr;
pub mod table;
pub mod tasks;
pub mod text;
mod workspace;

pub use config::Config;
pub use error::{Error, Result};
pub use workspace::Workspace;
