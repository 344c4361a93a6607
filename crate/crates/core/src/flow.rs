//! Lazy in-memory datasets.
//!
//! A [`Dataset`] is a recipe: a source plus a linear chain of
//! transformations. Nothing is read or computed until an action
//! ([`Dataset::collect`] or [`Dataset::count`]) runs the chain, and
//! intermediate results stay in memory partitions instead of being written to
//! disk between steps.
//!
//! ```
//! use miniplex::flow::FlowContext;
//!
//! let ctx = FlowContext::new(2);
//! let pairs = ctx
//!     .from_rows(vec!["a b", "b"], 2)
//!     .flat_map(|line: &str| line.split(' ').map(str::to_string).collect::<Vec<_>>())
//!     .map(|w| (w, 1))
//!     .reduce_by_key(|x, y| x + y);
//! assert_eq!(pairs.collect().unwrap(), [("a".to_string(), 1), ("b".to_string(), 2)]);
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::dfs::{Dfs, DfsError};
use crate::mr::split_ranges;
use crate::text::{Normalization, StopWords};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("partition count must be at least 1")]
    NoPartitions,
    #[error("function failed in partition {partition}: {message}")]
    Function { partition: usize, message: String },
    #[error(transparent)]
    Dfs(#[from] DfsError),
}

/// One step of a dataset's plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Source(String),
    Map,
    FlatMap,
    Filter,
    ReduceByKey,
    SortByKey { ascending: bool },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Source(s) => write!(f, "source({s})"),
            Step::Map => f.write_str("map"),
            Step::FlatMap => f.write_str("flat_map"),
            Step::Filter => f.write_str("filter"),
            Step::ReduceByKey => f.write_str("reduce_by_key"),
            Step::SortByKey { ascending } => write!(f, "sort_by_key({ascending})"),
        }
    }
}

/// Read counters of a dataset's source, shared by every dataset derived
/// from it.
#[derive(Debug, Default)]
pub struct SourceStats {
    reads: AtomicU64,
    bytes: AtomicU64,
}

impl SourceStats {
    /// Number of times the source has been scanned.
    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes.load(Ordering::Relaxed)
    }
}

type Partitions<T> = Vec<Vec<T>>;
type Compute<T> = Arc<dyn Fn(&ThreadPool) -> Result<Partitions<T>, FlowError> + Send + Sync>;

/// Entry point that owns the worker pool.
#[derive(Clone)]
pub struct FlowContext {
    pool: Arc<ThreadPool>,
}

impl FlowContext {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("flow-worker-{i}"))
            .build()
            .expect("failed to start dataflow worker pool");
        FlowContext { pool: Arc::new(pool) }
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// In-memory source, cut into `partitions` contiguous chunks. A
    /// partition count of zero is reported when an action runs.
    pub fn from_rows<T>(&self, rows: Vec<T>, partitions: usize) -> Dataset<T>
    where
        T: Clone + Send + Sync + 'static,
    {
        let stats = Arc::new(SourceStats::default());
        let counter = Arc::clone(&stats);
        let rows = Arc::new(rows);
        let label = format!("rows[{}]", rows.len());
        let compute: Compute<T> = Arc::new(move |_| {
            if partitions == 0 {
                return Err(FlowError::NoPartitions);
            }
            counter.reads.fetch_add(1, Ordering::Relaxed);
            Ok(split_ranges(rows.len(), partitions).into_iter().map(|r| rows[r].to_vec()).collect())
        });
        Dataset {
            pool: Arc::clone(&self.pool),
            partitions,
            plan: vec![Step::Source(label)],
            stats,
            compute,
        }
    }

    /// Lines of a block-store text file. The file is read at action time, so
    /// a missing path only surfaces then.
    pub fn text_file(&self, dfs: &Dfs, path: &str, partitions: usize) -> Dataset<String> {
        let stats = Arc::new(SourceStats::default());
        let counter = Arc::clone(&stats);
        let dfs = dfs.clone();
        let owned = path.to_string();
        let compute: Compute<String> = Arc::new(move |_| {
            if partitions == 0 {
                return Err(FlowError::NoPartitions);
            }
            let text = dfs.read_to_string(&owned)?;
            counter.reads.fetch_add(1, Ordering::Relaxed);
            counter.bytes.fetch_add(text.len() as u64, Ordering::Relaxed);
            let lines: Vec<&str> = text.lines().collect();
            Ok(split_ranges(lines.len(), partitions)
                .into_iter()
                .map(|r| lines[r].iter().map(|l| l.to_string()).collect())
                .collect())
        });
        Dataset {
            pool: Arc::clone(&self.pool),
            partitions,
            plan: vec![Step::Source(path.to_string())],
            stats,
            compute,
        }
    }
}

/// A lazily evaluated, partitioned collection.
pub struct Dataset<T> {
    pool: Arc<ThreadPool>,
    partitions: usize,
    plan: Vec<Step>,
    stats: Arc<SourceStats>,
    compute: Compute<T>,
}

impl<T> Clone for Dataset<T> {
    fn clone(&self) -> Self {
        Dataset {
            pool: Arc::clone(&self.pool),
            partitions: self.partitions,
            plan: self.plan.clone(),
            stats: Arc::clone(&self.stats),
            compute: Arc::clone(&self.compute),
        }
    }
}

impl<T> fmt::Debug for Dataset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("partitions", &self.partitions)
            .field("plan", &self.plan)
            .finish()
    }
}

impl<T: Send + 'static> Dataset<T> {
    pub fn plan(&self) -> &[Step] {
        &self.plan
    }

    pub fn partition_count(&self) -> usize {
        self.partitions
    }

    pub fn source_stats(&self) -> &SourceStats {
        &self.stats
    }

    fn derive<U>(&self, step: Step, compute: Compute<U>) -> Dataset<U> {
        let mut plan = self.plan.clone();
        plan.push(step);
        Dataset {
            pool: Arc::clone(&self.pool),
            partitions: self.partitions,
            plan,
            stats: Arc::clone(&self.stats),
            compute,
        }
    }

    /// Applies `f` to every partition in parallel, keeping partition order.
    fn per_partition<U, F>(&self, step: Step, f: F) -> Dataset<U>
    where
        U: Send + 'static,
        F: Fn(Vec<T>) -> Result<Vec<U>, String> + Send + Sync + 'static,
    {
        let parent = Arc::clone(&self.compute);
        self.derive(
            step,
            Arc::new(move |pool| {
                let parts = parent(pool)?;
                let results: Vec<Result<Vec<U>, String>> = pool.install(|| parts.into_par_iter().map(&f).collect());
                results
                    .into_iter()
                    .enumerate()
                    .map(|(partition, r)| r.map_err(|message| FlowError::Function { partition, message }))
                    .collect()
            }),
        )
    }

    pub fn map<U, F>(&self, f: F) -> Dataset<U>
    where
        U: Send + 'static,
        F: Fn(T) -> U + Send + Sync + 'static,
    {
        self.per_partition(Step::Map, move |p| Ok(p.into_iter().map(&f).collect()))
    }

    /// Like [`Dataset::map`] but the function may fail; the first failing
    /// partition (in partition order) aborts the action.
    pub fn try_map<U, F>(&self, f: F) -> Dataset<U>
    where
        U: Send + 'static,
        F: Fn(T) -> Result<U, String> + Send + Sync + 'static,
    {
        self.per_partition(Step::Map, move |p| p.into_iter().map(&f).collect())
    }

    pub fn flat_map<U, I, F>(&self, f: F) -> Dataset<U>
    where
        U: Send + 'static,
        I: IntoIterator<Item = U>,
        F: Fn(T) -> I + Send + Sync + 'static,
    {
        self.per_partition(Step::FlatMap, move |p| Ok(p.into_iter().flat_map(&f).collect()))
    }

    pub fn filter<F>(&self, f: F) -> Dataset<T>
    where
        F: Fn(&T) -> bool + Send + Sync + 'static,
    {
        self.per_partition(Step::Filter, move |p| Ok(p.into_iter().filter(|x| f(x)).collect()))
    }

    /// Runs the plan and returns the partitions as computed.
    pub fn collect_partitions(&self) -> Result<Vec<Vec<T>>, FlowError> {
        (self.compute)(&self.pool)
    }

    pub fn collect(&self) -> Result<Vec<T>, FlowError> {
        Ok(self.collect_partitions()?.into_iter().flatten().collect())
    }

    pub fn count(&self) -> Result<usize, FlowError> {
        Ok(self.collect_partitions()?.iter().map(Vec::len).sum())
    }
}

impl<K, V> Dataset<(K, V)>
where
    K: Ord + Hash + Clone + Send + Sync + 'static,
    V: Send + 'static,
{
    /// Folds the values of each key with `f`, which must be associative and
    /// commutative.
    ///
    /// Each partition is combined locally first, so memory stays bounded by
    /// the number of distinct keys. The merged result is ordered by key and
    /// cut back into the same number of contiguous partitions.
    pub fn reduce_by_key<F>(&self, f: F) -> Dataset<(K, V)>
    where
        F: Fn(V, V) -> V + Send + Sync + 'static,
    {
        let parent = Arc::clone(&self.compute);
        let partitions = self.partitions;
        let f = Arc::new(f);
        self.derive(
            Step::ReduceByKey,
            Arc::new(move |pool| {
                let parts = parent(pool)?;
                let combined: Vec<HashMap<K, V>> = pool.install(|| {
                    parts
                        .into_par_iter()
                        .map(|part| {
                            let mut acc: HashMap<K, V> = HashMap::new();
                            for (k, v) in part {
                                fold_into(&mut acc, k, v, &*f);
                            }
                            acc
                        })
                        .collect()
                });
                let mut merged: BTreeMap<K, V> = BTreeMap::new();
                for part in combined {
                    let mut part: Vec<(K, V)> = part.into_iter().collect();
                    part.sort_by(|a, b| a.0.cmp(&b.0));
                    for (k, v) in part {
                        match merged.remove(&k) {
                            Some(prev) => merged.insert(k, f(prev, v)),
                            None => merged.insert(k, v),
                        };
                    }
                }
                Ok(repartition(merged.into_iter().collect(), partitions))
            }),
        )
    }
}

fn fold_into<K: Hash + Eq, V, F: Fn(V, V) -> V>(acc: &mut HashMap<K, V>, k: K, v: V, f: &F) {
    match acc.remove(&k) {
        Some(prev) => acc.insert(k, f(prev, v)),
        None => acc.insert(k, v),
    };
}

impl<K, V> Dataset<(K, V)>
where
    K: Ord + Send + 'static,
    V: Ord + Send + 'static,
{
    /// Globally sorts by key. Pairs with equal keys are ordered by value
    /// ascending whatever the key direction, so the output order is total.
    pub fn sort_by_key(&self, ascending: bool) -> Dataset<(K, V)> {
        let parent = Arc::clone(&self.compute);
        let partitions = self.partitions;
        self.derive(
            Step::SortByKey { ascending },
            Arc::new(move |pool| {
                let mut all: Vec<(K, V)> = parent(pool)?.into_iter().flatten().collect();
                all.sort_by(|a, b| {
                    let by_key = if ascending { a.0.cmp(&b.0) } else { b.0.cmp(&a.0) };
                    by_key.then_with(|| a.1.cmp(&b.1))
                });
                Ok(repartition(all, partitions))
            }),
        )
    }
}

fn repartition<T>(items: Vec<T>, partitions: usize) -> Vec<Vec<T>> {
    let ranges = split_ranges(items.len(), partitions.max(1));
    let mut iter = items.into_iter();
    ranges.into_iter().map(|r| iter.by_ref().take(r.len()).collect()).collect()
}

/// Term counts ordered by count descending, ties by term ascending.
///
/// The chain mirrors a classic Spark word count: normalize each line, split
/// it into terms, drop stopwords, pair each term with 1, sum per term, swap
/// to `(count, term)` and sort descending.
pub fn word_count(
    lines: &Dataset<String>,
    stopwords: StopWords,
    normalization: Normalization,
) -> Dataset<(i64, String)> {
    lines
        .flat_map(move |line: String| normalization.tokenize(&line))
        .filter(move |term| !stopwords.contains(term))
        .map(|term| (term, 1i64))
        .reduce_by_key(|x, y| x + y)
        .map(|(term, count)| (count, term))
        .sort_by_key(false)
}
