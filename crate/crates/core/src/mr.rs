//! An embedded MapReduce engine.
//!
//! A job runs in four phases:
//!
//! 1. **split**: input lines are cut into contiguous ranges, one per map task;
//! 2. **map**: every split is mapped independently, and each emitted pair is
//!    routed to reducer `fnv64(key) % num_reducers`, then sorted by key;
//! 3. **shuffle**: for each reducer the sorted runs of all map tasks are
//!    merged, ties resolved by split order;
//! 4. **reduce**: consecutive equal keys are grouped and handed to the
//!    reducer, and reducer outputs are concatenated in reducer order.
//!
//! With [`SpillMode::Disk`] each sorted run is written to a temporary file as
//! `key<TAB>value` lines and merged back from disk, which reproduces the
//! intermediate I/O of classic Hadoop. Both modes produce identical output.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::hash::Hasher;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::Serialize;

use crate::dfs::{Dfs, DfsError};
use crate::text::{Normalization, StopWords};

#[derive(Debug, thiserror::Error)]
pub enum MrError {
    #[error("invalid job: {0}")]
    InvalidSpec(String),
    #[error("input {0} does not exist")]
    MissingInput(String),
    #[error("job reads from the block store but the engine has none attached")]
    NoDfs,
    #[error("map task for split {split} failed: {message}")]
    MapFailed { split: usize, message: String },
    #[error("reducer {reducer} failed: {message}")]
    ReduceFailed { reducer: usize, message: String },
    #[error("spill file {path}: {reason}")]
    Spill { path: PathBuf, reason: String },
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A value that can travel through a spill file as a single tab-free field.
pub trait Datum: Clone + Send + Sync + 'static {
    fn encode(&self) -> String;
    fn decode(field: &str) -> Result<Self, String>;
}

/// Intermediate keys must be totally ordered for the shuffle sort.
pub trait Key: Datum + Ord {}

impl<T: Datum + Ord> Key for T {}

impl Datum for String {
    fn encode(&self) -> String {
        let mut out = String::with_capacity(self.len());
        for c in self.chars() {
            match c {
                '\\' => out.push_str("\\\\"),
                '\t' => out.push_str("\\t"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                c => out.push(c),
            }
        }
        out
    }

    fn decode(field: &str) -> Result<Self, String> {
        let mut out = String::with_capacity(field.len());
        let mut chars = field.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('\\') => out.push('\\'),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                other => return Err(format!("bad escape \\{other:?}")),
            }
        }
        Ok(out)
    }
}

macro_rules! int_datum {
    ($($t:ty),*) => {$(
        impl Datum for $t {
            fn encode(&self) -> String {
                self.to_string()
            }
            fn decode(field: &str) -> Result<Self, String> {
                field.parse().map_err(|e| format!("{field:?}: {e}"))
            }
        }
    )*};
}

int_datum!(i64, u64, i32, u32, usize);

/// Stable 64-bit partitioner over the encoded key bytes.
pub fn partition_of<K: Datum>(key: &K, num_reducers: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(key.encode().as_bytes());
    (h.finish() % num_reducers as u64) as usize
}

pub trait Mapper: Send + Sync {
    type Key: Key;
    type Value: Datum;

    fn map(&self, record: &str, emit: &mut Vec<(Self::Key, Self::Value)>) -> Result<(), String>;
}

pub trait Reducer<K, V>: Send + Sync {
    type Key: Send;
    type Value: Send;

    fn reduce(&self, key: &K, values: Vec<V>, emit: &mut Vec<(Self::Key, Self::Value)>) -> Result<(), String>;
}

/// Adapts a closure into a [`Mapper`].
pub struct FnMapper<F, K, V>(F, PhantomData<fn() -> (K, V)>);

pub fn mapper_fn<F, K, V>(f: F) -> FnMapper<F, K, V>
where
    F: Fn(&str, &mut Vec<(K, V)>) -> Result<(), String> + Send + Sync,
{
    FnMapper(f, PhantomData)
}

impl<F, K, V> Mapper for FnMapper<F, K, V>
where
    F: Fn(&str, &mut Vec<(K, V)>) -> Result<(), String> + Send + Sync,
    K: Key,
    V: Datum,
{
    type Key = K;
    type Value = V;

    fn map(&self, record: &str, emit: &mut Vec<(K, V)>) -> Result<(), String> {
        (self.0)(record, emit)
    }
}

/// Adapts a closure into a [`Reducer`].
pub struct FnReducer<F, K, V>(F, PhantomData<fn() -> (K, V)>);

pub fn reducer_fn<F, K, V>(f: F) -> FnReducer<F, K, V> {
    FnReducer(f, PhantomData)
}

impl<F, K, V, OK, OV> Reducer<K, V> for FnReducer<F, OK, OV>
where
    F: Fn(&K, Vec<V>, &mut Vec<(OK, OV)>) -> Result<(), String> + Send + Sync,
    OK: Send,
    OV: Send,
{
    type Key = OK;
    type Value = OV;

    fn reduce(&self, key: &K, values: Vec<V>, emit: &mut Vec<(OK, OV)>) -> Result<(), String> {
        (self.0)(key, values, emit)
    }
}

/// Emits `(term, 1)` for every non-stopword term of a line.
pub fn word_count_mapper(line: &str, stopwords: &StopWords) -> Vec<(String, i64)> {
    let mut out = Vec::new();
    emit_terms(line, stopwords, Normalization::Verbatim, &mut out);
    out
}

pub(crate) fn emit_terms(line: &str, stopwords: &StopWords, norm: Normalization, out: &mut Vec<(String, i64)>) {
    out.extend(
        norm.tokenize(line)
            .into_iter()
            .filter(|t| !stopwords.contains(t))
            .map(|t| (t, 1)),
    );
}

/// Emits `(key, sum(values))`.
pub fn sum_reducer<K: Clone>(key: &K, values: &[i64]) -> Vec<(K, i64)> {
    vec![(key.clone(), values.iter().sum())]
}

/// Word-count mapper over raw text lines.
#[derive(Debug, Clone, Default)]
pub struct WordCountMapper {
    pub stopwords: StopWords,
    pub normalization: Normalization,
}

impl Mapper for WordCountMapper {
    type Key = String;
    type Value = i64;

    fn map(&self, record: &str, emit: &mut Vec<(String, i64)>) -> Result<(), String> {
        emit_terms(record, &self.stopwords, self.normalization, emit);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SumReducer;

impl<K: Clone + Send + Sync> Reducer<K, i64> for SumReducer {
    type Key = K;
    type Value = i64;

    fn reduce(&self, key: &K, values: Vec<i64>, emit: &mut Vec<(K, i64)>) -> Result<(), String> {
        emit.extend(sum_reducer(key, &values));
        Ok(())
    }
}

/// Parses `key<TAB>value` lines into string pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairMapper;

impl Mapper for PairMapper {
    type Key = String;
    type Value = String;

    fn map(&self, record: &str, emit: &mut Vec<(String, String)>) -> Result<(), String> {
        let (k, v) = record.split_once('\t').ok_or_else(|| format!("no tab in {record:?}"))?;
        emit.push((k.to_string(), v.to_string()));
        Ok(())
    }
}

/// Emits every value unchanged under its key.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityReducer;

impl<K: Clone + Send + Sync, V: Send> Reducer<K, V> for IdentityReducer {
    type Key = K;
    type Value = V;

    fn reduce(&self, key: &K, values: Vec<V>, emit: &mut Vec<(K, V)>) -> Result<(), String> {
        emit.extend(values.into_iter().map(|v| (key.clone(), v)));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum SpillMode {
    #[default]
    Memory,
    Disk,
}

#[derive(Debug, Clone)]
pub enum JobInput {
    /// Text files in the block store, read line by line in the given order.
    Dfs(Vec<String>),
    /// Lines supplied directly.
    Lines(Vec<String>),
}

pub struct JobSpec<M, R> {
    pub input: JobInput,
    pub mapper: M,
    pub reducer: R,
    pub num_map_splits: usize,
    pub num_reducers: usize,
    pub spill: SpillMode,
}

impl<M, R> JobSpec<M, R> {
    pub fn new(input: JobInput, mapper: M, reducer: R) -> Self {
        JobSpec { input, mapper, reducer, num_map_splits: 1, num_reducers: 1, spill: SpillMode::Memory }
    }

    pub fn splits(mut self, n: usize) -> Self {
        self.num_map_splits = n;
        self
    }

    pub fn reducers(mut self, n: usize) -> Self {
        self.num_reducers = n;
        self
    }

    pub fn spill(mut self, mode: SpillMode) -> Self {
        self.spill = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTimings {
    pub split: Duration,
    pub map: Duration,
    pub shuffle: Duration,
    pub reduce: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub input_records: u64,
    pub map_output_records: u64,
    pub shuffle_input_records: u64,
    pub reduce_input_records: u64,
    pub reduce_input_groups: u64,
    pub reduce_output_records: u64,
    pub spill_files: u64,
}

#[derive(Debug, Clone)]
pub struct JobResult<K, V> {
    /// Reducer outputs concatenated in reducer-index order.
    pub output: Vec<(K, V)>,
    /// `output[reducer_offsets[r]..reducer_offsets[r + 1]]` came from reducer `r`.
    pub reducer_offsets: Vec<usize>,
    pub timings: PhaseTimings,
    pub counters: Counters,
}

impl<K, V> JobResult<K, V> {
    pub fn reducer_output(&self, reducer: usize) -> &[(K, V)] {
        &self.output[self.reducer_offsets[reducer]..self.reducer_offsets[reducer + 1]]
    }
}

/// Runs jobs on a private worker pool.
pub struct MrEngine {
    dfs: Option<Dfs>,
    pool: rayon::ThreadPool,
    spill_dir: Option<PathBuf>,
}

impl MrEngine {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("mr-worker-{i}"))
            .build()
            .expect("failed to start MapReduce worker pool");
        MrEngine { dfs: None, pool, spill_dir: None }
    }

    pub fn with_dfs(mut self, dfs: Dfs) -> Self {
        self.dfs = Some(dfs);
        self
    }

    /// Directory under which spill runs are created. Defaults to the system
    /// temp directory.
    pub fn spill_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.spill_dir = Some(dir.into());
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    #[allow(clippy::type_complexity)]
    pub fn run_job<M, R>(&self, spec: &JobSpec<M, R>) -> Result<JobResult<R::Key, R::Value>, MrError>
    where
        M: Mapper,
        R: Reducer<M::Key, M::Value>,
    {
        if spec.num_map_splits == 0 {
            return Err(MrError::InvalidSpec("num_map_splits must be at least 1".into()));
        }
        if spec.num_reducers == 0 {
            return Err(MrError::InvalidSpec("num_reducers must be at least 1".into()));
        }
        let mut timings = PhaseTimings::default();
        let mut counters = Counters::default();

        let clock = Instant::now();
        let records = self.read_input(&spec.input)?;
        let splits = split_ranges(records.len(), spec.num_map_splits);
        counters.input_records = records.len() as u64;
        timings.split = clock.elapsed();

        let spill_root = match spec.spill {
            SpillMode::Memory => None,
            SpillMode::Disk => Some(match &self.spill_dir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    tempfile::Builder::new().prefix("mr-spill-").tempdir_in(dir)?
                }
                None => tempfile::Builder::new().prefix("mr-spill-").tempdir()?,
            }),
        };

        let clock = Instant::now();
        let map_results: Vec<Result<MapOutput<M::Key, M::Value>, MrError>> = self.pool.install(|| {
            splits
                .par_iter()
                .enumerate()
                .map(|(split, range)| {
                    let buckets = map_split(&spec.mapper, &records[range.clone()], spec.num_reducers)
                        .map_err(|message| MrError::MapFailed { split, message })?;
                    match &spill_root {
                        None => Ok(MapOutput::Memory(buckets)),
                        Some(dir) => spill_buckets(dir.path(), split, buckets).map(MapOutput::Disk),
                    }
                })
                .collect()
        });
        // First failure in split order, regardless of which worker hit it first.
        let map_outputs = map_results.into_iter().collect::<Result<Vec<_>, _>>()?;
        counters.map_output_records = map_outputs.iter().map(MapOutput::records).sum();
        counters.spill_files = map_outputs.iter().map(MapOutput::files).sum();
        timings.map = clock.elapsed();

        let clock = Instant::now();
        let mut per_reducer: Vec<Vec<Run<M::Key, M::Value>>> =
            (0..spec.num_reducers).map(|_| Vec::with_capacity(map_outputs.len())).collect();
        for output in map_outputs {
            for (r, run) in output.into_runs().into_iter().enumerate() {
                per_reducer[r].push(run);
            }
        }
        let shuffled: Vec<Result<Vec<(M::Key, M::Value)>, MrError>> =
            self.pool.install(|| per_reducer.into_par_iter().map(merge_runs).collect());
        let shuffled = shuffled.into_iter().collect::<Result<Vec<_>, _>>()?;
        counters.shuffle_input_records = shuffled.iter().map(|s| s.len() as u64).sum();
        counters.reduce_input_records = counters.shuffle_input_records;
        timings.shuffle = clock.elapsed();
        drop(spill_root);

        let clock = Instant::now();
        let reduced: Vec<Result<(Vec<(R::Key, R::Value)>, u64), MrError>> = self.pool.install(|| {
            shuffled
                .into_par_iter()
                .enumerate()
                .map(|(reducer, pairs)| {
                    reduce_sorted(&spec.reducer, pairs).map_err(|message| MrError::ReduceFailed { reducer, message })
                })
                .collect()
        });
        let mut output = Vec::new();
        let mut reducer_offsets = vec![0];
        for part in reduced {
            let (pairs, groups) = part?;
            counters.reduce_input_groups += groups;
            output.extend(pairs);
            reducer_offsets.push(output.len());
        }
        counters.reduce_output_records = output.len() as u64;
        timings.reduce = clock.elapsed();

        Ok(JobResult { output, reducer_offsets, timings, counters })
    }

    fn read_input(&self, input: &JobInput) -> Result<Vec<String>, MrError> {
        match input {
            JobInput::Lines(lines) => Ok(lines.clone()),
            JobInput::Dfs(paths) => {
                let dfs = self.dfs.as_ref().ok_or(MrError::NoDfs)?;
                let mut lines = Vec::new();
                for path in paths {
                    if !dfs.exists(path) {
                        return Err(MrError::MissingInput(path.clone()));
                    }
                    lines.extend(dfs.read_to_string(path)?.lines().map(str::to_string));
                }
                Ok(lines)
            }
        }
    }
}

/// Contiguous, balanced ranges; the first `len % n` ranges get one extra item.
pub(crate) fn split_ranges(len: usize, n: usize) -> Vec<std::ops::Range<usize>> {
    let base = len / n;
    let extra = len % n;
    let mut start = 0;
    (0..n)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let range = start..start + size;
            start += size;
            range
        })
        .collect()
}

type Buckets<K, V> = Vec<Vec<(K, V)>>;

fn map_split<M: Mapper>(mapper: &M, records: &[String], reducers: usize) -> Result<Buckets<M::Key, M::Value>, String> {
    let mut emitted = Vec::new();
    for record in records {
        mapper.map(record, &mut emitted)?;
    }
    let mut buckets: Buckets<M::Key, M::Value> = (0..reducers).map(|_| Vec::new()).collect();
    for (k, v) in emitted {
        let r = if reducers == 1 { 0 } else { partition_of(&k, reducers) };
        buckets[r].push((k, v));
    }
    for bucket in &mut buckets {
        bucket.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(buckets)
}

enum MapOutput<K, V> {
    Memory(Buckets<K, V>),
    Disk(Vec<(PathBuf, u64)>),
}

impl<K: Datum, V: Datum> MapOutput<K, V> {
    fn records(&self) -> u64 {
        match self {
            MapOutput::Memory(b) => b.iter().map(|x| x.len() as u64).sum(),
            MapOutput::Disk(files) => files.iter().map(|(_, n)| n).sum(),
        }
    }

    fn files(&self) -> u64 {
        match self {
            MapOutput::Memory(_) => 0,
            MapOutput::Disk(files) => files.len() as u64,
        }
    }

    fn into_runs(self) -> Vec<Run<K, V>> {
        match self {
            MapOutput::Memory(b) => b.into_iter().map(Run::Memory).collect(),
            MapOutput::Disk(files) => files.into_iter().map(|(p, _)| Run::Disk(p)).collect(),
        }
    }
}

enum Run<K, V> {
    Memory(Vec<(K, V)>),
    Disk(PathBuf),
}

fn spill_buckets<K: Datum, V: Datum>(dir: &Path, split: usize, buckets: Buckets<K, V>) -> Result<Vec<(PathBuf, u64)>, MrError> {
    buckets
        .into_iter()
        .enumerate()
        .map(|(r, bucket)| {
            let path = dir.join(format!("split{split:05}-part{r:05}.run"));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            for (k, v) in &bucket {
                writeln!(w, "{}\t{}", k.encode(), v.encode())?;
            }
            w.flush()?;
            Ok((path, bucket.len() as u64))
        })
        .collect()
}

type PairIter<'a, K, V> = Box<dyn Iterator<Item = Result<(K, V), MrError>> + 'a>;

fn open_run<K: Datum, V: Datum>(run: Run<K, V>) -> Result<PairIter<'static, K, V>, MrError> {
    match run {
        Run::Memory(pairs) => Ok(Box::new(pairs.into_iter().map(Ok))),
        Run::Disk(path) => {
            let reader = BufReader::new(fs::File::open(&path)?);
            Ok(Box::new(reader.lines().map(move |line| {
                let line = line?;
                let bad = |reason: String| MrError::Spill { path: path.clone(), reason };
                let (k, v) = line.split_once('\t').ok_or_else(|| bad("missing tab".into()))?;
                Ok((K::decode(k).map_err(bad)?, V::decode(v).map_err(bad)?))
            })))
        }
    }
}

/// K-way merge of sorted runs; equal keys come out in run order.
fn merge_runs<K: Key, V: Datum>(runs: Vec<Run<K, V>>) -> Result<Vec<(K, V)>, MrError> {
    let mut iters = runs.into_iter().map(open_run).collect::<Result<Vec<_>, _>>()?;
    let mut heads: Vec<Option<V>> = Vec::with_capacity(iters.len());
    let mut heap = BinaryHeap::new();
    for (i, it) in iters.iter_mut().enumerate() {
        match it.next().transpose()? {
            Some((k, v)) => {
                heap.push(Reverse((k, i)));
                heads.push(Some(v));
            }
            None => heads.push(None),
        }
    }
    let mut out = Vec::new();
    while let Some(Reverse((k, i))) = heap.pop() {
        let v = heads[i].take().expect("heap entry without a buffered value");
        out.push((k, v));
        if let Some((nk, nv)) = iters[i].next().transpose()? {
            heap.push(Reverse((nk, i)));
            heads[i] = Some(nv);
        }
    }
    Ok(out)
}

type Reduced<K, V> = (Vec<(K, V)>, u64);

fn reduce_sorted<K: Key, V: Datum, R: Reducer<K, V>>(
    reducer: &R,
    pairs: Vec<(K, V)>,
) -> Result<Reduced<R::Key, R::Value>, String> {
    let mut out = Vec::new();
    let mut groups = 0;
    let mut iter = pairs.into_iter().peekable();
    while let Some((key, first)) = iter.next() {
        let mut values = vec![first];
        while let Some((_, v)) = iter.next_if(|(k, _)| *k == key) {
            values.push(v);
        }
        groups += 1;
        reducer.reduce(&key, values, &mut out)?;
    }
    Ok((out, groups))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn lines(v: &[&str]) -> JobInput {
        JobInput::Lines(v.iter().map(|s| s.to_string()).collect())
    }

    fn deer_bear() -> JobInput {
        lines(&["deer bear river", "car car river", "deer car bear"])
    }

    #[test]
    fn classic_word_count() {
        let engine = MrEngine::new(2);
        let spec = JobSpec::new(deer_bear(), WordCountMapper::default(), SumReducer).splits(3).reducers(2);
        let result = engine.run_job(&spec).unwrap();
        let counts: HashMap<String, i64> = result.output.iter().cloned().collect();
        let expected: HashMap<String, i64> =
            [("deer", 2), ("bear", 2), ("river", 2), ("car", 3)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(counts, expected);
        assert_eq!(result.counters.input_records, 3);
        assert_eq!(result.counters.map_output_records, 9);
        assert_eq!(result.counters.shuffle_input_records, 9);
        assert_eq!(result.counters.reduce_input_groups, 4);
        for r in 0..2 {
            let keys: Vec<&String> = result.reducer_output(r).iter().map(|(k, _)| k).collect();
            assert!(keys.windows(2).all(|w| w[0] <= w[1]));
            assert!(keys.iter().all(|k| partition_of(*k, 2) == r));
        }
    }

    #[test]
    fn empty_input_is_empty_output() {
        let engine = MrEngine::new(1);
        let spec = JobSpec::new(lines(&[]), WordCountMapper::default(), SumReducer).splits(4).reducers(3);
        let result = engine.run_job(&spec).unwrap();
        assert!(result.output.is_empty());
        assert_eq!(result.counters, Counters::default());
        assert_eq!(result.reducer_offsets, [0, 0, 0, 0]);
    }

    #[test]
    fn identity_job_sorts_by_key() {
        let engine = MrEngine::new(3);
        let input = lines(&["b\t1", "a\t2", "c\t3", "a\t1"]);
        let spec = JobSpec::new(input, PairMapper, IdentityReducer).splits(2);
        let out = engine.run_job(&spec).unwrap().output;
        let expected: Vec<(String, String)> = [("a", "2"), ("a", "1"), ("b", "1"), ("c", "3")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn disk_spill_matches_memory() {
        let dir = tempfile::tempdir().unwrap();
        let engine = MrEngine::new(4).spill_dir(dir.path());
        let input = lines(&["x\ty\tz", "tab\\ in\tkey", "a\tb", "a\tc", "new\nline\tq"]);
        let mem = JobSpec::new(input.clone(), PairMapper, IdentityReducer).splits(3).reducers(2);
        let disk = JobSpec::new(input, PairMapper, IdentityReducer).splits(3).reducers(2).spill(SpillMode::Disk);
        let a = engine.run_job(&mem).unwrap();
        let b = engine.run_job(&disk).unwrap();
        assert_eq!(a.output, b.output);
        assert_eq!(b.counters.spill_files, 6);
        // Spill directory is cleaned once the job finishes.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn mapper_failure_reports_first_failing_split() {
        let engine = MrEngine::new(4);
        let input = lines(&["ok", "ok", "bad", "ok", "bad"]);
        let mapper = mapper_fn(|line: &str, out: &mut Vec<(String, i64)>| {
            if line == "bad" {
                return Err("boom".to_string());
            }
            out.push((line.to_string(), 1));
            Ok(())
        });
        let spec = JobSpec::new(input, mapper, SumReducer).splits(5);
        match engine.run_job(&spec) {
            Err(MrError::MapFailed { split, .. }) => assert_eq!(split, 2),
            other => panic!("unexpected {:?}", other.map(|r| r.output)),
        }
    }

    #[test]
    fn invalid_parameters() {
        let engine = MrEngine::new(1);
        let spec = JobSpec::new(lines(&["a"]), WordCountMapper::default(), SumReducer).splits(0);
        assert!(matches!(engine.run_job(&spec), Err(MrError::InvalidSpec(_))));
        let spec = JobSpec::new(lines(&["a"]), WordCountMapper::default(), SumReducer).reducers(0);
        assert!(matches!(engine.run_job(&spec), Err(MrError::InvalidSpec(_))));
        let spec = JobSpec::new(JobInput::Dfs(vec!["/x".into()]), WordCountMapper::default(), SumReducer);
        assert!(matches!(engine.run_job(&spec), Err(MrError::NoDfs)));
    }

    #[test]
    fn missing_dfs_input() {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(crate::dfs::DfsConfig::new(dir.path())).unwrap();
        let engine = MrEngine::new(1).with_dfs(dfs);
        let spec = JobSpec::new(JobInput::Dfs(vec!["/nope".into()]), WordCountMapper::default(), SumReducer);
        assert!(matches!(engine.run_job(&spec), Err(MrError::MissingInput(_))));
    }

    #[test]
    fn helper_functions() {
        let sw = StopWords::new(["the"]);
        assert_eq!(word_count_mapper("The cat, the hat.", &sw), [("cat".to_string(), 1), ("hat".to_string(), 1)]);
        assert!(word_count_mapper("", &StopWords::default()).is_empty());
        assert_eq!(sum_reducer(&"car", &[1, 1, 1]), [("car", 3)]);
    }

    #[test]
    fn split_ranges_are_contiguous_and_balanced() {
        assert_eq!(split_ranges(5, 3), [0..2, 2..4, 4..5]);
        assert_eq!(split_ranges(2, 4), [0..1, 1..2, 2..2, 2..2]);
        assert_eq!(split_ranges(0, 2), [0..0, 0..0]);
    }

    #[test]
    fn string_datum_escapes() {
        for s in ["plain", "tab\there", "nl\nx", "back\\slash", "\\t literal", ""] {
            let enc = s.to_string().encode();
            assert!(!enc.contains('\t') && !enc.contains('\n'));
            assert_eq!(String::decode(&enc).unwrap(), s);
        }
        assert!(String::decode("bad\\x").is_err());
    }
}
