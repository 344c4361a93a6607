use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use miniplex::bench::{self, BenchConfig, BenchReport, Cell, GenSpec, ReportFormat};
use miniplex::cf::TWEET_QUALIFIERS;
use miniplex::config::ROOT_ENV;
use miniplex::dfs::NodeId;
use miniplex::flow;
use miniplex::graph::{self, BuildOptions, ExportFormat, PropertyGraph};
use miniplex::ingest::{self, LoadTarget};
use miniplex::mr::{JobInput, JobSpec, SpillMode, SumReducer, WordCountMapper};
use miniplex::table::{SourceFormat, TableSchema};
use miniplex::tasks::{self, Formula, InfluenceEngine, ReportRun, TermsEngine, TermsOptions};
use miniplex::text::{Normalization, StopWords};
use miniplex::{Config, Workspace};

/// Desk-scale polyglot data processing: block store, MapReduce, dataflow,
/// tables, column families and graphs over tweet data.
#[derive(Parser, Debug)]
#[command(name = "miniplex", version)]
struct Cli {
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data root; overrides the config file
    #[arg(long, global = true, env = ROOT_ENV)]
    root: Option<PathBuf>,
    /// Worker threads for the compute engines
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Block store operations
    #[command(subcommand)]
    Dfs(DfsCmd),
    /// Land, preprocess and load tweet batches
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Table catalog operations
    #[command(subcommand)]
    Table(TableCmd),
    /// Run a SQL query; prints CSV
    Sql { query: String },
    /// Column-family store operations
    #[command(subcommand)]
    Cf(CfCmd),
    /// MapReduce jobs
    #[command(subcommand)]
    Mr(MrCmd),
    /// Dataflow jobs
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Follower graph analysis
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Analysis tasks; reports are also written under the report directory
    #[command(subcommand)]
    Task(TaskCmd),
    /// Synthetic data and benchmarks
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand, Debug)]
enum DfsCmd {
    /// Copy a local file into the block store
    Put {
        local: PathBuf,
        path: String,
        #[arg(long)]
        block_size: Option<u64>,
        #[arg(long)]
        replication: Option<usize>,
    },
    /// Print a file to stdout, or copy it to a local path
    Get { path: String, local: Option<PathBuf> },
    /// List files as `path<TAB>bytes<TAB>blocks`
    Ls { prefix: Option<String> },
    /// Show block placement as `index<TAB>block<TAB>bytes<TAB>replicas`
    Locate { path: String },
    /// Delete a file
    Rm { path: String },
    /// Mark a storage node as failed
    FailNode { node: u32 },
    /// Bring a failed node back
    RecoverNode { node: u32 },
    /// Show node availability
    Nodes,
}

#[derive(Subcommand, Debug)]
enum IngestCmd {
    /// Copy a JSON Lines file into a new landing batch
    Land { file: PathBuf },
    /// Clean and deduplicate a landed batch
    Preprocess { batch: String },
    /// Load a preprocessed batch into the stores
    Load {
        batch: String,
        /// Comma-separated: tablestore-external, tablestore-internal, cfstore
        #[arg(long, value_delimiter = ',', default_values_t = LoadTarget::ALL.to_vec())]
        targets: Vec<LoadTarget>,
    },
    /// List batches
    Ls,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Tweets,
    Users,
}

#[derive(Subcommand, Debug)]
enum TableCmd {
    /// Register a table over a block-store file
    CreateExternal {
        name: String,
        #[arg(long)]
        source: String,
        #[arg(long, default_value = "jsonl")]
        format: SourceFormat,
        /// Column list such as `id:text,public_metrics.like_count:int64`
        #[arg(long, conflicts_with = "preset")]
        schema: Option<String>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Copy a table into managed columnar storage
    Materialize {
        name: String,
        #[arg(long)]
        from: String,
    },
    Drop { name: String },
    /// List tables as `name<TAB>kind<TAB>rows`
    Ls,
}

#[derive(Subcommand, Debug)]
enum CfCmd {
    Create {
        table: String,
        #[arg(long, value_delimiter = ',', required = true)]
        families: Vec<String>,
    },
    Put {
        table: String,
        row: String,
        /// `family:qualifier`
        column: String,
        value: String,
    },
    Get { table: String, row: String },
    /// Print `row<TAB>family:qualifier<TAB>value` lines in row-key order
    Scan {
        table: String,
        #[arg(long)]
        family: String,
        #[arg(long, value_delimiter = ',')]
        qualifiers: Option<Vec<String>>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
    },
    /// Load a preprocessed batch's tweets
    LoadTweets {
        batch: String,
        #[arg(long, default_value = ingest::TWEETS_TABLE)]
        table: String,
    },
    Drop { table: String },
}

#[derive(Args, Debug)]
struct WordCountArgs {
    /// Text file in the block store
    #[arg(long)]
    input: String,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    extended_normalization: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Spill {
    Mem,
    Disk,
}

#[derive(Subcommand, Debug)]
enum MrCmd {
    /// Word count, printed as `count<TAB>word` lines
    Wordcount {
        #[command(flatten)]
        common: WordCountArgs,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        reducers: Option<usize>,
        #[arg(long, value_enum, default_value = "mem")]
        spill: Spill,
    },
}

#[derive(Subcommand, Debug)]
enum FlowCmd {
    /// Word count, printed as `count<TAB>word` lines
    Wordcount {
        #[command(flatten)]
        common: WordCountArgs,
        #[arg(long)]
        partitions: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Users CSV (`id,username`), or `table` for the loaded users table
    #[arg(long, default_value = "table")]
    users: String,
    /// Follows CSV (`src,dst`)
    #[arg(long)]
    follows: PathBuf,
    /// Reject edges whose endpoints are not known users
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    allow_self_loops: bool,
}

#[derive(Subcommand, Debug)]
enum GraphCmd {
    /// Build the graph and print its size
    Build(GraphArgs),
    Degrees(GraphArgs),
    Components(GraphArgs),
    Export {
        #[command(flatten)]
        args: GraphArgs,
        /// edge-list or dot
        #[arg(long, default_value = "edge-list")]
        format: ExportFormat,
    },
}

#[derive(Subcommand, Debug)]
enum TaskCmd {
    /// Author influence ranking
    Influence {
        #[arg(long, default_value = "sql-external")]
        engine: InfluenceEngine,
        #[arg(long, default_value = "prose")]
        formula: Formula,
        /// Only tweets whose text contains this keyword
        #[arg(long)]
        scope: Option<String>,
    },
    /// Dominant terms
    Terms {
        #[arg(long, default_value = "mr")]
        engine: TermsEngine,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        extended_normalization: bool,
        /// Text file in the block store; defaults to the current batch
        #[arg(long)]
        input: Option<String>,
    },
    /// Degrees and components of the follower graph
    Graph {
        #[arg(long)]
        follows: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCmd {
    /// Write a synthetic dataset
    Gen {
        #[arg(long, default_value_t = GenSpec::default().n_tweets)]
        tweets: u64,
        #[arg(long, default_value_t = GenSpec::default().n_users)]
        users: u64,
        #[arg(long, default_value_t = GenSpec::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = GenSpec::default().vocab_size)]
        vocab: u64,
        #[arg(long, default_value_t = GenSpec::default().zipf_s)]
        zipf: f64,
        #[arg(long, default_value_t = GenSpec::default().follow_density)]
        follow_density: f64,
        /// Token inserted into every tweet
        #[arg(long)]
        topic: Option<String>,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
    /// Time every cell of the matrix on the loaded batch
    Run {
        /// `all`, or a list such as `influence:cf-scan,terms,graph`
        #[arg(long, default_value = "all")]
        matrix: String,
        #[arg(long, default_value_t = bench::DEFAULT_REPETITIONS)]
        reps: usize,
        #[arg(long, default_value = "default")]
        dataset: String,
        /// Follows CSV for the graph cell
        #[arg(long)]
        follows: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long, default_value = "prose")]
        formula: Formula,
    },
    /// Render a stored bench run
    Report {
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Run id under the bench report directory; defaults to the latest
        #[arg(long)]
        run: Option<String>,
    },
}

fn config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(root) = &cli.root {
        config.root = root.clone();
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn stopwords(path: Option<&Path>) -> Result<StopWords> {
    Ok(match path {
        Some(p) => tasks::load_stopwords(p)?,
        None => StopWords::default(),
    })
}

fn normalization(extended: bool) -> Normalization {
    if extended {
        Normalization::Extended
    } else {
        Normalization::Verbatim
    }
}

fn read_local(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build(ws: &Workspace, args: &GraphArgs) -> Result<PropertyGraph> {
    let users = if args.users == "table" {
        tasks::users_from_table(ws)?
    } else {
        graph::parse_users(&read_local(Path::new(&args.users))?)?
    };
    let follows = graph::parse_follows(&read_local(&args.follows)?)?;
    let options = BuildOptions { strict: args.strict, allow_self_loops: args.allow_self_loops };
    Ok(graph::build_graph(users, follows, options)?)
}

fn print_counts(rows: &[(String, i64)], out: &mut impl Write) -> io::Result<()> {
    for (term, count) in rows {
        writeln!(out, "{count}\t{term}")?;
    }
    Ok(())
}

/// Writes a task report and echoes it to stdout.
fn emit_report(ws: &Workspace, name: &str, content: &str, out: &mut impl Write) -> Result<()> {
    let run = ReportRun::create(ws)?;
    let path = run.write(name, content)?;
    eprintln!("report: {}", path.display());
    out.write_all(content.as_bytes())?;
    Ok(())
}

fn bench_dir(ws: &Workspace) -> PathBuf {
    ws.report_dir().join("bench")
}

fn run(cli: Cli) -> Result<()> {
    let ws = Workspace::open(config(&cli)?)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Dfs(cmd) => dfs(&ws, cmd, &mut out)?,
        Command::Ingest(cmd) => match cmd {
            IngestCmd::Land { file } => {
                let m = ingest::land(ws.dfs(), &file)?;
                writeln!(out, "{}", m.batch_id)?;
            }
            IngestCmd::Preprocess { batch } => {
                let s = ingest::preprocess(ws.dfs(), &batch)?.stats;
                writeln!(
                    out,
                    "read={} malformed={} duplicates={} tweets={} users={}",
                    s.read, s.malformed, s.duplicates, s.emitted_tweets, s.emitted_users
                )?;
            }
            IngestCmd::Load { batch, targets } => {
                let report = ingest::load_all(&ws, &batch, &targets)?;
                for (target, n) in report.counts {
                    writeln!(out, "{target}\t{n}")?;
                }
            }
            IngestCmd::Ls => {
                for b in ingest::batches(ws.dfs()) {
                    writeln!(out, "{b}")?;
                }
            }
        },
        Command::Table(cmd) => table(&ws, cmd, &mut out)?,
        Command::Sql { query } => out.write_all(ws.catalog().sql(&query)?.to_csv().as_bytes())?,
        Command::Cf(cmd) => cf(&ws, cmd, &mut out)?,
        Command::Mr(MrCmd::Wordcount { common, splits, reducers, spill }) => {
            let mapper = WordCountMapper {
                stopwords: stopwords(common.stopwords.as_deref())?,
                normalization: normalization(common.extended_normalization),
            };
            let mut job = JobSpec::new(JobInput::Dfs(vec![common.input]), mapper, SumReducer)
                .splits(splits.unwrap_or(ws.workers()))
                .reducers(reducers.unwrap_or(ws.workers()));
            if let Spill::Disk = spill {
                job = job.spill(SpillMode::Disk);
            }
            let mut rows = ws.mr_engine().run_job(&job)?.output;
            rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            print_counts(&rows, &mut out)?;
        }
        Command::Flow(FlowCmd::Wordcount { common, partitions }) => {
            let ds = ws.flow_context().text_file(ws.dfs(), &common.input, partitions.unwrap_or(ws.workers()));
            let counts = flow::word_count(
                &ds,
                stopwords(common.stopwords.as_deref())?,
                normalization(common.extended_normalization),
            )
            .collect()?;
            let rows: Vec<(String, i64)> = counts.into_iter().map(|(c, t)| (t, c)).collect();
            print_counts(&rows, &mut out)?;
        }
        Command::Graph(cmd) => match cmd {
            GraphCmd::Build(args) => {
                let g = build(&ws, &args)?;
                let s = g.stats();
                writeln!(out, "vertices\t{}", g.vertex_count())?;
                writeln!(out, "edges\t{}", g.edge_count())?;
                writeln!(out, "implicit_vertices\t{}", s.implicit_vertices)?;
                writeln!(out, "duplicate_edges\t{}", s.duplicate_edges)?;
                writeln!(out, "self_loops_dropped\t{}", s.self_loops_dropped)?;
                writeln!(out, "components\t{}", graph::weak_components(&g).count())?;
            }
            GraphCmd::Degrees(args) => {
                let g = build(&ws, &args)?;
                out.write_all(graph::degrees(&g).to_csv(&g).as_bytes())?;
            }
            GraphCmd::Components(args) => {
                let g = build(&ws, &args)?;
                out.write_all(graph::weak_components(&g).to_csv().as_bytes())?;
            }
            GraphCmd::Export { args, format } => {
                let g = build(&ws, &args)?;
                out.write_all(graph::export_graph(&g, format).as_bytes())?;
            }
        },
        Command::Task(cmd) => match cmd {
            TaskCmd::Influence { engine, formula, scope } => {
                let rows = tasks::task_influence(&ws, engine, formula, scope.as_deref())?;
                let name = format!("influence-{engine}-{formula}.csv");
                emit_report(&ws, &name, &tasks::influence_csv(&rows), &mut out)?;
            }
            TaskCmd::Terms { engine, stopwords: sw, extended_normalization, input } => {
                let options = TermsOptions {
                    stopwords: stopwords(sw.as_deref())?,
                    normalization: normalization(extended_normalization),
                    input,
                    ..Default::default()
                };
                let rows = tasks::task_terms(&ws, engine, &options)?;
                emit_report(&ws, &format!("terms-{engine}.csv"), &tasks::terms_csv(&rows), &mut out)?;
            }
            TaskCmd::Graph { follows, strict } => {
                let g = tasks::task_graph(&ws, &read_local(&follows)?, BuildOptions { strict, ..Default::default() })?;
                let run = ReportRun::create(&ws)?;
                run.write("degrees.csv", &g.degrees_csv())?;
                run.write("components.csv", &g.components_csv())?;
                run.write("graph.csv", &g.edge_list())?;
                eprintln!("report: {}", run.dir.display());
                out.write_all(g.degrees_csv().as_bytes())?;
            }
        },
        Command::Bench(cmd) => bench_cmd(&ws, cmd, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn dfs(ws: &Workspace, cmd: DfsCmd, out: &mut impl Write) -> Result<()> {
    let dfs = ws.dfs();
    match cmd {
        DfsCmd::Put { local, path, block_size, replication } => {
            let data = fs::read(&local).with_context(|| format!("reading {}", local.display()))?;
            let meta = dfs.put_file(
                &path,
                &data,
                block_size.unwrap_or(dfs.default_block_size()),
                replication.unwrap_or(dfs.default_replication()),
            )?;
            writeln!(out, "{}\t{}\t{}", meta.path, meta.total_length, meta.blocks.len())?;
            if meta.is_under_replicated() {
                eprintln!("warning: {} is under-replicated", meta.path);
            }
        }
        DfsCmd::Get { path, local } => {
            let data = dfs.get_file(&path)?;
            match local {
                Some(p) => fs::write(&p, data).with_context(|| format!("writing {}", p.display()))?,
                None => out.write_all(&data)?,
            }
        }
        DfsCmd::Ls { prefix } => {
            for f in dfs.list(prefix.as_deref().unwrap_or("/")) {
                writeln!(out, "{}\t{}\t{}", f.path, f.total_length, f.blocks.len())?;
            }
        }
        DfsCmd::Locate { path } => {
            for b in dfs.locate(&path)? {
                let replicas: Vec<String> = b.replicas.iter().map(|n| format!("node{}", n.0)).collect();
                writeln!(out, "{}\t{}\t{}\t{}", b.index, b.block_id, b.length, replicas.join(","))?;
            }
        }
        DfsCmd::Rm { path } => dfs.delete(&path)?,
        DfsCmd::FailNode { node } => dfs.fail_node(NodeId(node))?,
        DfsCmd::RecoverNode { node } => dfs.recover_node(NodeId(node))?,
        DfsCmd::Nodes => {
            for n in dfs.nodes() {
                writeln!(out, "node{}\t{}", n.id.0, if n.available { "up" } else { "down" })?;
            }
        }
    }
    Ok(())
}

fn table(ws: &Workspace, cmd: TableCmd, out: &mut impl Write) -> Result<()> {
    let cat = ws.catalog();
    match cmd {
        TableCmd::CreateExternal { name, source, format, schema, preset } => {
            let schema = match (schema, preset) {
                (Some(spec), _) => TableSchema::parse(&name, &spec)?,
                (None, Some(Preset::Tweets)) => TableSchema::tweets(&name),
                (None, Some(Preset::Users)) => TableSchema::users(&name),
                (None, None) => bail!("either --schema or --preset is required"),
            };
            cat.create_external_table(schema, &source, format)?;
            writeln!(out, "{name}\t{}", cat.row_count(&name)?)?;
        }
        TableCmd::Materialize { name, from } => {
            let mut schema = cat.table(&from)?.schema;
            schema.name = name.clone();
            cat.create_internal_table_as(schema, &from)?;
            writeln!(out, "{name}\t{}", cat.row_count(&name)?)?;
        }
        TableCmd::Drop { name } => cat.drop_table(&name)?,
        TableCmd::Ls => {
            for t in cat.tables() {
                let kind = if t.is_external() { "external" } else { "internal" };
                writeln!(out, "{}\t{kind}\t{}", t.name(), cat.row_count(t.name())?)?;
            }
        }
    }
    Ok(())
}

fn cf(ws: &Workspace, cmd: CfCmd, out: &mut impl Write) -> Result<()> {
    let mut store = ws.cf();
    let line = |out: &mut dyn Write, c: &miniplex::cf::Cell| {
        writeln!(out, "{}\t{}:{}\t{}", String::from_utf8_lossy(&c.row_key), c.family, c.qualifier, c.text())
    };
    match cmd {
        CfCmd::Create { table, families } => store.create_table(&table, families)?,
        CfCmd::Put { table, row, column, value } => {
            let (family, qualifier) =
                column.split_once(':').ok_or_else(|| anyhow!("column must be family:qualifier, got {column:?}"))?;
            store.put(&table, row.as_bytes(), family, qualifier, value.as_bytes())?;
            store.flush(&table)?;
        }
        CfCmd::Get { table, row } => {
            for c in store.get(&table, row.as_bytes())? {
                line(out, &c)?;
            }
        }
        CfCmd::Scan { table, family, qualifiers, start, end } => {
            let q: Option<Vec<&str>> = qualifiers.as_ref().map(|v| v.iter().map(String::as_str).collect());
            let scan = store.scan(&table, &family, q.as_deref(), start.as_deref().map(str::as_bytes), end.as_deref().map(str::as_bytes))?;
            for (_, cells) in scan {
                for c in cells {
                    line(out, &c)?;
                }
            }
        }
        CfCmd::LoadTweets { batch, table } => {
            let tweets = ingest::read_tweets(ws.dfs(), &batch)?;
            if !store.table_names().contains(&table) {
                store.create_table(&table, [miniplex::cf::METRICS_FAMILY, miniplex::cf::TEXT_FAMILY])?;
            }
            let report = store.load_tweets(&table, tweets.iter())?;
            store.flush(&table)?;
            writeln!(out, "loaded={} rejected={} qualifiers={}", report.loaded, report.rejected, TWEET_QUALIFIERS.join(","))?;
        }
        CfCmd::Drop { table } => store.drop_table(&table)?,
    }
    Ok(())
}

fn latest_bench_run(dir: &Path) -> Result<String> {
    let mut runs: Vec<String> = fs::read_dir(dir)
        .map_err(|_| anyhow!("no bench runs under {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("bench.json").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    runs.sort();
    runs.pop().ok_or_else(|| anyhow!("no bench runs under {}", dir.display()))
}

fn bench_cmd(ws: &Workspace, cmd: BenchCmd, out: &mut impl Write) -> Result<()> {
    match cmd {
        BenchCmd::Gen { tweets, users, seed, vocab, zipf, follow_density, topic, out: dir } => {
            let spec = GenSpec { n_tweets: tweets, n_users: users, seed, vocab_size: vocab, zipf_s: zipf, follow_density, topic };
            let manifest = bench::generate(&spec, &dir)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&manifest)?)?;
        }
        BenchCmd::Run { matrix, reps, dataset, follows, stopwords: sw, formula } => {
            let config = BenchConfig {
                matrix: Cell::parse_matrix(&matrix)?,
                repetitions: reps,
                dataset,
                formula,
                terms: TermsOptions { stopwords: stopwords(sw.as_deref())?, ..Default::default() },
                follows_csv: follows.as_deref().map(read_local).transpose()?,
            };
            let report = bench::run_bench(ws, &config)?;
            let run = ReportRun::create_in(&bench_dir(ws))?;
            run.write("bench.json", &report.to_json())?;
            let csv = bench::report(&report, ReportFormat::Csv)?;
            run.write("bench.csv", &csv)?;
            run.write("bench.md", &bench::report(&report, ReportFormat::Markdown)?)?;
            run.write("bench.svg", &bench::report(&report, ReportFormat::Svg)?)?;
            eprintln!("report: {}", run.dir.display());
            out.write_all(csv.as_bytes())?;
        }
        BenchCmd::Report { format, run } => {
            let dir = bench_dir(ws);
            let run = match run {
                Some(r) => r,
                None => latest_bench_run(&dir)?,
            };
            let report = BenchReport::from_json(&read_local(&dir.join(run).join("bench.json"))?)?;
            out.write_all(bench::report(&report, format)?.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
