use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn miniplex(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miniplex"))
        .args(args)
        .env("MINIPLEX_ROOT", root)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = miniplex(root, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SUBCOMMANDS: &[&[&str]] = &[
    &[],
    &["dfs"],
    &["dfs", "put"],
    &["dfs", "get"],
    &["dfs", "ls"],
    &["dfs", "locate"],
    &["dfs", "rm"],
    &["dfs", "fail-node"],
    &["dfs", "recover-node"],
    &["dfs", "nodes"],
    &["ingest"],
    &["ingest", "land"],
    &["ingest", "preprocess"],
    &["ingest", "load"],
    &["ingest", "ls"],
    &["table"],
    &["table", "create-external"],
    &["table", "materialize"],
    &["table", "drop"],
    &["table", "ls"],
    &["sql"],
    &["cf"],
    &["cf", "create"],
    &["cf", "put"],
    &["cf", "get"],
    &["cf", "scan"],
    &["cf", "load-tweets"],
    &["cf", "drop"],
    &["mr", "wordcount"],
    &["flow", "wordcount"],
    &["graph", "build"],
    &["graph", "degrees"],
    &["graph", "components"],
    &["graph", "export"],
    &["task", "influence"],
    &["task", "terms"],
    &["task", "graph"],
    &["bench", "gen"],
    &["bench", "run"],
    &["bench", "report"],
];

#[test]
fn every_subcommand_has_side_effect_free_help() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    for cmd in SUBCOMMANDS {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = ok(&root, &args);
        assert!(out.contains("Usage:"), "{args:?}");
    }
    assert!(!root.exists(), "--help must not create the data root");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    assert_eq!(miniplex(&root, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(miniplex(&root, &[]).status.code(), Some(1));
    assert_eq!(miniplex(&root, &["task", "influence", "--engine", "oracle"]).status.code(), Some(1));

    let out = miniplex(&root, &["dfs", "get", "/missing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // Nothing is loaded yet.
    assert_eq!(miniplex(&root, &["task", "influence"]).status.code(), Some(2));
}

#[test]
fn empty_namespace_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(&dir.path().join("root"), &["dfs", "ls"]), "");
}

#[test]
fn dfs_and_cf_commands() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    let local = dir.path().join("f.txt");
    fs::write(&local, "hello block store\n").unwrap();
    assert_eq!(ok(&root, &["dfs", "put", local.to_str().unwrap(), "/a/f.txt", "--block-size", "5"]), "/a/f.txt\t18\t4\n");
    assert_eq!(ok(&root, &["dfs", "ls"]), "/a/f.txt\t18\t4\n");
    assert_eq!(ok(&root, &["dfs", "locate", "/a/f.txt"]).lines().count(), 4);
    ok(&root, &["dfs", "fail-node", "0"]);
    ok(&root, &["dfs", "fail-node", "1"]);
    assert_eq!(ok(&root, &["dfs", "get", "/a/f.txt"]), "hello block store\n");
    ok(&root, &["dfs", "recover-node", "0"]);
    ok(&root, &["dfs", "recover-node", "1"]);

    ok(&root, &["cf", "create", "t", "--families", "m,t"]);
    ok(&root, &["cf", "put", "t", "r2", "m:likes", "4"]);
    ok(&root, &["cf", "put", "t", "r1", "m:likes", "3"]);
    ok(&root, &["cf", "put", "t", "r1", "t:text", "hi"]);
    assert_eq!(ok(&root, &["cf", "scan", "t", "--family", "m"]), "r1\tm:likes\t3\nr2\tm:likes\t4\n");
    assert_eq!(ok(&root, &["cf", "get", "t", "r1"]), "r1\tm:likes\t3\nr1\tt:text\thi\n");
    assert_eq!(miniplex(&root, &["cf", "put", "t", "r1", "x:y", "1"]).status.code(), Some(2));
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    ok(&root, &["bench", "gen", "--tweets", "400", "--users", "40", "--seed", "3", "--out", d]);
    let tweets = data.join("tweets.jsonl");
    let follows = data.join("follows.csv");
    let batch = ok(&root, &["ingest", "land", tweets.to_str().unwrap()]).trim().to_string();
    assert_eq!(batch, "batch-000001");
    let stats = ok(&root, &["ingest", "preprocess", &batch]);
    assert!(stats.starts_with("read=400 malformed=0 duplicates=0 tweets=400"), "{stats}");
    let loaded = ok(&root, &["ingest", "load", &batch]);
    assert_eq!(loaded, "tablestore-external\t400\ntablestore-internal\t400\ncfstore\t400\n");

    for formula in ["prose", "verbatim"] {
        let reports: Vec<String> = ["sql-external", "sql-internal", "cf-scan"]
            .iter()
            .map(|e| ok(&root, &["task", "influence", "--engine", e, "--formula", formula]))
            .collect();
        assert!(reports[0].starts_with("author_id,"));
        assert_eq!(reports[0], reports[1]);
        assert_eq!(reports[0], reports[2]);
    }
    let mr = ok(&root, &["task", "terms", "--engine", "mr"]);
    assert_eq!(mr, ok(&root, &["task", "terms", "--engine", "flow"]));

    let text = format!("/data/{batch}/text.txt");
    let a = ok(&root, &["mr", "wordcount", "--input", &text, "--splits", "3", "--reducers", "2", "--spill", "disk"]);
    let b = ok(&root, &["flow", "wordcount", "--input", &text, "--partitions", "5"]);
    assert_eq!(a, b);
    assert!(a.lines().next().unwrap().contains('\t'));

    let degrees = ok(&root, &["task", "graph", "--follows", follows.to_str().unwrap()]);
    assert!(degrees.starts_with("id,username,in_degree,out_degree\n"));
    let sql = ok(&root, &["sql", "SELECT id FROM tweets"]);
    assert_eq!(sql.lines().count(), 401);
    assert_eq!(miniplex(&root, &["sql", "SELECT FROM"]).status.code(), Some(2));

    let bench = ok(&root, &["bench", "run", "--reps", "2", "--dataset", "400", "--follows", follows.to_str().unwrap()]);
    assert_eq!(bench.lines().count(), 7);
    assert_eq!(ok(&root, &["bench", "report", "--format", "csv"]), bench);
    assert!(ok(&root, &["bench", "report", "--format", "svg"]).starts_with("<svg"));

    // Each task invocation gets its own report directory.
    let runs = fs::read_dir(root.join("reports")).unwrap().filter(|e| e.as_ref().unwrap().file_name() != "bench").count();
    assert_eq!(runs, 9);
}
