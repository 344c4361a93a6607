use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use proptest::prelude::*;

use miniplex::cf::CfStore;
use miniplex::dfs::{Dfs, DfsConfig, NodeId};
use miniplex::flow::{word_count, FlowContext};
use miniplex::graph::{self, BuildOptions};
use miniplex::ingest::preprocess_lines;
use miniplex::mr::{JobInput, JobSpec, MrEngine, SpillMode, SumReducer, WordCountMapper};
use miniplex::table::{Catalog, SourceFormat, TableSchema, Value};
use miniplex::tasks::{influence_query, Formula, MetricSums};
use miniplex::text::{tokenize, Normalization, StopWords};

/// Model of one column-family row: (family, qualifier) -> value.
type Row = BTreeMap<(String, String), Vec<u8>>;

fn oracle_counts(lines: &[String], sw: &StopWords) -> BTreeMap<String, i64> {
    let mut counts = BTreeMap::new();
    for line in lines {
        for t in tokenize(line) {
            if !sw.contains(&t) {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn line_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-dA-D ,.!-]{0,24}", 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dfs_round_trip(len in 0usize..=640, replication in 1usize..=3, seed in any::<u8>()) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(DfsConfig::new(dir.path()).nodes(3).block_size(64).replication(replication)).unwrap();
        let data: Vec<u8> = (0..len).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let meta = dfs.put("/f", &data).unwrap();
        prop_assert_eq!(meta.blocks.len(), len.div_ceil(64));
        for b in &meta.blocks {
            let distinct: BTreeSet<_> = b.replicas.iter().collect();
            prop_assert_eq!(distinct.len(), replication);
        }
        prop_assert_eq!(dfs.get_file("/f").unwrap(), data.clone());
        // any replication - 1 failures leave every block readable
        for down in 0..3u32 {
            if replication >= 2 {
                dfs.fail_node(NodeId(down)).unwrap();
                prop_assert_eq!(dfs.get_file("/f").unwrap(), data.clone());
                dfs.recover_node(NodeId(down)).unwrap();
            }
        }
    }

    #[test]
    fn mapreduce_matches_oracle(lines in line_strategy(), splits in 1usize..8, reducers in 1usize..5, disk in any::<bool>()) {
        let sw = StopWords::new(["a"]);
        let mapper = WordCountMapper { stopwords: sw.clone(), normalization: Normalization::Verbatim };
        let spill = if disk { SpillMode::Disk } else { SpillMode::Memory };
        let spec = JobSpec::new(JobInput::Lines(lines.clone()), mapper, SumReducer).splits(splits).reducers(reducers).spill(spill);
        let result = MrEngine::new(2).run_job(&spec).unwrap();
        let got: BTreeMap<String, i64> = result.output.iter().cloned().collect();
        prop_assert_eq!(got.len(), result.output.len());
        prop_assert_eq!(got, oracle_counts(&lines, &sw));
        // keys are sorted within each reducer
        for r in 0..reducers {
            let keys: Vec<&String> = result.reducer_output(r).iter().map(|(k, _)| k).collect();
            prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn dataflow_matches_oracle(lines in line_strategy(), partitions in 1usize..9) {
        let sw = StopWords::new(["b"]);
        let ctx = FlowContext::new(2);
        let got = word_count(&ctx.from_rows(lines.clone(), partitions), sw.clone(), Normalization::Verbatim).collect().unwrap();
        let oracle = oracle_counts(&lines, &sw);
        let mut expected: Vec<(i64, String)> = oracle.into_iter().map(|(t, c)| (c, t)).collect();
        expected.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn cf_store_behaves_like_a_sorted_map(
        ops in prop::collection::vec((0u8..12, prop::sample::select(vec!["m", "t"]), prop::sample::select(vec!["likes", "quotes", "text"]), 0u32..1000, any::<bool>()), 0..60),
        start in prop::option::of(0u8..12),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(DfsConfig::new(dir.path()).block_size(128)).unwrap();
        let mut store = CfStore::in_memory(dfs);
        store.set_flush_rows(5);
        store.create_table("x", ["m", "t"]).unwrap();
        let mut model: BTreeMap<Vec<u8>, Row> = BTreeMap::new();
        for (row, fam, qual, val, flush) in ops {
            let key = format!("r{row:02}").into_bytes();
            let value = val.to_string().into_bytes();
            store.put("x", &key, fam, qual, &value).unwrap();
            model.entry(key).or_default().insert((fam.to_string(), qual.to_string()), value);
            if flush {
                store.flush("x").unwrap();
            }
        }
        for (key, cells) in &model {
            let got: Vec<(String, String, Vec<u8>)> = store.get("x", key).unwrap().into_iter().map(|c| (c.family, c.qualifier, c.value)).collect();
            let want: Vec<(String, String, Vec<u8>)> = cells.iter().map(|((f, q), v)| (f.clone(), q.clone(), v.clone())).collect();
            prop_assert_eq!(got, want);
        }
        let start_key = start.map(|s| format!("r{s:02}").into_bytes());
        let full: Vec<(Vec<u8>, Vec<miniplex::cf::Cell>)> = store.scan("x", "m", None, start_key.as_deref(), None).unwrap().collect();
        prop_assert!(full.windows(2).all(|w| w[0].0 < w[1].0));
        let expected_keys: Vec<&Vec<u8>> = model
            .iter()
            .filter(|(k, cells)| start_key.as_ref().is_none_or(|s| *k >= s) && cells.keys().any(|(f, _)| f == "m"))
            .map(|(k, _)| k)
            .collect();
        prop_assert_eq!(full.iter().map(|(k, _)| k).collect::<Vec<_>>(), expected_keys);
        // projection returns exactly the matching subset of a full scan
        let projected: Vec<miniplex::cf::Cell> = store.scan("x", "m", Some(&["likes"]), start_key.as_deref(), None).unwrap().flat_map(|(_, c)| c).collect();
        let filtered: Vec<miniplex::cf::Cell> = full.into_iter().flat_map(|(_, c)| c).filter(|c| c.qualifier == "likes").collect();
        prop_assert_eq!(projected, filtered);
    }

    #[test]
    fn components_match_bfs(n in 0usize..40, edges in prop::collection::vec((0usize..40, 0usize..40), 0..80)) {
        let ids: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
        let follows: Vec<(String, String)> = edges.iter().filter(|(a, b)| *a < n && *b < n).map(|(a, b)| (ids[*a].clone(), ids[*b].clone())).collect();
        let users: Vec<(String, String)> = ids.iter().map(|i| (i.clone(), String::new())).collect();
        let g = graph::build_graph(users, follows, BuildOptions::default()).unwrap();
        let comps = graph::weak_components(&g);
        let degrees = graph::degrees(&g);
        let ins: u64 = degrees.degrees.values().map(|d| d.in_degree).sum();
        let outs: u64 = degrees.degrees.values().map(|d| d.out_degree).sum();
        prop_assert_eq!(ins, g.edge_count() as u64);
        prop_assert_eq!(outs, g.edge_count() as u64);

        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for (s, d) in g.edges().keys() {
            adj.entry(s).or_default().push(d);
            adj.entry(d).or_default().push(s);
        }
        for v in g.vertices().keys() {
            let mut seen = BTreeSet::from([v.as_str()]);
            let mut queue = VecDeque::from([v.as_str()]);
            while let Some(x) = queue.pop_front() {
                for y in adj.get(x).into_iter().flatten() {
                    if seen.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
            let min = *seen.iter().next().unwrap();
            prop_assert_eq!(comps.of(v), Some(min));
            for other in &seen {
                prop_assert_eq!(comps.of(other), comps.of(v));
            }
        }
    }

    #[test]
    fn preprocessing_conserves_and_is_idempotent(
        lines in prop::collection::vec(prop_oneof![
            (0u8..6, 0u8..3, 0i64..50).prop_map(|(id, a, likes)| format!(r#"{{"id":"t{id}","author_id":"u{a}","text":"x","public_metrics":{{"like_count":{likes}}}}}"#)),
            (0u8..6).prop_map(|id| format!(r#"{{"id":"t{id}"}}"#)),
            Just("garbage".to_string()),
            Just(String::new()),
            (0u8..6).prop_map(|id| format!(r#"{{"id":"t{id}","author_id":"u1","public_metrics":{{"quote_count":-3}}}}"#)),
        ], 0..30)
    ) {
        let raw = lines.join("\n");
        let first = preprocess_lines(&raw, "b", "ts");
        prop_assert!(first.stats.is_conserved());
        let ids: BTreeSet<&str> = first.tweets.iter().map(|t| t.id.as_str()).collect();
        prop_assert_eq!(ids.len(), first.tweets.len());
        let again = preprocess_lines(&first.tweets_jsonl(), "b", "ts");
        prop_assert_eq!(again.stats.malformed, 0);
        prop_assert_eq!(again.stats.duplicates, 0);
        prop_assert_eq!(&again.tweets, &first.tweets);
        prop_assert_eq!(&again.users, &first.users);
    }

    #[test]
    fn formula_identity(i in 0i64..1 << 40, l in 0i64..1 << 40, q in 0i64..1 << 40, r in 0i64..1 << 40, t in 0i64..1 << 40) {
        let m = MetricSums { impressions: i, likes: l, quotes: q, replies: r, retweets: t };
        prop_assert_eq!(Formula::Verbatim.apply(&m).unwrap() - Formula::Prose.apply(&m).unwrap(), l - q);
    }

    #[test]
    fn sql_influence_matches_hand_aggregation(
        tweets in prop::collection::vec((0u8..5, prop::array::uniform5(0i64..1000)), 0..40),
        verbatim in any::<bool>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = Dfs::open(DfsConfig::new(dir.path()).block_size(256)).unwrap();
        let mut jsonl = String::new();
        let mut oracle: BTreeMap<String, [i64; 5]> = BTreeMap::new();
        for (i, (a, m)) in tweets.iter().enumerate() {
            jsonl.push_str(&format!(
                r#"{{"id":"t{i}","author_id":"u{a}","public_metrics":{{"impression_count":{},"like_count":{},"quote_count":{},"reply_count":{},"retweet_count":{}}}}}"#,
                m[0], m[1], m[2], m[3], m[4]
            ));
            jsonl.push('\n');
            let acc = oracle.entry(format!("u{a}")).or_default();
            for k in 0..5 {
                acc[k] += m[k];
            }
        }
        dfs.put("/t.jsonl", jsonl.as_bytes()).unwrap();
        let catalog = Catalog::in_memory(dfs);
        catalog.create_external_table(TableSchema::tweets("tweets"), "/t.jsonl", SourceFormat::Jsonl).unwrap();
        let formula = if verbatim { Formula::Verbatim } else { Formula::Prose };
        let rs = catalog.sql(&influence_query("tweets", formula)).unwrap();

        let mut expected: Vec<(String, i64)> = oracle
            .iter()
            .map(|(a, s)| (a.clone(), s[0] + s[1] + if verbatim { s[1] } else { s[2] } + s[3] + s[4]))
            .collect();
        expected.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        let got: Vec<(String, i64)> = rs.rows.iter().map(|r| (r[0].to_string(), match r[6] { Value::Int(v) => v, _ => -1 })).collect();
        prop_assert_eq!(got, expected);
    }
}
