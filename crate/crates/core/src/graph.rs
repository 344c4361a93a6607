//! Follower graph: users are vertices, follow relations are directed edges.
//!
//! Edges are stored once per distinct `(src, dst)` pair together with the
//! number of times the pair appeared in the input. Degree counts use
//! distinct edges. Communities are approximated by weakly connected
//! components, labelled by their smallest member id.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::str::FromStr;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate user id {0}")]
    DuplicateUser(String),
    #[error("edge {src} -> {dst} references an unknown user")]
    DanglingEdge { src: String, dst: String },
    #[error("unknown export format {0:?} (expected edge-list or dot)")]
    UnknownFormat(String),
    #[error("{source_name} line {line}: {reason}")]
    Csv { source_name: String, line: u64, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Reject edges whose endpoints are not known users.
    pub strict: bool,
    /// Keep `u -> u` edges instead of dropping them.
    pub allow_self_loops: bool,
}

/// Counters collected while assembling a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub implicit_vertices: u64,
    pub duplicate_edges: u64,
    pub self_loops_dropped: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyGraph {
    vertices: BTreeMap<String, String>,
    edges: BTreeMap<(String, String), u64>,
    stats: BuildStats,
}

impl PropertyGraph {
    /// Vertex ids mapped to usernames, in id order. Implicit vertices have
    /// an empty username.
    pub fn vertices(&self) -> &BTreeMap<String, String> {
        &self.vertices
    }

    /// Distinct edges with their multiplicity, sorted by `(src, dst)`.
    pub fn edges(&self) -> &BTreeMap<(String, String), u64> {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn multiplicity(&self, src: &str, dst: &str) -> u64 {
        self.edges.get(&(src.to_string(), dst.to_string())).copied().unwrap_or(0)
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }
}

pub fn build_graph<U, F>(users: U, follows: F, options: BuildOptions) -> Result<PropertyGraph, GraphError>
where
    U: IntoIterator<Item = (String, String)>,
    F: IntoIterator<Item = (String, String)>,
{
    let mut g = PropertyGraph::default();
    for (id, username) in users {
        if g.vertices.insert(id.clone(), username).is_some() {
            return Err(GraphError::DuplicateUser(id));
        }
    }
    for (src, dst) in follows {
        if src == dst && !options.allow_self_loops {
            g.stats.self_loops_dropped += 1;
            continue;
        }
        for end in [&src, &dst] {
            if !g.vertices.contains_key(end.as_str()) {
                if options.strict {
                    return Err(GraphError::DanglingEdge { src: src.clone(), dst: dst.clone() });
                }
                g.vertices.insert(end.clone(), String::new());
                g.stats.implicit_vertices += 1;
            }
        }
        let count = g.edges.entry((src, dst)).or_insert(0);
        if *count > 0 {
            g.stats.duplicate_edges += 1;
        }
        *count += 1;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Degree {
    /// Followers.
    pub in_degree: u64,
    /// Followees.
    pub out_degree: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DegreeReport {
    pub degrees: BTreeMap<String, Degree>,
}

impl DegreeReport {
    pub fn get(&self, id: &str) -> Option<Degree> {
        self.degrees.get(id).copied()
    }

    /// Vertex with the most followers; ties go to the smallest id.
    pub fn top_in_degree(&self) -> Option<(&str, u64)> {
        self.degrees
            .iter()
            .max_by(|a, b| a.1.in_degree.cmp(&b.1.in_degree).then_with(|| b.0.cmp(a.0)))
            .map(|(id, d)| (id.as_str(), d.in_degree))
    }

    /// `id,username,in_degree,out_degree`, sorted by id.
    pub fn to_csv(&self, g: &PropertyGraph) -> String {
        let mut out = String::from("id,username,in_degree,out_degree\n");
        for (id, d) in &self.degrees {
            let name = g.vertices.get(id).map(String::as_str).unwrap_or("");
            let _ = writeln!(out, "{},{},{},{}", csv_field(id), csv_field(name), d.in_degree, d.out_degree);
        }
        out
    }
}

pub fn degrees(g: &PropertyGraph) -> DegreeReport {
    let mut degrees: BTreeMap<String, Degree> = g.vertices.keys().map(|id| (id.clone(), Degree::default())).collect();
    for (src, dst) in g.edges.keys() {
        degrees.get_mut(src).expect("edge endpoints are vertices").out_degree += 1;
        degrees.get_mut(dst).expect("edge endpoints are vertices").in_degree += 1;
    }
    DegreeReport { degrees }
}

/// Vertex id mapped to the smallest id of its weak component.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentAssignment {
    pub component: BTreeMap<String, String>,
}

impl ComponentAssignment {
    pub fn of(&self, id: &str) -> Option<&str> {
        self.component.get(id).map(String::as_str)
    }

    /// Component id mapped to its sorted members.
    pub fn groups(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (v, c) in &self.component {
            groups.entry(c.as_str()).or_default().push(v.as_str());
        }
        groups
    }

    pub fn count(&self) -> usize {
        self.groups().len()
    }

    /// `id,component`, sorted by id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,component\n");
        for (v, c) in &self.component {
            let _ = writeln!(out, "{},{}", csv_field(v), csv_field(c));
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}

pub fn weak_components(g: &PropertyGraph) -> ComponentAssignment {
    let ids: Vec<&String> = g.vertices.keys().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for (src, dst) in g.edges.keys() {
        uf.union(index[src.as_str()], index[dst.as_str()]);
    }
    // ids are visited in ascending order, so the first member seen for a
    // root is the component minimum
    let mut label: Vec<Option<usize>> = vec![None; ids.len()];
    let mut component = BTreeMap::new();
    for i in 0..ids.len() {
        let root = uf.find(i);
        let min = *label[root].get_or_insert(i);
        component.insert(ids[i].clone(), ids[min].clone());
    }
    ComponentAssignment { component }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    EdgeList,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        match s {
            "edge-list" | "edgelist" | "csv" => Ok(ExportFormat::EdgeList),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(GraphError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn export_graph(g: &PropertyGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::EdgeList => {
            let mut out = String::from("src,dst\n");
            for (src, dst) in g.edges.keys() {
                let _ = writeln!(out, "{},{}", csv_field(src), csv_field(dst));
            }
            out
        }
        ExportFormat::Dot => {
            let mut out = String::from("digraph follows {\n");
            for (id, name) in &g.vertices {
                let _ = writeln!(out, "  {} [label={}];", dot_id(id), dot_id(name));
            }
            for (src, dst) in g.edges.keys() {
                let _ = writeln!(out, "  {} -> {};", dot_id(src), dot_id(dst));
            }
            out.push_str("}\n");
            out
        }
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a headered two-column CSV. The header must name `first` and
/// `second` (in that order).
fn read_pairs(source_name: &str, text: &str, first: &str, second: &str) -> Result<Vec<(String, String)>, GraphError> {
    let err = |line: u64, reason: String| GraphError::Csv { source_name: source_name.to_string(), line, reason };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if headers.len() != 2 || !headers[0].trim().eq_ignore_ascii_case(first) || !headers[1].trim().eq_ignore_ascii_case(second) {
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        return Err(err(1, format!("expected header {first},{second}")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let (a, b) = (record[0].trim(), record[1].trim());
        if a.is_empty() || (first == "src" && b.is_empty()) {
            return Err(err(line, "empty id".into()));
        }
        out.push((a.to_string(), b.to_string()));
    }
    Ok(out)
}

/// Parses a follows CSV with header `src,dst`.
pub fn parse_follows(text: &str) -> Result<Vec<(String, String)>, GraphError> {
    read_pairs("follows", text, "src", "dst")
}

/// Parses a users CSV with header `id,username`.
pub fn parse_users(text: &str) -> Result<Vec<(String, String)>, GraphError> {
    read_pairs("users", text, "id", "username")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users(ids: &[&str]) -> Vec<(String, String)> {
        ids.iter().map(|id| (id.to_string(), format!("name_{id}"))).collect()
    }

    fn edges(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn build_basic() {
        let g = build_graph(users(&["u1", "u2", "u3", "u4"]), edges(&[("u1", "u2"), ("u3", "u4")]), BuildOptions::default()).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn strict_rejects_dangling_edge() {
        let strict = BuildOptions { strict: true, ..Default::default() };
        let err = build_graph(users(&["u1"]), edges(&[("u1", "u9")]), strict).unwrap_err();
        assert!(matches!(err, GraphError::DanglingEdge { .. }));

        let g = build_graph(users(&["u1"]), edges(&[("u1", "u9")]), BuildOptions::default()).unwrap();
        assert_eq!(g.vertices()["u9"], "");
        assert_eq!(g.stats().implicit_vertices, 1);
    }

    #[test]
    fn duplicates_and_self_loops() {
        let g = build_graph(users(&["u1", "u2"]), edges(&[("u1", "u2"), ("u1", "u2"), ("u1", "u1")]), BuildOptions::default()).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.multiplicity("u1", "u2"), 2);
        assert_eq!(g.stats().duplicate_edges, 1);
        assert_eq!(g.stats().self_loops_dropped, 1);

        let loops = BuildOptions { allow_self_loops: true, ..Default::default() };
        let g = build_graph(users(&["u1"]), edges(&[("u1", "u1")]), loops).unwrap();
        assert_eq!(g.edge_count(), 1);

        assert!(matches!(build_graph(users(&["u1", "u1"]), vec![], BuildOptions::default()), Err(GraphError::DuplicateUser(_))));
    }

    #[test]
    fn degree_examples() {
        let g = build_graph(users(&["u1", "u2", "u3"]), edges(&[("u1", "u2"), ("u3", "u2")]), BuildOptions::default()).unwrap();
        let d = degrees(&g);
        assert_eq!(d.get("u2"), Some(Degree { in_degree: 2, out_degree: 0 }));
        assert_eq!(d.top_in_degree(), Some(("u2", 2)));

        assert!(degrees(&PropertyGraph::default()).degrees.is_empty());

        let tri = build_graph(vec![], edges(&[("u1", "u2"), ("u2", "u3"), ("u3", "u1")]), BuildOptions::default()).unwrap();
        for d in degrees(&tri).degrees.values() {
            assert_eq!(*d, Degree { in_degree: 1, out_degree: 1 });
        }
    }

    #[test]
    fn components() {
        let g = build_graph(users(&["u1", "u2", "u3", "u4", "u5"]), edges(&[("u2", "u1"), ("u3", "u4")]), BuildOptions::default()).unwrap();
        let c = weak_components(&g);
        assert_eq!(c.of("u2"), Some("u1"));
        assert_eq!(c.of("u4"), Some("u3"));
        assert_eq!(c.of("u5"), Some("u5"));
        assert_eq!(c.count(), 3);
        assert_eq!(c.groups()["u1"], ["u1", "u2"]);
    }

    #[test]
    fn export_and_reimport() {
        let g = build_graph(users(&["a", "b", "c"]), edges(&[("b", "c"), ("a", "b"), ("a", "b")]), BuildOptions::default()).unwrap();
        let text = export_graph(&g, ExportFormat::EdgeList);
        assert_eq!(text, "src,dst\na,b\nb,c\n");
        let again = build_graph(users(&["a", "b", "c"]), parse_follows(&text).unwrap(), BuildOptions::default()).unwrap();
        assert_eq!(again.edges().keys().collect::<Vec<_>>(), g.edges().keys().collect::<Vec<_>>());
        assert_eq!(again.vertices(), g.vertices());

        assert_eq!(export_graph(&PropertyGraph::default(), ExportFormat::EdgeList), "src,dst\n");
        let dot = export_graph(&g, ExportFormat::Dot);
        assert!(dot.starts_with("digraph follows {\n"));
        assert!(dot.contains("\"a\" -> \"b\";"));
        assert!(matches!("png".parse::<ExportFormat>(), Err(GraphError::UnknownFormat(_))));
    }

    #[test]
    fn csv_parsing() {
        assert_eq!(parse_follows("src,dst\nu1,u2\n").unwrap(), edges(&[("u1", "u2")]));
        assert!(parse_follows("src,dst\n").unwrap().is_empty());
        assert!(parse_follows("").unwrap().is_empty());
        assert!(matches!(parse_follows("a,b\nu1,u2\n"), Err(GraphError::Csv { .. })));
        assert!(matches!(parse_follows("src,dst\nu1\n"), Err(GraphError::Csv { .. })));
        assert_eq!(parse_users("id,username\n1,alice\n").unwrap(), edges(&[("1", "alice")]));
    }
}
