//! The heterogeneous network of bug reports, terms, source files and metric buckets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{BowVector, BugReport, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::MetricBucket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    /// Bug report.
    B,
    /// Term.
    T,
    /// Source file.
    S,
    /// Metric bucket.
    M,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::B, NodeKind::T, NodeKind::S, NodeKind::M];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::B => "B",
            NodeKind::T => "T",
            NodeKind::S => "S",
            NodeKind::M => "M",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "B" => Some(NodeKind::B),
            "T" => Some(NodeKind::T),
            "S" => Some(NodeKind::S),
            "M" => Some(NodeKind::M),
            _ => None,
        }
    }

    /// Whether an edge may join these two kinds: only T–B, B–S and S–M.
    pub fn may_link(self, other: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (self, other),
            (T, B) | (B, T) | (B, S) | (S, B) | (S, M) | (M, S)
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedNode {
    pub kind: NodeKind,
    pub key: String,
}

impl TypedNode {
    pub fn new(kind: NodeKind, key: impl Into<String>) -> Self {
        Self {
            kind,
            key: key.into(),
        }
    }
}

impl fmt::Display for TypedNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.key)
    }
}

/// Undirected weighted edge between node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Typed nodes plus undirected weighted edges.
///
/// Mutation is unchecked so malformed networks can be represented and
/// diagnosed; [`build_network`] only ever produces valid ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeteroNetwork {
    nodes: Vec<TypedNode>,
    index: HashMap<TypedNode, usize>,
    edges: Vec<Edge>,
}

impl HeteroNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, returning the existing index if it is already present.
    pub fn add_node(&mut self, node: TypedNode) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        let i = self.nodes.len();
        self.index.insert(node.clone(), i);
        self.nodes.push(node);
        i
    }

    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) {
        assert!(
            a < self.nodes.len() && b < self.nodes.len(),
            "edge endpoint out of range"
        );
        self.edges.push(Edge { a, b, weight });
    }

    pub fn nodes(&self) -> &[TypedNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, node: &TypedNode) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn node(&self, index: usize) -> &TypedNode {
        &self.nodes[index]
    }

    /// Neighbor lists with weights, indexed like `nodes()`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            if e.a != e.b {
                adj[e.b].push((e.a, e.weight));
            }
        }
        adj
    }

    /// Connected components containing no node that satisfies `is_source`.
    pub fn components_without(&self, is_source: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            let mut component = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                component.push(i);
                for &(j, _) in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            if !component.iter().any(|&i| is_source(i)) {
                component.sort_unstable();
                out.push(component);
            }
        }
        out
    }

    /// Writes the edge list as CSV `kind1,key1,kind2,key2,weight`.
    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind1", "key1", "kind2", "key2", "weight"])?;
        for e in &self.edges {
            let (x, y) = (&self.nodes[e.a], &self.nodes[e.b]);
            w.write_record([
                x.kind.as_str(),
                &x.key,
                y.kind.as_str(),
                &y.key,
                &e.weight.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<edge list>", e))?;
        Ok(())
    }
}

/// Inputs to [`build_network`]. Only training reports belong here.
pub struct NetworkInputs<'a> {
    pub reports: &'a [BugReport],
    pub bow_vectors: &'a HashMap<String, BowVector>,
    pub vocab: &'a Vocabulary,
    pub source_paths: &'a BTreeSet<String>,
    pub buckets: &'a BTreeMap<String, Vec<MetricBucket>>,
}

/// Assembles the chain-shaped network T–B–S–M.
///
/// T–B edges carry the report's TF-IDF weight, B–S and S–M edges weight 1.
/// Nodes are inserted in (kind, key) order so identical inputs give identical
/// networks. Metric buckets of files outside `source_paths` are ignored.
pub fn build_network(inputs: &NetworkInputs<'_>) -> Result<HeteroNetwork> {
    let mut reports: Vec<&BugReport> = inputs.reports.iter().collect();
    reports.sort_by(|a, b| a.id.cmp(&b.id));

    for r in &reports {
        if let Some(missing) = r
            .fixed_files
            .iter()
            .find(|f| !inputs.source_paths.contains(*f))
        {
            return Err(Error::Validation(format!(
                "report {:?} links to unknown source file {missing:?}",
                r.id
            )));
        }
    }

    let empty = BowVector::default();
    let bow_of = |id: &str| inputs.bow_vectors.get(id).unwrap_or(&empty);

    let terms: BTreeSet<usize> = reports
        .iter()
        .flat_map(|r| bow_of(&r.id).entries().iter().map(|&(i, _)| i))
        .collect();
    let mut term_keys: Vec<&str> = terms
        .iter()
        .map(|&i| inputs.vocab.term(i).expect("bow index outside vocabulary"))
        .collect();
    term_keys.sort_unstable();

    let bucket_keys: BTreeSet<String> = inputs
        .source_paths
        .iter()
        .filter_map(|p| inputs.buckets.get(p))
        .flatten()
        .map(MetricBucket::key)
        .collect();

    let mut net = HeteroNetwork::new();
    for r in &reports {
        net.add_node(TypedNode::new(NodeKind::B, r.id.as_str()));
    }
    for t in term_keys {
        net.add_node(TypedNode::new(NodeKind::T, t));
    }
    for p in inputs.source_paths {
        net.add_node(TypedNode::new(NodeKind::S, p.as_str()));
    }
    for k in bucket_keys {
        net.add_node(TypedNode::new(NodeKind::M, k));
    }

    let idx = |net: &HeteroNetwork, kind, key: &str| {
        net.index_of(&TypedNode::new(kind, key))
            .expect("node inserted above")
    };
    for r in &reports {
        let b = idx(&net, NodeKind::B, &r.id);
        let bow = bow_of(&r.id);
        if bow.is_empty() {
            log::warn!(
                "report {:?} has an empty TF-IDF vector; its node has no term edges",
                r.id
            );
        }
        let mut term_edges: Vec<(usize, f64)> = bow
            .entries()
            .iter()
            .map(|&(ti, w)| {
                (
                    idx(&net, NodeKind::T, inputs.vocab.term(ti).unwrap_or_default()),
                    w,
                )
            })
            .collect();
        term_edges.sort_by_key(|&(t, _)| t);
        for (t, w) in term_edges {
            net.add_edge(t, b, w);
        }
        let fixed: BTreeSet<&String> = r.fixed_files.iter().collect();
        for f in fixed {
            let s = idx(&net, NodeKind::S, f);
            net.add_edge(b, s, 1.0);
        }
    }
    for p in inputs.source_paths {
        let Some(list) = inputs.buckets.get(p) else {
            continue;
        };
        let s = idx(&net, NodeKind::S, p);
        let keys: BTreeSet<String> = list.iter().map(MetricBucket::key).collect();
        for k in keys {
            let m = idx(&net, NodeKind::M, &k);
            net.add_edge(s, m, 1.0);
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    KindPairViolation {
        a: TypedNode,
        b: TypedNode,
    },
    BadWeight {
        a: TypedNode,
        b: TypedNode,
        weight: f64,
    },
    SelfLoop {
        node: TypedNode,
    },
    DuplicateEdge {
        a: TypedNode,
        b: TypedNode,
    },
    /// A connected component with no term node.
    IsolatedComponent {
        nodes: Vec<TypedNode>,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::KindPairViolation { a, b } => {
                write!(f, "edge {a} -- {b} joins a disallowed kind pair")
            }
            Diagnostic::BadWeight { a, b, weight } => {
                write!(f, "edge {a} -- {b} has invalid weight {weight}")
            }
            Diagnostic::SelfLoop { node } => write!(f, "self-loop on {node}"),
            Diagnostic::DuplicateEdge { a, b } => {
                write!(f, "more than one edge between {a} and {b}")
            }
            Diagnostic::IsolatedComponent { nodes } => {
                write!(
                    f,
                    "{} node(s) have no path to a term node (first: {})",
                    nodes.len(),
                    nodes[0]
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkReport {
    pub issues: Vec<Diagnostic>,
    pub node_counts: BTreeMap<NodeKind, usize>,
    pub edge_counts: BTreeMap<(NodeKind, NodeKind), usize>,
}

impl NetworkReport {
    /// True when no structural rule is broken; isolated components are only informational.
    pub fn is_valid(&self) -> bool {
        self.issues
            .iter()
            .all(|d| matches!(d, Diagnostic::IsolatedComponent { .. }))
    }
}

pub fn validate_network(net: &HeteroNetwork) -> NetworkReport {
    let mut report = NetworkReport::default();
    for n in net.nodes() {
        *report.node_counts.entry(n.kind).or_default() += 1;
    }
    let mut pairs = HashSet::new();
    for e in net.edges() {
        let (a, b) = (net.node(e.a).clone(), net.node(e.b).clone());
        let kinds = if a.kind <= b.kind {
            (a.kind, b.kind)
        } else {
            (b.kind, a.kind)
        };
        *report.edge_counts.entry(kinds).or_default() += 1;
        if e.a == e.b {
            report.issues.push(Diagnostic::SelfLoop { node: a.clone() });
        }
        if !a.kind.may_link(b.kind) {
            report.issues.push(Diagnostic::KindPairViolation {
                a: a.clone(),
                b: b.clone(),
            });
        }
        if !(e.weight.is_finite() && e.weight > 0.0) {
            report.issues.push(Diagnostic::BadWeight {
                a: a.clone(),
                b: b.clone(),
                weight: e.weight,
            });
        }
        if !pairs.insert((e.a.min(e.b), e.a.max(e.b))) {
            report.issues.push(Diagnostic::DuplicateEdge { a, b });
        }
    }
    for component in net.components_without(|i| net.node(i).kind == NodeKind::T) {
        report.issues.push(Diagnostic::IsolatedComponent {
            nodes: component.into_iter().map(|i| net.node(i).clone()).collect(),
        });
    }
    report
}
