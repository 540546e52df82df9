//! Graph documents: JSON and DOT.
//!
//! Vertices are written 1-based. Undirected edges have `i < j`; directed
//! edges run from parent `i` to child `j`. Directed documents also carry the
//! node ordering so that a parsed DAG equals the one emitted.
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use torograph_core::{Dag, EdgeReport, UndirectedGraph};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Graph {
    Undirected(UndirectedGraph),
    Directed(Dag),
}

impl From<UndirectedGraph> for Graph {
    fn from(g: UndirectedGraph) -> Self {
        Graph::Undirected(g)
    }
}

impl From<Dag> for Graph {
    fn from(g: Dag) -> Self {
        Graph::Directed(g)
    }
}

impl Graph {
    pub fn p(&self) -> usize {
        match self {
            Graph::Undirected(g) => g.p(),
            Graph::Directed(g) => g.p(),
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Graph::Undirected(g) => g.labels(),
            Graph::Directed(g) => g.labels(),
        }
    }

    /// 0-based edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            Graph::Undirected(g) => g.edges().collect(),
            Graph::Directed(g) => g.edges(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    pub weight: Option<f64>,
    pub p_value: Option<f64>,
    pub stability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub p: usize,
    pub labels: Vec<String>,
    pub directed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
    pub edges: Vec<EdgeEntry>,
}

impl GraphDocument {
    pub fn new(graph: &Graph) -> Self {
        let edges = graph
            .edges()
            .into_iter()
            .map(|(i, j)| EdgeEntry {
                i: i + 1,
                j: j + 1,
                weight: None,
                p_value: None,
                stability: None,
            })
            .collect();
        let ordering = match graph {
            Graph::Directed(g) => Some(g.ordering().iter().map(|v| v + 1).collect()),
            Graph::Undirected(_) => None,
        };
        Self {
            p: graph.p(),
            labels: graph.labels().to_vec(),
            directed: matches!(graph, Graph::Directed(_)),
            ordering,
            edges,
        }
    }

    /// Copies weight, raw p-value and stability frequency from matching records.
    pub fn annotate(mut self, report: &EdgeReport) -> Self {
        let by_pair: BTreeMap<(usize, usize), _> = report.records.iter().map(|r| ((r.i, r.j), r)).collect();
        for e in &mut self.edges {
            let key = (e.i - 1, e.j - 1);
            let rec = by_pair.get(&key).or_else(|| {
                if self.directed {
                    None
                } else {
                    by_pair.get(&(key.1, key.0))
                }
            });
            if let Some(r) = rec {
                e.weight = r.weight;
                e.p_value = r.p_value.is_finite().then_some(r.p_value);
                e.stability = r.stability_frequency;
            }
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph documents always serialize");
        s.push('\n');
        s
    }

    pub fn to_dot(&self) -> String {
        let (kind, arrow) = if self.directed {
            ("digraph", "->")
        } else {
            ("graph", "--")
        };
        let mut out = format!("{kind} torograph {{\n");
        for (k, label) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "  {} [label=\"{}\"];", k + 1, escape(label));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  {} {arrow} {};", e.i, e.j);
        }
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::parse("graph JSON", e.to_string()))
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let bad = |m: String| CliError::parse("graph JSON", m);
        if self.labels.len() != self.p {
            return Err(bad(format!("{} labels for {} vertices", self.labels.len(), self.p)));
        }
        let mut pairs = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if !(1..=self.p).contains(&e.i) || !(1..=self.p).contains(&e.j) {
                return Err(bad(format!("edge ({}, {}) out of range", e.i, e.j)));
            }
            pairs.push((e.i - 1, e.j - 1));
        }
        if !self.directed {
            let g = UndirectedGraph::from_edges(self.labels.clone(), &pairs)?;
            return Ok(Graph::Undirected(g));
        }
        let ordering = match &self.ordering {
            Some(o) => o
                .iter()
                .map(|&v| v.checked_sub(1).ok_or_else(|| bad("ordering is 1-based".into())))
                .collect::<Result<Vec<_>>>()?,
            None => topological_order(self.p, &pairs).ok_or_else(|| bad("directed edges contain a cycle".into()))?,
        };
        let mut parents = vec![Vec::new(); self.p];
        for (i, j) in pairs {
            parents[j].push(i);
        }
        Ok(Graph::Directed(Dag::new(ordering, parents, self.labels.clone())?))
    }
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Kahn's algorithm, smallest ready vertex first.
fn topological_order(p: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; p];
    let mut children = vec![Vec::new(); p];
    for &(i, j) in edges {
        indegree[j] += 1;
        children[i].push(j);
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..p).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == p).then_some(order)
}

pub fn emit_graph(graph: &Graph, format: GraphFormat) -> String {
    let doc = GraphDocument::new(graph);
    match format {
        GraphFormat::Json => doc.to_json(),
        GraphFormat::Dot => doc.to_dot(),
    }
}

pub fn parse_graph_json(text: &str) -> Result<Graph> {
    GraphDocument::from_json(text)?.to_graph()
}
