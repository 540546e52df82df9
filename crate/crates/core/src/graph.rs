//! Undirected graphs, DAGs with a fixed node ordering, and per-edge test
//! reports. Vertices are 0-based column positions; labels ride along as
//! metadata.
use alloc::collections::VecDeque;

use crate::error::{Error, Result};
use crate::prelude::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    p: usize,
    /// Stored as (i, j) with i < j.
    edges: BTreeSet<(usize, usize)>,
    labels: Vec<String>,
}

impl UndirectedGraph {
    pub fn empty(p: usize) -> Self {
        Self::with_labels(crate::angle::default_names(p))
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        Self {
            p: labels.len(),
            edges: BTreeSet::new(),
            labels,
        }
    }

    pub fn from_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::with_labels(labels);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                g.edges.insert((i, j));
            }
        }
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::invalid(format!("self-loop at vertex {i}")));
        }
        if i >= self.p || j >= self.p {
            return Err(Error::invalid(format!(
                "edge ({i}, {j}) out of range for {} vertices",
                self.p
            )));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    /// Replaces the vertex labels, keeping the edges.
    pub fn relabel(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges as (i, j) with i < j, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbours of `j`, sorted.
    pub fn markov_blanket(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == j {
                    Some(b)
                } else if b == j {
                    Some(a)
                } else {
                    None
                }
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// True iff every path from a vertex in `a` to a vertex in `c` passes
    /// through `s`.
    pub fn separates(&self, a: &[usize], c: &[usize], s: &[usize]) -> Result<bool> {
        if a.is_empty() || c.is_empty() {
            return Err(Error::invalid("separation query needs non-empty A and C"));
        }
        for set in [a, c, s] {
            if let Some(&v) = set.iter().find(|&&v| v >= self.p) {
                return Err(Error::invalid(format!("vertex {v} out of range")));
            }
        }
        let overlaps = |x: &[usize], y: &[usize]| x.iter().any(|v| y.contains(v));
        if overlaps(a, c) || overlaps(a, s) || overlaps(c, s) {
            return Err(Error::invalid("A, C and S must be pairwise disjoint"));
        }
        let adjacency = self.adjacency();
        let mut blocked = vec![false; self.p];
        for &v in s {
            blocked[v] = true;
        }
        let mut target = vec![false; self.p];
        for &v in c {
            target[v] = true;
        }
        let mut seen = vec![false; self.p];
        let mut queue: VecDeque<usize> = a.iter().copied().collect();
        for &v in a {
            seen[v] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if blocked[w] || seen[w] {
                    continue;
                }
                if target[w] {
                    return Ok(false);
                }
                seen[w] = true;
                queue.push_back(w);
            }
        }
        Ok(true)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// A DAG whose parents always precede their children in `ordering`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    ordering: Vec<usize>,
    parents: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl Dag {
    /// Validates the ordering and parent sets. `parents[j]` lists the parents
    /// of vertex `j`.
    pub fn new(ordering: Vec<usize>, parents: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        let p = labels.len();
        if ordering.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: ordering.len(),
            });
        }
        if parents.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: parents.len(),
            });
        }
        let mut position = vec![usize::MAX; p];
        for (pos, &v) in ordering.iter().enumerate() {
            if v >= p || position[v] != usize::MAX {
                return Err(Error::invalid("ordering must be a permutation of the vertices"));
            }
            position[v] = pos;
        }
        let mut sorted_parents = Vec::with_capacity(p);
        for (child, pa) in parents.into_iter().enumerate() {
            let mut set = BTreeSet::new();
            for parent in pa {
                if parent >= p {
                    return Err(Error::invalid(format!("parent {parent} out of range")));
                }
                if position[parent] >= position[child] {
                    return Err(Error::AcyclicityViolation { parent, child });
                }
                if !set.insert(parent) {
                    return Err(Error::invalid(format!("duplicate parent {parent} of {child}")));
                }
            }
            // Parents are kept in ordering order.
            let mut pa: Vec<usize> = set.into_iter().collect();
            pa.sort_by_key(|&v| position[v]);
            sorted_parents.push(pa);
        }
        Ok(Self {
            ordering,
            parents: sorted_parents,
            labels,
        })
    }

    pub fn empty(ordering: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let p = labels.len();
        Self::new(ordering, vec![Vec::new(); p], labels)
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Vertices before `j` in the ordering.
    pub fn predecessors(&self, j: usize) -> Vec<usize> {
        self.ordering.iter().take_while(|&&v| v != j).copied().collect()
    }

    /// Directed edges (parent, child), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(child, pa)| pa.iter().map(move |&parent| (parent, child)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }
}

/// `dag_validate`: builds a [`Dag`] or reports the first ordering violation.
pub fn dag_validate(ordering: Vec<usize>, parents: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Dag> {
    Dag::new(ordering, parents, labels)
}

/// Outcome of one edge test.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub selected: bool,
    /// Selection frequency when produced by stability selection.
    pub stability_frequency: Option<f64>,
    /// Estimated edge strength (partial correlation, λ, precision entry).
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeReport {
    pub records: Vec<EdgeRecord>,
}

impl EdgeReport {
    pub fn selected(&self) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.records.iter().filter(|r| r.selected)
    }

    pub fn find(&self, i: usize, j: usize) -> Option<&EdgeRecord> {
        self.records.iter().find(|r| r.i == i && r.j == j)
    }
}

/// Holm step-down adjustment; the result is monotone in the sorted order and
/// never below the raw p-value.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0_f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    adjusted
}
