//! Extended direct-citation graph.
//!
//! Nodes are documents (source and non-source) in id order. A node's degree
//! counts every citation edge touching it, citing or cited, and the weight of
//! the ordered pair (i, j) for linked documents is `1 / degree(j)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationGraph {
    ids: Vec<String>,
    /// CSR of cited targets per citing node.
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    /// CSR of citing sources per cited node.
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct StoredGraph {
    ids: Vec<String>,
    edges: Vec<(u32, u32)>,
}

impl CitationGraph {
    /// Builds a graph over `ids` from (citing, cited) index pairs.
    /// Self-loops and repeated pairs are discarded.
    pub fn from_edges(ids: Vec<String>, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let n = ids.len();
        let mut edges: Vec<(u32, u32)> = edges.into_iter().filter(|(a, b)| a != b).collect();
        edges.sort_unstable();
        edges.dedup();

        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(a, b) in &edges {
            out_offsets[a as usize + 1] += 1;
            in_offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = edges.iter().map(|&(_, b)| b).collect();
        let mut in_sources = vec![0u32; edges.len()];
        let mut cursor = in_offsets.clone();
        for &(a, b) in &edges {
            in_sources[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        // edges were sorted by source, so each in-list is already ascending
        CitationGraph {
            ids,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.ids
            .binary_search_by(|probe| probe.as_str().cmp(doc_id))
            .ok()
    }

    pub fn cited_by(&self, node: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[node]..self.out_offsets[node + 1]]
    }

    pub fn citing(&self, node: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[node]..self.in_offsets[node + 1]]
    }

    /// Number of edges touching `node`, citing and cited.
    pub fn degree(&self, node: usize) -> usize {
        self.cited_by(node).len() + self.citing(node).len()
    }

    /// Distinct documents linked to `node` in either direction, ascending.
    pub fn neighbors(&self, node: usize) -> Vec<u32> {
        let (a, b) = (self.cited_by(node), self.citing(node));
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(&x), Some(&y)) if x > y => {
                    j += 1;
                    y
                }
                (Some(&x), Some(_)) => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            merged.push(next);
        }
        merged
    }

    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.cited_by(i).binary_search(&(j as u32)).is_ok()
            || self.cited_by(j).binary_search(&(i as u32)).is_ok()
    }

    /// Weight of the ordered pair (i, j): `1 / degree(j)` when linked, zero otherwise.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i != j && self.linked(i, j) {
            1.0 / self.degree(j) as f64
        } else {
            0.0
        }
    }

    /// Every (citing, cited) edge in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count())
            .flat_map(move |i| self.cited_by(i).iter().map(move |&j| (i, j as usize)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let stored = StoredGraph {
            ids: self.ids.clone(),
            edges: self.edges().map(|(a, b)| (a as u32, b as u32)).collect(),
        };
        bincode::serialize_into(BufWriter::new(file), &stored)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredGraph = bincode::deserialize_from(BufReader::new(file))?;
        let n = stored.ids.len() as u32;
        if stored.edges.iter().any(|&(a, b)| a >= n || b >= n) {
            return Err(Error::Serialization(format!(
                "{}: edge endpoint out of range",
                path.display()
            )));
        }
        Ok(CitationGraph::from_edges(stored.ids, stored.edges))
    }

    /// Writes `citing,cited,a_ij` rows.
    pub fn export_edgelist(&self, path: &Path) -> Result<()> {
        let mut w = crate::corpus::csv_writer(path)?;
        w.write_record(["citing", "cited", "a_ij"])?;
        for (i, j) in self.edges() {
            w.write_record([
                self.id(i),
                self.id(j),
                &self.weight(i, j).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One edge per (citing, cited) pair where the cited document is in the set.
pub fn build_graph(docs: &DocumentSet) -> CitationGraph {
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let mut edges = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        for reference in &doc.references {
            if let Some(j) = docs.position(reference) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    CitationGraph::from_edges(ids, edges)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub components: usize,
}

pub fn graph_stats(g: &CitationGraph) -> GraphStats {
    let n = g.node_count();
    let mut degree_histogram = BTreeMap::new();
    for node in 0..n {
        *degree_histogram.entry(g.degree(node)).or_insert(0) += 1;
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in g.edges() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let components = (0..n).filter(|&x| find(&mut parent, x) == x).count();

    GraphStats {
        nodes: n,
        edges: g.edge_count(),
        degree_histogram,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(u32, u32)]) -> CitationGraph {
        let ids = (0..n).map(|i| format!("d{i:02}")).collect();
        CitationGraph::from_edges(ids, edges.iter().copied())
    }

    #[test]
    fn chain_weights() {
        // A -> B -> C
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!((g.degree(0), g.degree(1), g.degree(2)), (1, 2, 1));
        assert_eq!(g.weight(0, 1), 0.5);
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weight(2, 1), 0.5);
        assert_eq!(g.weight(0, 2), 0.0);
    }

    #[test]
    fn star_weights() {
        let g = graph(5, &[(1, 0), (2, 0), (3, 0), (4, 0)]);
        assert_eq!(g.degree(0), 4);
        for i in 1..5 {
            assert_eq!(g.weight(i, 0), 0.25);
            assert_eq!(g.weight(0, i), 1.0);
        }
    }

    #[test]
    fn self_loops_and_duplicates_dropped() {
        let g = graph(2, &[(0, 0), (0, 1), (0, 1)]);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(0), 1);
    }

    #[test]
    fn mutual_citation_counts_two_edges() {
        let g = graph(2, &[(0, 1), (1, 0)]);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.neighbors(0), vec![1]);
        assert_eq!(g.weight(0, 1), 0.5);
    }

    #[test]
    fn stats() {
        assert_eq!(graph_stats(&graph(0, &[])), GraphStats::default());

        let single = graph_stats(&graph(1, &[]));
        assert_eq!((single.nodes, single.edges, single.components), (1, 0, 1));

        let triangles = graph(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]);
        let s = graph_stats(&triangles);
        assert_eq!((s.nodes, s.edges, s.components), (6, 6, 2));

        let chain = graph_stats(&graph(3, &[(0, 1), (1, 2)]));
        assert_eq!(chain.degree_histogram, BTreeMap::from([(1, 2), (2, 1)]));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.bin");
        let g = graph(4, &[(0, 1), (1, 2), (3, 1)]);
        g.save(&path).unwrap();
        assert_eq!(CitationGraph::load(&path).unwrap(), g);
    }
}
