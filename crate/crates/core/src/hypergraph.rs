//! Weighted hypergraphs, their incidence index, and the plain-text edge format.
//!
//! Hyperedges are stored as sorted node-index lists. Node ids from input files
//! are remapped to dense indices in first-seen order; the id table travels with
//! the hypergraph so fitted parameters can be joined back to the source data.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A hyperedge as read from input: external node ids plus an optional weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEdge {
    pub nodes: Vec<String>,
    pub weight: Option<i64>,
}

impl RawEdge {
    pub fn new<S: Into<String>>(nodes: impl IntoIterator<Item = S>, weight: Option<i64>) -> Self {
        RawEdge {
            nodes: nodes.into_iter().map(Into::into).collect(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    nodes: Vec<usize>,
    weight: u64,
}

impl Hyperedge {
    /// Sorted node indices.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Observed hypergraph: `N` nodes and a list of distinct weighted hyperedges.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    node_ids: Vec<String>,
    edges: Vec<Hyperedge>,
    max_size: usize,
}

/// Builds a hypergraph from raw edges with string node ids.
///
/// Duplicate node sets are merged by summing their weights; a missing weight
/// counts as 1.
pub fn build_hypergraph(raw_edges: impl IntoIterator<Item = RawEdge>) -> Result<Hypergraph> {
    let mut ids: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut indexed = Vec::new();
    for (index, raw) in raw_edges.into_iter().enumerate() {
        let weight = raw.weight.unwrap_or(1);
        if weight <= 0 {
            return Err(Error::NonPositiveWeight { index, weight });
        }
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for id in raw.nodes {
            let next = ids.len();
            let idx = *lookup.entry(id.clone()).or_insert_with(|| {
                ids.push(id);
                next
            });
            nodes.push(idx);
        }
        indexed.push((nodes, weight as u64));
    }
    let num_nodes = ids.len();
    Hypergraph::assemble(ids, indexed, num_nodes)
}

impl Hypergraph {
    /// Builds a hypergraph over nodes `0..num_nodes` labelled by their index.
    /// Nodes that appear in no hyperedge are kept.
    pub fn from_indices(num_nodes: usize, edges: Vec<(Vec<usize>, u64)>) -> Result<Self> {
        let ids = (0..num_nodes).map(|i| i.to_string()).collect();
        Self::with_node_ids(ids, edges)
    }

    /// Builds a hypergraph over an explicit node id table.
    pub fn with_node_ids(node_ids: Vec<String>, edges: Vec<(Vec<usize>, u64)>) -> Result<Self> {
        let n = node_ids.len();
        Self::assemble(node_ids, edges, n)
    }

    fn assemble(node_ids: Vec<String>, edges: Vec<(Vec<usize>, u64)>, num_nodes: usize) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut position: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut merged: Vec<Hyperedge> = Vec::new();
        for (index, (mut nodes, weight)) in edges.into_iter().enumerate() {
            if weight == 0 {
                return Err(Error::NonPositiveWeight { index, weight: 0 });
            }
            if let Some(&node) = nodes.iter().find(|&&v| v >= num_nodes) {
                return Err(Error::NodeOutOfRange { node, num_nodes });
            }
            nodes.sort_unstable();
            if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::RepeatedNode {
                    index,
                    node: node_ids[w[0]].clone(),
                });
            }
            if nodes.len() < 2 {
                return Err(Error::EdgeTooSmall {
                    index,
                    size: nodes.len(),
                });
            }
            match position.get(&nodes) {
                Some(&p) => merged[p].weight += weight,
                None => {
                    position.insert(nodes.clone(), merged.len());
                    merged.push(Hyperedge { nodes, weight });
                }
            }
        }
        let max_size = merged.iter().map(Hyperedge::len).max().unwrap_or(0);
        Ok(Hypergraph {
            node_ids,
            edges: merged,
            max_size,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Largest hyperedge size `D`. For a restricted hypergraph this is the
    /// value of the hypergraph it was restricted from.
    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Hyperedge {
        &self.edges[id]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Sum of hyperedge weights.
    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Sum of hyperedge sizes, `Σ_e |e|`.
    pub fn total_incidence(&self) -> usize {
        self.edges.iter().map(Hyperedge::len).sum()
    }

    /// Set of node sets, for membership tests against sampled negatives.
    pub fn edge_set(&self) -> HashSet<Vec<usize>> {
        self.edges.iter().map(|e| e.nodes.clone()).collect()
    }

    /// Number of hyperedges of each size, indexed by size.
    pub fn size_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_size + 1];
        for e in &self.edges {
            counts[e.len()] += 1;
        }
        counts
    }

    /// Keeps only the listed hyperedges. Node table and `D` are preserved, so
    /// objectives fitted on the restriction share constants with the parent.
    /// An empty selection is allowed here.
    pub fn restrict(&self, edge_ids: &[usize]) -> Hypergraph {
        Hypergraph {
            node_ids: self.node_ids.clone(),
            edges: edge_ids.iter().map(|&id| self.edges[id].clone()).collect(),
            max_size: self.max_size,
        }
    }

    /// Maps a list of external ids onto this hypergraph's node indices.
    pub fn resolve(&self, ids: &[String]) -> Result<Vec<usize>> {
        let index = self.node_index();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownNode(id.clone()))
            })
            .collect()
    }

    pub fn write_edges<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.edges {
            let labels: Vec<&str> = e.nodes.iter().map(|&i| self.node_ids[i].as_str()).collect();
            if e.weight == 1 {
                writeln!(out, "{}", labels.join(","))?;
            } else {
                writeln!(out, "{}\t{}", labels.join(","), e.weight)?;
            }
        }
        Ok(())
    }
}

/// Node-to-hyperedge incidence lists in compressed row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceIndex {
    offsets: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl IncidenceIndex {
    /// Hyperedge ids containing `node`, in increasing order.
    pub fn edges_of(&self, node: usize) -> &[usize] {
        &self.edge_ids[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total list length; equals `Σ_e |e|`.
    pub fn total_len(&self) -> usize {
        self.edge_ids.len()
    }
}

pub fn incidence_index(h: &Hypergraph) -> IncidenceIndex {
    let n = h.num_nodes();
    let mut offsets = vec![0usize; n + 1];
    for e in h.edges() {
        for &v in e.nodes() {
            offsets[v + 1] += 1;
        }
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut edge_ids = vec![0usize; offsets[n]];
    for (id, e) in h.edges().iter().enumerate() {
        for &v in e.nodes() {
            edge_ids[cursor[v]] = id;
            cursor[v] += 1;
        }
    }
    IncidenceIndex { offsets, edge_ids }
}

/// Parses the hyperedge text format: one hyperedge per line, comma-separated
/// node ids, an optional tab followed by an integer weight. Blank lines and
/// lines starting with `#` are skipped.
pub fn read_edges<R: BufRead>(reader: R) -> Result<Vec<RawEdge>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (node_part, weight) = match trimmed.split_once('\t') {
            Some((nodes, w)) => {
                let w = w.trim().parse::<i64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad weight `{}`: {e}", w.trim()),
                })?;
                (nodes, Some(w))
            }
            None => (trimmed, None),
        };
        let nodes: Vec<String> = node_part.split(',').map(|s| s.trim().to_string()).collect();
        if nodes.iter().any(String::is_empty) {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "empty node id".into(),
            });
        }
        out.push(RawEdge { nodes, weight });
    }
    Ok(out)
}

/// Reads and builds a hypergraph from the hyperedge text format.
pub fn read_hypergraph<R: BufRead>(reader: R) -> Result<Hypergraph> {
    build_hypergraph(read_edges(reader)?)
}

/// Connected components of the node set under the union-of-cliques
/// adjacency of the given hyperedges. Isolated nodes are their own component.
pub fn count_components<'a>(num_nodes: usize, edges: impl IntoIterator<Item = &'a [usize]>) -> usize {
    let mut parent: Vec<usize> = (0..num_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = num_nodes;
    for nodes in edges {
        let Some((&first, rest)) = nodes.split_first() else {
            continue;
        };
        for &v in rest {
            let (a, b) = (find(&mut parent, first), find(&mut parent, v));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(nodes: &[&str], w: Option<i64>) -> RawEdge {
        RawEdge::new(nodes.iter().copied(), w)
    }

    #[test]
    fn duplicates_merge_by_weight() {
        let h = build_hypergraph(vec![raw(&["a", "b"], Some(1)), raw(&["b", "a"], Some(2))]).unwrap();
        assert_eq!(h.num_edges(), 1);
        assert_eq!(h.edge(0).weight(), 3);
        assert_eq!(h.num_nodes(), 2);
    }

    #[test]
    fn single_triangle() {
        let h = build_hypergraph(vec![raw(&["a", "b", "c"], None)]).unwrap();
        assert_eq!(h.num_nodes(), 3);
        assert_eq!(h.max_size(), 3);
        assert_eq!(h.num_edges(), 1);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(build_hypergraph(vec![]), Err(Error::EmptyInput)));
        assert!(matches!(
            build_hypergraph(vec![raw(&["a"], None)]),
            Err(Error::EdgeTooSmall { .. })
        ));
        assert!(matches!(
            build_hypergraph(vec![raw(&["a", "b"], Some(0))]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_hypergraph(vec![raw(&["a", "b"], Some(-2))]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_hypergraph(vec![raw(&["a", "b", "a"], None)]),
            Err(Error::RepeatedNode { .. })
        ));
    }

    #[test]
    fn incidence_small_cases() {
        let h = Hypergraph::from_indices(2, vec![(vec![0, 1], 1)]).unwrap();
        let idx = incidence_index(&h);
        assert_eq!(idx.edges_of(0), &[0]);
        assert_eq!(idx.edges_of(1), &[0]);

        let h = Hypergraph::from_indices(3, vec![(vec![0, 1], 1), (vec![0, 2], 1)]).unwrap();
        let idx = incidence_index(&h);
        assert_eq!(idx.degree(0), 2);
        assert_eq!(idx.edges_of(0), &[0, 1]);
    }

    #[test]
    fn parse_format() {
        let text = "# header\na,b\tc\n\nb,c,d\t4\n c , a \n";
        let err = read_hypergraph(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let text = "# header\na,b\n\nb,c,d\t4\nc,a\n";
        let h = read_hypergraph(text.as_bytes()).unwrap();
        assert_eq!(h.num_edges(), 3);
        assert_eq!(h.node_ids(), &["a", "b", "c", "d"]);
        assert_eq!(h.edge(1).weight(), 4);
        assert_eq!(h.max_size(), 3);
    }

    #[test]
    fn restrict_keeps_constants() {
        let h = Hypergraph::from_indices(4, vec![(vec![0, 1], 1), (vec![0, 1, 2, 3], 1)]).unwrap();
        let r = h.restrict(&[0]);
        assert_eq!(r.num_edges(), 1);
        assert_eq!(r.max_size(), 4);
        assert_eq!(r.num_nodes(), 4);
    }

    #[test]
    fn components() {
        let edges: Vec<Vec<usize>> = vec![vec![0, 1], vec![2, 3, 4]];
        assert_eq!(count_components(6, edges.iter().map(Vec::as_slice)), 3);
    }
}
