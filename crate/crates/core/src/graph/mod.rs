//! Conflict graphs and the clique machinery built on top of them.
//!
//! A [`ConflictGraph`] is an immutable undirected simple graph on the links
//! `0..n`. Neighbor lists are kept sorted and an adjacency bit matrix backs
//! constant-time edge queries, which the clique enumerators lean on heavily.

mod chordal;
mod cliques;
pub mod generate;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chordal::{
    clique_tree, clique_tree_shuffled, is_chordal, is_perfect_elimination_ordering,
    perfect_elimination_ordering, CliqueTree,
};
pub use cliques::{
    count_containing_cliques, enumerate_cliques, for_each_clique_containing, max_clique_size,
    maximal_cliques,
};
pub(crate) use cliques::common_neighbors;
pub use generate::{random_chordal_graph, random_geometric_graph, random_gnp_graph};

/// Undirected conflict graph over links `0..n`.
#[derive(Clone, PartialEq)]
pub struct ConflictGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    words: usize,
    bits: Vec<u64>,
    positions: Option<Vec<[f64; 2]>>,
    seed: Option<u64>,
}

impl ConflictGraph {
    /// Builds a graph from an edge list. Duplicate edges are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let words = n.div_ceil(64).max(1);
        let mut bits = vec![0u64; n * words];
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            if bits[a * words + b / 64] & (1 << (b % 64)) != 0 {
                continue;
            }
            bits[a * words + b / 64] |= 1 << (b % 64);
            bits[b * words + a / 64] |= 1 << (a % 64);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            adjacency,
            words,
            bits,
            positions: None,
            seed: None,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self::new(n, std::iter::empty()).expect("empty graph is valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path graph is valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least three nodes");
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle graph is valid")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|l| (0, l))).expect("star graph is valid")
    }

    /// Attaches generator metadata (node positions and seed).
    pub fn with_metadata(mut self, positions: Option<Vec<[f64; 2]>>, seed: Option<u64>) -> Self {
        self.positions = positions;
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] & (1 << (j % 64)) != 0
    }

    /// Edges as `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// True iff every pair of the given nodes is adjacent.
    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(a, &i)| nodes[a + 1..].iter().all(|&j| i != j && self.has_edge(i, j)))
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Subgraph induced by `nodes`, relabelled `0..nodes.len()` in the given order.
    pub fn induced(&self, nodes: &[usize]) -> ConflictGraph {
        let mut edges = Vec::new();
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate().skip(a + 1) {
                if self.has_edge(i, j) {
                    edges.push((a, b));
                }
            }
        }
        ConflictGraph::new(nodes.len(), edges).expect("induced subgraph is valid")
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            positions: self.positions.clone(),
            seed: self.seed,
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        let graph = Self::new(file.n, file.edges.iter().map(|e| (e[0], e[1])))?;
        if let Some(pos) = &file.positions {
            if pos.len() != file.n {
                return Err(Error::InvalidGraph(format!(
                    "{} positions given for {} nodes",
                    pos.len(),
                    file.n
                )));
            }
        }
        Ok(graph.with_metadata(file.positions, file.seed))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_file())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl fmt::Debug for ConflictGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConflictGraph")
            .field("n", &self.n)
            .field("edges", &self.edges())
            .finish()
    }
}

/// On-disk graph representation. Edges are written sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A clique in canonical form: strictly increasing member ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clique(Vec<usize>);

impl Clique {
    /// Sorts and deduplicates `members`. Does not check adjacency.
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Clique(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &Clique) -> bool {
        is_sorted_subset(&self.0, &other.0)
    }

    pub fn intersection(&self, other: &Clique) -> Clique {
        Clique(sorted_intersection(&self.0, &other.0))
    }

    pub fn into_members(self) -> Vec<usize> {
        self.0
    }
}

impl From<&[usize]> for Clique {
    fn from(members: &[usize]) -> Self {
        Clique::new(members.to_vec())
    }
}

pub(crate) fn is_sorted_subset(small: &[usize], big: &[usize]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut it = big.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

pub(crate) fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
