use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{maximal_cliques, Clique, ConflictGraph};
use crate::error::{Error, Result};

/// Maximum-cardinality search followed by elimination-ordering verification.
/// Returns a perfect elimination ordering iff `g` is chordal.
pub fn perfect_elimination_ordering(g: &ConflictGraph) -> Option<Vec<usize>> {
    let n = g.n();
    let mut weight = vec![0usize; n];
    let mut numbered = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !numbered[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("an unnumbered node remains");
        numbered[v] = true;
        visit.push(v);
        for &w in g.neighbors(v) {
            if !numbered[w] {
                weight[w] += 1;
            }
        }
    }
    // The reverse of the search order is the candidate elimination ordering.
    visit.reverse();
    is_perfect_elimination_ordering(g, &visit).then_some(visit)
}

/// Checks that every node's later neighbors form a clique, using the
/// parent-containment test.
pub fn is_perfect_elimination_ordering(g: &ConflictGraph, order: &[usize]) -> bool {
    let n = g.n();
    if order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (p, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return false;
        }
        pos[v] = p;
    }
    for &v in order {
        let later: Vec<usize> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| pos[u] > pos[v])
            .collect();
        if let Some(&parent) = later.iter().min_by_key(|&&u| pos[u]) {
            if !later.iter().all(|&u| u == parent || g.has_edge(parent, u)) {
                return false;
            }
        }
    }
    true
}

pub fn is_chordal(g: &ConflictGraph) -> bool {
    perfect_elimination_ordering(g).is_some()
}

/// Tree over the maximal cliques of a chordal graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueTree {
    pub n: usize,
    pub cliques: Vec<Clique>,
    /// Pairs of indices into `cliques`.
    pub edges: Vec<(usize, usize)>,
    /// `separators[e]` is the intersection of the two cliques joined by `edges[e]`.
    pub separators: Vec<Clique>,
}

impl CliqueTree {
    /// True iff `edges` is a spanning tree over `cliques`.
    pub fn is_spanning_tree(&self) -> bool {
        let m = self.cliques.len();
        if m == 0 {
            return self.edges.is_empty();
        }
        if self.edges.len() != m - 1 {
            return false;
        }
        let mut uf = UnionFind::new(m);
        self.edges.iter().all(|&(a, b)| a < m && b < m && uf.union(a, b))
    }

    /// For every node, the cliques containing it induce a connected subtree.
    pub fn has_running_intersection(&self) -> bool {
        (0..self.n).all(|v| {
            let holding: Vec<bool> = self.cliques.iter().map(|c| c.contains(v)).collect();
            let count = holding.iter().filter(|&&h| h).count();
            if count <= 1 {
                return true;
            }
            let mut uf = UnionFind::new(self.cliques.len());
            let mut merged = 0;
            for &(a, b) in &self.edges {
                if holding[a] && holding[b] && uf.union(a, b) {
                    merged += 1;
                }
            }
            merged == count - 1
        })
    }

    pub fn is_valid(&self) -> bool {
        self.is_spanning_tree()
            && self.has_running_intersection()
            && self
                .edges
                .iter()
                .zip(&self.separators)
                .all(|(&(a, b), s)| self.cliques[a].intersection(&self.cliques[b]) == *s)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

type WeightedPair = (usize, usize, usize);

fn intersection_pairs(cliques: &[Clique]) -> Vec<WeightedPair> {
    let m = cliques.len();
    let mut pairs = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            pairs.push((cliques[a].intersection(&cliques[b]).len(), a, b));
        }
    }
    pairs
}

fn spanning_tree(n: usize, cliques: Vec<Clique>, pairs: &[WeightedPair]) -> CliqueTree {
    let mut uf = UnionFind::new(cliques.len());
    let mut edges = Vec::new();
    let mut separators = Vec::new();
    for &(_, a, b) in pairs {
        if uf.union(a, b) {
            edges.push((a, b));
            separators.push(cliques[a].intersection(&cliques[b]));
        }
    }
    CliqueTree {
        n,
        cliques,
        edges,
        separators,
    }
}

/// Maximum-weight spanning tree of the clique intersection graph, weights
/// `|K ∩ K'|`. Ties go to the lexicographically smallest clique-index pair.
/// Components of a disconnected graph are joined by empty separators.
pub fn clique_tree(g: &ConflictGraph) -> Result<CliqueTree> {
    if !is_chordal(g) {
        return Err(Error::NotChordal);
    }
    let cliques = maximal_cliques(g);
    let mut pairs = intersection_pairs(&cliques);
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    Ok(spanning_tree(g.n(), cliques, &pairs))
}

/// Same construction as [`clique_tree`] with ties broken at random, which
/// reaches the other valid clique trees of the graph.
pub fn clique_tree_shuffled<R: Rng + ?Sized>(g: &ConflictGraph, rng: &mut R) -> Result<CliqueTree> {
    if !is_chordal(g) {
        return Err(Error::NotChordal);
    }
    let cliques = maximal_cliques(g);
    let mut pairs = intersection_pairs(&cliques);
    pairs.shuffle(rng);
    pairs.sort_by(|x, y| y.0.cmp(&x.0));
    Ok(spanning_tree(g.n(), cliques, &pairs))
}
