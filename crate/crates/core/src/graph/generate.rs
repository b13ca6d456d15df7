//! Graph generators: random geometric conflict graphs for experiments, plus
//! Erdős–Rényi and random chordal graphs used as test scaffolding.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConflictGraph;
use crate::error::{Error, Result};

/// Places `n` nodes uniformly in the unit square and joins every pair at
/// Euclidean distance strictly less than `radius`. Positions and seed are
/// kept on the graph; the output is bit-reproducible for a given seed.
pub fn random_geometric_graph(n: usize, radius: f64, seed: u64) -> Result<ConflictGraph> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if (dx * dx + dy * dy).sqrt() < radius {
                edges.push((i, j));
            }
        }
    }
    Ok(ConflictGraph::new(n, edges)?.with_metadata(Some(positions), Some(seed)))
}

/// Erdős–Rényi graph: each pair is an edge with probability `p`.
pub fn random_gnp_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> ConflictGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    ConflictGraph::new(n, edges).expect("generated edges are valid")
}

/// Random chordal graph built along an elimination ordering.
///
/// Nodes are added one at a time; each new node is joined to a random subset
/// of a random maximal clique of the graph built so far (and so is simplicial
/// when added). `keep` is the probability of keeping each member of the chosen
/// clique. Labels are shuffled at the end. Test scaffolding only.
pub fn random_chordal_graph<R: Rng + ?Sized>(n: usize, keep: f64, rng: &mut R) -> ConflictGraph {
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut edges = Vec::new();
    for v in 0..n {
        if cliques.is_empty() || rng.random::<f64>() < 0.1 {
            cliques.push(vec![v]);
            continue;
        }
        let c = rng.random_range(0..cliques.len());
        let mut subset: Vec<usize> = cliques[c]
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < keep)
            .collect();
        if subset.is_empty() {
            subset.push(*cliques[c].choose(rng).expect("cliques are non-empty"));
        }
        edges.extend(subset.iter().map(|&u| (u, v)));
        if subset.len() == cliques[c].len() {
            cliques[c].push(v);
        } else {
            subset.push(v);
            cliques.push(subset);
        }
    }
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    ConflictGraph::new(n, edges.into_iter().map(|(a, b)| (label[a], label[b])))
        .expect("generated edges are valid")
}
