//! Independent reference computations shared by the integration tests. They
//! work on raw bit masks and never call the library's enumeration code.

#![allow(dead_code)]

use std::collections::HashMap;

use csma_core::free_energy::ThroughputVector;
use csma_core::graph::{maximal_cliques, random_chordal_graph, random_gnp_graph, ConflictGraph};
use rand::Rng;

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn is_clique_mask(g: &ConflictGraph, mask: u32) -> bool {
    let nodes: Vec<usize> = (0..g.n()).filter(|&i| mask >> i & 1 == 1).collect();
    nodes
        .iter()
        .enumerate()
        .all(|(a, &i)| nodes[a + 1..].iter().all(|&j| g.has_edge(i, j)))
}

fn is_independent_mask(g: &ConflictGraph, mask: u32) -> bool {
    g.edges().iter().all(|&(i, j)| mask >> i & 1 == 0 || mask >> j & 1 == 0)
}

fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Every vertex subset of size `1..=k_max` inducing a complete subgraph.
pub fn brute_cliques(g: &ConflictGraph, k_max: usize) -> Vec<Vec<usize>> {
    (1u32..1 << g.n())
        .filter(|&m| (m.count_ones() as usize) <= k_max && is_clique_mask(g, m))
        .map(members)
        .collect()
}

/// Counting numbers of all cliques up to `k_max` from
/// `c(K) = 1{|K| > 1} - Σ_{K' ⊋ K} c(K')`, by subset masks.
pub fn defining_counting_numbers(g: &ConflictGraph, k_max: usize) -> HashMap<Vec<usize>, i64> {
    let mut masks: Vec<u32> = (1u32..1 << g.n())
        .filter(|&m| (m.count_ones() as usize) <= k_max && is_clique_mask(g, m))
        .collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    let mut done: Vec<(u32, i64)> = Vec::with_capacity(masks.len());
    for &m in &masks {
        let above: i64 = done.iter().filter(|&&(sup, _)| sup != m && sup & m == m).map(|&(_, v)| v).sum();
        done.push((m, i64::from(m.count_ones() > 1) - above));
    }
    done.into_iter().map(|(m, v)| (members(m), v)).collect()
}

/// Marginals and normalising constant of `p(x) ∝ Π ν_i^{x_i}` by scanning
/// all `2^n` vectors.
pub fn brute_marginals(g: &ConflictGraph, nu: &[f64]) -> (Vec<f64>, f64) {
    let mut z = 0.0;
    let mut p = vec![0.0; g.n()];
    for m in 0u32..1 << g.n() {
        if !is_independent_mask(g, m) {
            continue;
        }
        let w: f64 = members(m).iter().map(|&i| nu[i]).product();
        z += w;
        for i in members(m) {
            p[i] += w;
        }
    }
    p.iter_mut().for_each(|v| *v /= z);
    (p, z)
}

/// Gibbs entropy `-Σ p ln p` of the product form, by scanning all vectors.
pub fn brute_entropy(g: &ConflictGraph, nu: &[f64]) -> f64 {
    let (_, z) = brute_marginals(g, nu);
    let mut h = 0.0;
    for m in 0u32..1 << g.n() {
        if is_independent_mask(g, m) {
            let p = members(m).iter().map(|&i| nu[i]).product::<f64>() / z;
            h -= p * p.ln();
        }
    }
    h
}

/// Targets whose heaviest maximal clique sums to exactly `top`, with
/// random relative weights in `[0.1, 1)`.
pub fn feasible_phi<R: Rng>(g: &ConflictGraph, top: f64, rng: &mut R) -> ThroughputVector {
    let w: Vec<f64> = (0..g.n()).map(|_| rng.random_range(0.1..1.0)).collect();
    let heaviest = maximal_cliques(g)
        .iter()
        .map(|k| k.members().iter().map(|&i| w[i]).sum::<f64>())
        .fold(0.0, f64::max);
    let scale = top / heaviest;
    ThroughputVector::new(w.iter().map(|v| v * scale).collect()).expect("scaled targets lie in (0, 1)")
}

pub fn gnp<R: Rng>(rng: &mut R, n_max: usize) -> ConflictGraph {
    let n = rng.random_range(1..=n_max);
    let p = rng.random_range(0.1..0.9);
    random_gnp_graph(n, p, rng)
}

pub fn chordal<R: Rng>(rng: &mut R, n_max: usize) -> ConflictGraph {
    let n = rng.random_range(1..=n_max);
    let keep = rng.random_range(0.3..1.0);
    random_chordal_graph(n, keep, rng)
}
