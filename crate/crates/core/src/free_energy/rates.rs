use rayon::prelude::*;

use super::{BackoffVector, Method, RegionSet, ThroughputVector};
use crate::error::{Error, Result};
use crate::graph::{for_each_clique_containing, maximal_cliques, ConflictGraph};

/// `ln(1 - s)`, or an infeasibility error naming `region` when `s >= 1`.
fn log_slack(region: &[usize], s: f64) -> Result<f64> {
    if s >= 1.0 {
        return Err(Error::Infeasible {
            region: region.to_vec(),
            sum: s,
        });
    }
    Ok((-s).ln_1p())
}

fn sum_sorted(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Warning text when a maximal clique of `g` sums to one or more, which
/// places the targets outside the achievable region.
pub fn clique_sum_warning(g: &ConflictGraph, phi: &ThroughputVector) -> Option<String> {
    let bad: Vec<String> = maximal_cliques(g)
        .iter()
        .filter(|c| phi.sum_over(c.members()) >= 1.0)
        .map(|c| format!("{:?}", c.members()))
        .collect();
    (!bad.is_empty()).then(|| {
        format!(
            "targets are not achievable: maximal clique(s) {} sum to >= 1",
            bad.join(", ")
        )
    })
}

/// Back-off rates at the zero-gradient point of the region-based free
/// energy under clique belief: `ν_i = φ_i Π_{R ∋ i} (1 - Σ_{j∈R} φ_j)^(-c_R)`,
/// the product running over every region holding `x_i`. Evaluated in log
/// space; per-node terms are summed in sorted order so the result does not
/// depend on region order.
pub fn backoff_from_regions(rs: &RegionSet, phi: &ThroughputVector) -> Result<BackoffVector> {
    phi.check_len(rs.n)?;
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); rs.n];
    for r in &rs.regions {
        let slack = log_slack(&r.variables, phi.sum_over(&r.variables))?;
        if r.counting_number == 0 {
            continue;
        }
        let t = -(r.counting_number as f64) * slack;
        for &v in &r.variables {
            terms[v].push(t);
        }
    }
    let nu = terms
        .into_iter()
        .enumerate()
        .map(|(i, t)| (phi[i].ln() + sum_sorted(t)).exp())
        .collect();
    let (method, k_max) = rs.kind.method();
    BackoffVector::new(nu, method, k_max)
}

/// Closed-form Bethe rates: `φ_i (1-φ_i)^(d_i-1) / Π_{j~i} (1-φ_i-φ_j)`.
pub fn bethe_rates(g: &ConflictGraph, phi: &ThroughputVector) -> Result<BackoffVector> {
    phi.check_len(g.n())?;
    let nu = (0..g.n())
        .map(|i| {
            let mut log = phi[i].ln() + (g.degree(i) as f64 - 1.0) * (-phi[i]).ln_1p();
            for &j in g.neighbors(i) {
                log -= log_slack(&[i.min(j), i.max(j)], phi[i] + phi[j])?;
            }
            Ok(log.exp())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BackoffVector::new(nu, Method::Bethe, Some(2))?;
    out.warning = clique_sum_warning(g, phi);
    Ok(out)
}

/// Closed-form triangle rates, using the triangle counts `t_i` (per node) and
/// `t_{i,j}` (per edge):
/// `φ_i (1-φ_i)^(d_i-1-t_i) Π_{j~i} (1-φ_i-φ_j)^(t_{i,j}-1) / Π_{Δ ∋ i} (1-φ_Δ)`.
pub fn triangle_rates(g: &ConflictGraph, phi: &ThroughputVector) -> Result<BackoffVector> {
    phi.check_len(g.n())?;
    let nu = (0..g.n())
        .map(|i| {
            let nbrs = g.neighbors(i);
            let mut log = phi[i].ln();
            let mut t_i = 0usize;
            for (a, &j) in nbrs.iter().enumerate() {
                let t_ij = nbrs.iter().filter(|&&k| g.has_edge(j, k)).count();
                log += (t_ij as f64 - 1.0) * log_slack(&[i.min(j), i.max(j)], phi[i] + phi[j])?;
                for &k in &nbrs[a + 1..] {
                    if g.has_edge(j, k) {
                        t_i += 1;
                        let mut tri = [i, j, k];
                        tri.sort_unstable();
                        log -= log_slack(&tri, phi[i] + phi[j] + phi[k])?;
                    }
                }
            }
            log += (g.degree(i) as f64 - 1.0 - t_i as f64) * (-phi[i]).ln_1p();
            Ok(log.exp())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BackoffVector::new(nu, Method::Triangle, Some(3))?;
    out.warning = clique_sum_warning(g, phi);
    Ok(out)
}

/// Per-node log increments `ln ν_i^(k) - ln ν_i^(k-1)` for `k = 1..=k_max`
/// (index 0 unused; index 1 holds `ln ν_i^(1)`).
fn level_increments(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    i: usize,
    k_max: usize,
) -> Result<Vec<f64>> {
    let mut inc = vec![0.0; k_max + 1];
    inc[1] = phi[i].ln() - (-phi[i]).ln_1p();
    let mut sums: Vec<f64> = Vec::new();
    let mut infeasible: Option<Error> = None;
    for_each_clique_containing(g, i, k_max, |clique| {
        let k = clique.len();
        if k < 2 || infeasible.is_some() {
            return;
        }
        // clique[0] == i; subsets K ⊆ K' with i ∈ K are masks over the others.
        let others = &clique[1..];
        let subsets = 1usize << others.len();
        sums.clear();
        sums.resize(subsets, 0.0);
        sums[0] = phi[i];
        for mask in 1..subsets {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + phi[others[low]];
        }
        if sums[subsets - 1] >= 1.0 {
            let mut region = clique.to_vec();
            region.sort_unstable();
            infeasible = Some(Error::Infeasible {
                region,
                sum: sums[subsets - 1],
            });
            return;
        }
        let mut acc = 0.0;
        for (mask, &s) in sums.iter().enumerate() {
            let size = mask.count_ones() as usize + 1;
            let slack = (-s).ln_1p();
            // exponent (-1)^(k - |K| + 1)
            if (k - size) % 2 == 0 {
                acc -= slack;
            } else {
                acc += slack;
            }
        }
        inc[k] += acc;
    });
    match infeasible {
        Some(e) => Err(e),
        None => Ok(inc),
    }
}

/// Rates of the size-`k` clique approximation for every `k = 1..=k_max`,
/// built level by level: `ν^(1) = φ/(1-φ)` and each step multiplies in the
/// correction from the size-`k` cliques holding the node. Entry `k-1` of
/// the result is `ν^(k)`.
pub fn kmax_rates_by_level(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    k_max: usize,
) -> Result<Vec<BackoffVector>> {
    phi.check_len(g.n())?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let cap = k_max.min(g.n().max(1));
    let per_node: Vec<Vec<f64>> = (0..g.n())
        .into_par_iter()
        .map(|i| level_increments(g, phi, i, cap))
        .collect::<Result<_>>()?;
    let warning = if cap < g.n() {
        clique_sum_warning(g, phi)
    } else {
        None
    };
    (1..=cap)
        .map(|k| {
            let nu = per_node
                .iter()
                .map(|inc| inc[1..=k].iter().sum::<f64>().exp())
                .collect();
            let mut out = BackoffVector::new(nu, Method::Kmax(Some(k)), Some(k))?;
            out.warning.clone_from(&warning);
            Ok(out)
        })
        .collect()
}

/// Rates of the size-`k_max` clique approximation via the level recursion.
pub fn kmax_rates_recursive(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    k_max: usize,
) -> Result<BackoffVector> {
    let mut levels = kmax_rates_by_level(g, phi, k_max)?;
    let mut out = levels.pop().expect("at least one level");
    out.method = Method::Kmax(Some(k_max));
    out.k_max = Some(k_max);
    Ok(out)
}
