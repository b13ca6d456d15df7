//! Exact back-off rates, partition function, stationary distribution and
//! entropy on chordal conflict graphs, all read off a clique tree.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_energy::{
    backoff_from_regions, build_kikuchi_regions, kmax_rates_recursive, BackoffVector, Method, Region,
    RegionKind, RegionSet, ThroughputVector,
};
use crate::graph::{clique_tree, CliqueTree, ConflictGraph};
use crate::oracle::{enumerate_independent_sets, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordalSolution {
    pub rates: BackoffVector,
    pub z: f64,
    pub clique_tree: CliqueTree,
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v.iter().sum()
}

fn clique_slacks(tree: &CliqueTree, phi: &ThroughputVector) -> Result<Vec<f64>> {
    tree.cliques
        .iter()
        .map(|k| {
            let s = phi.sum_over(k.members());
            if s >= 1.0 {
                Err(Error::Infeasible {
                    region: k.members().to_vec(),
                    sum: s,
                })
            } else {
                Ok((-s).ln_1p())
            }
        })
        .collect()
}

fn separator_slacks(tree: &CliqueTree, phi: &ThroughputVector) -> Vec<f64> {
    tree.separators
        .iter()
        .map(|s| (-phi.sum_over(s.members())).ln_1p())
        .collect()
}

pub fn exact_rates_chordal(g: &ConflictGraph, phi: &ThroughputVector) -> Result<ChordalSolution> {
    phi.check_len(g.n())?;
    exact_rates_with_tree(&clique_tree(g)?, phi)
}

/// `ν_i = φ_i Π_{S ∋ i} (1-Σ_S φ) / Π_{K ∋ i} (1-Σ_K φ)` and
/// `Z = Π_S (1-Σ_S φ) / Π_K (1-Σ_K φ)`, with `K` over the maximal cliques
/// and `S` over the separators of `tree`.
pub fn exact_rates_with_tree(tree: &CliqueTree, phi: &ThroughputVector) -> Result<ChordalSolution> {
    phi.check_len(tree.n)?;
    let ck = clique_slacks(tree, phi)?;
    let cs = separator_slacks(tree, phi);
    let mut terms: Vec<Vec<f64>> = (0..tree.n).map(|i| vec![phi[i].ln()]).collect();
    for (k, &l) in tree.cliques.iter().zip(&ck) {
        for &i in k.members() {
            terms[i].push(-l);
        }
    }
    for (s, &l) in tree.separators.iter().zip(&cs) {
        for &i in s.members() {
            terms[i].push(l);
        }
    }
    let nu = terms.into_iter().map(|t| sorted_sum(t).exp()).collect();
    let log_z = sorted_sum(cs.iter().copied().chain(ck.iter().map(|l| -l)).collect());
    Ok(ChordalSolution {
        rates: BackoffVector::new(nu, Method::ChordalExact, None)?,
        z: log_z.exp(),
        clique_tree: tree.clone(),
    })
}

/// `ϑ_1(S) + ϑ_0(S)` for the active links of `x` inside `S`: `φ_j` when
/// exactly `j` is active, `1 - Σ_S φ` when none is, zero otherwise.
fn theta(members: &[usize], phi: &ThroughputVector, x: &[bool]) -> f64 {
    let mut active = members.iter().filter(|&&i| x[i]);
    match (active.next(), active.next()) {
        (None, _) => 1.0 - phi.sum_over(members),
        (Some(&j), None) => phi[j],
        _ => 0.0,
    }
}

/// `p(x) = Π_K ϑ(K) / Π_S ϑ(S)`; zero when `x` is not an independent set.
/// `phi` must be the exact marginals of the distribution.
pub fn stationary_probability_chordal(tree: &CliqueTree, phi: &ThroughputVector, x: &[bool]) -> Result<f64> {
    phi.check_len(tree.n)?;
    if x.len() != tree.n {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries for {} links",
            x.len(),
            tree.n
        )));
    }
    let mut p = 1.0;
    for k in &tree.cliques {
        let t = theta(k.members(), phi, x);
        if t == 0.0 {
            return Ok(0.0);
        }
        p *= t;
    }
    for s in &tree.separators {
        p /= theta(s.members(), phi, x);
    }
    Ok(p)
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Entropy of the chordal region approximation under the exact marginals:
/// `-Σ_i φ_i ln φ_i - Σ_K (1-Σ_K) ln(1-Σ_K) + Σ_S (1-Σ_S) ln(1-Σ_S)`.
pub fn gibbs_entropy_chordal(tree: &CliqueTree, phi: &ThroughputVector) -> Result<f64> {
    phi.check_len(tree.n)?;
    clique_slacks(tree, phi)?;
    let mut terms: Vec<f64> = phi.as_slice().iter().map(|&p| -xlogx(p)).collect();
    terms.extend(tree.cliques.iter().map(|k| -xlogx(1.0 - phi.sum_over(k.members()))));
    terms.extend(tree.separators.iter().map(|s| xlogx(1.0 - phi.sum_over(s.members()))));
    Ok(sorted_sum(terms))
}

/// The three entropy evaluations that coincide on chordal graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRoutes {
    /// Region formula.
    pub region: f64,
    /// `-Σ_Ω p ln p` with `p` from the clique-tree factorisation.
    pub enumeration: f64,
    /// `ln Z - Σ_i φ_i ln ν_i`.
    pub log_partition: f64,
}

impl EntropyRoutes {
    pub fn max_disagreement(&self) -> f64 {
        let v = [self.region, self.enumeration, self.log_partition];
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

pub fn entropy_routes(g: &ConflictGraph, phi: &ThroughputVector, cap: usize) -> Result<EntropyRoutes> {
    let sol = exact_rates_chordal(g, phi)?;
    let space = enumerate_independent_sets(g, cap)?;
    entropy_routes_with(&sol, &space, phi)
}

fn entropy_routes_with(sol: &ChordalSolution, space: &StateSpace, phi: &ThroughputVector) -> Result<EntropyRoutes> {
    let tree = &sol.clique_tree;
    let mut terms = Vec::with_capacity(space.len());
    for idx in 0..space.len() {
        let p = stationary_probability_chordal(tree, phi, &space.activity(idx))?;
        terms.push(-xlogx(p));
    }
    let energy: Vec<f64> = (0..tree.n).map(|i| -phi[i] * sol.rates.nu[i].ln()).collect();
    Ok(EntropyRoutes {
        region: gibbs_entropy_chordal(tree, phi)?,
        enumeration: sorted_sum(terms),
        log_partition: sol.z.ln() + sorted_sum(energy),
    })
}

/// Chordal region set: one region per maximal clique (`c = 1`), one per
/// non-empty separator (`c = -1`), plus `R_{f_i}` (`c = 1`) and `R_{x_i}`
/// (`c = -1`). Regions with equal variables and factors are merged by adding
/// their counting numbers.
pub fn build_chordal_regions(tree: &CliqueTree) -> RegionSet {
    let mut acc: BTreeMap<(Vec<usize>, Option<usize>), i64> = BTreeMap::new();
    for i in 0..tree.n {
        *acc.entry((vec![i], Some(i))).or_default() += 1;
        *acc.entry((vec![i], None)).or_default() -= 1;
    }
    for k in &tree.cliques {
        *acc.entry((k.members().to_vec(), None)).or_default() += 1;
    }
    for s in tree.separators.iter().filter(|s| !s.is_empty()) {
        *acc.entry((s.members().to_vec(), None)).or_default() -= 1;
    }
    RegionSet {
        kind: RegionKind::Chordal,
        n: tree.n,
        regions: acc
            .into_iter()
            .map(|((vars, nf), c)| Region::new(vars, nf, c))
            .collect(),
        levels: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityMismatch {
    pub variables: Vec<usize>,
    pub expected: i64,
    pub actual: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordalIdentityReport {
    pub mismatches: Vec<IdentityMismatch>,
    /// Largest pairwise relative difference among the rates of the Kikuchi
    /// set, the chordal region set, the uncapped clique approximation and
    /// the closed form.
    pub max_rate_discrepancy: f64,
}

impl ChordalIdentityReport {
    pub const RATE_TOL: f64 = 1e-12;

    pub fn is_empty(&self) -> bool {
        self.mismatches.is_empty() && self.max_rate_discrepancy <= Self::RATE_TOL
    }
}

/// Checks that every Kikuchi region outside the base level (built with
/// `k_max = n`) has counting number `-#{tree edges whose separator equals it}
/// - 1{singleton}`, and that all four rate constructions agree on `phi`.
pub fn verify_chordal_kikuchi_identity(g: &ConflictGraph, phi: &ThroughputVector) -> Result<ChordalIdentityReport> {
    phi.check_len(g.n())?;
    let tree = clique_tree(g)?;
    let kik = build_kikuchi_regions(g, g.n().max(2))?;
    let mut mismatches = Vec::new();
    for (r, &level) in kik.regions.iter().zip(&kik.levels) {
        if level == 0 {
            continue;
        }
        let seps = tree
            .separators
            .iter()
            .filter(|s| s.members() == r.variables.as_slice())
            .count() as i64;
        let expected = -seps - i64::from(r.variables.len() == 1);
        if expected != r.counting_number {
            mismatches.push(IdentityMismatch {
                variables: r.variables.clone(),
                expected,
                actual: r.counting_number,
            });
        }
    }
    let rates = [
        backoff_from_regions(&kik, phi)?,
        backoff_from_regions(&build_chordal_regions(&tree), phi)?,
        kmax_rates_recursive(g, phi, g.n().max(1))?,
        exact_rates_with_tree(&tree, phi)?.rates,
    ];
    let mut max_rate_discrepancy = 0.0f64;
    for a in 0..rates.len() {
        for b in a + 1..rates.len() {
            max_rate_discrepancy = max_rate_discrepancy.max(rates[a].max_relative_diff(&rates[b]));
        }
    }
    Ok(ChordalIdentityReport {
        mismatches,
        max_rate_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Clique;
    use crate::oracle::{forward_on, DEFAULT_STATE_CAP};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn path_example() {
        let g = ConflictGraph::path(3);
        let phi = ThroughputVector::new(vec![0.2, 0.3, 0.2]).unwrap();
        let sol = exact_rates_chordal(&g, &phi).unwrap();
        for (v, e) in sol.rates.nu.iter().zip([0.4, 0.84, 0.4]) {
            assert!(close(*v, e, 1e-14), "{v} vs {e}");
        }
        assert!(close(sol.z, 2.8, 1e-14));
        let p = stationary_probability_chordal(&sol.clique_tree, &phi, &[false, true, false]).unwrap();
        assert!(close(p, 0.3, 1e-14));
        let p0 = stationary_probability_chordal(&sol.clique_tree, &phi, &[false; 3]).unwrap();
        assert!(close(p0, 1.0 / 2.8, 1e-14));
        let bad = stationary_probability_chordal(&sol.clique_tree, &phi, &[true, true, false]).unwrap();
        assert_eq!(bad, 0.0);
    }

    #[test]
    fn single_clique_closed_form() {
        for m in 1..6 {
            let g = ConflictGraph::complete(m);
            let a = 0.9 / m as f64;
            let sol = exact_rates_chordal(&g, &ThroughputVector::uniform(m, a).unwrap()).unwrap();
            let expect = a / (1.0 - m as f64 * a);
            assert!(sol.rates.nu.iter().all(|&v| close(v, expect, 1e-13)));
        }
    }

    #[test]
    fn star_example() {
        let g = ConflictGraph::star(3);
        let phi = ThroughputVector::uniform(4, 0.2).unwrap();
        let sol = exact_rates_chordal(&g, &phi).unwrap();
        assert!(close(sol.rates.nu[0], 0.2 * 0.64 / 0.216, 1e-14));
        for leaf in 1..4 {
            assert!(close(sol.rates.nu[leaf], 0.2 / 0.6, 1e-14));
        }
        let f = forward_on(&enumerate_independent_sets(&g, 24).unwrap(), &sol.rates.nu).unwrap();
        assert!(f.throughputs.iter().all(|&p| (p - 0.2).abs() < 1e-14));
    }

    #[test]
    fn disconnected_graph_has_empty_separators() {
        let g = ConflictGraph::new(4, [(0, 1)]).unwrap();
        let phi = ThroughputVector::new(vec![0.3, 0.4, 0.5, 0.25]).unwrap();
        let sol = exact_rates_chordal(&g, &phi).unwrap();
        assert!(sol.clique_tree.separators.iter().any(Clique::is_empty));
        assert!(close(sol.rates.nu[2], 1.0, 1e-15));
        let f = forward_on(&enumerate_independent_sets(&g, 24).unwrap(), &sol.rates.nu).unwrap();
        assert!(close(f.z, sol.z, 1e-13));
        for (p, e) in f.throughputs.iter().zip(phi.as_slice()) {
            assert!((p - e).abs() < 1e-14);
        }
    }

    #[test]
    fn entropy_examples() {
        let one = ConflictGraph::empty(1);
        let r = entropy_routes(&one, &ThroughputVector::uniform(1, 0.5).unwrap(), 24).unwrap();
        for h in [r.region, r.enumeration, r.log_partition] {
            assert!(close(h, std::f64::consts::LN_2, 1e-15));
        }

        let path = ConflictGraph::path(3);
        let r = entropy_routes(&path, &ThroughputVector::new(vec![0.2, 0.3, 0.2]).unwrap(), 24).unwrap();
        assert!(r.max_disagreement() < 1e-12, "{r:?}");

        let k3 = ConflictGraph::complete(3);
        let r = entropy_routes(&k3, &ThroughputVector::uniform(3, 0.2).unwrap(), DEFAULT_STATE_CAP).unwrap();
        let expect = -(0.4f64 * 0.4f64.ln() + 3.0 * 0.2 * 0.2f64.ln());
        assert!(close(r.region, expect, 1e-14));
        assert!(r.max_disagreement() < 1e-12);
    }

    #[test]
    fn chordal_regions_are_valid_and_exact() {
        let g = ConflictGraph::new(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]).unwrap();
        let tree = clique_tree(&g).unwrap();
        let rs = build_chordal_regions(&tree);
        assert!(rs.is_valid(&g), "{:?}", rs.validity_violations(&g));
        let phi = ThroughputVector::new(vec![0.2, 0.1, 0.3, 0.2, 0.25, 0.6]).unwrap();
        let a = backoff_from_regions(&rs, &phi).unwrap();
        let b = exact_rates_with_tree(&tree, &phi).unwrap().rates;
        assert!(a.max_relative_diff(&b) < 1e-14);
    }

    #[test]
    fn identity_on_path_and_clique() {
        let path = ConflictGraph::path(3);
        let rep = verify_chordal_kikuchi_identity(&path, &ThroughputVector::new(vec![0.2, 0.3, 0.2]).unwrap()).unwrap();
        assert!(rep.is_empty(), "{rep:?}");
        let kik = build_kikuchi_regions(&path, 3).unwrap();
        let mid = kik.regions.iter().find(|r| r.variables == [1] && r.node_factor.is_none()).unwrap();
        assert_eq!(mid.counting_number, -2);

        let k4 = ConflictGraph::complete(4);
        let rep = verify_chordal_kikuchi_identity(&k4, &ThroughputVector::uniform(4, 0.2).unwrap()).unwrap();
        assert!(rep.is_empty(), "{rep:?}");
    }

    #[test]
    fn rejects_non_chordal_and_infeasible() {
        let c4 = ConflictGraph::cycle(4);
        assert!(matches!(
            exact_rates_chordal(&c4, &ThroughputVector::uniform(4, 0.1).unwrap()),
            Err(Error::NotChordal)
        ));
        let k3 = ConflictGraph::complete(3);
        let err = exact_rates_chordal(&k3, &ThroughputVector::uniform(3, 0.4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { ref region, .. } if region == &vec![0, 1, 2]));
    }
}
