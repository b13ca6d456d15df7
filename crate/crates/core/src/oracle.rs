//! Brute-force ground truth for small conflict graphs: the set of independent
//! sets, exact product-form marginals, a numeric inverse and a feasibility
//! verdict.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_energy::{BackoffVector, Method, ThroughputVector};
use crate::graph::{maximal_cliques, ConflictGraph};

pub const DEFAULT_STATE_CAP: usize = 24;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000;

const PAR_CHUNK: usize = 1 << 14;
const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;
const MAX_LOG_RATE: f64 = 700.0;

/// Every independent set of a graph, each stored as a bit mask over links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    pub n: usize,
    pub states: Vec<u64>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Activity vector of state `idx`.
    pub fn activity(&self, idx: usize) -> Vec<bool> {
        let s = self.states[idx];
        (0..self.n).map(|i| s >> i & 1 == 1).collect()
    }

    pub fn contains(&self, x: &[bool]) -> bool {
        x.len() == self.n && self.states.binary_search(&to_mask(x)).is_ok()
    }
}

pub(crate) fn to_mask(x: &[bool]) -> u64 {
    x.iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .fold(0u64, |m, (i, _)| m | 1 << i)
}

/// Enumerates Ω by backtracking over links in id order. States come out
/// sorted by mask; the empty set is first.
pub fn enumerate_independent_sets(g: &ConflictGraph, cap: usize) -> Result<StateSpace> {
    let n = g.n();
    if n > cap.min(63) {
        return Err(Error::StateSpaceTooLarge { n, cap: cap.min(63) });
    }
    let nbr: Vec<u64> = (0..n)
        .map(|i| g.neighbors(i).iter().fold(0u64, |m, &j| m | 1 << j))
        .collect();
    let mut states = Vec::new();
    // Deciding links from the highest id down makes the output mask-sorted.
    fn walk(v: usize, mask: u64, nbr: &[u64], out: &mut Vec<u64>) {
        if v == 0 {
            out.push(mask);
            return;
        }
        let i = v - 1;
        walk(i, mask, nbr, out);
        if mask & nbr[i] == 0 {
            walk(i, mask | 1 << i, nbr, out);
        }
    }
    walk(n, 0, &nbr, &mut states);
    states.sort_unstable();
    Ok(StateSpace { n, states })
}

/// Exact marginals `p_i(1)` and the normalising constant of the product form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forward {
    pub throughputs: Vec<f64>,
    pub z: f64,
    pub log_z: f64,
}

fn partial_sums(states: &[u64], log_nu: &[f64], shift: f64) -> (f64, Vec<f64>) {
    let mut z = 0.0;
    let mut p = vec![0.0; log_nu.len()];
    for &s in states {
        let mut lw = -shift;
        let mut m = s;
        while m != 0 {
            lw += log_nu[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        let w = lw.exp();
        z += w;
        let mut m = s;
        while m != 0 {
            p[m.trailing_zeros() as usize] += w;
            m &= m - 1;
        }
    }
    (z, p)
}

fn forward_log(space: &StateSpace, log_nu: &[f64]) -> Forward {
    // Shift by the heaviest state so large rates do not overflow.
    let shift = space
        .states
        .iter()
        .map(|&s| {
            (0..space.n)
                .filter(|&i| s >> i & 1 == 1)
                .map(|i| log_nu[i])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let parts: Vec<(f64, Vec<f64>)> = if space.len() > PAR_CHUNK {
        space
            .states
            .par_chunks(PAR_CHUNK)
            .map(|c| partial_sums(c, log_nu, shift))
            .collect()
    } else {
        vec![partial_sums(&space.states, log_nu, shift)]
    };
    let mut z = 0.0;
    let mut p = vec![0.0; space.n];
    for (cz, cp) in parts {
        z += cz;
        p.iter_mut().zip(cp).for_each(|(a, b)| *a += b);
    }
    p.iter_mut().for_each(|v| *v /= z);
    let log_z = shift + z.ln();
    Forward {
        throughputs: p,
        z: log_z.exp(),
        log_z,
    }
}

/// Marginals of `p(x) ∝ Π ν_i^{x_i}` over a precomputed state space.
pub fn forward_on(space: &StateSpace, nu: &[f64]) -> Result<Forward> {
    if nu.len() != space.n {
        return Err(Error::InvalidArgument(format!(
            "{} rates given for {} links",
            nu.len(),
            space.n
        )));
    }
    let log_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();
    Ok(forward_log(space, &log_nu))
}

pub fn forward_throughputs(g: &ConflictGraph, nu: &BackoffVector) -> Result<Forward> {
    let space = enumerate_independent_sets(g, DEFAULT_STATE_CAP)?;
    forward_on(&space, &nu.nu)
}

fn residual(p: &[f64], phi: &ThroughputVector) -> f64 {
    p.iter()
        .zip(phi.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Log-partition, marginals and covariance of the activity vector at
/// log-rates `theta`.
fn moments(space: &StateSpace, theta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = space.n;
    let fwd = forward_log(space, theta);
    let mut second = vec![0.0; n * n];
    let mut active = Vec::with_capacity(n);
    for &s in &space.states {
        active.clear();
        let mut m = s;
        let mut lw = -fwd.log_z;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            lw += theta[i];
            active.push(i);
            m &= m - 1;
        }
        let w = lw.exp();
        for &i in &active {
            for &j in &active {
                second[i * n + j] += w;
            }
        }
    }
    let p = fwd.throughputs;
    for i in 0..n {
        for j in 0..n {
            second[i * n + j] -= p[i] * p[j];
        }
    }
    (fwd.log_z, p, second)
}

/// Solves `h x = b` for symmetric positive definite `h` (row-major, n×n).
fn cholesky_solve(h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = h[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    for i in (0..n).rev() {
        y[i] = (y[i] - (i + 1..n).map(|k| l[k * n + i] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    Some(y)
}

/// Solves `p_i(1; ν) = φ_i` by damped Newton steps on the convex function
/// `ln Z(θ) - φ·θ` of the log-rates `θ`, whose gradient is `p - φ` and
/// whose Hessian is the covariance of the activity vector. Starts from
/// `ν_i = φ_i/(1-φ_i)`; converged when the largest `|p_i - φ_i|` is at most
/// `tol`. Log-rates escaping past ±700 mean the targets are unattainable.
pub fn inverse_on(
    space: &StateSpace,
    phi: &ThroughputVector,
    tol: f64,
    max_iter: usize,
) -> Result<BackoffVector> {
    phi.check_len(space.n)?;
    let n = space.n;
    let target = phi.as_slice();
    let objective = |log_z: f64, theta: &[f64]| log_z - theta.iter().zip(target).map(|(t, f)| t * f).sum::<f64>();
    let mut theta: Vec<f64> = target.iter().map(|&v| v.ln() - (-v).ln_1p()).collect();
    let (mut log_z, mut p, mut cov) = moments(space, &theta);
    let mut res = residual(&p, phi);
    let mut iterations = 0;
    while iterations < max_iter {
        if res <= tol {
            return BackoffVector::new(theta.iter().map(|t| t.exp()).collect(), Method::Oracle, None);
        }
        iterations += 1;
        let grad: Vec<f64> = p.iter().zip(target).map(|(a, b)| a - b).collect();
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut ridge = 0.0;
        let dir = loop {
            let mut h = cov.clone();
            (0..n).for_each(|i| h[i * n + i] += ridge);
            if let Some(d) = cholesky_solve(&h, &rhs) {
                break d;
            }
            ridge = if ridge == 0.0 { 1e-12 } else { ridge * 10.0 };
        };
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let f0 = objective(log_z, &theta);
        let mut step = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            if trial.iter().all(|t| t.abs() <= MAX_LOG_RATE) {
                let (tz, tp, tc) = moments(space, &trial);
                let tres = residual(&tp, phi);
                // Near the optimum the objective change drowns in rounding,
                // so a smaller residual is accepted on its own.
                if objective(tz, &trial) <= f0 + 1e-4 * step * slope || tres < res {
                    break Some((trial, tz, tp, tc, tres));
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((t, z, pp, c, r)) => {
                (theta, log_z, p, cov, res) = (t, z, pp, c, r);
            }
            None => break,
        }
    }
    Err(Error::NonConvergence { iterations, residual: res })
}

pub fn inverse_rates_bruteforce(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    tol: f64,
    max_iter: usize,
) -> Result<BackoffVector> {
    let space = enumerate_independent_sets(g, DEFAULT_STATE_CAP)?;
    inverse_on(&space, phi, tol, max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub verdict: Feasibility,
    /// Maximal clique with the largest target sum.
    pub heaviest_clique: Vec<usize>,
    pub heaviest_clique_sum: f64,
    /// Oracle rates, when the inverse converged.
    pub rates: Option<Vec<f64>>,
    pub detail: String,
}

/// Infeasible when some maximal clique sums to one or more. Otherwise, within
/// the enumeration cap, feasible iff the inverse converges; above the cap
/// (or without convergence) the verdict is unknown.
pub fn feasibility_check(g: &ConflictGraph, phi: &ThroughputVector, cap: usize) -> Result<FeasibilityReport> {
    phi.check_len(g.n())?;
    let (heaviest_clique, heaviest_clique_sum) = maximal_cliques(g)
        .into_iter()
        .map(|c| {
            let s = phi.sum_over(c.members());
            (c.into_members(), s)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((Vec::new(), 0.0));
    let mut report = FeasibilityReport {
        verdict: Feasibility::Unknown,
        heaviest_clique,
        heaviest_clique_sum,
        rates: None,
        detail: String::new(),
    };
    if heaviest_clique_sum >= 1.0 {
        report.verdict = Feasibility::Infeasible;
        report.detail = format!("clique {:?} sums to {heaviest_clique_sum:.6}", report.heaviest_clique);
        return Ok(report);
    }
    let space = match enumerate_independent_sets(g, cap) {
        Ok(s) => s,
        Err(e @ Error::StateSpaceTooLarge { .. }) => {
            report.detail = format!("{e}; every maximal clique sums below one");
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    match inverse_on(&space, phi, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(nu) => {
            report.verdict = Feasibility::Feasible;
            report.detail = "inverse converged".into();
            report.rates = Some(nu.nu);
        }
        Err(e @ Error::NonConvergence { .. }) => report.detail = e.to_string(),
        Err(e) => return Err(e),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_independent(g: &ConflictGraph) -> Vec<u64> {
        (0..1u64 << g.n())
            .filter(|&m| g.edges().iter().all(|&(i, j)| m >> i & 1 == 0 || m >> j & 1 == 0))
            .collect()
    }

    #[test]
    fn small_state_spaces() {
        assert_eq!(enumerate_independent_sets(&ConflictGraph::complete(3), 24).unwrap().states, vec![0, 1, 2, 4]);
        assert_eq!(enumerate_independent_sets(&ConflictGraph::path(3), 24).unwrap().len(), 5);
        assert_eq!(enumerate_independent_sets(&ConflictGraph::empty(6), 24).unwrap().len(), 64);
        let g = ConflictGraph::new(6, [(0, 1), (1, 2), (2, 3), (3, 0), (3, 4), (4, 5), (2, 5)]).unwrap();
        assert_eq!(enumerate_independent_sets(&g, 24).unwrap().states, brute_independent(&g));
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_independent_sets(&ConflictGraph::empty(25), 24).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { n: 25, cap: 24 }));
    }

    #[test]
    fn forward_examples() {
        let k2 = BackoffVector::new(vec![0.5, 0.5], Method::Oracle, None).unwrap();
        let f = forward_throughputs(&ConflictGraph::complete(2), &k2).unwrap();
        assert!((f.z - 2.0).abs() < 1e-14);
        assert!(f.throughputs.iter().all(|p| (p - 0.25).abs() < 1e-15));

        let one = BackoffVector::new(vec![1.0], Method::Oracle, None).unwrap();
        assert_eq!(forward_throughputs(&ConflictGraph::empty(1), &one).unwrap().throughputs, vec![0.5]);

        let path = BackoffVector::new(vec![0.4, 0.84, 0.4], Method::Oracle, None).unwrap();
        let f = forward_throughputs(&ConflictGraph::path(3), &path).unwrap();
        assert!((f.z - 2.8).abs() < 1e-13);
        for (p, e) in f.throughputs.iter().zip([0.2, 0.3, 0.2]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_survives_huge_rates() {
        let nu = BackoffVector::new(vec![1e200, 1e200], Method::Oracle, None).unwrap();
        let f = forward_throughputs(&ConflictGraph::empty(2), &nu).unwrap();
        assert!(f.throughputs.iter().all(|&p| (p - 1.0).abs() < 1e-15));
        assert!(f.log_z.is_finite());
    }

    #[test]
    fn inverse_examples() {
        let phi = ThroughputVector::uniform(2, 0.25).unwrap();
        let nu = inverse_rates_bruteforce(&ConflictGraph::complete(2), &phi, 1e-13, 10_000).unwrap();
        assert!(nu.nu.iter().all(|v| (v - 0.5).abs() < 1e-11));

        let k3 = ConflictGraph::complete(3);
        let nu = inverse_rates_bruteforce(&k3, &ThroughputVector::uniform(3, 0.3).unwrap(), 1e-13, 100_000).unwrap();
        assert!(nu.nu.iter().all(|v| (v - 3.0).abs() < 1e-9), "{:?}", nu.nu);

        let err = inverse_rates_bruteforce(&k3, &ThroughputVector::uniform(3, 0.4).unwrap(), 1e-10, 100_000);
        assert!(matches!(err, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn feasibility_verdicts() {
        let k3 = ConflictGraph::complete(3);
        let ok = feasibility_check(&k3, &ThroughputVector::uniform(3, 0.3).unwrap(), 24).unwrap();
        assert_eq!(ok.verdict, Feasibility::Feasible);
        assert!(ok.rates.unwrap().iter().all(|v| (v - 3.0).abs() < 1e-6));

        let bad = feasibility_check(&k3, &ThroughputVector::uniform(3, 0.4).unwrap(), 24).unwrap();
        assert_eq!(bad.verdict, Feasibility::Infeasible);
        assert_eq!(bad.heaviest_clique, vec![0, 1, 2]);

        let big = ConflictGraph::path(30);
        let unk = feasibility_check(&big, &ThroughputVector::uniform(30, 0.3).unwrap(), 24).unwrap();
        assert_eq!(unk.verdict, Feasibility::Unknown);
        assert!((unk.heaviest_clique_sum - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sparse_infeasible_target_is_not_feasible() {
        // 5-cycle: every edge sums to 0.9 < 1, yet Σφ = 2.25 exceeds the
        // largest independent set size 2.
        let g = ConflictGraph::cycle(5);
        let r = feasibility_check(&g, &ThroughputVector::uniform(5, 0.45).unwrap(), 24).unwrap();
        assert_eq!(r.verdict, Feasibility::Unknown);
    }
}
