use std::collections::BTreeMap;

use serde::Serialize;

use super::{BackoffVector, RegionSet, ThroughputVector};
use crate::error::{Error, Result};
use crate::graph::ConflictGraph;

/// Energy, entropy and free energy of a region set under clique belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergy {
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Region-based free energy `F = U - H` with every region belief set to the
/// clique belief induced by `phi`: probability `φ_i` on each single-active
/// state, `1 - Σ φ` on the all-idle state, zero elsewhere.
///
/// `U = -Σ_i φ_i ln ν_i`; `H = -Σ_R c_R [Σ_{i∈R} φ_i ln φ_i + (1-Σ_R φ) ln(1-Σ_R φ)]`.
pub fn clique_belief_free_energy(
    rs: &RegionSet,
    phi: &ThroughputVector,
    nu: &BackoffVector,
) -> Result<FreeEnergy> {
    phi.check_len(rs.n)?;
    if nu.len() != rs.n {
        return Err(Error::InvalidArgument(format!(
            "{} rates given for {} links",
            nu.len(),
            rs.n
        )));
    }
    let energy: f64 = -(0..rs.n).map(|i| phi[i] * nu.nu[i].ln()).sum::<f64>();
    let mut entropy = 0.0;
    for r in &rs.regions {
        let s = phi.sum_over(&r.variables);
        if s >= 1.0 {
            return Err(Error::Infeasible {
                region: r.variables.clone(),
                sum: s,
            });
        }
        let inner: f64 = r.variables.iter().map(|&i| xlogx(phi[i])).sum::<f64>() + xlogx(1.0 - s);
        entropy -= r.counting_number as f64 * inner;
    }
    Ok(FreeEnergy {
        energy,
        entropy,
        free_energy: energy - entropy,
    })
}

/// Message ratios `m_ij(0)/m_ij(1) = (1-φ_j)/(1-φ_i-φ_j)` for every directed
/// edge `(i, j)`: the closed-form fixed point of inverse belief propagation
/// that yields the Bethe rates.
pub fn ibp_fixed_point_ratios(g: &ConflictGraph, phi: &ThroughputVector) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for (i, j) in g.edges() {
        out.insert((i, j), (1.0 - phi[j]) / (1.0 - phi[i] - phi[j]));
        out.insert((j, i), (1.0 - phi[i]) / (1.0 - phi[i] - phi[j]));
    }
    out
}

/// Largest relative violation of the inverse-BP update
/// `m_ji(0)/m_ji(1) = 1 + (m_ij(0)/m_ij(1)) φ_j / (1-φ_j)` over all directed
/// edges. Missing messages count as an infinite violation.
pub fn ibp_max_violation(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    ratios: &BTreeMap<(usize, usize), f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for (i, j) in g.edges() {
        for (a, b) in [(i, j), (j, i)] {
            let (Some(&r_ab), Some(&r_ba)) = (ratios.get(&(a, b)), ratios.get(&(b, a))) else {
                return f64::INFINITY;
            };
            let rhs = 1.0 + r_ab * phi[b] / (1.0 - phi[b]);
            worst = worst.max(((r_ba - rhs) / rhs).abs());
        }
    }
    worst
}

/// True iff the closed-form ratios satisfy the inverse-BP update on every
/// directed edge to within `1e-12` (relative).
pub fn ibp_fixed_point_check(g: &ConflictGraph, phi: &ThroughputVector) -> bool {
    let ratios = ibp_fixed_point_ratios(g, phi);
    ibp_max_violation(g, phi, &ratios) <= 1e-12
}
