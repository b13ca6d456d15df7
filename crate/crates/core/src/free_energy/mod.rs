//! Region-based free-energy approximations with clique belief.
//!
//! Every region used here has a clique of the conflict graph as its variable
//! set and carries all edge factors inside that clique, plus optionally the
//! node factor `f_i` of a single link. A [`RegionSet`] pairs such regions
//! with integer counting numbers; the back-off rates of any valid set follow
//! from [`backoff_from_regions`].

mod counting;
mod energy;
mod kikuchi;
mod rates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ConflictGraph;

pub use counting::{
    build_kmax_regions, counting_number, counting_number_by_superset_sum, superset_counts,
};
pub use energy::{
    clique_belief_free_energy, ibp_fixed_point_check, ibp_fixed_point_ratios, ibp_max_violation,
    FreeEnergy,
};
pub use kikuchi::{build_kikuchi_regions, verify_kikuchi_equivalence, KikuchiReport, RegionDiff};
pub use rates::{
    backoff_from_regions, bethe_rates, clique_sum_warning, kmax_rates_by_level,
    kmax_rates_recursive, triangle_rates,
};

/// Target throughput per link, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThroughputVector(Vec<f64>);

impl ThroughputVector {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = phi
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v < 1.0))
        {
            return Err(Error::InvalidArgument(format!(
                "throughput of link {i} must lie in (0, 1), got {v}"
            )));
        }
        Ok(Self(phi))
    }

    /// Every link gets `value`.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// `phi / ω` on every link, with ω the size of the largest clique.
    pub fn over_max_clique(g: &ConflictGraph, phi: f64) -> Result<Self> {
        let omega = crate::graph::max_clique_size(g).max(1);
        Self::uniform(g.n(), phi / omega as f64)
    }

    /// `c / (1 + d_i)` on link `i`.
    pub fn degree_scaled(g: &ConflictGraph, c: f64) -> Result<Self> {
        Self::new((0..g.n()).map(|i| c / (1 + g.degree(i)) as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sum of the targets of `nodes`.
    pub fn sum_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.0[i]).sum()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} targets given for {n} links",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ThroughputVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ThroughputVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThroughputVector> for Vec<f64> {
    fn from(v: ThroughputVector) -> Self {
        v.0
    }
}

/// How a back-off vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Bethe,
    Triangle,
    /// Size-`k_max` clique approximation; `None` means no cap (`k_max = n`).
    Kmax(Option<usize>),
    Kikuchi(Option<usize>),
    ChordalExact,
    Oracle,
}

impl Method {
    /// The clique-size cap the method uses, resolved against a graph size.
    pub fn k_max(&self, n: usize) -> Option<usize> {
        match *self {
            Method::Bethe => Some(2),
            Method::Triangle => Some(3),
            Method::Kmax(k) | Method::Kikuchi(k) => Some(k.unwrap_or(n)),
            Method::ChordalExact | Method::Oracle => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cap = |k: &Option<usize>| k.map_or_else(|| "n".to_string(), |k| k.to_string());
        match self {
            Method::Bethe => f.write_str("bethe"),
            Method::Triangle => f.write_str("triangle"),
            Method::Kmax(k) => write!(f, "kmax:{}", cap(k)),
            Method::Kikuchi(k) => write!(f, "kikuchi:{}", cap(k)),
            Method::ChordalExact => f.write_str("chordal-exact"),
            Method::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_cap = |k: &str| -> Result<Option<usize>> {
            if k == "n" {
                return Ok(None);
            }
            match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Some(k)),
                _ => Err(Error::InvalidArgument(format!("bad clique-size cap {k:?}"))),
            }
        };
        match s {
            "bethe" => Ok(Method::Bethe),
            "triangle" => Ok(Method::Triangle),
            "chordal-exact" | "chordal" => Ok(Method::ChordalExact),
            "oracle" => Ok(Method::Oracle),
            _ => {
                if let Some(k) = s.strip_prefix("kmax:") {
                    Ok(Method::Kmax(parse_cap(k)?))
                } else if let Some(k) = s.strip_prefix("kikuchi:") {
                    Ok(Method::Kikuchi(parse_cap(k)?))
                } else {
                    Err(Error::InvalidArgument(format!("unknown method {s:?}")))
                }
            }
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Back-off rate per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffVector {
    pub nu: Vec<f64>,
    pub method: Method,
    pub k_max: Option<usize>,
    /// Set when the targets passed every region check but some maximal
    /// clique sums to one or more, so they cannot be achievable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl BackoffVector {
    pub fn new(nu: Vec<f64>, method: Method, k_max: Option<usize>) -> Result<Self> {
        if let Some((i, v)) = nu.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "back-off rate of link {i} must be positive and finite, got {v}"
            )));
        }
        Ok(Self {
            nu,
            method,
            k_max,
            warning: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Largest relative difference to another rate vector.
    pub fn max_relative_diff(&self, other: &BackoffVector) -> f64 {
        self.nu
            .iter()
            .zip(&other.nu)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    }
}

/// Region family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Bethe,
    Triangle,
    KmaxClique(usize),
    Kikuchi(usize),
    Chordal,
}

impl RegionKind {
    fn method(self) -> (Method, Option<usize>) {
        match self {
            RegionKind::Bethe => (Method::Bethe, Some(2)),
            RegionKind::Triangle => (Method::Triangle, Some(3)),
            RegionKind::KmaxClique(k) => (Method::Kmax(Some(k)), Some(k)),
            RegionKind::Kikuchi(k) => (Method::Kikuchi(Some(k)), Some(k)),
            RegionKind::Chordal => (Method::ChordalExact, None),
        }
    }
}

/// A region: a clique of variables, every edge factor inside it, and at most
/// one node factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub variables: Vec<usize>,
    pub node_factor: Option<usize>,
    pub counting_number: i64,
}

impl Region {
    pub fn new(mut variables: Vec<usize>, node_factor: Option<usize>, counting_number: i64) -> Self {
        variables.sort_unstable();
        variables.dedup();
        Self {
            variables,
            node_factor,
            counting_number,
        }
    }

    /// `R_{f_i}`: variable `x_i` and factor `f_i`.
    pub fn node_factor_region(i: usize, counting_number: i64) -> Self {
        Self::new(vec![i], Some(i), counting_number)
    }

    /// `R_{x_i}`: variable `x_i` only.
    pub fn variable_region(i: usize, counting_number: i64) -> Self {
        Self::new(vec![i], None, counting_number)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.variables.binary_search(&i).is_ok()
    }

    /// Edge factors `f_(i,j)` held by the region.
    pub fn factor_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let v = &self.variables;
        (0..v.len()).flat_map(move |a| (a + 1..v.len()).map(move |b| (v[a], v[b])))
    }

    /// Identity key: variable set and factor set, ignoring the counting number.
    pub fn key(&self) -> (Vec<usize>, Option<usize>) {
        (self.variables.clone(), self.node_factor)
    }

    /// `self ⊆ other` on both variables and factors.
    pub fn is_subregion_of(&self, other: &Region) -> bool {
        (self.node_factor.is_none() || self.node_factor == other.node_factor)
            && crate::graph::is_sorted_subset(&self.variables, &other.variables)
    }
}

/// A collection of regions with counting numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub kind: RegionKind,
    pub n: usize,
    pub regions: Vec<Region>,
    /// Hierarchy level of each region (Kikuchi sets only; empty otherwise).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<usize>,
}

impl RegionSet {
    /// Lists every violated condition: regions whose variables are not a
    /// clique of `g`, and nodes or factors whose containing counting numbers do
    /// not sum to exactly one. Empty means valid.
    pub fn validity_violations(&self, g: &ConflictGraph) -> Vec<String> {
        let mut out = Vec::new();
        if g.n() != self.n {
            out.push(format!("region set is for {} links, graph has {}", self.n, g.n()));
            return out;
        }
        let mut var_sum = vec![0i64; self.n];
        let mut node_factor_sum = vec![0i64; self.n];
        let mut edge_sum = std::collections::HashMap::new();
        for r in &self.regions {
            if r.variables.iter().any(|&v| v >= self.n) || !g.is_clique(&r.variables) {
                out.push(format!("region {:?} is not a clique", r.variables));
                continue;
            }
            if let Some(i) = r.node_factor {
                if r.variables != [i] {
                    out.push(format!("node factor f_{i} in region {:?}", r.variables));
                }
                node_factor_sum[i] += r.counting_number;
            }
            for &v in &r.variables {
                var_sum[v] += r.counting_number;
            }
            for e in r.factor_edges() {
                *edge_sum.entry(e).or_insert(0i64) += r.counting_number;
            }
        }
        for i in 0..self.n {
            if var_sum[i] != 1 {
                out.push(format!("variable x_{i}: counting numbers sum to {}", var_sum[i]));
            }
            if node_factor_sum[i] != 1 {
                out.push(format!("factor f_{i}: counting numbers sum to {}", node_factor_sum[i]));
            }
        }
        for (i, j) in g.edges() {
            let s = edge_sum.get(&(i, j)).copied().unwrap_or(0);
            if s != 1 {
                out.push(format!("factor f_({i},{j}): counting numbers sum to {s}"));
            }
        }
        out
    }

    pub fn is_valid(&self, g: &ConflictGraph) -> bool {
        self.validity_violations(g).is_empty()
    }

    /// Debug dump: one `{variables, factors, c}` object per region. Node
    /// factors appear as `[i]`, edge factors as `[i, j]`.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let regions: Vec<_> = self
            .regions
            .iter()
            .map(|r| {
                let mut factors: Vec<Vec<usize>> = r.node_factor.iter().map(|&i| vec![i]).collect();
                factors.extend(r.factor_edges().map(|(i, j)| vec![i, j]));
                serde_json::json!({
                    "variables": r.variables,
                    "factors": factors,
                    "c": r.counting_number,
                })
            })
            .collect();
        serde_json::json!({ "kind": self.kind, "n": self.n, "regions": regions })
    }
}
