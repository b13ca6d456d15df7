use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::{build_kmax_regions, Region, RegionKind, RegionSet};
use crate::error::{Error, Result};
use crate::graph::{enumerate_cliques, maximal_cliques, sorted_intersection, ConflictGraph};

type Key = (Vec<usize>, Option<usize>);

fn intersect(a: &Region, b: &Region) -> Region {
    let node_factor = match (a.node_factor, b.node_factor) {
        (Some(i), Some(j)) if i == j => Some(i),
        _ => None,
    };
    Region::new(sorted_intersection(&a.variables, &b.variables), node_factor, 0)
}

fn strict_subregion(a: &Region, b: &Region) -> bool {
    a.is_subregion_of(b) && a.key() != b.key()
}

/// Kikuchi region hierarchy generated from the node-factor regions and the
/// clique regions of `K_G(k_max)`: every clique of size `k_max` plus every
/// maximal clique of size `2..k_max`.
///
/// Level `s+1` collects the non-empty intersections of level-`s` regions with
/// regions of levels `0..=s` (skipping nested pairs), minus those contained
/// in another candidate of the same level. Counting numbers follow
/// `c(R) = 1 - Σ_{R' ⊋ R} c(R')`.
pub fn build_kikuchi_regions(g: &ConflictGraph, k_max: usize) -> Result<RegionSet> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let n = g.n();
    let mut regions: Vec<Region> = (0..n).map(|i| Region::node_factor_region(i, 0)).collect();
    if k_max <= n {
        regions.extend(
            enumerate_cliques(g, k_max)
                .into_iter()
                .filter(|c| c.len() == k_max)
                .map(|c| Region::new(c.into_members(), None, 0)),
        );
    }
    regions.extend(
        maximal_cliques(g)
            .into_iter()
            .filter(|c| (2..k_max).contains(&c.len()))
            .map(|c| Region::new(c.into_members(), None, 0)),
    );
    let mut levels = vec![0usize; regions.len()];
    let mut seen: HashSet<Key> = regions.iter().map(Region::key).collect();

    let mut level = 0;
    let mut current: std::ops::Range<usize> = 0..regions.len();
    loop {
        let mut cand: Vec<Region> = Vec::new();
        let mut cand_keys: HashSet<Key> = HashSet::new();
        for a in current.clone() {
            for b in 0..current.end {
                if a == b {
                    continue;
                }
                let (ra, rb) = (&regions[a], &regions[b]);
                if ra.is_subregion_of(rb) || rb.is_subregion_of(ra) {
                    continue;
                }
                let r = intersect(ra, rb);
                if r.variables.is_empty() || seen.contains(&r.key()) {
                    continue;
                }
                if cand_keys.insert(r.key()) {
                    cand.push(r);
                }
            }
        }
        let kept: Vec<Region> = cand
            .iter()
            .filter(|r| !cand.iter().any(|other| strict_subregion(r, other)))
            .cloned()
            .collect();
        if kept.is_empty() {
            break;
        }
        level += 1;
        let start = regions.len();
        for mut r in kept {
            seen.insert(r.key());
            r.counting_number = 0;
            regions.push(r);
            levels.push(level);
        }
        current = start..regions.len();
    }

    // A strict super-region has more variables, or the same variable plus a
    // node factor, so this order visits supersets first.
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&regions[a], &regions[b]);
        rb.variables
            .len()
            .cmp(&ra.variables.len())
            .then(rb.node_factor.is_some().cmp(&ra.node_factor.is_some()))
    });
    for (pos, &idx) in order.iter().enumerate() {
        let above: i64 = order[..pos]
            .iter()
            .filter(|&&j| strict_subregion(&regions[idx], &regions[j]))
            .map(|&j| regions[j].counting_number)
            .sum();
        regions[idx].counting_number = 1 - above;
    }

    Ok(RegionSet {
        kind: RegionKind::Kikuchi(k_max),
        n,
        regions,
        levels,
    })
}

/// A region whose counting number differs between the two approximations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionDiff {
    pub variables: Vec<usize>,
    pub node_factor: Option<usize>,
    /// `None` when the region is absent from the size-`k_max` clique set.
    pub kmax_c: Option<i64>,
    /// `None` when the region is absent from the Kikuchi set.
    pub kikuchi_c: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KikuchiReport {
    pub k_max: usize,
    pub kmax_regions: usize,
    pub kikuchi_regions: usize,
    pub diffs: Vec<RegionDiff>,
}

impl KikuchiReport {
    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Compares the size-`k_max` clique region set with the Kikuchi set: shared
/// regions must carry identical counting numbers and regions present in only
/// one of them must have counting number zero.
pub fn verify_kikuchi_equivalence(g: &ConflictGraph, k_max: usize) -> Result<KikuchiReport> {
    let kmax = build_kmax_regions(g, k_max)?;
    let kik = build_kikuchi_regions(g, k_max)?;
    let kmax_map: HashMap<Key, i64> = kmax
        .regions
        .iter()
        .map(|r| (r.key(), r.counting_number))
        .collect();
    let kik_map: HashMap<Key, i64> = kik.regions.iter().map(|r| (r.key(), r.counting_number)).collect();
    let mut diffs = Vec::new();
    let mut push = |key: &Key, kmax_c: Option<i64>, kikuchi_c: Option<i64>| {
        if kmax_c.unwrap_or(0) != kikuchi_c.unwrap_or(0) {
            diffs.push(RegionDiff {
                variables: key.0.clone(),
                node_factor: key.1,
                kmax_c,
                kikuchi_c,
            });
        }
    };
    for (key, &c) in &kmax_map {
        push(key, Some(c), kik_map.get(key).copied());
    }
    for (key, &c) in &kik_map {
        if !kmax_map.contains_key(key) {
            push(key, None, Some(c));
        }
    }
    diffs.sort_by(|a, b| (&a.variables, a.node_factor).cmp(&(&b.variables, b.node_factor)));
    Ok(KikuchiReport {
        k_max,
        kmax_regions: kmax.regions.len(),
        kikuchi_regions: kik.regions.len(),
        diffs,
    })
}
