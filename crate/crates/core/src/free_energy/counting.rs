use std::collections::HashMap;

use super::{Region, RegionKind, RegionSet};
use crate::error::{Error, Result};
use crate::graph::{enumerate_cliques, Clique, ConflictGraph};

/// `counts[s]` = number of size-`s` cliques strictly containing `clique`, for
/// `s` up to `k_max` (entries at or below `|clique|` are zero).
pub fn superset_counts(g: &ConflictGraph, clique: &Clique, k_max: usize) -> Vec<u64> {
    let k = clique.len();
    let mut counts = vec![0u64; k_max.max(k) + 1];
    if k_max > k {
        let cand = crate::graph::common_neighbors(g, clique.members());
        tally(g, &cand, k + 1, k_max, &mut counts);
    }
    counts
}

fn tally(g: &ConflictGraph, cand: &[usize], size: usize, k_max: usize, counts: &mut [u64]) {
    counts[size] += cand.len() as u64;
    if size == k_max {
        return;
    }
    let mut next = Vec::with_capacity(cand.len());
    for (idx, &v) in cand.iter().enumerate() {
        next.clear();
        next.extend(cand[idx + 1..].iter().copied().filter(|&w| g.has_edge(v, w)));
        if !next.is_empty() {
            tally(g, &next, size + 1, k_max, counts);
        }
    }
}

/// Closed-form counting number of the region of `clique` in the size-`k_max`
/// clique approximation:
/// `1{k > 1} + Σ_{s=k+1}^{k_max} (-1)^(s-k) n_{K,s}`.
pub fn counting_number(g: &ConflictGraph, clique: &Clique, k_max: usize) -> i64 {
    let k = clique.len();
    let counts = superset_counts(g, clique, k_max);
    let mut c = i64::from(k > 1);
    for (s, &n_ks) in counts.iter().enumerate().skip(k + 1) {
        let sign = if (s - k) % 2 == 0 { 1 } else { -1 };
        c += sign * n_ks as i64;
    }
    c
}

/// Counting numbers of every clique of size `1..=k_max` from their defining
/// relation, `c(K) = 1{k > 1} - Σ_{K' ⊋ K, |K'| <= k_max} c(K')`, evaluated
/// top-down over an explicit clique list.
pub fn counting_number_by_superset_sum(g: &ConflictGraph, k_max: usize) -> HashMap<Clique, i64> {
    let all = enumerate_cliques(g, k_max);
    let mut memo: HashMap<Clique, i64> = HashMap::with_capacity(all.len());
    // `all` is sorted by size, so walking it backwards visits supersets first.
    for c in all.iter().rev() {
        let above: i64 = all
            .iter()
            .rev()
            .take_while(|d| d.len() > c.len())
            .filter(|d| c.is_subset_of(d))
            .map(|d| memo[d])
            .sum();
        memo.insert(c.clone(), i64::from(c.len() > 1) - above);
    }
    memo
}

/// Region set of the size-`k_max` clique approximation: `R_{f_i}` and
/// `R_{x_i}` for every link, then one region per clique of size
/// `2..=k_max`.
pub fn build_kmax_regions(g: &ConflictGraph, k_max: usize) -> Result<RegionSet> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let n = g.n();
    let k_max = k_max.min(n.max(2));
    let cliques: Vec<Clique> = enumerate_cliques(g, k_max)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    let mut clique_regions = Vec::with_capacity(cliques.len());
    let mut covered = vec![0i64; n];
    for c in cliques {
        let cnt = counting_number(g, &c, k_max);
        for &v in c.members() {
            covered[v] += cnt;
        }
        clique_regions.push(Region::new(c.into_members(), None, cnt));
    }
    let mut regions = Vec::with_capacity(2 * n + clique_regions.len());
    regions.extend((0..n).map(|i| Region::node_factor_region(i, 1)));
    regions.extend((0..n).map(|i| Region::variable_region(i, -covered[i])));
    regions.extend(clique_regions);
    let kind = match k_max {
        2 => RegionKind::Bethe,
        3 => RegionKind::Triangle,
        k => RegionKind::KmaxClique(k),
    };
    Ok(RegionSet {
        kind,
        n,
        regions,
        levels: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(m: &[usize]) -> Clique {
        Clique::new(m.to_vec())
    }

    fn region_c(rs: &RegionSet, vars: &[usize], node_factor: Option<usize>) -> i64 {
        rs.regions
            .iter()
            .find(|r| r.variables == vars && r.node_factor == node_factor)
            .map(|r| r.counting_number)
            .unwrap()
    }

    #[test]
    fn bethe_regions_on_triangle() {
        let g = ConflictGraph::complete(3);
        let rs = build_kmax_regions(&g, 2).unwrap();
        assert_eq!(rs.kind, RegionKind::Bethe);
        assert_eq!(rs.regions.len(), 9);
        for i in 0..3 {
            assert_eq!(region_c(&rs, &[i], Some(i)), 1);
            assert_eq!(region_c(&rs, &[i], None), -2);
        }
        assert_eq!(region_c(&rs, &[0, 1], None), 1);
        assert!(rs.is_valid(&g));
    }

    #[test]
    fn triangle_regions_on_triangle() {
        let g = ConflictGraph::complete(3);
        let rs = build_kmax_regions(&g, 3).unwrap();
        assert_eq!(region_c(&rs, &[0, 1, 2], None), 1);
        assert_eq!(region_c(&rs, &[0, 2], None), 0);
        assert_eq!(region_c(&rs, &[1], None), -1);
        assert!(rs.is_valid(&g));
    }

    #[test]
    fn path_regions_do_not_depend_on_cap() {
        let g = ConflictGraph::path(3);
        let a = build_kmax_regions(&g, 2).unwrap();
        let b = build_kmax_regions(&g, 3).unwrap();
        assert_eq!(a.regions, b.regions);
    }

    #[test]
    fn closed_form_examples() {
        let k3 = ConflictGraph::complete(3);
        assert_eq!(counting_number(&k3, &c(&[0, 1]), 3), 0);
        let k4 = ConflictGraph::complete(4);
        assert_eq!(counting_number(&k4, &c(&[0]), 4), -1);
        // Maximal cliques of size 2..=k_max always count once.
        let g = ConflictGraph::new(5, [(0, 1), (1, 2), (1, 4), (2, 4), (3, 4), (0, 3)]).unwrap();
        for k_max in 3..=5 {
            assert_eq!(counting_number(&g, &c(&[1, 2, 4]), k_max), 1);
            assert_eq!(counting_number(&g, &c(&[0, 1]), k_max), 1);
        }
        assert_eq!(counting_number(&k4, &c(&[0, 1, 2, 3]), 4), 1);
    }

    #[test]
    fn closed_form_matches_defining_relation_on_k5() {
        let g = ConflictGraph::complete(5);
        for k_max in 1..=5 {
            for (cl, c) in counting_number_by_superset_sum(&g, k_max) {
                assert_eq!(counting_number(&g, &cl, k_max), c, "{cl:?} k_max={k_max}");
            }
        }
    }

    #[test]
    fn rejects_small_cap() {
        assert!(build_kmax_regions(&ConflictGraph::path(3), 1).is_err());
    }

    #[test]
    fn isolated_node_variable_region_is_zero() {
        let g = ConflictGraph::new(3, [(0, 1)]).unwrap();
        let rs = build_kmax_regions(&g, 3).unwrap();
        assert_eq!(region_c(&rs, &[2], None), 0);
        assert!(rs.is_valid(&g));
    }
}
