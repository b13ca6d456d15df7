use super::{Clique, ConflictGraph};

/// Depth-first clique extension. `clique` holds the current members, `cand`
/// the nodes adjacent to all of them, ascending. Each extension only uses
/// candidates after the previously added one, so every clique is produced once.
fn extend<F>(g: &ConflictGraph, clique: &mut Vec<usize>, cand: &[usize], depth: usize, visit: &mut F)
where
    F: FnMut(&[usize]),
{
    if depth == 0 {
        return;
    }
    for (idx, &v) in cand.iter().enumerate() {
        clique.push(v);
        visit(clique);
        if depth > 1 {
            let next: Vec<usize> = cand[idx + 1..]
                .iter()
                .copied()
                .filter(|&w| g.has_edge(v, w))
                .collect();
            extend(g, clique, &next, depth - 1, visit);
        }
        clique.pop();
    }
}

/// Counts the size-`depth` cliques inside `cand` without materialising them.
fn count_extensions(g: &ConflictGraph, cand: &[usize], depth: usize) -> u64 {
    match depth {
        0 => 1,
        1 => cand.len() as u64,
        _ => {
            let mut total = 0;
            let mut next = Vec::with_capacity(cand.len());
            for (idx, &v) in cand.iter().enumerate() {
                if cand.len() - idx < depth {
                    break;
                }
                next.clear();
                next.extend(cand[idx + 1..].iter().copied().filter(|&w| g.has_edge(v, w)));
                total += count_extensions(g, &next, depth - 1);
            }
            total
        }
    }
}

/// All cliques of size `1..=k_max`, each once, sorted by size and then
/// lexicographically.
pub fn enumerate_cliques(g: &ConflictGraph, k_max: usize) -> Vec<Clique> {
    let mut out = Vec::new();
    if k_max == 0 {
        return out;
    }
    let mut clique = Vec::with_capacity(k_max);
    for v in 0..g.n() {
        clique.push(v);
        out.push(Clique(clique.clone()));
        let cand: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| w > v).collect();
        extend(g, &mut clique, &cand, k_max - 1, &mut |c| out.push(Clique(c.to_vec())));
        clique.pop();
    }
    out.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Calls `visit` on every clique that contains `node` and has at most `k_max`
/// members. The slice passed to `visit` starts with `node`; the remaining
/// members are ascending.
pub fn for_each_clique_containing<F>(g: &ConflictGraph, node: usize, k_max: usize, mut visit: F)
where
    F: FnMut(&[usize]),
{
    if k_max == 0 {
        return;
    }
    let mut clique = vec![node];
    visit(&clique);
    extend(g, &mut clique, g.neighbors(node), k_max - 1, &mut visit);
}

/// Nodes adjacent to every member of `members`, excluding the members.
pub(crate) fn common_neighbors(g: &ConflictGraph, members: &[usize]) -> Vec<usize> {
    match members.split_first() {
        None => (0..g.n()).collect(),
        Some((&first, rest)) => g
            .neighbors(first)
            .iter()
            .copied()
            .filter(|&w| rest.iter().all(|&m| g.has_edge(m, w)))
            .collect(),
    }
}

/// Number of size-`s` cliques of `g` that strictly contain `clique`.
pub fn count_containing_cliques(g: &ConflictGraph, clique: &Clique, s: usize) -> u64 {
    let k = clique.len();
    if s <= k {
        return 0;
    }
    let cand = common_neighbors(g, clique.members());
    count_extensions(g, &cand, s - k)
}

/// Inclusion-maximal cliques (Bron–Kerbosch with Tomita pivoting), each in
/// canonical form, sorted lexicographically. Isolated nodes yield singletons.
pub fn maximal_cliques(g: &ConflictGraph) -> Vec<Clique> {
    let mut out = Vec::new();
    let mut r = Vec::new();
    let p: Vec<usize> = (0..g.n()).collect();
    bron_kerbosch(g, &mut r, p, Vec::new(), &mut out);
    out.sort_unstable();
    out
}

fn bron_kerbosch(
    g: &ConflictGraph,
    r: &mut Vec<usize>,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    out: &mut Vec<Clique>,
) {
    if p.is_empty() {
        if x.is_empty() && !r.is_empty() {
            out.push(Clique::new(r.clone()));
        }
        return;
    }
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| g.has_edge(u, v)).count())
        .expect("p is non-empty");
    let branch: Vec<usize> = p.iter().copied().filter(|&v| !g.has_edge(pivot, v)).collect();
    for v in branch {
        r.push(v);
        let np = p.iter().copied().filter(|&w| g.has_edge(v, w)).collect();
        let nx = x.iter().copied().filter(|&w| g.has_edge(v, w)).collect();
        bron_kerbosch(g, r, np, nx, out);
        r.pop();
        p.retain(|&w| w != v);
        x.push(v);
    }
}

/// Size of the largest clique (0 for the empty graph).
pub fn max_clique_size(g: &ConflictGraph) -> usize {
    maximal_cliques(g).iter().map(Clique::len).max().unwrap_or(0)
}
