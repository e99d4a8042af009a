//! Maximum spanning arborescence (Chu-Liu/Edmonds) and the two-phase
//! "score pairs, then prune to a tree" baseline built on it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{TaxoError, Taxonomy, TermId};

// Contraction follows the textbook recursive formulation: pick the best
// incoming arc of every non-root vertex, contract every cycle among those
// picks into a single vertex, reweight arcs entering a cycle by subtracting
// the weight of the cycle arc they would displace, recurse, and expand.
// All cycles found in one round are contracted together.

#[derive(Clone, Copy, Debug)]
struct Arc {
    child: usize,
    parent: usize,
    weight: f64,
    /// Original `(child, parent)`; breaks weight ties (lowest wins).
    key: (usize, usize),
    /// Index of the arc this one was derived from one level up.
    origin: usize,
}

fn better(a: &Arc, b: &Arc) -> bool {
    a.weight > b.weight || (a.weight == b.weight && a.key < b.key)
}

/// Returns indices into `arcs` forming the optimum arborescence. Every
/// non-root vertex must be reachable from `root`.
fn solve(n: usize, root: usize, arcs: &[Arc]) -> Vec<usize> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (i, a) in arcs.iter().enumerate() {
        if a.child == root || a.child == a.parent {
            continue;
        }
        match best[a.child] {
            Some(j) if !better(a, &arcs[j]) => {}
            _ => best[a.child] = Some(i),
        }
    }

    let mut state = vec![0u8; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if state[v] == 2 {
                break;
            }
            if state[v] == 1 {
                let pos = path.iter().position(|&u| u == v).expect("on path");
                cycles.push(path[pos..].to_vec());
                break;
            }
            state[v] = 1;
            path.push(v);
            match best[v] {
                Some(i) => v = arcs[i].parent,
                None => break,
            }
        }
        for u in path {
            state[u] = 2;
        }
    }

    if cycles.is_empty() {
        return best.into_iter().flatten().collect();
    }

    let mut new_id = vec![usize::MAX; n];
    let mut in_cycle = vec![false; n];
    for (ci, cycle) in cycles.iter().enumerate() {
        for &v in cycle {
            new_id[v] = ci;
            in_cycle[v] = true;
        }
    }
    let mut next = cycles.len();
    for id in new_id.iter_mut() {
        if *id == usize::MAX {
            *id = next;
            next += 1;
        }
    }

    let mut contracted = Vec::with_capacity(arcs.len());
    for (i, a) in arcs.iter().enumerate() {
        let (c, p) = (new_id[a.child], new_id[a.parent]);
        if c == p || a.child == root {
            continue;
        }
        let weight = if in_cycle[a.child] {
            let displaced = best[a.child].expect("cycle vertex has a best arc");
            a.weight - arcs[displaced].weight
        } else {
            a.weight
        };
        contracted.push(Arc {
            child: c,
            parent: p,
            weight,
            key: a.key,
            origin: i,
        });
    }

    let sub = solve(next, new_id[root], &contracted);
    let mut chosen: Vec<usize> = sub.iter().map(|&j| contracted[j].origin).collect();
    for cycle in &cycles {
        let members: BTreeSet<usize> = cycle.iter().copied().collect();
        let entry = chosen
            .iter()
            .map(|&i| arcs[i].child)
            .find(|c| members.contains(c))
            .expect("exactly one arc enters each contracted cycle");
        for &v in cycle {
            if v != entry {
                chosen.push(best[v].expect("cycle vertex has a best arc"));
            }
        }
    }
    chosen
}

/// Maximum-total-weight spanning arborescence over nodes `0..n` rooted at
/// `root`. `weights` maps `(child, parent)` to the arc weight; self loops and
/// arcs into the root are ignored. Weight ties are broken towards the
/// lexicographically lowest `(child, parent)` arc.
pub fn max_arborescence(
    n: usize,
    weights: &BTreeMap<(TermId, TermId), f64>,
    root: TermId,
) -> Result<Taxonomy, TaxoError> {
    if root >= n {
        return Err(TaxoError::UnknownNode(root));
    }
    let mut arcs = Vec::with_capacity(weights.len());
    let mut out_adj = vec![Vec::new(); n];
    for (&(child, parent), &weight) in weights {
        if child >= n {
            return Err(TaxoError::UnknownNode(child));
        }
        if parent >= n {
            return Err(TaxoError::UnknownNode(parent));
        }
        if !weight.is_finite() {
            return Err(TaxoError::NonFiniteWeight(child, parent));
        }
        if child == parent || child == root {
            continue;
        }
        out_adj[parent].push(child);
        arcs.push(Arc {
            child,
            parent,
            weight,
            key: (child, parent),
            origin: arcs.len(),
        });
    }

    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &c in &out_adj[v] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    if let Some(v) = seen.iter().position(|&s| !s) {
        return Err(TaxoError::Infeasible(v));
    }

    if n == 1 {
        return Ok(Taxonomy::singleton(root));
    }
    let edges: Vec<(TermId, TermId)> = solve(n, root, &arcs)
        .into_iter()
        .map(|i| (arcs[i].child, arcs[i].parent))
        .collect();
    Taxonomy::from_edges(&edges)
}

/// Sum of `weights` over the tree's edges; missing edges count as 0.
pub fn total_weight(tree: &Taxonomy, weights: &BTreeMap<(TermId, TermId), f64>) -> f64 {
    tree.edges().map(|e| weights.get(&e).copied().unwrap_or(0.0)).sum()
}

/// Weights used for arcs that have no pairwise score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Weight of every arc from the virtual root. Defaults to `min score - 1`.
    pub root_prior: Option<f64>,
    /// Weight of ordered pairs missing from the score map. Defaults to
    /// `min score - 0.5`, which keeps the graph complete while staying above
    /// the root prior.
    pub missing_weight: Option<f64>,
}

/// Two-phase induction: take hypernymy scores for ordered `(hyponym,
/// hypernym)` pairs, add a virtual root connected to every term, find the
/// maximum arborescence and strip the virtual root.
pub fn two_phase_baseline(
    pair_scores: &BTreeMap<(TermId, TermId), f64>,
    vocab: &[TermId],
    config: &BaselineConfig,
) -> Result<Taxonomy, TaxoError> {
    let terms: Vec<TermId> = vocab.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    match terms.len() {
        0 => return Err(TaxoError::Empty),
        1 => return Ok(Taxonomy::singleton(terms[0])),
        _ => {}
    }
    let index: BTreeMap<TermId, usize> = terms.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let min_score = pair_scores
        .iter()
        .filter(|((x, y), _)| x != y && index.contains_key(x) && index.contains_key(y))
        .map(|(_, &s)| s)
        .fold(f64::INFINITY, f64::min);
    let min_score = if min_score.is_finite() { min_score } else { 0.0 };
    let root_prior = config.root_prior.unwrap_or(min_score - 1.0);
    let missing = config.missing_weight.unwrap_or(min_score - 0.5);

    let virtual_root = terms.len();
    let mut weights = BTreeMap::new();
    for (i, &x) in terms.iter().enumerate() {
        weights.insert((i, virtual_root), root_prior);
        for (j, &y) in terms.iter().enumerate() {
            if i != j {
                let w = pair_scores.get(&(x, y)).copied().unwrap_or(missing);
                weights.insert((i, j), w);
            }
        }
    }
    let tree = max_arborescence(terms.len() + 1, &weights, virtual_root)?;
    let top: Vec<TermId> = tree.children_of(virtual_root).into_iter().map(|i| terms[i]).collect();
    if top.len() != 1 {
        return Err(TaxoError::MultipleRoots(top));
    }
    let edges: Vec<(TermId, TermId)> = tree
        .edges()
        .filter(|&(_, p)| p != virtual_root)
        .map(|(c, p)| (terms[c], terms[p]))
        .collect();
    Taxonomy::from_edges(&edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(entries: &[((usize, usize), f64)]) -> BTreeMap<(usize, usize), f64> {
        entries.iter().copied().collect()
    }

    #[test]
    fn single_forced_edge() {
        let weights = w(&[((1, 0), 0.7)]);
        let t = max_arborescence(2, &weights, 0).unwrap();
        assert_eq!(t.edge_set(), BTreeSet::from([(1, 0)]));
        assert_eq!(total_weight(&t, &weights), 0.7);
    }

    #[test]
    fn three_node_example() {
        let weights = w(&[((1, 0), 2.0), ((2, 0), 1.0), ((2, 1), 3.0)]);
        let t = max_arborescence(3, &weights, 0).unwrap();
        assert_eq!(t.edge_set(), BTreeSet::from([(1, 0), (2, 1)]));
        assert_eq!(total_weight(&t, &weights), 5.0);
    }

    #[test]
    fn cycle_gets_broken() {
        // 1 and 2 prefer each other; entering through 1 is cheaper.
        let weights = w(&[((1, 0), 1.0), ((2, 0), 0.5), ((1, 2), 10.0), ((2, 1), 10.0)]);
        let t = max_arborescence(3, &weights, 0).unwrap();
        assert_eq!(total_weight(&t, &weights), 11.0);
        assert_eq!(t.edge_set(), BTreeSet::from([(1, 0), (2, 1)]));
    }

    #[test]
    fn unreachable_node_is_named() {
        let weights = w(&[((1, 0), 1.0), ((3, 2), 1.0), ((2, 3), 1.0)]);
        assert!(matches!(
            max_arborescence(4, &weights, 0),
            Err(TaxoError::Infeasible(2))
        ));
    }

    #[test]
    fn ties_prefer_lowest_arc() {
        let weights = w(&[((1, 0), 1.0), ((2, 0), 1.0), ((2, 1), 1.0), ((1, 2), 1.0)]);
        let t = max_arborescence(3, &weights, 0).unwrap();
        assert_eq!(t.edge_set(), BTreeSet::from([(1, 0), (2, 0)]));
    }

    #[test]
    fn baseline_recovers_chain() {
        // a=10 > b=11 > c=12: c is-a b is-a a
        let scores = w(&[
            ((11, 10), 0.9),
            ((12, 11), 0.9),
            ((12, 10), 0.4),
            ((10, 11), 0.1),
            ((11, 12), 0.1),
            ((10, 12), 0.05),
        ]);
        let t = two_phase_baseline(&scores, &[10, 11, 12], &BaselineConfig::default()).unwrap();
        assert_eq!(t.root(), Some(10));
        assert_eq!(t.edge_set(), BTreeSet::from([(11, 10), (12, 11)]));
    }

    #[test]
    fn baseline_uniform_scores_are_deterministic() {
        let mut scores = BTreeMap::new();
        for x in 0..5 {
            for y in 0..5 {
                if x != y {
                    scores.insert((x, y), 0.5);
                }
            }
        }
        let vocab: Vec<usize> = (0..5).collect();
        let a = two_phase_baseline(&scores, &vocab, &BaselineConfig::default()).unwrap();
        let b = two_phase_baseline(&scores, &vocab, &BaselineConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 4);
    }
}
