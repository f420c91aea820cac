//! Brute-force oracles shared by the integration tests. Nothing here calls into the
//! solvers under test.
#![allow(dead_code)]

use detpac::{ActionMask, DeterministicMdp, Policy};

/// Every source→sink path, found by depth-first search over the raw arc list.
pub fn all_paths(mdp: &DeterministicMdp, mask: Option<&ActionMask>) -> Vec<Vec<usize>> {
    fn go(
        mdp: &DeterministicMdp,
        mask: Option<&ActionMask>,
        node: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if node == mdp.sink() {
            out.push(path.clone());
            return;
        }
        for (i, arc) in mdp.arcs().iter().enumerate() {
            if arc.from == node && mask.is_none_or(|m| m.allows(i)) {
                path.push(i);
                go(mdp, mask, arc.to, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(mdp, mask, mdp.source(), &mut Vec::new(), &mut out);
    out
}

pub fn path_return(mdp: &DeterministicMdp, path: &[usize]) -> f64 {
    path.iter().map(|&a| mdp.arc(a).mean).sum()
}

/// Optimal return by enumeration.
pub fn best_return(mdp: &DeterministicMdp) -> f64 {
    all_paths(mdp, None)
        .iter()
        .map(|p| path_return(mdp, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Δ̄ for every arc by enumeration: optimal return minus the best path through the arc.
pub fn return_gaps(mdp: &DeterministicMdp) -> Vec<f64> {
    let paths = all_paths(mdp, None);
    let best = best_return(mdp);
    (0..mdp.num_arcs())
        .map(|i| {
            let through = paths
                .iter()
                .filter(|p| p.contains(&i))
                .map(|p| path_return(mdp, p))
                .fold(f64::NEG_INFINITY, f64::max);
            best - through
        })
        .collect()
}

/// Largest ψ over every valid cut, by enumerating all subsets of internal nodes.
pub fn max_cut(mdp: &DeterministicMdp, demand: &[f64]) -> f64 {
    let inner: Vec<usize> = (0..mdp.num_nodes())
        .filter(|&n| n != mdp.source() && n != mdp.sink())
        .collect();
    assert!(inner.len() <= 20, "cut enumeration limited to 20 internal nodes");
    let mut best = f64::NEG_INFINITY;
    for bits in 0u32..(1 << inner.len()) {
        let mut member = vec![false; mdp.num_nodes()];
        member[mdp.source()] = true;
        for (j, &n) in inner.iter().enumerate() {
            member[n] = bits >> j & 1 == 1;
        }
        let mut value = 0.0;
        let mut valid = true;
        for (i, arc) in mdp.arcs().iter().enumerate() {
            match (member[arc.from], member[arc.to]) {
                (true, false) => value += demand[i],
                (false, true) => valid = false,
                _ => {}
            }
        }
        if valid {
            best = best.max(value);
        }
    }
    best
}

/// Policy that follows `path` and takes the first action everywhere else.
pub fn policy_along(mdp: &DeterministicMdp, path: &[usize]) -> Policy {
    let mut table: Vec<Vec<usize>> = (0..mdp.horizon())
        .map(|h| vec![0; mdp.num_states(h)])
        .collect();
    for &a in path {
        let arc = mdp.arc(a);
        table[arc.stage][arc.state] = arc.action;
    }
    Policy::new(mdp, table).unwrap()
}
