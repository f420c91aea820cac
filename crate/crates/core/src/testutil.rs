//! Brute-force oracles for unit tests.

use crate::flow::DemandFn;
use crate::mdp::{ActionMask, DeterministicMdp};

/// Small random instance: `horizon` stages, up to `states` states per stage.
pub fn random_layered(seed: u64, horizon: usize, states: usize, actions: usize) -> DeterministicMdp {
    crate::instances::random_layered(states, actions, horizon, 0.8, seed).unwrap()
}

/// Every source→sink path (as arc lists), optionally restricted to a mask. Paths are
/// enumerated by depth-first search directly on the arc list.
pub fn all_paths(mdp: &DeterministicMdp, mask: Option<&ActionMask>) -> Vec<Vec<usize>> {
    fn go(mdp: &DeterministicMdp, mask: Option<&ActionMask>, node: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == mdp.sink() {
            out.push(path.clone());
            return;
        }
        for (i, arc) in mdp.arcs().iter().enumerate() {
            if arc.from != node || mask.is_some_and(|m| !m.allows(i)) {
                continue;
            }
            path.push(i);
            go(mdp, mask, arc.to, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(mdp, mask, mdp.source(), &mut Vec::new(), &mut out);
    out
}

/// Largest ψ over every node subset containing the source, excluding the sink and
/// having no backward arc.
pub fn max_cut_by_enumeration(mdp: &DeterministicMdp, demand: &DemandFn) -> f64 {
    let inner: Vec<usize> = (0..mdp.num_nodes())
        .filter(|&n| n != mdp.source() && n != mdp.sink())
        .collect();
    assert!(inner.len() <= 20);
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
                (true, false) => value += demand.get(i),
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
