//! Minimum flows with lower-bound demands and unbounded capacities on the layered DAG
//! of an MDP, their certifying maximum cuts, and policy-cover extraction.
//!
//! The solver starts from a feasible flow and repeatedly cancels shortest decreasing
//! paths (BFS, Edmonds–Karp style) in the residual graph. An arc can be traversed
//! forward with residual η − c̲ (lowering its flow) or backward with unbounded residual
//! (raising it). When the sink is unreachable, the reachable set is a cut without
//! backward arcs whose value equals the flow value.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mdp::{DeterministicMdp, Policy};

/// Integrality tolerance used by [`extract_policy_cover`].
const INT_TOL: f64 = 1e-9;

/// Per-arc nonnegative lower bounds c̲.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandFn(Vec<f64>);

impl DemandFn {
    pub fn new(mdp: &DeterministicMdp, values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.num_arcs() {
            return Err(Error::InvalidDemand(format!(
                "expected {} values, got {}",
                mdp.num_arcs(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDemand(format!(
                "demand {v} on arc {} is not a nonnegative number",
                mdp.arc_key(i)
            )));
        }
        Ok(DemandFn(values))
    }

    pub fn constant(mdp: &DeterministicMdp, c: f64) -> Self {
        DemandFn(vec![c; mdp.num_arcs()])
    }

    /// 0/1 demand from an arc indicator.
    pub fn indicator(flags: &[bool]) -> Self {
        DemandFn(flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect())
    }

    pub fn get(&self, arc: usize) -> f64 {
        self.0[arc]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Largest per-stage demand sum: the flow-bounds lower sandwich value.
    pub fn max_stage_sum(&self, mdp: &DeterministicMdp) -> f64 {
        (0..mdp.horizon())
            .map(|h| mdp.stage_arcs(h).map(|a| self.0[a]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|v| v.fract() == 0.0)
    }
}

/// Per-arc nonnegative flow with conservation at every internal node.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    values: Vec<f64>,
    value: f64,
}

impl Flow {
    /// Validates nonnegativity and conservation (to 1e-9).
    pub fn new(mdp: &DeterministicMdp, values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.num_arcs() {
            return Err(Error::InvalidDemand(format!(
                "expected {} flow values, got {}",
                mdp.num_arcs(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDemand("flow values must be nonnegative".into()));
        }
        let flow = Flow::from_raw(mdp, values);
        if let Some(node) = flow.conservation_violation(mdp, 1e-9) {
            return Err(Error::InvalidDemand(format!(
                "flow is not conserved at {}",
                mdp.node_key(node)
            )));
        }
        Ok(flow)
    }

    fn from_raw(mdp: &DeterministicMdp, values: Vec<f64>) -> Self {
        let value = mdp.stage_arcs(0).map(|a| values[a]).sum();
        Flow { values, value }
    }

    /// φ(η): total flow leaving the initial state.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn get(&self, arc: usize) -> f64 {
        self.values[arc]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_feasible(&self, demand: &DemandFn) -> bool {
        self.values.iter().zip(demand.values()).all(|(f, d)| f >= d)
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| (v - v.round()).abs() <= INT_TOL)
    }

    /// First internal node whose inflow and outflow differ by more than `tol`.
    pub fn conservation_violation(&self, mdp: &DeterministicMdp, tol: f64) -> Option<usize> {
        let mut balance = vec![0.0; mdp.num_nodes()];
        for (i, arc) in mdp.arcs().iter().enumerate() {
            balance[arc.from] -= self.values[i];
            balance[arc.to] += self.values[i];
        }
        (1..mdp.sink()).find(|&n| balance[n].abs() > tol)
    }
}

/// Node subset containing the initial state and excluding the sink.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    members: Vec<bool>,
    forward: Vec<usize>,
    backward: Vec<usize>,
}

impl Cut {
    pub fn new(mdp: &DeterministicMdp, members: Vec<bool>) -> Result<Self> {
        if members.len() != mdp.num_nodes() {
            return Err(Error::InvalidCut(format!(
                "expected {} node flags, got {}",
                mdp.num_nodes(),
                members.len()
            )));
        }
        if !members[mdp.source()] {
            return Err(Error::InvalidCut("cut must contain the initial state".into()));
        }
        if members[mdp.sink()] {
            return Err(Error::InvalidCut("cut must not contain the sink".into()));
        }
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        for (i, arc) in mdp.arcs().iter().enumerate() {
            match (members[arc.from], members[arc.to]) {
                (true, false) => forward.push(i),
                (false, true) => backward.push(i),
                _ => {}
            }
        }
        Ok(Cut {
            members,
            forward,
            backward,
        })
    }

    /// Cut made of every node at stages `0..=stage`.
    pub fn stage_prefix(mdp: &DeterministicMdp, stage: usize) -> Self {
        let end = mdp.stage_nodes(stage).end;
        let members = (0..mdp.num_nodes()).map(|n| n < end).collect();
        Cut::new(mdp, members).expect("stage prefix is a valid cut")
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members[node]
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    /// Arcs leaving the cut, E(C).
    pub fn forward_arcs(&self) -> &[usize] {
        &self.forward
    }

    /// Arcs entering the cut.
    pub fn backward_arcs(&self) -> &[usize] {
        &self.backward
    }

    pub fn is_valid(&self) -> bool {
        self.backward.is_empty()
    }
}

/// ψ(C, c̲): demand carried by the forward arcs of a cut without backward arcs.
pub fn cut_value(cut: &Cut, demand: &DemandFn) -> Result<f64> {
    if !cut.is_valid() {
        return Err(Error::InvalidCut(format!(
            "cut has {} backward arcs",
            cut.backward.len()
        )));
    }
    Ok(cut.forward.iter().map(|&a| demand.get(a)).sum())
}

/// Finite set of policies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyCover(Vec<Policy>);

impl PolicyCover {
    pub fn policies(&self) -> &[Policy] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_policies(self) -> Vec<Policy> {
        self.0
    }

    /// True if every arc with positive demand lies on the trajectory of some member.
    pub fn covers(&self, mdp: &DeterministicMdp, demand: &DemandFn) -> bool {
        let mut hit = vec![false; mdp.num_arcs()];
        for p in &self.0 {
            for &a in mdp.rollout(p).arcs() {
                hit[a] = true;
            }
        }
        (0..mdp.num_arcs()).all(|a| demand.get(a) == 0.0 || hit[a])
    }
}

/// Routes each arc's unmet demand along a fixed source→arc→sink path.
pub fn initial_feasible_flow(mdp: &DeterministicMdp, demand: &DemandFn) -> Flow {
    let mut in_arc = vec![usize::MAX; mdp.num_nodes()];
    for (i, arc) in mdp.arcs().iter().enumerate() {
        if in_arc[arc.to] == usize::MAX {
            in_arc[arc.to] = i;
        }
    }
    let mut flow = vec![0.0; mdp.num_arcs()];
    for (i, arc) in mdp.arcs().iter().enumerate() {
        // demand already met by earlier routes needs no extra path
        let c = demand.get(i) - flow[i];
        if c <= 0.0 {
            continue;
        }
        flow[i] += c;
        let mut node = arc.from;
        while node != mdp.source() {
            let a = in_arc[node];
            flow[a] += c;
            node = mdp.arc(a).from;
        }
        let mut node = arc.to;
        while node != mdp.sink() {
            let a = mdp.node_arcs(node).start;
            flow[a] += c;
            node = mdp.arc(a).to;
        }
    }
    Flow::from_raw(mdp, flow)
}

/// Minimum feasible flow and a cut certifying its optimality.
pub fn min_flow(mdp: &DeterministicMdp, demand: &DemandFn) -> (Flow, Cut) {
    let init = initial_feasible_flow(mdp, demand);
    // excess over the demand; exact decrements keep integer flows integral
    let mut excess: Vec<f64> = init
        .values
        .iter()
        .zip(demand.values())
        .map(|(f, d)| f - d)
        .collect();

    let n = mdp.num_nodes();
    let mut in_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, arc) in mdp.arcs().iter().enumerate() {
        in_arcs[arc.to].push(i);
    }

    // (arc, traversed forward?) used to reach each node
    let mut parent: Vec<Option<(usize, bool)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let (source, sink) = (mdp.source(), mdp.sink());

    loop {
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        seen[source] = true;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for a in mdp.node_arcs(u) {
                let v = mdp.arc(a).to;
                if !seen[v] && excess[a] > 0.0 {
                    seen[v] = true;
                    parent[v] = Some((a, true));
                    queue.push_back(v);
                }
            }
            for &a in &in_arcs[u] {
                let v = mdp.arc(a).from;
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((a, false));
                    queue.push_back(v);
                }
            }
        }
        if !seen[sink] {
            break;
        }

        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let (a, fwd) = parent[v].expect("path");
            if fwd {
                bottleneck = bottleneck.min(excess[a]);
                v = mdp.arc(a).from;
            } else {
                v = mdp.arc(a).to;
            }
        }
        let mut v = sink;
        while v != source {
            let (a, fwd) = parent[v].expect("path");
            if fwd {
                excess[a] = if excess[a] == bottleneck { 0.0 } else { excess[a] - bottleneck };
                v = mdp.arc(a).from;
            } else {
                excess[a] += bottleneck;
                v = mdp.arc(a).to;
            }
        }
    }

    let values = excess
        .iter()
        .zip(demand.values())
        .map(|(x, d)| x + d)
        .collect();
    let flow = Flow::from_raw(mdp, values);
    let cut = Cut::new(mdp, seen).expect("residual reachable set is a cut");
    (flow, cut)
}

/// φ*(c̲).
pub fn flow_value_of(mdp: &DeterministicMdp, demand: &DemandFn) -> f64 {
    min_flow(mdp, demand).0.value()
}

/// Decomposes an integer flow into φ(η) policies by repeated argmax-flow walks.
///
/// Off-trajectory states of each extracted policy play their lowest-index action.
pub fn extract_policy_cover(mdp: &DeterministicMdp, flow: &Flow) -> Result<PolicyCover> {
    let mut remaining = Vec::with_capacity(mdp.num_arcs());
    for (i, &v) in flow.values().iter().enumerate() {
        let r = v.round();
        if (v - r).abs() > INT_TOL || r < 0.0 {
            return Err(Error::NonIntegralFlow(mdp.arc_key(i)));
        }
        remaining.push(r as u64);
    }
    let total: u64 = mdp.stage_arcs(0).map(|a| remaining[a]).sum();
    let mut policies = Vec::with_capacity(total as usize);
    for _ in 0..total {
        let mut trajectory = Vec::with_capacity(mdp.horizon());
        let mut node = mdp.source();
        while node != mdp.sink() {
            let mut best = mdp.node_arcs(node).start;
            for a in mdp.node_arcs(node) {
                if remaining[a] > remaining[best] {
                    best = a;
                }
            }
            if remaining[best] == 0 {
                return Err(Error::InvalidDemand(format!(
                    "flow is not conserved at {}",
                    mdp.node_key(node)
                )));
            }
            remaining[best] -= 1;
            trajectory.push(best);
            node = mdp.arc(best).to;
        }
        policies.push(mdp.policy_through(&trajectory));
    }
    Ok(PolicyCover(policies))
}
