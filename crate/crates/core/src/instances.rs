//! Instance generators and lower-bound calculators.
//!
//! State ids are 1-based: `s1` is the initial state and tree states
//! are `s2, s3, ...` in heap order. Action labels are `a1, a2, ...`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{min_flow, DemandFn};
use crate::mdp::{ActionSpec, DeterministicMdp, GapTable, RewardKind, StateSpec};

fn label(a: usize) -> String {
    format!("a{}", a + 1)
}

/// (label, next state, mean) of one action.
type RawAction = (String, Option<String>, f64);

/// Layered builder keyed by state name, so the same named state may appear at several
/// stages.
struct Layers {
    stages: Vec<Vec<(String, Vec<RawAction>)>>,
}

impl Layers {
    fn new(horizon: usize) -> Self {
        Layers {
            stages: vec![Vec::new(); horizon],
        }
    }

    fn add(&mut self, stage: usize, id: &str, actions: Vec<(String, Option<String>, f64)>) {
        self.stages[stage].push((id.to_string(), actions));
    }

    fn build(self, kind: RewardKind) -> Result<DeterministicMdp> {
        let horizon = self.stages.len();
        let ids: Vec<Vec<String>> = self
            .stages
            .iter()
            .map(|st| st.iter().map(|(id, _)| id.clone()).collect())
            .collect();
        let mut out = Vec::with_capacity(horizon);
        for (h, stage) in self.stages.into_iter().enumerate() {
            let mut states = Vec::with_capacity(stage.len());
            for (id, actions) in stage {
                let mut specs = Vec::with_capacity(actions.len());
                for (lbl, next, mean) in actions {
                    let target = match next {
                        Some(n) if h + 1 < horizon => ids[h + 1].iter().position(|x| *x == n).ok_or_else(|| {
                            Error::InvalidMdp(format!("state '{n}' missing at stage {}", h + 2))
                        })?,
                        _ => 0,
                    };
                    specs.push(ActionSpec::new(lbl, target, mean));
                }
                states.push(StateSpec::new(id, specs));
            }
            out.push(states);
        }
        DeterministicMdp::new(out, kind)
    }
}

fn tree_id(i: usize) -> String {
    format!("s{}", i + 2)
}

fn tree_depth(i: usize) -> usize {
    (usize::BITS - 1 - (i + 1).leading_zeros()) as usize
}

/// Worst-case instance: a waiting state `s1` in front of a full binary tree of `S − 1`
/// states whose leaves carry `A` self-loop actions until the horizon.
///
/// `s1` may stay (`a2`) up to stage H̄ − 1 and enters the tree root (`a1`) at any stage
/// up to H̄ = ⌊H/3⌋. All rewards are zero; perturb them with
/// [`DeterministicMdp::with_means`].
pub fn hard_instance(s: usize, a: usize, h: usize) -> Result<DeterministicMdp> {
    if s < 2 || !s.is_power_of_two() {
        return Err(Error::InvalidParameters(format!("S = {s} must be a power of two ≥ 2")));
    }
    let d = s.trailing_zeros() as usize;
    if a < 2 {
        return Err(Error::InvalidParameters(format!("A = {a} must be ≥ 2")));
    }
    if h < 3 * d {
        return Err(Error::InvalidParameters(format!("H = {h} must be ≥ 3·log2(S) = {}", 3 * d)));
    }
    let h_bar = h / 3;
    let n_tree = s - 1;
    let mut layers = Layers::new(h);
    // 1-based stage t is index t − 1 below
    for t in 0..h {
        if t < h_bar {
            let mut acts = vec![(label(0), Some(tree_id(0)), 0.0)];
            if t + 1 < h_bar {
                acts.push((label(1), Some("s1".to_string()), 0.0));
            }
            layers.add(t, "s1", acts);
        }
        for i in 0..n_tree {
            let depth = tree_depth(i);
            let first = 1 + depth;
            if t < first {
                continue;
            }
            if depth + 1 < d {
                if t > h_bar + depth {
                    continue;
                }
                let acts = vec![
                    (label(0), Some(tree_id(2 * i + 1)), 0.0),
                    (label(1), Some(tree_id(2 * i + 2)), 0.0),
                ];
                layers.add(t, &tree_id(i), acts);
            } else {
                let acts = (0..a).map(|k| (label(k), Some(tree_id(i)), 0.0)).collect();
                layers.add(t, &tree_id(i), acts);
            }
        }
    }
    layers.build(RewardKind::Bernoulli)
}

fn check_tree_params(s: usize, a: usize, h: usize) -> Result<()> {
    if s < 4 {
        return Err(Error::InvalidParameters(format!("S = {s} must be ≥ 4")));
    }
    if a < 2 {
        return Err(Error::InvalidParameters(format!("A = {a} must be ≥ 2")));
    }
    let min_h = (usize::BITS - (s - 1).leading_zeros()) as usize + 1;
    if h < min_h {
        return Err(Error::InvalidParameters(format!("H = {h} must be ≥ ⌈log2 S⌉ + 1 = {min_h}")));
    }
    Ok(())
}

/// Heap-ordered tree of `n` nodes: actions of node `i` at its own stage.
fn tree_children(i: usize, n: usize) -> Vec<usize> {
    [2 * i + 1, 2 * i + 2].into_iter().filter(|&c| c < n).collect()
}

/// Instance where the optimal policy waits in `s1` and collects Δ at the last stage,
/// while `a1` at stage 1 leads into a zero-reward binary tree of `S − 1` states.
pub fn visits_vs_gap(s: usize, a: usize, h: usize, delta: f64) -> Result<DeterministicMdp> {
    check_tree_params(s, a, h)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameters(format!("Δ = {delta} must lie in (0, 1]")));
    }
    let n = s - 1;
    let mut layers = Layers::new(h);
    for t in 0..h {
        let stay = (label(1), Some("s1".to_string()), if t + 1 == h { delta } else { 0.0 });
        if t == 0 {
            layers.add(t, "s1", vec![(label(0), Some(tree_id(0)), 0.0), stay]);
        } else {
            layers.add(t, "s1", vec![stay]);
        }
        for i in 0..n {
            let first = 1 + tree_depth(i);
            let children = tree_children(i, n);
            if t == first && !children.is_empty() {
                let acts = children
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (label(k), Some(tree_id(c)), 0.0))
                    .collect();
                layers.add(t, &tree_id(i), acts);
            } else if t >= first && children.is_empty() {
                let acts = (0..a).map(|k| (label(k), Some(tree_id(i)), 0.0)).collect();
                layers.add(t, &tree_id(i), acts);
            }
        }
    }
    layers.build(RewardKind::Bernoulli)
}

/// Instance where every path of length H − 1 is optimal: a binary tree of `S − 1` states
/// rooted at `s1`, all of whose stage-(H − 1) actions lead to a final state `sS` with two
/// actions, only the first of which pays Δ.
pub fn regret_vs_bpi(s: usize, a: usize, h: usize, delta: f64, kind: RewardKind) -> Result<DeterministicMdp> {
    check_tree_params(s, a, h)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameters(format!("Δ = {delta} must lie in (0, 1]")));
    }
    let n = s - 1;
    let id = |i: usize| format!("s{}", i + 1);
    let funnel = format!("s{s}");
    let mut layers = Layers::new(h);
    for t in 0..h - 1 {
        for i in 0..n {
            let first = tree_depth(i);
            let children = tree_children(i, n);
            let to_funnel = t + 2 == h;
            if t == first && !children.is_empty() {
                if to_funnel {
                    return Err(Error::InvalidParameters(format!("H = {h} too small for the tree")));
                }
                let acts = children
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (label(k), Some(id(c)), 0.0))
                    .collect();
                layers.add(t, &id(i), acts);
            } else if t >= first && children.is_empty() {
                let next = if to_funnel { funnel.clone() } else { id(i) };
                let acts = (0..a).map(|k| (label(k), Some(next.clone()), 0.0)).collect();
                layers.add(t, &id(i), acts);
            }
        }
    }
    layers.add(
        h - 1,
        &funnel,
        vec![(label(0), None, delta), (label(1), None, 0.0)],
    );
    layers.build(kind)
}

/// Instance showing why eliminated arcs must stay traversable when computing covers.
///
/// `s1` has `b` (to `P`) and `m` actions `c1..cm` (to `B`); `P` moves to `A` while `B`
/// either moves to `A` through the arc `abar` or to `G`; `A` has `m` final actions and
/// `G` one. Returns the instance and the index of `abar` when present.
pub fn cover_elimination(m: usize, with_bar: bool) -> Result<(DeterministicMdp, Option<usize>)> {
    if m < 1 {
        return Err(Error::InvalidParameters("m must be ≥ 1".into()));
    }
    let mut s1 = vec![ActionSpec::new("b", 0, 0.0)];
    s1.extend((0..m).map(|i| ActionSpec::new(format!("c{}", i + 1), 1, 0.0)));
    let mut b = Vec::new();
    if with_bar {
        b.push(ActionSpec::new("abar", 0, 0.0));
    }
    b.push(ActionSpec::new("g", 1, 0.0));
    let stages = vec![
        vec![StateSpec::new("s1", s1)],
        vec![
            StateSpec::new("P", vec![ActionSpec::new("p", 0, 0.0)]),
            StateSpec::new("B", b),
        ],
        vec![
            StateSpec::new("A", (0..m).map(|i| ActionSpec::new(format!("x{}", i + 1), 0, 0.0)).collect()),
            StateSpec::new("G", vec![ActionSpec::new("y", 0, 0.0)]),
        ],
    ];
    let mdp = DeterministicMdp::new(stages, RewardKind::Bernoulli)?;
    let bar = if with_bar { mdp.find_arc("2/B/abar") } else { None };
    Ok((mdp, bar))
}

/// Single-stage instance with one action per mean.
pub fn bandit(means: &[f64], kind: RewardKind) -> Result<DeterministicMdp> {
    if means.is_empty() {
        return Err(Error::InvalidParameters("a bandit needs at least one arm".into()));
    }
    let actions = means
        .iter()
        .enumerate()
        .map(|(i, &m)| ActionSpec::new(label(i), 0, m))
        .collect();
    DeterministicMdp::new(vec![vec![StateSpec::new("s1", actions)]], kind)
}

/// One state per stage with the given action means, repeated for `horizon` stages.
pub fn chain(horizon: usize, means: &[f64], kind: RewardKind) -> Result<DeterministicMdp> {
    if horizon == 0 || means.is_empty() {
        return Err(Error::InvalidParameters("chain needs H ≥ 1 and at least one action".into()));
    }
    let stages = (0..horizon)
        .map(|_| {
            vec![StateSpec::new(
                "s1",
                means.iter().enumerate().map(|(i, &m)| ActionSpec::new(label(i), 0, m)).collect(),
            )]
        })
        .collect();
    DeterministicMdp::new(stages, kind)
}

/// Random layered instance with at most `states` states per stage and `actions` actions
/// per state. Each mean is uniform on [0, 1] with probability `density`, zero otherwise.
pub fn random_layered(
    states: usize,
    actions: usize,
    horizon: usize,
    density: f64,
    seed: u64,
) -> Result<DeterministicMdp> {
    if states == 0 || actions == 0 || horizon == 0 {
        return Err(Error::InvalidParameters("sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameters(format!("density {density} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::with_capacity(horizon);
    let mut width = 1;
    for h in 0..horizon {
        let next_width = if h + 1 == horizon { 1 } else { states.min(width * actions) };
        // every next-stage state gets at least one incoming arc
        let mut targets: Vec<usize> = (0..width * actions).map(|i| i % next_width).collect();
        targets.shuffle(&mut rng);
        let mut stage = Vec::with_capacity(width);
        for s in 0..width {
            let acts = (0..actions)
                .map(|a| {
                    let mean = if rng.random_bool(density) { rng.random::<f64>() } else { 0.0 };
                    ActionSpec::new(label(a), targets[s * actions + a], mean)
                })
                .collect();
            stage.push(StateSpec::new(format!("s{}", s + 1), acts));
        }
        stages.push(stage);
        width = next_width;
    }
    DeterministicMdp::new(stages, RewardKind::Bernoulli)
}

/// Random tree-based instance: every state has between 1 and `branching` actions, each
/// leading to a fresh state.
pub fn random_tree(branching: usize, horizon: usize, seed: u64) -> Result<DeterministicMdp> {
    if branching == 0 || horizon == 0 {
        return Err(Error::InvalidParameters("sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::with_capacity(horizon);
    let mut width = 1;
    for h in 0..horizon {
        let mut next = 0;
        let mut stage = Vec::with_capacity(width);
        for s in 0..width {
            let k = rng.random_range(1..=branching);
            let acts = (0..k)
                .map(|a| {
                    let target = if h + 1 == horizon { 0 } else { next + a };
                    ActionSpec::new(label(a), target, rng.random::<f64>())
                })
                .collect();
            next += k;
            stage.push(StateSpec::new(format!("s{}", s + 1), acts));
        }
        stages.push(stage);
        width = next;
    }
    DeterministicMdp::new(stages, RewardKind::Bernoulli)
}

/// Instance-dependent lower bound on the expected stopping time of any (ε, δ)-PAC
/// algorithm, together with the flow-bounds sandwich.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub eps: f64,
    pub delta: f64,
    pub sigma2: f64,
    /// Per-arc lower bounds on the expected number of visits.
    pub demand: Vec<f64>,
    pub phi_star: f64,
    /// Largest per-stage sum of the demand.
    pub stage_max: f64,
    /// Sum of the demand over all arcs.
    pub total: f64,
    /// Tree-specific bound, for tree-based instances.
    pub tree_bound: Option<f64>,
}

impl LowerBoundReport {
    pub fn sandwich_holds(&self) -> bool {
        let tol = 1e-9 * self.total.max(1.0);
        self.stage_max <= self.phi_star + tol && self.phi_star <= self.total + tol
    }
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameters(format!("ε = {eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameters(format!("δ = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// log(1/4δ), clamped at zero: for δ ≥ 1/4 the bound is vacuous.
fn lb_log(delta: f64) -> f64 {
    (1.0 / (4.0 * delta)).ln().max(0.0)
}

fn local_lower_bounds(mdp: &DeterministicMdp, gaps: &GapTable, eps: f64, delta: f64, sigma2: f64) -> Vec<f64> {
    let stage_min: Vec<f64> = (0..mdp.horizon()).map(|h| gaps.stage_min_return_gap(h, eps)).collect();
    let l = lb_log(delta);
    mdp.arcs()
        .iter()
        .enumerate()
        .map(|(i, arc)| {
            let m = gaps.return_gap(i).max(stage_min[arc.stage]).max(eps);
            sigma2 * l / (4.0 * m * m)
        })
        .collect()
}

pub fn theorem1_lower_bound(mdp: &DeterministicMdp, eps: f64, delta: f64, sigma2: f64) -> Result<LowerBoundReport> {
    check_eps_delta(eps, delta)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameters(format!("σ² = {sigma2} must be positive")));
    }
    let gaps = mdp.compute_gaps();
    let demand = DemandFn::new(mdp, local_lower_bounds(mdp, &gaps, eps, delta, sigma2))?;
    let (flow, _) = min_flow(mdp, &demand);
    let tree_bound = if mdp.is_tree_based() {
        Some(tree_lower_bound(mdp, eps, delta)? * sigma2)
    } else {
        None
    };
    Ok(LowerBoundReport {
        eps,
        delta,
        sigma2,
        phi_star: flow.value(),
        stage_max: demand.max_stage_sum(mdp),
        total: demand.total(),
        demand: demand.values().to_vec(),
        tree_bound,
    })
}

/// Lower bound for tree-based instances: every stage-h demand weighted by H − h + 1.
pub fn tree_lower_bound(mdp: &DeterministicMdp, eps: f64, delta: f64) -> Result<f64> {
    check_eps_delta(eps, delta)?;
    if !mdp.is_tree_based() {
        return Err(Error::NotTreeBased);
    }
    let gaps = mdp.compute_gaps();
    let c = local_lower_bounds(mdp, &gaps, eps, delta, 1.0);
    let horizon = mdp.horizon();
    Ok((0..horizon)
        .map(|h| (horizon - h) as f64 * mdp.stage_arcs(h).map(|a| c[a]).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Per-arc upper bound κ̄ on the period in which an arc is eliminated (or the run
/// stops), on the good event.
pub fn kappa_bound(mdp: &DeterministicMdp, eps: f64, delta: f64) -> Result<Vec<f64>> {
    check_eps_delta(eps, delta)?;
    let gaps = mdp.compute_gaps();
    Ok((0..mdp.num_arcs())
        .map(|i| kappa_formula(mdp.horizon(), mdp.num_arcs(), gaps.return_gap(i), gaps.min_return_gap(), eps, delta))
        .collect())
}

/// κ̄ = 8H²/m² (log(eN²/δ) + L) + 1 with m = max(Δ̄, Δ̄_min, ε) and
/// L = log 2 + 4 log(4H/m) + log log(eN²/δ).
pub fn kappa_formula(h: usize, n: usize, gap: f64, min_gap: f64, eps: f64, delta: f64) -> f64 {
    let h = h as f64;
    let m = gap.max(min_gap).max(eps);
    let base = (std::f64::consts::E * (n as f64).powi(2) / delta).ln();
    let l = 2f64.ln() + 4.0 * (4.0 * h / m).ln() + base.ln();
    8.0 * h * h / (m * m) * (base + l) + 1.0
}
