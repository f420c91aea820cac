//! Deterministic, time-inhomogeneous, finite-horizon MDPs stored as a layered DAG.
//!
//! Stages are 0-based in the API (`0..horizon`); arc keys and instance files use
//! 1-based stages. Every (stage, state) pair is a node of the DAG; all actions at the
//! final stage lead to a single sink node. Arcs are stored contiguously per node, in
//! stage order, so a reverse scan over nodes is a valid backward induction order and a
//! forward scan over arcs is a valid forward order.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Range};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance under which a return gap is treated as zero.
pub const GAP_TOL: f64 = 1e-9;

/// Reward distribution family shared by every arc of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Bernoulli,
    Gaussian(f64),
}

impl RewardKind {
    /// Sub-gaussian variance proxy: 1/4 for bounded rewards, σ² for Gaussian ones.
    pub fn variance_proxy(&self) -> f64 {
        match *self {
            RewardKind::Bernoulli => 0.25,
            RewardKind::Gaussian(sigma2) => sigma2,
        }
    }
}

/// Real number extended with an explicit `-∞` sentinel.
///
/// Any sum involving the sentinel is the sentinel; the sentinel compares below every
/// finite value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::NegInf => None,
            ExtReal::Finite(x) => Some(x),
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::NegInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + rhs),
            ExtReal::NegInf => ExtReal::NegInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

/// Construction input for one action of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    pub label: String,
    /// Index of the target state in the next stage; ignored at the final stage.
    pub next: usize,
    pub mean: f64,
}

impl ActionSpec {
    pub fn new(label: impl Into<String>, next: usize, mean: f64) -> Self {
        ActionSpec {
            label: label.into(),
            next,
            mean,
        }
    }
}

/// Construction input for one state of one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpec {
    pub id: String,
    pub actions: Vec<ActionSpec>,
}

impl StateSpec {
    pub fn new(id: impl Into<String>, actions: Vec<ActionSpec>) -> Self {
        StateSpec {
            id: id.into(),
            actions,
        }
    }
}

/// One (state, action, stage) triplet of the MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcInfo {
    pub stage: usize,
    pub state: usize,
    pub action: usize,
    pub from: usize,
    pub to: usize,
    /// State index in the next stage (0 for the sink).
    pub next_state: usize,
    pub mean: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicMdp {
    horizon: usize,
    state_ids: Vec<Vec<String>>,
    /// Node index of `(h, 0)`; entry `horizon` is the sink, entry `horizon + 1` the node count.
    node_offset: Vec<usize>,
    node_arcs: Vec<Range<usize>>,
    arcs: Vec<ArcInfo>,
    reward_kind: RewardKind,
}

impl DeterministicMdp {
    pub fn new(stages: Vec<Vec<StateSpec>>, reward_kind: RewardKind) -> Result<Self> {
        let horizon = stages.len();
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be positive".into()));
        }
        if stages[0].len() != 1 {
            return Err(Error::InvalidMdp(format!(
                "stage 1 must contain exactly one state, found {}",
                stages[0].len()
            )));
        }
        if let RewardKind::Gaussian(sigma2) = reward_kind {
            if !(sigma2.is_finite() && sigma2 > 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "gaussian variance must be positive, got {sigma2}"
                )));
            }
        }

        let mut node_offset = Vec::with_capacity(horizon + 2);
        let mut total = 0;
        for stage in &stages {
            node_offset.push(total);
            total += stage.len();
        }
        node_offset.push(total);
        node_offset.push(total + 1);

        let mut state_ids = Vec::with_capacity(horizon);
        let mut node_arcs = Vec::with_capacity(total);
        let mut arcs = Vec::new();
        let mut incoming = vec![0usize; total + 1];

        for (h, stage) in stages.iter().enumerate() {
            let mut ids: Vec<String> = Vec::with_capacity(stage.len());
            for (s, state) in stage.iter().enumerate() {
                if ids.contains(&state.id) {
                    return Err(Error::InvalidMdp(format!(
                        "duplicate state id '{}' at stage {}",
                        state.id,
                        h + 1
                    )));
                }
                ids.push(state.id.clone());
                if state.actions.is_empty() {
                    return Err(Error::InvalidMdp(format!(
                        "state '{}' at stage {} has no actions",
                        state.id,
                        h + 1
                    )));
                }
                let from = node_offset[h] + s;
                let start = arcs.len();
                for (a, action) in state.actions.iter().enumerate() {
                    if state.actions[..a].iter().any(|b| b.label == action.label) {
                        return Err(Error::InvalidMdp(format!(
                            "duplicate action label '{}' in state '{}' at stage {}",
                            action.label,
                            state.id,
                            h + 1
                        )));
                    }
                    if !action.mean.is_finite() || action.mean < 0.0 || action.mean > 1.0 {
                        return Err(Error::InvalidMdp(format!(
                            "mean reward {} of action '{}' in state '{}' at stage {} is outside [0, 1]",
                            action.mean,
                            action.label,
                            state.id,
                            h + 1
                        )));
                    }
                    let (to, next_state) = if h + 1 == horizon {
                        (total, 0)
                    } else {
                        if action.next >= stages[h + 1].len() {
                            return Err(Error::InvalidMdp(format!(
                                "action '{}' in state '{}' at stage {} targets state {} but stage {} has {} states",
                                action.label,
                                state.id,
                                h + 1,
                                action.next,
                                h + 2,
                                stages[h + 1].len()
                            )));
                        }
                        (node_offset[h + 1] + action.next, action.next)
                    };
                    incoming[to] += 1;
                    arcs.push(ArcInfo {
                        stage: h,
                        state: s,
                        action: a,
                        from,
                        to,
                        next_state,
                        mean: action.mean,
                        label: action.label.clone(),
                    });
                }
                node_arcs.push(start..arcs.len());
            }
            state_ids.push(ids);
        }

        for h in 1..horizon {
            for s in 0..stages[h].len() {
                if incoming[node_offset[h] + s] == 0 {
                    return Err(Error::InvalidMdp(format!(
                        "state '{}' at stage {} is unreachable",
                        stages[h][s].id,
                        h + 1
                    )));
                }
            }
        }

        Ok(DeterministicMdp {
            horizon,
            state_ids,
            node_offset,
            node_arcs,
            arcs,
            reward_kind,
        })
    }

    /// Same structure with new mean rewards (one per arc, in arc order).
    pub fn with_means(&self, means: &[f64]) -> Result<Self> {
        if means.len() != self.arcs.len() {
            return Err(Error::InvalidMdp(format!(
                "expected {} means, got {}",
                self.arcs.len(),
                means.len()
            )));
        }
        let mut out = self.clone();
        for (arc, &m) in out.arcs.iter_mut().zip(means) {
            if !m.is_finite() || !(0.0..=1.0).contains(&m) {
                return Err(Error::InvalidMdp(format!("mean reward {m} is outside [0, 1]")));
            }
            arc.mean = m;
        }
        Ok(out)
    }

    pub fn with_reward_kind(&self, kind: RewardKind) -> Result<Self> {
        if let RewardKind::Gaussian(sigma2) = kind {
            if !(sigma2.is_finite() && sigma2 > 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "gaussian variance must be positive, got {sigma2}"
                )));
            }
        }
        let mut out = self.clone();
        out.reward_kind = kind;
        Ok(out)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    /// Number of arcs, N in the usual notation.
    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Number of nodes including the sink.
    pub fn num_nodes(&self) -> usize {
        self.node_offset[self.horizon + 1]
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.node_offset[self.horizon]
    }

    pub fn num_states(&self, stage: usize) -> usize {
        self.state_ids[stage].len()
    }

    pub fn state_id(&self, stage: usize, state: usize) -> &str {
        &self.state_ids[stage][state]
    }

    pub fn find_state(&self, stage: usize, id: &str) -> Option<usize> {
        self.state_ids.get(stage)?.iter().position(|x| x == id)
    }

    pub fn node(&self, stage: usize, state: usize) -> usize {
        self.node_offset[stage] + state
    }

    /// Inverse of [`node`](Self::node); the sink maps to `(horizon, 0)`.
    pub fn node_position(&self, node: usize) -> (usize, usize) {
        let stage = self.node_offset.partition_point(|&o| o <= node) - 1;
        (stage, node - self.node_offset[stage])
    }

    pub fn stage_nodes(&self, stage: usize) -> Range<usize> {
        self.node_offset[stage]..self.node_offset[stage + 1]
    }

    pub fn node_arcs(&self, node: usize) -> Range<usize> {
        self.node_arcs[node].clone()
    }

    pub fn state_arcs(&self, stage: usize, state: usize) -> Range<usize> {
        self.node_arcs(self.node(stage, state))
    }

    pub fn num_actions(&self, stage: usize, state: usize) -> usize {
        self.state_arcs(stage, state).len()
    }

    pub fn stage_arcs(&self, stage: usize) -> Range<usize> {
        let first = self.node_offset[stage];
        let last = self.node_offset[stage + 1];
        self.node_arcs[first].start..self.node_arcs[last - 1].end
    }

    pub fn arc(&self, arc: usize) -> &ArcInfo {
        &self.arcs[arc]
    }

    pub fn arcs(&self) -> &[ArcInfo] {
        &self.arcs
    }

    pub fn means(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.mean).collect()
    }

    pub fn arc_id(&self, stage: usize, state: usize, action: usize) -> usize {
        self.node_arcs[self.node(stage, state)].start + action
    }

    /// Key of the form `"h/state/action"` with a 1-based stage.
    pub fn arc_key(&self, arc: usize) -> String {
        let a = &self.arcs[arc];
        format!("{}/{}/{}", a.stage + 1, self.state_ids[a.stage][a.state], a.label)
    }

    pub fn node_key(&self, node: usize) -> String {
        if node == self.sink() {
            return format!("{}/sink", self.horizon + 1);
        }
        let (h, s) = self.node_position(node);
        format!("{}/{}", h + 1, self.state_ids[h][s])
    }

    pub fn find_arc(&self, key: &str) -> Option<usize> {
        let mut parts = key.splitn(3, '/');
        let stage: usize = parts.next()?.parse().ok()?;
        let state = parts.next()?;
        let label = parts.next()?;
        if stage == 0 || stage > self.horizon {
            return None;
        }
        let s = self.find_state(stage - 1, state)?;
        self.state_arcs(stage - 1, s)
            .find(|&arc| self.arcs[arc].label == label)
    }

    pub fn rollout(&self, policy: &Policy) -> Trajectory {
        let mut arcs = Vec::with_capacity(self.horizon);
        let mut state = 0;
        for h in 0..self.horizon {
            let arc = self.arc_id(h, state, policy.action(h, state));
            arcs.push(arc);
            state = self.arcs[arc].next_state;
        }
        Trajectory { arcs }
    }

    /// Sum of mean rewards along the trajectory of `policy`, i.e. V^π_1(s_1).
    pub fn policy_return(&self, policy: &Policy) -> f64 {
        self.rollout(policy).arcs.iter().map(|&a| self.arcs[a].mean).sum()
    }

    pub fn optimal_values(&self) -> ValueTable {
        let means = self.means();
        let mut values = vec![0.0; self.num_nodes()];
        let mut choice = vec![0; self.num_nodes() - 1];
        suffix_max(self, &means, None, &mut values, Some(&mut choice));
        ValueTable::from_values(self, &means, values, choice)
    }

    pub fn policy_values(&self, policy: &Policy) -> ValueTable {
        let means = self.means();
        let mut values = vec![0.0; self.num_nodes()];
        let mut choice = vec![0; self.num_nodes() - 1];
        for node in (0..self.sink()).rev() {
            let (h, s) = self.node_position(node);
            let a = policy.action(h, s);
            let arc = self.node_arcs[node].start + a;
            values[node] = means[arc] + values[self.arcs[arc].to];
            choice[node] = a;
        }
        ValueTable::from_values(self, &means, values, choice)
    }

    /// Best return over policies forced through `arc` and restricted to `mask`.
    ///
    /// `rewards` holds one value per arc. Returns the sentinel when no masked policy
    /// visits the arc.
    pub fn constrained_best_return(&self, rewards: &[f64], arc: usize, mask: &ActionMask) -> ExtReal {
        constrained_best_returns(self, rewards, mask)[arc]
    }

    pub fn compute_gaps(&self) -> GapTable {
        GapTable::new(self)
    }

    /// Γ(π) = V*_1(s_1) − V^π_1(s_1).
    pub fn policy_gap(&self, policy: &Policy) -> f64 {
        self.optimal_values().root() - self.policy_return(policy)
    }

    /// True when every non-initial state has exactly one incoming arc (sink excluded).
    pub fn is_tree_based(&self) -> bool {
        let mut incoming = vec![0usize; self.num_nodes()];
        for arc in &self.arcs {
            incoming[arc.to] += 1;
        }
        (1..self.sink()).all(|node| incoming[node] == 1)
    }

    /// Policy playing the lowest-index action everywhere.
    pub fn first_policy(&self) -> Policy {
        Policy {
            actions: self.state_ids.iter().map(|s| vec![0; s.len()]).collect(),
        }
    }

    /// Policy following `trajectory` on its states and the lowest-index action elsewhere.
    pub fn policy_through(&self, trajectory: &[usize]) -> Policy {
        let mut policy = self.first_policy();
        for &arc in trajectory {
            let a = &self.arcs[arc];
            policy.actions[a.stage][a.state] = a.action;
        }
        policy
    }
}

/// Arc mask following the convention that a state with no masked action allows all of
/// its actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMask {
    allowed: Vec<bool>,
}

impl ActionMask {
    pub fn all(mdp: &DeterministicMdp) -> Self {
        ActionMask {
            allowed: vec![true; mdp.num_arcs()],
        }
    }

    pub fn from_active(mdp: &DeterministicMdp, active: &[bool]) -> Self {
        let mut allowed = active.to_vec();
        for node in 0..mdp.sink() {
            let range = mdp.node_arcs(node);
            if !active[range.clone()].iter().any(|&x| x) {
                allowed[range].iter_mut().for_each(|x| *x = true);
            }
        }
        ActionMask { allowed }
    }

    pub(crate) fn from_active_unchecked(allowed: Vec<bool>) -> Self {
        ActionMask { allowed }
    }

    pub fn allows(&self, arc: usize) -> bool {
        self.allowed[arc]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.allowed
    }
}

/// Deterministic policy: one action index per (stage, state).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn new(mdp: &DeterministicMdp, actions: Vec<Vec<usize>>) -> Result<Self> {
        if actions.len() != mdp.horizon() {
            return Err(Error::InvalidPolicy(format!(
                "expected {} stages, got {}",
                mdp.horizon(),
                actions.len()
            )));
        }
        for (h, stage) in actions.iter().enumerate() {
            if stage.len() != mdp.num_states(h) {
                return Err(Error::InvalidPolicy(format!(
                    "stage {} has {} states, policy lists {}",
                    h + 1,
                    mdp.num_states(h),
                    stage.len()
                )));
            }
            for (s, &a) in stage.iter().enumerate() {
                if a >= mdp.num_actions(h, s) {
                    return Err(Error::InvalidPolicy(format!(
                        "action {a} unavailable in state '{}' at stage {}",
                        mdp.state_id(h, s),
                        h + 1
                    )));
                }
            }
        }
        Ok(Policy { actions })
    }

    pub fn action(&self, stage: usize, state: usize) -> usize {
        self.actions[stage][state]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub(crate) fn from_choice(mdp: &DeterministicMdp, choice: &[usize]) -> Self {
        let actions = (0..mdp.horizon())
            .map(|h| mdp.stage_nodes(h).map(|node| choice[node]).collect())
            .collect();
        Policy { actions }
    }
}

/// Ordered arcs visited by a policy, one per stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    arcs: Vec<usize>,
}

impl Trajectory {
    pub fn arcs(&self) -> &[usize] {
        &self.arcs
    }

    /// `(state, action)` per stage.
    pub fn pairs(&self, mdp: &DeterministicMdp) -> Vec<(usize, usize)> {
        self.arcs
            .iter()
            .map(|&a| (mdp.arc(a).state, mdp.arc(a).action))
            .collect()
    }

    pub fn visits(&self, arc: usize) -> bool {
        self.arcs.contains(&arc)
    }
}

/// V and Q for a fixed policy or for the Bellman optimality operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    values: Vec<f64>,
    q: Vec<f64>,
    choice: Vec<usize>,
    horizon: usize,
    node_offset: Vec<usize>,
}

impl ValueTable {
    fn from_values(mdp: &DeterministicMdp, rewards: &[f64], values: Vec<f64>, choice: Vec<usize>) -> Self {
        let q = mdp
            .arcs()
            .iter()
            .zip(rewards)
            .map(|(arc, r)| r + values[arc.to])
            .collect();
        ValueTable {
            values,
            q,
            choice,
            horizon: mdp.horizon(),
            node_offset: mdp.node_offset.clone(),
        }
    }

    /// V_h(s); `stage == horizon` is the terminal stage where V ≡ 0.
    pub fn v(&self, stage: usize, state: usize) -> f64 {
        self.values[self.node_offset[stage] + state]
    }

    pub fn q(&self, arc: usize) -> f64 {
        self.q[arc]
    }

    /// V_1(s_1).
    pub fn root(&self) -> f64 {
        self.values[0]
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    /// Action chosen at (stage, state): the policy's action, or the lowest-index maximiser.
    pub fn chosen(&self, stage: usize, state: usize) -> usize {
        self.choice[self.node_offset[stage] + state]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn greedy_policy(&self, mdp: &DeterministicMdp) -> Policy {
        Policy::from_choice(mdp, &self.choice)
    }
}

/// Exact gap notions of an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GapTable {
    value_gap: Vec<f64>,
    return_gap: Vec<f64>,
    arc_stage: Vec<usize>,
    horizon: usize,
    optimal_value: f64,
    unique_optimal_trajectory: bool,
    min_return_gap: f64,
}

impl GapTable {
    fn new(mdp: &DeterministicMdp) -> Self {
        let values = mdp.optimal_values();
        let means = mdp.means();
        let best = constrained_best_returns(mdp, &means, &ActionMask::all(mdp));
        let v_star = values.root();
        let value_gap: Vec<f64> = mdp
            .arcs()
            .iter()
            .enumerate()
            .map(|(i, arc)| {
                let (h, s) = (arc.stage, arc.state);
                (values.v(h, s) - values.q(i)).max(0.0)
            })
            .collect();
        let return_gap: Vec<f64> = best
            .iter()
            .map(|b| {
                // every node of a valid MDP is reachable, so the constrained max is finite
                let b = b.finite().expect("reachable arc");
                (v_star - b).max(0.0)
            })
            .collect();

        let unique_optimal_trajectory = (0..mdp.horizon()).all(|h| {
            mdp.stage_arcs(h)
                .filter(|&a| return_gap[a] <= GAP_TOL)
                .count()
                == 1
        });
        let min_positive = return_gap
            .iter()
            .copied()
            .filter(|&g| g > GAP_TOL)
            .fold(f64::INFINITY, f64::min);
        let min_return_gap = if unique_optimal_trajectory && min_positive.is_finite() {
            min_positive
        } else {
            0.0
        };

        GapTable {
            value_gap,
            return_gap,
            arc_stage: mdp.arcs().iter().map(|a| a.stage).collect(),
            horizon: mdp.horizon(),
            optimal_value: v_star,
            unique_optimal_trajectory,
            min_return_gap,
        }
    }

    /// Δ_h(s,a) = V*_h(s) − Q*_h(s,a).
    pub fn value_gap(&self, arc: usize) -> f64 {
        self.value_gap[arc]
    }

    /// Deterministic return gap Δ̄_h(s,a).
    pub fn return_gap(&self, arc: usize) -> f64 {
        self.return_gap[arc]
    }

    /// Return gap normalised by the horizon, Δ̄_h(s,a) / H.
    pub fn normalized_return_gap(&self, arc: usize) -> f64 {
        self.return_gap[arc] / self.horizon as f64
    }

    pub fn value_gaps(&self) -> &[f64] {
        &self.value_gap
    }

    pub fn return_gaps(&self) -> &[f64] {
        &self.return_gap
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    pub fn unique_optimal_trajectory(&self) -> bool {
        self.unique_optimal_trajectory
    }

    /// Global Δ̄_min: smallest positive return gap when the optimal trajectory is
    /// unique, 0 otherwise.
    pub fn min_return_gap(&self) -> f64 {
        self.min_return_gap
    }

    /// Arcs of `stage` reachable by an ε-optimal policy (Δ̄ ≤ ε).
    pub fn eps_optimal_count(&self, stage: usize, eps: f64) -> usize {
        self.stage_gaps(stage).filter(|&g| g <= eps + GAP_TOL).count()
    }

    /// Per-stage Δ̄_min^h: smallest positive return gap at `stage` when exactly one arc
    /// of that stage is reachable by an ε-optimal policy, 0 otherwise.
    pub fn stage_min_return_gap(&self, stage: usize, eps: f64) -> f64 {
        if self.eps_optimal_count(stage, eps) != 1 {
            return 0.0;
        }
        let m = self
            .stage_gaps(stage)
            .filter(|&g| g > GAP_TOL)
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    fn stage_gaps(&self, stage: usize) -> impl Iterator<Item = f64> + '_ {
        self.arc_stage
            .iter()
            .zip(&self.return_gap)
            .filter(move |(&h, _)| h == stage)
            .map(|(_, &g)| g)
    }
}

/// Backward induction `values[node] = max_{allowed arcs} weight + values[to]`.
///
/// `allowed == None` allows every arc; otherwise every node must allow at least one
/// arc. Ties break toward the lowest action index.
pub(crate) fn suffix_max(
    mdp: &DeterministicMdp,
    weights: &[f64],
    allowed: Option<&[bool]>,
    values: &mut [f64],
    mut choice: Option<&mut [usize]>,
) {
    let sink = mdp.sink();
    values[sink] = 0.0;
    for node in (0..sink).rev() {
        let range = mdp.node_arcs[node].clone();
        let start = range.start;
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for arc in range {
            if let Some(mask) = allowed {
                if !mask[arc] {
                    continue;
                }
            }
            let v = weights[arc] + values[mdp.arcs[arc].to];
            if v > best {
                best = v;
                best_a = arc - start;
            }
        }
        values[node] = best;
        if let Some(c) = choice.as_deref_mut() {
            c[node] = best_a;
        }
    }
}

/// Forward induction: best weight of a masked path from the source to each node.
pub(crate) fn prefix_max(
    mdp: &DeterministicMdp,
    weights: &[f64],
    allowed: Option<&[bool]>,
    prefix: &mut [ExtReal],
) {
    prefix.iter_mut().for_each(|p| *p = ExtReal::NegInf);
    prefix[0] = ExtReal::Finite(0.0);
    for (i, arc) in mdp.arcs.iter().enumerate() {
        if let Some(mask) = allowed {
            if !mask[i] {
                continue;
            }
        }
        let cand = prefix[arc.from] + weights[i];
        if cand > prefix[arc.to] {
            prefix[arc.to] = cand;
        }
    }
}

/// Best masked return through every arc at once: prefix to the arc's tail, the arc,
/// then the best masked suffix from its head. Arcs the mask forbids get the sentinel.
pub fn constrained_best_returns(mdp: &DeterministicMdp, rewards: &[f64], mask: &ActionMask) -> Vec<ExtReal> {
    let mut prefix = vec![ExtReal::NegInf; mdp.num_nodes()];
    let mut suffix = vec![0.0; mdp.num_nodes()];
    prefix_max(mdp, rewards, Some(mask.as_slice()), &mut prefix);
    suffix_max(mdp, rewards, Some(mask.as_slice()), &mut suffix, None);
    mdp.arcs
        .iter()
        .enumerate()
        .map(|(i, arc)| {
            if !mask.allows(i) {
                ExtReal::NegInf
            } else {
                prefix[arc.from] + (rewards[i] + suffix[arc.to])
            }
        })
        .collect()
}

/// Compare two extended reals; the sentinel ties only with itself.
pub fn cmp_ext(a: ExtReal, b: ExtReal) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}
