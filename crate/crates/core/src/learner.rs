//! Elimination-based PAC identification: statistics, confidence bonuses, the
//! elimination rule, both stopping rules and the optimistic recommendation.
//!
//! One episode runs `sample → update → eliminate → stop-check`. The sampling rule is
//! supplied by [`crate::sampling::Sampler`].

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{prefix_max, suffix_max, ActionMask, DeterministicMdp, ExtReal, Policy, RewardKind};
use crate::sampling::{PeriodLog, Sampler, SamplingRule};

/// Default cap on the number of episodes of a run.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Every active policy has a return confidence interval of width ≤ ε.
    Width,
    /// Every state has at most one active action.
    UniqueActive,
    /// The episode budget ran out before either rule fired.
    BudgetExceeded,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Width => "width",
            StopReason::UniqueActive => "unique-active",
            StopReason::BudgetExceeded => "budget-exceeded",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StopReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(StopReason::Width),
            "unique-active" => Ok(StopReason::UniqueActive),
            "budget-exceeded" => Ok(StopReason::BudgetExceeded),
            _ => Err(Error::InvalidConfig(format!("unknown stop reason '{s}'"))),
        }
    }
}

/// Exploration threshold β(n, δ).
pub fn beta(kind: RewardKind, n: u64, num_arcs: usize, delta: f64) -> f64 {
    let (n, big_n) = (n as f64, num_arcs as f64);
    match kind {
        RewardKind::Bernoulli => 0.5 * (E * (n + 1.0) * big_n / delta).ln(),
        RewardKind::Gaussian(sigma2) => 2.0 * sigma2 * (PI * PI * n * n * big_n / (3.0 * delta)).ln(),
    }
}

/// b = min(√(β/n), 1), with b = 1 for unvisited arcs.
pub fn bonus(kind: RewardKind, n: u64, num_arcs: usize, delta: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    (beta(kind, n, num_arcs, delta) / n as f64).sqrt().min(1.0)
}

/// Optimistic and pessimistic value tables of one learner state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceTables {
    /// Best optimistic return from the initial state to each node, active policies only.
    pub upper_prefix: Vec<ExtReal>,
    /// Best optimistic return from each node to the end, active policies only.
    pub upper_suffix: Vec<f64>,
    /// Best pessimistic return from each node, over all policies.
    pub lower_suffix: Vec<f64>,
    /// Per-arc optimistic return of the best active policy through the arc.
    pub upper_through: Vec<ExtReal>,
}

impl ConfidenceTables {
    /// max over active policies of the optimistic return.
    pub fn max_upper(&self) -> f64 {
        self.upper_suffix[0]
    }

    /// max over all policies of the pessimistic return.
    pub fn max_lower(&self) -> f64 {
        self.lower_suffix[0]
    }
}

/// Optimistic tables use `means + bonus` restricted to `mask`; the pessimistic table
/// uses `means − bonus` over every action.
pub fn confidence_tables(mdp: &DeterministicMdp, means: &[f64], bonus: &[f64], mask: &ActionMask) -> ConfidenceTables {
    let upper: Vec<f64> = means.iter().zip(bonus).map(|(m, b)| m + b).collect();
    let lower: Vec<f64> = means.iter().zip(bonus).map(|(m, b)| m - b).collect();
    let n = mdp.num_nodes();
    let mut upper_prefix = vec![ExtReal::NegInf; n];
    let mut upper_suffix = vec![0.0; n];
    let mut lower_suffix = vec![0.0; n];
    prefix_max(mdp, &upper, Some(mask.as_slice()), &mut upper_prefix);
    suffix_max(mdp, &upper, Some(mask.as_slice()), &mut upper_suffix, None);
    suffix_max(mdp, &lower, None, &mut lower_suffix, None);
    let upper_through = mdp
        .arcs()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if mask.allows(i) {
                upper_prefix[a.from] + (upper[i] + upper_suffix[a.to])
            } else {
                ExtReal::NegInf
            }
        })
        .collect();
    ConfidenceTables {
        upper_prefix,
        upper_suffix,
        lower_suffix,
        upper_through,
    }
}

/// Statistics and active sets of one run.
#[derive(Clone, Debug)]
pub struct LearnerState {
    eps: f64,
    delta: f64,
    kind: RewardKind,
    num_arcs: usize,
    t: u64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    means: Vec<f64>,
    bonus: Vec<f64>,
    active: Vec<bool>,
    /// `active` with the empty-set-means-all convention applied per state.
    allowed: Vec<bool>,
    active_per_node: Vec<usize>,
    /// States with more than one active action.
    branching_nodes: usize,
    // scratch for the per-episode inductions
    upper: Vec<f64>,
    lower: Vec<f64>,
    prefix: Vec<ExtReal>,
    suffix: Vec<f64>,
    lower_suffix: Vec<f64>,
    diam_values: Vec<f64>,
    diam_choice: Vec<usize>,
}

impl LearnerState {
    pub fn new(mdp: &DeterministicMdp, eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("ε = {eps} must be positive")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("δ = {delta} must lie in (0, 1)")));
        }
        let n = mdp.num_arcs();
        let nodes = mdp.num_nodes();
        let active_per_node: Vec<usize> = (0..mdp.sink()).map(|v| mdp.node_arcs(v).len()).collect();
        let branching_nodes = active_per_node.iter().filter(|&&c| c > 1).count();
        let mut state = LearnerState {
            eps,
            delta,
            kind: mdp.reward_kind(),
            num_arcs: n,
            t: 0,
            counts: vec![0; n],
            sums: vec![0.0; n],
            means: vec![0.0; n],
            bonus: vec![1.0; n],
            active: vec![true; n],
            allowed: vec![true; n],
            active_per_node,
            branching_nodes,
            upper: vec![0.0; n],
            lower: vec![0.0; n],
            prefix: vec![ExtReal::NegInf; nodes],
            suffix: vec![0.0; nodes],
            lower_suffix: vec![0.0; nodes],
            diam_values: vec![0.0; nodes],
            diam_choice: vec![0; nodes - 1],
        };
        state.refresh_diameter(mdp);
        Ok(state)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of completed episodes.
    pub fn episode(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn bonuses(&self) -> &[f64] {
        &self.bonus
    }

    /// Active flags as stored (a state may have none left).
    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn is_active(&self, arc: usize) -> bool {
        self.active[arc]
    }

    pub fn mask(&self) -> ActionMask {
        ActionMask::from_active_unchecked(self.allowed.clone())
    }

    pub(crate) fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    /// Counts `+1` along `trajectory` and folds in the observed rewards.
    pub fn update_statistics(&mut self, trajectory: &[usize], rewards: &[f64]) {
        debug_assert_eq!(trajectory.len(), rewards.len());
        self.t += 1;
        for (&arc, &r) in trajectory.iter().zip(rewards) {
            self.counts[arc] += 1;
            self.sums[arc] += r;
            let n = self.counts[arc];
            self.means[arc] = self.sums[arc] / n as f64;
            self.bonus[arc] = bonus(self.kind, n, self.num_arcs, self.delta);
        }
    }

    pub fn confidence_values(&self, mdp: &DeterministicMdp) -> ConfidenceTables {
        confidence_tables(mdp, &self.means, &self.bonus, &self.mask())
    }

    /// Applies the elimination rule to every active arc and returns the arcs removed.
    ///
    /// An arc is removed when the best optimistic return of an active policy through it
    /// is strictly below the best pessimistic return of any policy. Arcs that no active
    /// policy reaches are removed as well.
    pub fn eliminate(&mut self, mdp: &DeterministicMdp) -> Vec<usize> {
        for i in 0..self.num_arcs {
            self.upper[i] = self.means[i] + self.bonus[i];
            self.lower[i] = self.means[i] - self.bonus[i];
        }
        prefix_max(mdp, &self.upper, Some(&self.allowed), &mut self.prefix);
        suffix_max(mdp, &self.upper, Some(&self.allowed), &mut self.suffix, None);
        suffix_max(mdp, &self.lower, None, &mut self.lower_suffix, None);
        let threshold = ExtReal::Finite(self.lower_suffix[0]);
        let mut removed = Vec::new();
        for (i, arc) in mdp.arcs().iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            let through = self.prefix[arc.from] + (self.upper[i] + self.suffix[arc.to]);
            if through < threshold {
                removed.push(i);
            }
        }
        for &i in &removed {
            self.deactivate(mdp, i);
        }
        removed
    }

    fn deactivate(&mut self, mdp: &DeterministicMdp, arc: usize) {
        self.active[arc] = false;
        let node = mdp.arc(arc).from;
        let before = self.active_per_node[node];
        self.active_per_node[node] -= 1;
        if before == 2 {
            self.branching_nodes -= 1;
        }
        let range = mdp.node_arcs(node);
        if before == 1 {
            // last action gone: the state falls back to its full action set
            self.allowed[range].iter_mut().for_each(|x| *x = true);
        } else {
            self.allowed[arc] = false;
        }
    }

    /// Recomputes the maximum active diameter and its maximiser.
    pub(crate) fn refresh_diameter(&mut self, mdp: &DeterministicMdp) {
        suffix_max(mdp, &self.bonus, Some(&self.allowed), &mut self.diam_values, Some(&mut self.diam_choice));
    }

    /// max over active policies of Σ_h b along the trajectory (half the diameter), as of
    /// the last [`check_stopping`](Self::check_stopping) call.
    pub fn max_half_diameter(&self) -> f64 {
        self.diam_values[0]
    }

    pub(crate) fn diameter_choice(&self) -> &[usize] {
        &self.diam_choice
    }

    /// Evaluates both stopping rules on the current statistics.
    pub fn check_stopping(&mut self, mdp: &DeterministicMdp) -> Option<StopReason> {
        self.refresh_diameter(mdp);
        if 2.0 * self.max_half_diameter() <= self.eps {
            Some(StopReason::Width)
        } else if self.branching_nodes == 0 {
            Some(StopReason::UniqueActive)
        } else {
            None
        }
    }

    /// Active policy with the largest optimistic return.
    pub fn recommend(&self, mdp: &DeterministicMdp) -> Policy {
        let upper: Vec<f64> = self.means.iter().zip(&self.bonus).map(|(m, b)| m + b).collect();
        let mut values = vec![0.0; mdp.num_nodes()];
        let mut choice = vec![0; mdp.num_nodes() - 1];
        suffix_max(mdp, &upper, Some(&self.allowed), &mut values, Some(&mut choice));
        Policy::from_choice(mdp, &choice)
    }

    /// 1 + smallest count among active arcs; `None` when no arc is active.
    pub fn period_target(&self) -> Option<u64> {
        self.counts
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&n, _)| n)
            .min()
            .map(|n| n + 1)
    }
}

/// Parameters of one learning run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub rule: SamplingRule,
    pub eps: f64,
    pub delta: f64,
    pub budget: u64,
    /// Eliminations are checked every `elim_period` episodes.
    pub elim_period: u64,
}

impl RunConfig {
    pub fn new(rule: SamplingRule, eps: f64, delta: f64) -> Self {
        RunConfig {
            rule,
            eps,
            delta,
            budget: DEFAULT_BUDGET,
            elim_period: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("ε = {} must be positive", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("δ = {} must lie in (0, 1)", self.delta)));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if self.elim_period == 0 {
            return Err(Error::InvalidConfig("elimination period must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one learning run.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub tau: u64,
    #[serde(serialize_with = "serialize_policy")]
    pub recommended: Policy,
    pub stop_rule: StopReason,
    pub counts: Vec<u64>,
    /// Episode at which each arc was eliminated.
    pub elim_episode: Vec<Option<u64>>,
    /// Period index k in which each arc was eliminated.
    pub elim_period: Vec<Option<u64>>,
    /// Whether every empirical mean stayed within its bonus of the true mean.
    pub good_event: bool,
    /// Γ of the recommended policy.
    pub subopt: f64,
    pub periods: Vec<PeriodLog>,
}

fn serialize_policy<S: serde::Serializer>(p: &Policy, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(p.table(), s)
}

/// Draws one reward for `arc`.
pub fn sample_reward<R: Rng>(mdp: &DeterministicMdp, arc: usize, rng: &mut R) -> f64 {
    let mean = mdp.arc(arc).mean;
    match mdp.reward_kind() {
        RewardKind::Bernoulli => {
            if rng.random_bool(mean) {
                1.0
            } else {
                0.0
            }
        }
        RewardKind::Gaussian(sigma2) => {
            let z: f64 = rng.sample(StandardNormal);
            mean + sigma2.sqrt() * z
        }
    }
}

/// Runs the learner until a stopping rule fires or the budget is exhausted.
pub fn run_eprl(mdp: &DeterministicMdp, config: &RunConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = LearnerState::new(mdp, config.eps, config.delta)?;
    let mut sampler = Sampler::new(config.rule, mdp);
    let true_means = mdp.means();
    let n = mdp.num_arcs();
    let mut elim_episode = vec![None; n];
    let mut elim_period = vec![None; n];
    let mut good_event = true;
    let mut rewards = vec![0.0; mdp.horizon()];

    let stop_rule = loop {
        let trajectory = sampler.next_trajectory(&state, mdp);
        for (h, &arc) in trajectory.iter().enumerate() {
            rewards[h] = sample_reward(mdp, arc, &mut rng);
        }
        state.update_statistics(&trajectory, &rewards);
        for &arc in &trajectory {
            if (state.means[arc] - true_means[arc]).abs() > state.bonus[arc] {
                good_event = false;
            }
        }
        let t = state.episode();
        if t % config.elim_period == 0 {
            let k = sampler.current_period();
            for arc in state.eliminate(mdp) {
                elim_episode[arc] = Some(t);
                elim_period[arc] = Some(k);
            }
        }
        if let Some(reason) = state.check_stopping(mdp) {
            break reason;
        }
        if t >= config.budget {
            break StopReason::BudgetExceeded;
        }
    };

    let tau = state.episode();
    let recommended = state.recommend(mdp);
    let subopt = mdp.policy_gap(&recommended);
    Ok(RunResult {
        tau,
        recommended,
        stop_rule,
        counts: state.counts.clone(),
        elim_episode,
        elim_period,
        good_event,
        subopt,
        periods: sampler.finish(tau),
    })
}
