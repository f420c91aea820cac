//! Sampling rules and period bookkeeping.
//!
//! Period k collects the episodes with k_t = k, where k_t is one plus the smallest
//! visit count among active arcs. Coverage rules alternate: odd episodes play a
//! coverage policy, even episodes the maximum-diameter policy.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{extract_policy_cover, min_flow, DemandFn};
use crate::learner::LearnerState;
use crate::mdp::{suffix_max, DeterministicMdp, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingRule {
    MaxDiameter,
    MaxCoverage,
    AdaptiveMaxCoverage,
}

impl SamplingRule {
    pub const ALL: [SamplingRule; 3] = [
        SamplingRule::MaxDiameter,
        SamplingRule::MaxCoverage,
        SamplingRule::AdaptiveMaxCoverage,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingRule::MaxDiameter => "max-diameter",
            SamplingRule::MaxCoverage => "max-coverage",
            SamplingRule::AdaptiveMaxCoverage => "adaptive-max-coverage",
        }
    }

    fn uses_coverage(&self) -> bool {
        !matches!(self, SamplingRule::MaxDiameter)
    }
}

impl fmt::Display for SamplingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SamplingRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sampling rule '{s}'")))
    }
}

/// One row of the period log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodLog {
    pub k: u64,
    pub t_start: u64,
    /// Number of episodes in the period (the last period is cut at the stopping time).
    #[serde(rename = "d_k")]
    pub d: u64,
    /// Active arcs with fewer than k visits at the start of the period.
    #[serde(rename = "N_k")]
    pub n_k: usize,
    /// φ* of the period demand (coverage rules only).
    pub phi_star: Option<f64>,
    /// Size of the extracted cover (maximum coverage only).
    pub cover_size: Option<usize>,
    /// Smallest count among arcs active at the start of the period.
    pub min_active_count: u64,
    /// Active final-stage arcs at the start of the period.
    pub active_final_arcs: usize,
}

/// Active sets and under-sampled arcs frozen at the start of a period.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodSnapshot {
    pub k: u64,
    pub t_start: u64,
    active: Vec<bool>,
    demanded: Vec<bool>,
}

impl PeriodSnapshot {
    /// Snapshot of `state` for period `k` starting at episode `t_start`.
    pub fn capture(state: &LearnerState, k: u64, t_start: u64) -> Self {
        let active = state.active().to_vec();
        let demanded = active
            .iter()
            .zip(state.counts())
            .map(|(&a, &n)| a && n < k)
            .collect();
        PeriodSnapshot {
            k,
            t_start,
            active,
            demanded,
        }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Arcs demanded in this period: active at its start with fewer than k visits.
    pub fn demanded(&self) -> &[bool] {
        &self.demanded
    }

    pub fn n_k(&self) -> usize {
        self.demanded.iter().filter(|&&d| d).count()
    }

    pub fn demand(&self) -> DemandFn {
        DemandFn::indicator(&self.demanded)
    }
}

/// Number of demanded arcs of the period visited by at least one of `policies`.
pub fn coverage_function(snapshot: &PeriodSnapshot, mdp: &DeterministicMdp, policies: &[Policy]) -> usize {
    let mut hit = vec![false; mdp.num_arcs()];
    for p in policies {
        for &a in mdp.rollout(p).arcs() {
            hit[a] = true;
        }
    }
    hit.iter().zip(&snapshot.demanded).filter(|(&h, &d)| h && d).count()
}

fn walk(mdp: &DeterministicMdp, choice: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(mdp.horizon());
    let mut node = mdp.source();
    while node != mdp.sink() {
        let arc = mdp.node_arcs(node).start + choice[node];
        out.push(arc);
        node = mdp.arc(arc).to;
    }
    out
}

/// Active policy with the largest bonus sum.
pub fn max_diameter_policy(state: &LearnerState, mdp: &DeterministicMdp) -> Policy {
    let mut values = vec![0.0; mdp.num_nodes()];
    let mut choice = vec![0; mdp.num_nodes() - 1];
    suffix_max(mdp, state.bonuses(), Some(state.allowed()), &mut values, Some(&mut choice));
    Policy::from_choice(mdp, &choice)
}

fn adaptive_weights(state: &LearnerState, snapshot: &PeriodSnapshot, out: &mut [f64]) {
    for (i, w) in out.iter_mut().enumerate() {
        *w = if snapshot.active[i] && state.counts()[i] < snapshot.k { 1.0 } else { 0.0 };
    }
}

/// Policy (over all actions) visiting the most arcs that were active at the start of
/// the period and are still under-sampled.
pub fn adaptive_cover_policy(state: &LearnerState, snapshot: &PeriodSnapshot, mdp: &DeterministicMdp) -> Policy {
    let mut weights = vec![0.0; mdp.num_arcs()];
    adaptive_weights(state, snapshot, &mut weights);
    let mut values = vec![0.0; mdp.num_nodes()];
    let mut choice = vec![0; mdp.num_nodes() - 1];
    suffix_max(mdp, &weights, None, &mut values, Some(&mut choice));
    Policy::from_choice(mdp, &choice)
}

/// Per-run sampling rule state: current period, its snapshot, the cover queue and the
/// period log.
#[derive(Clone, Debug)]
pub struct Sampler {
    rule: SamplingRule,
    k: u64,
    snapshot: Option<PeriodSnapshot>,
    queue: VecDeque<Vec<usize>>,
    log: Vec<PeriodLog>,
    weights: Vec<f64>,
    values: Vec<f64>,
    choice: Vec<usize>,
}

impl Sampler {
    pub fn new(rule: SamplingRule, mdp: &DeterministicMdp) -> Self {
        Sampler {
            rule,
            k: 0,
            snapshot: None,
            queue: VecDeque::new(),
            log: Vec::new(),
            weights: vec![0.0; mdp.num_arcs()],
            values: vec![0.0; mdp.num_nodes()],
            choice: vec![0; mdp.num_nodes() - 1],
        }
    }

    pub fn rule(&self) -> SamplingRule {
        self.rule
    }

    /// Current period index k (0 before the first episode).
    pub fn current_period(&self) -> u64 {
        self.k
    }

    pub fn snapshot(&self) -> Option<&PeriodSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn log(&self) -> &[PeriodLog] {
        &self.log
    }

    /// Updates k_t for the coming episode, opening new periods as needed.
    pub fn advance_period(&mut self, state: &LearnerState, mdp: &DeterministicMdp) {
        let t = state.episode() + 1;
        let Some(target) = state.period_target() else {
            return;
        };
        if target <= self.k {
            return;
        }
        if let Some(open) = self.log.last_mut() {
            open.d = t - open.t_start;
        }
        let min_active = state
            .counts()
            .iter()
            .zip(state.active())
            .filter(|(_, &a)| a)
            .map(|(&n, _)| n)
            .min()
            .unwrap_or(0);
        let final_arcs = mdp
            .stage_arcs(mdp.horizon() - 1)
            .filter(|&a| state.is_active(a))
            .count();
        let coverage = self.rule.uses_coverage();
        for k in self.k + 1..target {
            self.log.push(PeriodLog {
                k,
                t_start: t,
                d: 0,
                n_k: 0,
                phi_star: coverage.then_some(0.0),
                cover_size: (self.rule == SamplingRule::MaxCoverage).then_some(0),
                min_active_count: min_active,
                active_final_arcs: final_arcs,
            });
        }

        let snapshot = PeriodSnapshot::capture(state, target, t);
        let mut phi_star = None;
        let mut cover_size = None;
        self.queue.clear();
        if coverage {
            let (flow, _) = min_flow(mdp, &snapshot.demand());
            phi_star = Some(flow.value());
            if self.rule == SamplingRule::MaxCoverage {
                let cover = extract_policy_cover(mdp, &flow).expect("integer demand yields an integer flow");
                cover_size = Some(cover.len());
                self.queue
                    .extend(cover.policies().iter().map(|p| mdp.rollout(p).arcs().to_vec()));
            }
        }
        self.log.push(PeriodLog {
            k: target,
            t_start: t,
            d: 0,
            n_k: snapshot.n_k(),
            phi_star,
            cover_size,
            min_active_count: min_active,
            active_final_arcs: final_arcs,
        });
        self.k = target;
        self.snapshot = Some(snapshot);
    }

    /// Trajectory to play in the coming episode.
    ///
    /// Expects `state` to have been refreshed by its last stop check (or freshly built).
    pub fn next_trajectory(&mut self, state: &LearnerState, mdp: &DeterministicMdp) -> Vec<usize> {
        self.advance_period(state, mdp);
        let t = state.episode() + 1;
        if t % 2 == 1 {
            match self.rule {
                SamplingRule::MaxDiameter => {}
                SamplingRule::MaxCoverage => {
                    if let Some(traj) = self.queue.pop_front() {
                        return traj;
                    }
                }
                SamplingRule::AdaptiveMaxCoverage => {
                    if let Some(snapshot) = &self.snapshot {
                        adaptive_weights(state, snapshot, &mut self.weights);
                        suffix_max(mdp, &self.weights, None, &mut self.values, Some(&mut self.choice));
                        return walk(mdp, &self.choice);
                    }
                }
            }
        }
        walk(mdp, state.diameter_choice())
    }

    /// Closes the open period at stopping time `tau` and returns the log.
    pub fn finish(mut self, tau: u64) -> Vec<PeriodLog> {
        if let Some(open) = self.log.last_mut() {
            if open.t_start <= tau {
                open.d = tau - open.t_start + 1;
            }
        }
        self.log
    }
}
