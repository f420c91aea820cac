//! Monte-Carlo batches of seeded runs, CSV emission and summary statistics.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{run_eprl, RunConfig, RunResult, StopReason, DEFAULT_BUDGET};
use crate::mdp::DeterministicMdp;
use crate::sampling::SamplingRule;

/// First line of every batch CSV.
pub const CSV_HEADER_COMMENT: &str = "# detpac-batch v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub rule: SamplingRule,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub budget: u64,
    pub elim_period: u64,
}

impl ExperimentConfig {
    pub fn new(rule: SamplingRule, eps: f64, delta: f64, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            rule,
            eps,
            delta,
            trials,
            seed,
            budget: DEFAULT_BUDGET,
            elim_period: 1,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            rule: self.rule,
            eps: self.eps,
            delta: self.delta,
            budget: self.budget,
            elim_period: self.elim_period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        self.run_config().validate()
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` of a batch with master seed `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix(mix(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Clone, Debug)]
pub struct Trial {
    pub seed: u64,
    pub result: RunResult,
}

/// Runs every trial of a batch, in parallel on the current rayon pool. The output is
/// ordered by trial index regardless of scheduling.
pub fn run_trials(mdp: &DeterministicMdp, config: &ExperimentConfig) -> Result<Vec<Trial>> {
    config.validate()?;
    let run = config.run_config();
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(config.seed, i);
            run_eprl(mdp, &run, seed).map(|result| Trial { seed, result })
        })
        .collect()
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub rule: String,
    pub eps: f64,
    pub delta: f64,
    pub tau: u64,
    pub stop_rule: String,
    pub subopt: f64,
    pub good_event: bool,
}

impl TrialRecord {
    pub fn new(config: &ExperimentConfig, trial: &Trial) -> Self {
        TrialRecord {
            seed: trial.seed,
            rule: config.rule.to_string(),
            eps: config.eps,
            delta: config.delta,
            tau: trial.result.tau,
            stop_rule: trial.result.stop_rule.to_string(),
            subopt: trial.result.subopt,
            good_event: trial.result.good_event,
        }
    }

    /// A trial fails when it recommends a policy more than ε from optimal or runs out
    /// of budget.
    pub fn failed(&self) -> bool {
        self.subopt > self.eps || self.stop_rule == StopReason::BudgetExceeded.as_str()
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER_COMMENT}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Aggregates over the exact set of trials of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub rule: String,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub mean_tau: f64,
    pub median_tau: f64,
    pub p95_tau: u64,
    pub failure_rate: f64,
    pub good_event_rate: f64,
    pub mean_subopt: f64,
    pub budget_exceeded: usize,
    /// Largest ratio d_k / φ*(c̲^k) over all logged periods with positive φ*.
    pub max_period_ratio: Option<f64>,
    /// φ* of the instance lower bound at the bounded-reward scaling (σ² = 1/4).
    pub lower_bound_quarter: Option<f64>,
    /// φ* of the instance lower bound at unit variance.
    pub lower_bound_unit: Option<f64>,
}

/// Median of a sorted slice (mean of the two middle values for even lengths).
pub fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn summarize(config: &ExperimentConfig, trials: &[Trial]) -> BatchSummary {
    let records: Vec<TrialRecord> = trials.iter().map(|t| TrialRecord::new(config, t)).collect();
    let n = records.len().max(1) as f64;
    let mut taus: Vec<u64> = records.iter().map(|r| r.tau).collect();
    taus.sort_unstable();
    let max_period_ratio = trials
        .iter()
        .flat_map(|t| t.result.periods.iter())
        .filter_map(|p| match p.phi_star {
            Some(phi) if phi > 0.0 => Some(p.d as f64 / phi),
            _ => None,
        })
        .reduce(f64::max);
    BatchSummary {
        rule: config.rule.to_string(),
        eps: config.eps,
        delta: config.delta,
        trials: records.len(),
        mean_tau: taus.iter().sum::<u64>() as f64 / n,
        median_tau: median(&taus),
        p95_tau: percentile(&taus, 95.0),
        failure_rate: records.iter().filter(|r| r.failed()).count() as f64 / n,
        good_event_rate: records.iter().filter(|r| r.good_event).count() as f64 / n,
        mean_subopt: records.iter().map(|r| r.subopt).sum::<f64>() / n,
        budget_exceeded: records
            .iter()
            .filter(|r| r.stop_rule == StopReason::BudgetExceeded.as_str())
            .count(),
        max_period_ratio,
        lower_bound_quarter: None,
        lower_bound_unit: None,
    }
}
