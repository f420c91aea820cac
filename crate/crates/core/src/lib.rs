//! PAC policy identification in deterministic episodic MDPs.
//!
//! The crate covers the model ([`mdp`]), minimum flows and policy covers on its layered
//! graph ([`flow`]), the elimination learner ([`learner`]) with its sampling rules
//! ([`sampling`]), instance generators and lower-bound calculators ([`instances`]),
//! file formats ([`io`]) and seeded Monte-Carlo batches ([`harness`]).

pub mod error;
pub mod flow;
pub mod harness;
pub mod instances;
pub mod io;
pub mod learner;
pub mod mdp;
pub mod sampling;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use flow::{
    cut_value, extract_policy_cover, flow_value_of, initial_feasible_flow, min_flow, Cut, DemandFn, Flow,
    PolicyCover,
};
pub use harness::{BatchSummary, ExperimentConfig, Trial, TrialRecord};
pub use instances::LowerBoundReport;
pub use learner::{run_eprl, LearnerState, RunConfig, RunResult, StopReason};
pub use mdp::{
    ActionMask, ActionSpec, ArcInfo, DeterministicMdp, ExtReal, GapTable, Policy, RewardKind, StateSpec,
    Trajectory, ValueTable,
};
pub use sampling::{PeriodLog, PeriodSnapshot, Sampler, SamplingRule};
