//! JSON instance files and keyed arc maps.
//!
//! An instance file looks like
//!
//! ```json
//! {"horizon": 2,
//!  "stages": [{"states": [{"id": "s1", "actions": [{"label": "a1", "next_state": "s2", "mean_reward": 0.5}]}]},
//!             {"states": [{"id": "s2", "actions": [{"label": "a1", "next_state": null, "mean_reward": 0.1}]}]}],
//!  "reward_kind": "bernoulli"}
//! ```
//!
//! Arc maps (demands, flows) are objects keyed by `"h/state/action"` with 1-based h.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Cut, DemandFn};
use crate::mdp::{ActionSpec, DeterministicMdp, RewardKind, StateSpec};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    horizon: usize,
    stages: Vec<StageFile>,
    reward_kind: RewardKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    states: Vec<StateFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    id: String,
    actions: Vec<ActionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFile {
    label: String,
    #[serde(default)]
    next_state: Option<String>,
    mean_reward: f64,
}

pub fn instance_to_json(mdp: &DeterministicMdp) -> String {
    let h = mdp.horizon();
    let stages = (0..h)
        .map(|stage| StageFile {
            states: (0..mdp.num_states(stage))
                .map(|s| StateFile {
                    id: mdp.state_id(stage, s).to_string(),
                    actions: mdp
                        .state_arcs(stage, s)
                        .map(|a| {
                            let arc = mdp.arc(a);
                            ActionFile {
                                label: arc.label.clone(),
                                next_state: (stage + 1 < h)
                                    .then(|| mdp.state_id(stage + 1, arc.next_state).to_string()),
                                mean_reward: arc.mean,
                            }
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let file = InstanceFile {
        horizon: h,
        stages,
        reward_kind: mdp.reward_kind(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

pub fn instance_from_json(text: &str) -> Result<DeterministicMdp> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.horizon != file.stages.len() {
        return Err(Error::InvalidMdp(format!(
            "horizon {} does not match the {} listed stages",
            file.horizon,
            file.stages.len()
        )));
    }
    let h = file.horizon;
    let mut specs = Vec::with_capacity(h);
    for (stage, st) in file.stages.iter().enumerate() {
        let mut states = Vec::with_capacity(st.states.len());
        for state in &st.states {
            let mut actions = Vec::with_capacity(state.actions.len());
            for act in &state.actions {
                let next = match (&act.next_state, stage + 1 < h) {
                    (Some(id), true) => file.stages[stage + 1]
                        .states
                        .iter()
                        .position(|s| &s.id == id)
                        .ok_or_else(|| {
                            Error::InvalidMdp(format!(
                                "action '{}' of state '{}' at stage {} targets unknown state '{id}'",
                                act.label,
                                state.id,
                                stage + 1
                            ))
                        })?,
                    (None, false) => 0,
                    (None, true) => {
                        return Err(Error::InvalidMdp(format!(
                            "action '{}' of state '{}' at stage {} has no next state",
                            act.label,
                            state.id,
                            stage + 1
                        )))
                    }
                    (Some(_), false) => {
                        return Err(Error::InvalidMdp(format!(
                            "final-stage action '{}' of state '{}' must have a null next state",
                            act.label, state.id
                        )))
                    }
                };
                actions.push(ActionSpec::new(act.label.clone(), next, act.mean_reward));
            }
            states.push(StateSpec::new(state.id.clone(), actions));
        }
        specs.push(states);
    }
    DeterministicMdp::new(specs, file.reward_kind)
}

/// Keyed map of one value per arc.
pub fn arc_map(mdp: &DeterministicMdp, values: &[f64]) -> BTreeMap<String, f64> {
    (0..mdp.num_arcs()).map(|a| (mdp.arc_key(a), values[a])).collect()
}

/// Demand from a keyed map; arcs not listed get demand zero.
pub fn demand_from_json(mdp: &DeterministicMdp, text: &str) -> Result<DemandFn> {
    let map: BTreeMap<String, f64> =
        serde_json::from_str(text).map_err(|e| Error::InvalidDemand(format!("malformed demand file: {e}")))?;
    let mut values = vec![0.0; mdp.num_arcs()];
    for (key, v) in map {
        let arc = mdp
            .find_arc(&key)
            .ok_or_else(|| Error::InvalidDemand(format!("unknown arc '{key}'")))?;
        values[arc] = v;
    }
    DemandFn::new(mdp, values)
}

pub fn demand_to_json(mdp: &DeterministicMdp, demand: &DemandFn) -> String {
    serde_json::to_string_pretty(&arc_map(mdp, demand.values())).expect("map serializes")
}

/// Node keys of the cut members and arc keys of its forward arcs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutReport {
    pub nodes: Vec<String>,
    pub forward_arcs: Vec<String>,
}

impl CutReport {
    pub fn new(mdp: &DeterministicMdp, cut: &Cut) -> Self {
        CutReport {
            nodes: (0..mdp.num_nodes())
                .filter(|&n| cut.contains(n))
                .map(|n| mdp.node_key(n))
                .collect(),
            forward_arcs: cut.forward_arcs().iter().map(|&a| mdp.arc_key(a)).collect(),
        }
    }
}
