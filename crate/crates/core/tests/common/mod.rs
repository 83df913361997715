#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bctsim::agent::{BctProfile, RunOptions, SimulationState};
use bctsim::metacog::{EventBody, ReasoningTrace};
use bctsim::scenario::{bundled_spec, instantiate, ScenarioSpec};
use sha2::{Digest, Sha256};

pub fn spec(name: &str) -> ScenarioSpec {
    bundled_spec(name).expect("bundled scenario")
}

#[derive(Debug, Clone)]
pub struct Setup {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub metacognition: bool,
    pub profile: Option<BctProfile>,
    pub overrides: BTreeMap<String, f64>,
    pub ticks: u64,
}

impl Setup {
    pub fn new(spec: ScenarioSpec, metacognition: bool, ticks: u64) -> Self {
        Setup {
            spec,
            seed: 1,
            metacognition,
            profile: None,
            overrides: BTreeMap::new(),
            ticks,
        }
    }

    pub fn run(&self) -> SimulationState {
        let mut s = instantiate(
            &self.spec,
            self.seed,
            RunOptions {
                metacognition: self.metacognition,
                weight_overrides: self.overrides.clone(),
                profile: self.profile,
            },
        )
        .expect("valid scenario");
        s.run(self.ticks);
        s
    }
}

/// ActionExecuted events naming a tendency that is not in the pool as
/// reconstructed from injections, expiries and earlier executions.
pub fn routing_violations(trace: &ReasoningTrace) -> usize {
    let mut pool = BTreeSet::new();
    let mut bad = 0;
    for e in trace.events() {
        match &e.body {
            EventBody::TendencyInjected { tendency, .. } => {
                pool.insert(tendency.clone());
            }
            EventBody::TendencyExpired { tendency, .. } => {
                pool.remove(tendency);
            }
            EventBody::ActionExecuted {
                tendency: Some(t), ..
            } => {
                if !pool.remove(t) {
                    bad += 1;
                }
            }
            _ => {}
        }
    }
    bad
}

/// (OptionSelected events, those lacking a resolvable reason). A reason
/// resolves when it names a declared template instantiated for the
/// selected option.
pub fn explanation_gaps(state: &SimulationState) -> (usize, usize) {
    let templates: BTreeSet<&str> = state.config.argument_templates.iter().map(|t| t.id.as_str()).collect();
    let mut total = 0;
    let mut gaps = 0;
    for e in state.trace.events() {
        if let EventBody::OptionSelected { option, .. } = &e.body {
            total += 1;
            let resolvable = !e.reasons.is_empty()
                && e.reasons.iter().all(|r| {
                    r.split_once('@')
                        .is_some_and(|(t, o)| templates.contains(t) && o == option)
                });
            if !resolvable {
                gaps += 1;
            }
        }
    }
    (total, gaps)
}

pub fn metrics_text(state: &SimulationState) -> String {
    bctsim::cli::metrics_csv(state)
}

pub fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
