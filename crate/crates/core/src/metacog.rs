//! Reasoning trace, metacognitive monitoring and control.
//!
//! Every layer appends typed events to a [`ReasoningTrace`]. Monitoring scans
//! the appraisal, goal and tendency events recorded since a cursor and checks
//! each against the agent's commitments. Control answers a finding with the
//! first matching entry of the countermeasure library.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{ActionTendency, Appraisal, TendencyAction, Valence};
use crate::agent::SimulationState;
use crate::beliefs::BeliefValue;
use crate::world::{EventEffect, GoalVariant, PlacementPredicate, WorldAction, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("event at tick {got} recorded after tick {last}")]
    OutOfOrder { last: u64, got: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    World,
    Reactive,
    Deliberative,
    Metacognitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventRef {
    pub tick: u64,
    pub seq: u32,
}

/// Predicted consequence of a single action for the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionEffect {
    None,
    Abandon,
    UndoPlacement,
}

impl ActionEffect {
    /// Single-action what-if: abandoning ends the task; picking up an object
    /// that already satisfies the active goal undoes progress.
    pub fn classify(action: &TendencyAction, world: &WorldState, predicate: &PlacementPredicate) -> Self {
        match action {
            TendencyAction::World(WorldAction::Abandon) => ActionEffect::Abandon,
            TendencyAction::World(WorldAction::PickUp(id)) => match world.objects.get(id) {
                Some(o) if world.object_satisfies(o, predicate) => ActionEffect::UndoPlacement,
                _ => ActionEffect::None,
            },
            _ => ActionEffect::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    WorldEventFired {
        effect: EventEffect,
    },
    BeliefChange {
        atom: String,
        previous: Option<BeliefValue>,
        value: Option<BeliefValue>,
    },
    AttentionShift {
        process: String,
        phase: String,
        target: Option<String>,
    },
    AppraisalChange {
        process: String,
        rule: String,
        atom: String,
        valence: Valence,
        magnitude: f64,
        label: String,
    },
    GoalChange {
        process: String,
        label: String,
        option: String,
        accepted: bool,
        reason: Option<String>,
    },
    OptionSet {
        options: Vec<String>,
        scores: BTreeMap<String, f64>,
        recommended: Option<String>,
    },
    OptionSelected {
        option: String,
        tendency: String,
        process: String,
        force: f64,
    },
    TendencyInjected {
        tendency: String,
        process: String,
        option: String,
        action: String,
        label: String,
        base_urgency: f64,
        effect: ActionEffect,
        role: String,
    },
    TendencyExpired {
        tendency: String,
        reason: String,
    },
    ActionExecuted {
        tendency: Option<String>,
        process: Option<String>,
        option: Option<String>,
        action: String,
        outcome: String,
        role: String,
    },
    InconsistencyDetected {
        event: EventRef,
        item: FlaggedKind,
        option: String,
        process: String,
        commitment: String,
    },
    CountermeasureApplied {
        finding: EventRef,
        countermeasure: Option<String>,
        outcome: String,
        detail: String,
    },
    DeliberationRequested {
        reason: String,
    },
    NoTendency {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::WorldEventFired { .. } => "WorldEventFired",
            EventBody::BeliefChange { .. } => "BeliefChange",
            EventBody::AttentionShift { .. } => "AttentionShift",
            EventBody::AppraisalChange { .. } => "AppraisalChange",
            EventBody::GoalChange { .. } => "GoalChange",
            EventBody::OptionSet { .. } => "OptionSet",
            EventBody::OptionSelected { .. } => "OptionSelected",
            EventBody::TendencyInjected { .. } => "TendencyInjected",
            EventBody::TendencyExpired { .. } => "TendencyExpired",
            EventBody::ActionExecuted { .. } => "ActionExecuted",
            EventBody::InconsistencyDetected { .. } => "InconsistencyDetected",
            EventBody::CountermeasureApplied { .. } => "CountermeasureApplied",
            EventBody::DeliberationRequested { .. } => "DeliberationRequested",
            EventBody::NoTendency { .. } => "NoTendency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub seq: u32,
    pub layer: Layer,
    #[serde(flatten)]
    pub body: EventBody,
    pub reasons: Vec<String>,
}

impl TraceEvent {
    pub fn at(&self) -> EventRef {
        EventRef {
            tick: self.tick,
            seq: self.seq,
        }
    }
}

/// Append-only event log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    events: Vec<TraceEvent>,
}

impl ReasoningTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn find(&self, at: EventRef) -> Option<&TraceEvent> {
        self.events
            .binary_search_by(|e| e.at().cmp(&at))
            .ok()
            .map(|i| &self.events[i])
    }

    /// Appends an event, assigning the next within-tick sequence number.
    pub fn record(
        &mut self,
        tick: u64,
        layer: Layer,
        body: EventBody,
        reasons: Vec<String>,
    ) -> Result<EventRef, TraceError> {
        let seq = match self.events.last() {
            Some(last) if tick < last.tick => {
                return Err(TraceError::OutOfOrder {
                    last: last.tick,
                    got: tick,
                })
            }
            Some(last) if tick == last.tick => last.seq + 1,
            _ => 0,
        };
        self.events.push(TraceEvent {
            tick,
            seq,
            layer,
            body,
            reasons,
        });
        Ok(EventRef { tick, seq })
    }

    /// One JSON object per line, LF-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<TraceEvent>, _>>()?;
        Ok(ReasoningTrace { events })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Commitment {
    pub atom: String,
    pub required_valence: Valence,
    pub origin: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlaggedKind {
    Appraisal,
    GoalChange,
    Tendency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountermeasurePattern {
    pub kind: FlaggedKind,
    /// Restricts the match to one option/atom; any when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountermeasureAction {
    /// Re-describe the situation: a con argument from `template` against the
    /// violating option.
    Redescription {
        template: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
    /// Switch planning to another goal variant and replan this tick.
    Replanning { variant: GoalVariant },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountermeasureSpec {
    pub id: String,
    pub matches: CountermeasurePattern,
    pub action: CountermeasureAction,
}

impl CountermeasureSpec {
    pub fn matches(&self, finding: &Inconsistency) -> bool {
        self.matches.kind == finding.item.kind
            && self
                .matches
                .option
                .as_ref()
                .is_none_or(|o| o == &finding.item.option)
    }
}

/// The item a consistency check looks at.
#[derive(Debug, Clone, Copy)]
pub enum CheckItem<'a> {
    Appraisal { atom: &'a str, valence: Valence },
    GoalChange { option: &'a str },
    Tendency { option: &'a str, effect: ActionEffect },
}

impl<'a> CheckItem<'a> {
    pub fn appraisal(a: &'a Appraisal) -> Self {
        CheckItem::Appraisal {
            atom: &a.atom,
            valence: a.valence,
        }
    }

    pub fn tendency(t: &'a ActionTendency, effect: ActionEffect) -> Self {
        CheckItem::Tendency {
            option: &t.option,
            effect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedItem {
    pub kind: FlaggedKind,
    pub option: String,
    pub process: String,
    pub event: Option<EventRef>,
    /// Tendency id, when the item is a tendency.
    pub tendency: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub commitment: Commitment,
    pub item: FlaggedItem,
}

/// Returns the first commitment `item` violates.
///
/// Appraisals violate a commitment on the same atom with the opposite
/// valence. A desirable state violates a commitment that requires its option
/// to be evaluated negatively. A tendency violates the first positive
/// commitment when its predicted effect abandons the task or undoes a
/// correct placement.
pub fn check_consistency<'c>(item: &CheckItem<'_>, commitments: &'c [Commitment]) -> Option<&'c Commitment> {
    match *item {
        CheckItem::Appraisal { atom, valence } => commitments
            .iter()
            .find(|c| c.atom == atom && c.required_valence != valence),
        CheckItem::GoalChange { option } => commitments
            .iter()
            .find(|c| c.atom == option && c.required_valence == Valence::Negative),
        CheckItem::Tendency { effect, .. } => match effect {
            ActionEffect::None => None,
            ActionEffect::Abandon | ActionEffect::UndoPlacement => commitments
                .iter()
                .find(|c| c.required_valence == Valence::Positive),
        },
    }
}

/// Reads back the check item and flagged metadata from a trace event, for
/// the kinds monitoring judges.
pub fn flagged_item(event: &TraceEvent) -> Option<(CheckItem<'_>, FlaggedItem)> {
    let (item, kind, option, process, tendency) = match &event.body {
        EventBody::AppraisalChange {
            process,
            atom,
            valence,
            ..
        } => (
            CheckItem::Appraisal {
                atom,
                valence: *valence,
            },
            FlaggedKind::Appraisal,
            atom,
            process,
            None,
        ),
        EventBody::GoalChange {
            process,
            option,
            accepted: true,
            ..
        } => (
            CheckItem::GoalChange { option },
            FlaggedKind::GoalChange,
            option,
            process,
            None,
        ),
        EventBody::TendencyInjected {
            tendency,
            process,
            option,
            effect,
            ..
        } => (
            CheckItem::Tendency {
                option,
                effect: *effect,
            },
            FlaggedKind::Tendency,
            option,
            process,
            Some(tendency.clone()),
        ),
        _ => return None,
    };
    Some((
        item,
        FlaggedItem {
            kind,
            option: option.clone(),
            process: process.clone(),
            event: Some(event.at()),
            tendency,
        },
    ))
}

/// Position in the trace up to which events have been analysed.
pub type Cursor = usize;

/// Checks every flagged event after `since`. Returns the findings and the
/// new cursor; re-running from the returned cursor yields nothing new.
pub fn monitor(trace: &ReasoningTrace, commitments: &[Commitment], since: Cursor) -> (Vec<Inconsistency>, Cursor) {
    let findings = trace.events()[since.min(trace.len())..]
        .iter()
        .filter_map(flagged_item)
        .filter_map(|(item, flagged)| {
            check_consistency(&item, commitments).map(|c| Inconsistency {
                commitment: c.clone(),
                item: flagged,
            })
        })
        .collect();
    (findings, trace.len())
}

/// Outcome of applying the library to one finding.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlOutcome {
    None,
    Redescription { argument: String, weight: f64 },
    Replanning { variant: GoalVariant },
}

/// Applies the first library entry matching `finding` to `state` and records
/// a `CountermeasureApplied` event.
pub fn control(
    finding: &Inconsistency,
    library: &[CountermeasureSpec],
    state: &mut SimulationState,
) -> ControlOutcome {
    let tick = state.world.tick;
    let finding_ref = finding.item.event.unwrap_or(EventRef { tick, seq: 0 });
    let Some(cm) = library.iter().find(|c| c.matches(finding)) else {
        state.record(
            tick,
            Layer::Metacognitive,
            EventBody::CountermeasureApplied {
                finding: finding_ref,
                countermeasure: None,
                outcome: "none".into(),
                detail: format!("no countermeasure matches {:?} on {}", finding.item.kind, finding.item.option),
            },
        );
        return ControlOutcome::None;
    };
    let outcome = match &cm.action {
        CountermeasureAction::Redescription { template, weight } => {
            let weight = state
                .weight_overrides
                .get(template)
                .copied()
                .or(*weight)
                .unwrap_or(finding.commitment.weight);
            let id = state.add_redescription(template, &finding.item.option, weight);
            ControlOutcome::Redescription {
                argument: id,
                weight,
            }
        }
        CountermeasureAction::Replanning { variant } => {
            state.goal_variant = *variant;
            match &finding.item.tendency {
                Some(t) => state.withdraw_tendency(t, "discarded by countermeasure"),
                None => state.withdraw_option(&finding.item.option, "discarded by countermeasure"),
            }
            state.request_deliberation(format!("countermeasure {}", cm.id));
            ControlOutcome::Replanning { variant: *variant }
        }
    };
    let (name, detail) = match &outcome {
        ControlOutcome::Redescription { argument, weight } => {
            ("redescription", format!("{argument} weight {weight}"))
        }
        ControlOutcome::Replanning { variant } => ("replanning", format!("goal variant {variant:?}")),
        ControlOutcome::None => unreachable!(),
    };
    state.record(
        tick,
        Layer::Metacognitive,
        EventBody::CountermeasureApplied {
            finding: finding_ref,
            countermeasure: Some(cm.id.clone()),
            outcome: name.into(),
            detail,
        },
    );
    outcome
}
