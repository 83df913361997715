//! Belief store and the condition language used by reactive rules,
//! appraisal rules and argument templates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::affect::{Appraisal, Valence};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BeliefValue {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl fmt::Display for BeliefValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeliefValue::Bool(b) => write!(f, "{b}"),
            BeliefValue::Int(i) => write!(f, "{i}"),
            BeliefValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Belief {
    pub value: BeliefValue,
    pub changed_tick: u64,
}

/// Atom → value, with the tick of the last change.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefStore {
    atoms: BTreeMap<String, Belief>,
}

/// One entry of a belief diff: `None` means absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefDelta {
    pub atom: String,
    pub previous: Option<BeliefValue>,
    pub value: Option<BeliefValue>,
}

impl BeliefStore {
    pub fn get(&self, atom: &str) -> Option<&BeliefValue> {
        self.atoms.get(atom).map(|b| &b.value)
    }

    pub fn changed_tick(&self, atom: &str) -> Option<u64> {
        self.atoms.get(atom).map(|b| b.changed_tick)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Belief)> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Replaces the store contents with `percepts`, returning every atom
    /// whose value changed (sorted by atom).
    pub fn sync(&mut self, percepts: BTreeMap<String, BeliefValue>, tick: u64) -> Vec<BeliefDelta> {
        let mut deltas = Vec::new();
        let atoms: BTreeSet<String> = self
            .atoms
            .keys()
            .chain(percepts.keys())
            .cloned()
            .collect();
        for atom in atoms {
            let previous = self.get(&atom).cloned();
            let value = percepts.get(&atom).cloned();
            if previous == value {
                continue;
            }
            match &value {
                Some(v) => {
                    self.atoms.insert(
                        atom.clone(),
                        Belief {
                            value: v.clone(),
                            changed_tick: tick,
                        },
                    );
                }
                None => {
                    self.atoms.remove(&atom);
                }
            }
            deltas.push(BeliefDelta {
                atom,
                previous,
                value,
            });
        }
        deltas
    }
}

/// Predicate over beliefs, appraisals, proposals and commitments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Always,
    Never,
    Belief {
        atom: String,
        is: BeliefValue,
    },
    BeliefAbove {
        atom: String,
        value: i64,
    },
    /// Some process currently holds an appraisal of `atom` (of the given
    /// valence, if set).
    Appraised {
        atom: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        valence: Option<Valence>,
    },
    /// Some process has `option` among its candidate goals.
    Proposed(String),
    /// A commitment on `atom` exists.
    Committed(String),
    All(Vec<Condition>),
    Any(Vec<Condition>),
    Not(Box<Condition>),
}

/// Everything a condition may look at.
#[derive(Debug, Clone, Copy)]
pub struct ConditionContext<'a> {
    pub beliefs: &'a BeliefStore,
    pub appraisals: &'a [Appraisal],
    pub proposed: &'a BTreeSet<String>,
    pub committed: &'a BTreeSet<String>,
}

impl Condition {
    pub fn holds(&self, ctx: &ConditionContext<'_>) -> bool {
        match self {
            Condition::Always => true,
            Condition::Never => false,
            Condition::Belief { atom, is } => ctx.beliefs.get(atom) == Some(is),
            Condition::BeliefAbove { atom, value } => {
                matches!(ctx.beliefs.get(atom), Some(BeliefValue::Int(v)) if v > value)
            }
            Condition::Appraised { atom, valence } => ctx
                .appraisals
                .iter()
                .any(|a| &a.atom == atom && valence.is_none_or(|v| a.valence == v)),
            Condition::Proposed(option) => ctx.proposed.contains(option),
            Condition::Committed(atom) => ctx.committed.contains(atom),
            Condition::All(cs) => cs.iter().all(|c| c.holds(ctx)),
            Condition::Any(cs) => cs.iter().any(|c| c.holds(ctx)),
            Condition::Not(c) => !c.holds(ctx),
        }
    }

    /// Visits every leaf reference for validation.
    pub fn references(&self, out: &mut Vec<ConditionRef>) {
        match self {
            Condition::Always | Condition::Never => {}
            Condition::Belief { atom, .. } | Condition::BeliefAbove { atom, .. } => {
                out.push(ConditionRef::Belief(atom.clone()))
            }
            Condition::Appraised { atom, .. } => out.push(ConditionRef::Appraised(atom.clone())),
            Condition::Proposed(o) => out.push(ConditionRef::Option(o.clone())),
            Condition::Committed(a) => out.push(ConditionRef::Commitment(a.clone())),
            Condition::All(cs) | Condition::Any(cs) => {
                cs.iter().for_each(|c| c.references(out))
            }
            Condition::Not(c) => c.references(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionRef {
    Belief(String),
    Appraised(String),
    Option(String),
    Commitment(String),
}

/// Splits `rel(arg)` into `("rel", Some("arg"))`; bare atoms have no argument.
pub fn split_atom(atom: &str) -> (&str, Option<&str>) {
    match atom.split_once('(') {
        Some((rel, rest)) => (rel, rest.strip_suffix(')')),
        None => (atom, None),
    }
}
