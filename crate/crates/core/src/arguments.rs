//! Weighted arguments for and against options.
//!
//! Templates are instantiated into [`Argument`]s when their trigger holds.
//! Undercut edges deactivate their target when the undercutter is itself
//! active; activity is resolved in topological order of the (acyclic)
//! undercut graph. [`aggregate`] sums active weights per option and ranks
//! options by net weight, ties broken by option id.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{Condition, ConditionContext};

/// Nets closer than this are treated as equal when ranking.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArgumentError {
    #[error("cyclic undercut involving argument {0}")]
    CyclicUndercut(String),
    #[error("argument {argument} targets unknown option {option}")]
    UnknownOption { argument: String, option: String },
    #[error("no options to aggregate")]
    NoOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Pro,
    Con,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub id: String,
    pub option: String,
    pub polarity: Polarity,
    pub weight: f64,
    pub grounds: Vec<String>,
    pub source_process: String,
    pub undercuts: Option<String>,
}

impl Argument {
    pub fn signed_weight(&self) -> f64 {
        match self.polarity {
            Polarity::Pro => self.weight,
            Polarity::Con => -self.weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSelector {
    Any,
    Is(String),
    AnyOf(Vec<String>),
}

impl OptionSelector {
    pub fn matches(&self, option: &str) -> bool {
        match self {
            OptionSelector::Any => true,
            OptionSelector::Is(o) => o == option,
            OptionSelector::AnyOf(os) => os.iter().any(|o| o == option),
        }
    }

    pub fn named(&self) -> Vec<&str> {
        match self {
            OptionSelector::Any => Vec::new(),
            OptionSelector::Is(o) => vec![o.as_str()],
            OptionSelector::AnyOf(os) => os.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgumentTemplate {
    pub id: String,
    pub process: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    pub trigger: Condition,
    pub polarity: Polarity,
    pub weight: f64,
    pub options: OptionSelector,
    /// Template whose argument (for the same option) this one undercuts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undercuts: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grounds: Vec<String>,
}

impl ArgumentTemplate {
    /// Instantiates this template for `option` regardless of its trigger.
    pub fn instantiate(&self, option: &str) -> Argument {
        Argument {
            id: argument_id(&self.id, option),
            option: option.to_string(),
            polarity: self.polarity,
            weight: self.weight,
            grounds: self.grounds.clone(),
            source_process: self.process.clone(),
            undercuts: self.undercuts.as_ref().map(|t| argument_id(t, option)),
        }
    }
}

pub fn argument_id(template: &str, option: &str) -> String {
    format!("{template}@{option}")
}

/// One argument per (template, option) pair whose trigger holds, in
/// template-major order. Undercut references to arguments that were not
/// built are dropped.
pub fn build_case(
    options: &[String],
    templates: &[ArgumentTemplate],
    ctx: &ConditionContext<'_>,
) -> Vec<Argument> {
    let mut args: Vec<Argument> = templates
        .iter()
        .filter(|t| t.trigger.holds(ctx))
        .flat_map(|t| {
            options
                .iter()
                .filter(|o| t.options.matches(o))
                .map(|o| t.instantiate(o))
        })
        .collect();
    let ids: BTreeSet<String> = args.iter().map(|a| a.id.clone()).collect();
    for a in &mut args {
        if a.undercuts.as_ref().is_some_and(|u| !ids.contains(u)) {
            a.undercuts = None;
        }
    }
    args
}

/// Ids of the active arguments: an argument is active iff no active
/// argument undercuts it.
pub fn active_set(args: &[Argument]) -> Result<BTreeSet<String>, ArgumentError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        InProgress,
        Done(bool),
    }

    let index: BTreeMap<&str, usize> = args
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let mut attackers: Vec<Vec<usize>> = vec![Vec::new(); args.len()];
    for (i, a) in args.iter().enumerate() {
        if let Some(&target) = a.undercuts.as_deref().and_then(|t| index.get(t)) {
            attackers[target].push(i);
        }
    }

    let mut marks = vec![Mark::Unvisited; args.len()];
    // Iterative post-order DFS over attacker edges.
    for root in 0..args.len() {
        if marks[root] != Mark::Unvisited {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        marks[root] = Mark::InProgress;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&att) = attackers[node].get(*next) {
                *next += 1;
                match marks[att] {
                    Mark::Unvisited => {
                        marks[att] = Mark::InProgress;
                        stack.push((att, 0));
                    }
                    Mark::InProgress => {
                        return Err(ArgumentError::CyclicUndercut(args[att].id.clone()))
                    }
                    Mark::Done(_) => {}
                }
            } else {
                let active = attackers[node]
                    .iter()
                    .all(|&a| marks[a] == Mark::Done(false));
                marks[node] = Mark::Done(active);
                stack.pop();
            }
        }
    }
    Ok(args
        .iter()
        .zip(&marks)
        .filter(|(_, m)| **m == Mark::Done(true))
        .map(|(a, _)| a.id.clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub argument: String,
    pub polarity: Polarity,
    pub weight: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub scores: BTreeMap<String, f64>,
    pub ranking: Vec<String>,
    pub recommended: String,
    pub explanation: BTreeMap<String, Vec<ExplanationEntry>>,
}

/// Orders nets descending; nets within [`WEIGHT_EPSILON`] tie and fall back
/// to the option id.
pub fn rank_options(scores: &BTreeMap<String, f64>) -> Vec<String> {
    let mut ranking: Vec<&String> = scores.keys().collect();
    ranking.sort_by(|a, b| {
        let (na, nb) = (scores[*a], scores[*b]);
        if (na - nb).abs() <= WEIGHT_EPSILON {
            a.cmp(b)
        } else {
            nb.total_cmp(&na)
        }
    });
    ranking.into_iter().cloned().collect()
}

pub fn aggregate(options: &[String], args: &[Argument]) -> Result<CaseReport, ArgumentError> {
    if options.is_empty() {
        return Err(ArgumentError::NoOptions);
    }
    if let Some(a) = args.iter().find(|a| !options.contains(&a.option)) {
        return Err(ArgumentError::UnknownOption {
            argument: a.id.clone(),
            option: a.option.clone(),
        });
    }
    let active = active_set(args)?;
    let mut scores: BTreeMap<String, f64> = options.iter().map(|o| (o.clone(), 0.0)).collect();
    let mut explanation: BTreeMap<String, Vec<ExplanationEntry>> =
        options.iter().map(|o| (o.clone(), Vec::new())).collect();
    for a in args {
        let is_active = active.contains(&a.id);
        if is_active {
            *scores.get_mut(&a.option).expect("option checked") += a.signed_weight();
        }
        explanation
            .get_mut(&a.option)
            .expect("option checked")
            .push(ExplanationEntry {
                argument: a.id.clone(),
                polarity: a.polarity,
                weight: a.weight,
                active: is_active,
            });
    }
    let ranking = rank_options(&scores);
    Ok(CaseReport {
        recommended: ranking[0].clone(),
        scores,
        ranking,
        explanation,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive reference for activity and aggregation. Works in integer
    //! tenths so sums are exact.
    use super::*;

    /// Every activation assignment satisfying "active iff no active
    /// undercutter"; on an acyclic graph there is exactly one.
    pub fn fixed_points(args: &[Argument]) -> Vec<BTreeSet<String>> {
        let n = args.len();
        assert!(n <= 16);
        (0u32..(1 << n))
            .filter_map(|mask| {
                let on = |i: usize| mask & (1 << i) != 0;
                let consistent = (0..n).all(|i| {
                    let attacked = (0..n).any(|j| {
                        on(j) && args[j].undercuts.as_deref() == Some(args[i].id.as_str())
                    });
                    on(i) == !attacked
                });
                consistent.then(|| {
                    (0..n)
                        .filter(|&i| on(i))
                        .map(|i| args[i].id.clone())
                        .collect()
                })
            })
            .collect()
    }

    pub fn tenths(w: f64) -> i64 {
        (w * 10.0).round() as i64
    }

    /// (ranking, recommended) from exact tenth arithmetic.
    pub fn ranking(options: &[String], args: &[Argument]) -> (Vec<String>, String) {
        let fps = fixed_points(args);
        assert_eq!(fps.len(), 1, "acyclic graphs have a unique fixed point");
        let active = &fps[0];
        let mut nets: Vec<(String, i64)> = options
            .iter()
            .map(|o| {
                let net = args
                    .iter()
                    .filter(|a| &a.option == o && active.contains(&a.id))
                    .map(|a| match a.polarity {
                        Polarity::Pro => tenths(a.weight),
                        Polarity::Con => -tenths(a.weight),
                    })
                    .sum();
                (o.clone(), net)
            })
            .collect();
        nets.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let ranking: Vec<String> = nets.into_iter().map(|(o, _)| o).collect();
        let rec = ranking[0].clone();
        (ranking, rec)
    }
}
