//! Affective processes: the attend → evaluate → prepare cycle.
//!
//! Each call to [`run_affective_cycle`] advances a process by at most one
//! phase. Evaluation turns appraisal rules into [`Appraisal`]s; preparation
//! turns the appraisals just made into desirable states, filters them to
//! achievable candidate goals and emits one [`ActionTendency`] per candidate.

use serde::{Deserialize, Serialize};

use crate::arguments::{Argument, Polarity};
use crate::beliefs::{Condition, ConditionContext};
use crate::world::WorldAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Valence {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Appraisal {
    pub atom: String,
    pub valence: Valence,
    pub magnitude: f64,
    pub source_process: String,
    pub tick: u64,
    pub label: String,
    pub rule: String,
}

/// What a desire or reactive rule wants done.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpec {
    World(WorldAction),
    /// A non-spatial act, executed as an idle world step.
    Act(String),
    /// The next step of the agent's current plan.
    Plan,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TendencyAction {
    World(WorldAction),
    Act(String),
}

impl TendencyAction {
    pub fn encode(&self) -> String {
        match self {
            TendencyAction::World(a) => a.encode(),
            TendencyAction::Act(a) => format!("act:{a}"),
        }
    }

    /// The world step this action performs.
    pub fn world_action(&self) -> WorldAction {
        match self {
            TendencyAction::World(a) => a.clone(),
            TendencyAction::Act(_) => WorldAction::Idle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesireSpec {
    pub label: String,
    pub option: String,
    pub action: ActionSpec,
    /// Only achievable once the relaxed goal variant is active.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub requires_relaxed: bool,
    /// Goal refs this desire directly contradicts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts_with: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppraisalRule {
    pub id: String,
    pub process: String,
    pub atom: String,
    pub when: Condition,
    pub valence: Valence,
    pub magnitude: f64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub desires: Vec<DesireSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Attending,
    Evaluating,
    Preparing,
}

impl Phase {
    pub fn next(self) -> Phase {
        match self {
            Phase::Attending => Phase::Evaluating,
            Phase::Evaluating => Phase::Preparing,
            Phase::Preparing => Phase::Attending,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Attending => "attending",
            Phase::Evaluating => "evaluating",
            Phase::Preparing => "preparing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesirableState {
    pub label: String,
    pub option: String,
    pub accepted: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGoal {
    pub label: String,
    pub option: String,
    pub action: ActionSpec,
    pub base_urgency: f64,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectiveProcess {
    pub id: String,
    pub priority_rank: u32,
    pub goal_ref: String,
    pub phase: Phase,
    pub attention_target: Option<String>,
    pub active_appraisals: Vec<Appraisal>,
    /// Appraisals made by the most recent evaluating step.
    pub triggering: Vec<Appraisal>,
    pub desirable_states: Vec<DesirableState>,
    pub candidate_goals: Vec<CandidateGoal>,
}

impl AffectiveProcess {
    pub fn new(id: impl Into<String>, priority_rank: u32, goal_ref: impl Into<String>) -> Self {
        AffectiveProcess {
            id: id.into(),
            priority_rank,
            goal_ref: goal_ref.into(),
            phase: Phase::Attending,
            attention_target: None,
            active_appraisals: Vec::new(),
            triggering: Vec::new(),
            desirable_states: Vec::new(),
            candidate_goals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTendency {
    pub id: String,
    pub action: TendencyAction,
    pub option: String,
    pub label: String,
    pub source_process: String,
    pub base_urgency: f64,
    pub supporting_arguments: Vec<String>,
    pub created_tick: u64,
    pub force: f64,
    /// Plan this step was taken from, if any.
    pub plan_id: Option<u64>,
}

impl ActionTendency {
    pub fn age(&self, tick: u64) -> u64 {
        tick.saturating_sub(self.created_tick)
    }

    pub fn expired(&self, tick: u64, ttl: u64) -> bool {
        self.age(tick) > ttl
    }
}

/// What-if checks the preparation step relies on.
pub trait PlanOracle {
    /// Next step of the plan for the active goal, with the plan id.
    fn plan_step(&self) -> Option<(WorldAction, u64)>;
    /// Whether a single world action is legal right now.
    fn achievable(&self, action: &WorldAction) -> bool;
}

pub struct AffectEnv<'a> {
    pub tick: u64,
    /// Appraisal rules of all processes; each process only uses its own.
    pub rules: &'a [AppraisalRule],
    pub cond: ConditionContext<'a>,
    pub relaxed_active: bool,
    pub planner: &'a dyn PlanOracle,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleOutput {
    /// The process changed phase.
    pub advanced: bool,
    pub attention: Option<String>,
    pub appraisals: Vec<Appraisal>,
    pub desirable_states: Vec<DesirableState>,
    pub tendencies: Vec<ActionTendency>,
}

fn own_rules<'a>(proc: &'a AffectiveProcess, env: &'a AffectEnv<'_>) -> impl Iterator<Item = &'a AppraisalRule> {
    env.rules.iter().filter(move |r| r.process == proc.id)
}

/// Advances `proc` by one phase.
pub fn run_affective_cycle(proc: &AffectiveProcess, env: &AffectEnv<'_>) -> (AffectiveProcess, CycleOutput) {
    let mut next = proc.clone();
    let mut out = CycleOutput::default();
    match proc.phase {
        Phase::Attending => {
            // Retract appraisals whose grounds have gone.
            let stale: Vec<String> = next
                .active_appraisals
                .iter()
                .filter(|a| {
                    own_rules(proc, env)
                        .find(|r| r.id == a.rule)
                        .is_none_or(|r| !r.when.holds(&env.cond))
                })
                .map(|a| a.rule.clone())
                .collect();
            next.active_appraisals.retain(|a| !stale.contains(&a.rule));
            next.candidate_goals.retain(|g| !stale.contains(&g.rule));

            // Most salient newly applicable rule; ties keep declaration order.
            let mut best: Option<&AppraisalRule> = None;
            for rule in own_rules(proc, env) {
                let already = next.active_appraisals.iter().any(|a| a.rule == rule.id);
                if already || !rule.when.holds(&env.cond) {
                    continue;
                }
                if best.is_none_or(|b| rule.magnitude > b.magnitude) {
                    best = Some(rule);
                }
            }
            if let Some(rule) = best {
                next.attention_target = Some(rule.atom.clone());
                next.phase = Phase::Evaluating;
                out.attention = next.attention_target.clone();
                out.advanced = true;
            }
        }
        Phase::Evaluating => {
            let target = proc.attention_target.clone().unwrap_or_default();
            let appraisals: Vec<Appraisal> = own_rules(proc, env)
                .filter(|r| r.atom == target && r.when.holds(&env.cond))
                .map(|r| Appraisal {
                    atom: r.atom.clone(),
                    valence: r.valence,
                    magnitude: r.magnitude,
                    source_process: proc.id.clone(),
                    tick: env.tick,
                    label: r.label.clone(),
                    rule: r.id.clone(),
                })
                .collect();
            for a in &appraisals {
                next.active_appraisals.retain(|old| old.rule != a.rule);
                next.active_appraisals.push(a.clone());
            }
            next.triggering = appraisals.clone();
            next.phase = Phase::Preparing;
            out.appraisals = appraisals;
            out.advanced = true;
        }
        Phase::Preparing => {
            if !next.triggering.is_empty() {
                let (states, goals, tendencies) = prepare_action(&next, env);
                next.desirable_states = states.clone();
                next.candidate_goals = goals;
                out.desirable_states = states;
                out.tendencies = tendencies;
            }
            next.triggering.clear();
            next.phase = Phase::Attending;
            out.advanced = true;
        }
    }
    (next, out)
}

/// Resolves a candidate goal into a concrete tendency, if achievable now.
pub fn resolve_candidate(
    goal: &CandidateGoal,
    proc: &AffectiveProcess,
    env: &AffectEnv<'_>,
) -> Option<ActionTendency> {
    let (action, plan_id) = match &goal.action {
        ActionSpec::World(a) => (TendencyAction::World(a.clone()), None),
        ActionSpec::Act(a) => (TendencyAction::Act(a.clone()), None),
        ActionSpec::Plan => {
            let (a, id) = env.planner.plan_step()?;
            (TendencyAction::World(a), Some(id))
        }
    };
    Some(ActionTendency {
        id: String::new(),
        action,
        option: goal.option.clone(),
        label: goal.label.clone(),
        source_process: proc.id.clone(),
        base_urgency: goal.base_urgency,
        supporting_arguments: Vec::new(),
        created_tick: env.tick,
        force: goal.base_urgency,
        plan_id,
    })
}

/// The three preparation steps: list desirable states, keep the achievable
/// non-conflicting ones as candidate goals, and propose each candidate's
/// first action.
pub fn prepare_action(
    proc: &AffectiveProcess,
    env: &AffectEnv<'_>,
) -> (Vec<DesirableState>, Vec<CandidateGoal>, Vec<ActionTendency>) {
    let urgency = proc
        .triggering
        .iter()
        .map(|a| a.magnitude)
        .fold(0.0, f64::max);

    // Step 1: desirable states declared by the rules that just fired.
    let mut desires: Vec<(&DesireSpec, &str)> = Vec::new();
    for appraisal in &proc.triggering {
        let Some(rule) = own_rules(proc, env).find(|r| r.id == appraisal.rule) else {
            continue;
        };
        for d in &rule.desires {
            if !desires.iter().any(|(seen, _)| seen.option == d.option) {
                desires.push((d, rule.id.as_str()));
            }
        }
    }

    // Step 2: achievability and direct conflict with the process goal.
    let mut states = Vec::new();
    let mut goals = Vec::new();
    for (d, rule) in desires {
        let reason = if d.conflicts_with.contains(&proc.goal_ref) {
            Some(format!("conflicts with {}", proc.goal_ref))
        } else if d.requires_relaxed && !env.relaxed_active {
            Some("requires relaxed goal".to_string())
        } else {
            match &d.action {
                ActionSpec::World(a) if !env.planner.achievable(a) => Some("not achievable".to_string()),
                ActionSpec::Plan if env.planner.plan_step().is_none() => Some("no plan".to_string()),
                _ => None,
            }
        };
        states.push(DesirableState {
            label: d.label.clone(),
            option: d.option.clone(),
            accepted: reason.is_none(),
            reason,
        });
        if states.last().is_some_and(|s| s.accepted) {
            goals.push(CandidateGoal {
                label: d.label.clone(),
                option: d.option.clone(),
                action: d.action.clone(),
                base_urgency: urgency,
                rule: rule.to_string(),
            });
        }
    }

    // Step 3: one tendency per surviving candidate.
    let tendencies = goals
        .iter()
        .filter_map(|g| resolve_candidate(g, proc, env))
        .collect();
    (states, goals, tendencies)
}

/// `max(0, base + Σ active pro − Σ active con)` over arguments on the
/// tendency's option. `active_args` must already be filtered to the active set.
pub fn compute_force<'a>(tendency: &ActionTendency, active_args: impl IntoIterator<Item = &'a Argument>) -> f64 {
    let net: f64 = active_args
        .into_iter()
        .filter(|a| a.option == tendency.option)
        .map(|a| match a.polarity {
            Polarity::Pro => a.weight,
            Polarity::Con => -a.weight,
        })
        .sum();
    (tendency.base_urgency + net).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::{BeliefStore, BeliefValue};
    use proptest::prelude::*;
    use std::collections::{BTreeMap, BTreeSet};

    struct NoPlan;
    impl PlanOracle for NoPlan {
        fn plan_step(&self) -> Option<(WorldAction, u64)> {
            None
        }
        fn achievable(&self, _: &WorldAction) -> bool {
            true
        }
    }

    fn tendency(base: f64) -> ActionTendency {
        ActionTendency {
            id: "t".into(),
            action: TendencyAction::Act("smoke".into()),
            option: "smoke".into(),
            label: String::new(),
            source_process: "proc1".into(),
            base_urgency: base,
            supporting_arguments: vec![],
            created_tick: 0,
            force: base,
            plan_id: None,
        }
    }

    fn arg(polarity: Polarity, weight: f64) -> Argument {
        Argument {
            id: format!("{polarity:?}{weight}"),
            option: "smoke".into(),
            polarity,
            weight,
            grounds: vec![],
            source_process: "proc1".into(),
            undercuts: None,
        }
    }

    #[test]
    fn force_examples() {
        assert_eq!(compute_force(&tendency(0.5), &[]), 0.5);
        let args = [arg(Polarity::Pro, 0.6), arg(Polarity::Con, 1.5)];
        assert_eq!(compute_force(&tendency(0.5), &args), 0.0);
        let args = [arg(Polarity::Pro, 0.6), arg(Polarity::Pro, 0.5), arg(Polarity::Con, 0.8)];
        assert!((compute_force(&tendency(0.2), &args) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn force_is_monotone_and_floored(
            base in 0.0f64..2.0,
            pros in prop::collection::vec(0.0f64..2.0, 0..5),
            cons in prop::collection::vec(0.0f64..2.0, 0..5),
            extra in 0.0f64..2.0,
        ) {
            let mut args: Vec<Argument> = pros.iter().map(|w| arg(Polarity::Pro, *w)).collect();
            args.extend(cons.iter().map(|w| arg(Polarity::Con, *w)));
            let t = tendency(base);
            let f = compute_force(&t, &args);
            prop_assert!(f >= 0.0);
            let mut more_pro = args.clone();
            more_pro.push(arg(Polarity::Pro, extra));
            prop_assert!(compute_force(&t, &more_pro) >= f - 1e-12);
            let mut more_con = args.clone();
            more_con.push(arg(Polarity::Con, extra));
            prop_assert!(compute_force(&t, &more_con) <= f + 1e-12);
        }
    }

    fn smoking_rules() -> Vec<AppraisalRule> {
        serde_json::from_str(
            r#"[
            {"id": "bad_mood", "process": "proc1", "atom": "current_situation",
             "when": {"belief": {"atom": "row_with_colleague", "is": true}},
             "valence": "negative", "magnitude": 0.6, "label": "bad mood",
             "desires": [{"label": "cigarette", "option": "cigarette", "action": {"act": "imagine_cigarette"}}]},
            {"id": "unrelated", "process": "proc2", "atom": "weather",
             "when": "always", "valence": "positive", "magnitude": 0.9, "label": "sunny"}
            ]"#,
        )
        .unwrap()
    }

    #[test]
    fn non_smoking_first_iteration() {
        let rules = smoking_rules();
        let mut beliefs = BeliefStore::default();
        beliefs.sync(
            BTreeMap::from([("row_with_colleague".to_string(), BeliefValue::Bool(true))]),
            0,
        );
        let empty = BTreeSet::new();
        let env = AffectEnv {
            tick: 3,
            rules: &rules,
            cond: ConditionContext {
                beliefs: &beliefs,
                appraisals: &[],
                proposed: &empty,
                committed: &empty,
            },
            relaxed_active: false,
            planner: &NoPlan,
        };
        let proc = AffectiveProcess::new("proc1", 1, "feel_better");
        let (p, out) = run_affective_cycle(&proc, &env);
        assert_eq!(p.phase, Phase::Evaluating);
        assert_eq!(out.attention.as_deref(), Some("current_situation"));
        assert!(out.appraisals.is_empty());

        let (p, out) = run_affective_cycle(&p, &env);
        assert_eq!(p.phase, Phase::Preparing);
        assert_eq!(out.appraisals.len(), 1);
        let a = &out.appraisals[0];
        assert_eq!((a.atom.as_str(), a.valence, a.label.as_str()), ("current_situation", Valence::Negative, "bad mood"));
        assert_eq!(a.source_process, "proc1");
        assert_eq!(a.tick, 3);

        let (p, out) = run_affective_cycle(&p, &env);
        assert_eq!(p.phase, Phase::Attending);
        assert!(out.appraisals.is_empty());
        assert_eq!(out.tendencies.len(), 1);
        assert_eq!(out.tendencies[0].label, "cigarette");
        assert_eq!(out.tendencies[0].base_urgency, 0.6);
        assert_eq!(out.tendencies[0].source_process, "proc1");

        // Nothing new to attend to: no-op.
        let (p2, out) = run_affective_cycle(&p, &env);
        assert_eq!(p2, p);
        assert!(!out.advanced);
    }

    #[test]
    fn no_matching_rule_is_noop() {
        let rules = smoking_rules();
        let beliefs = BeliefStore::default();
        let empty = BTreeSet::new();
        let env = AffectEnv {
            tick: 0,
            rules: &rules,
            cond: ConditionContext {
                beliefs: &beliefs,
                appraisals: &[],
                proposed: &empty,
                committed: &empty,
            },
            relaxed_active: false,
            planner: &NoPlan,
        };
        let proc = AffectiveProcess::new("proc1", 1, "feel_better");
        let (p, out) = run_affective_cycle(&proc, &env);
        assert_eq!(p, proc);
        assert_eq!(out, CycleOutput::default());
    }

    #[test]
    fn phases_cycle_without_skipping_evaluation() {
        let mut phase = Phase::Attending;
        let mut seen = Vec::new();
        for _ in 0..6 {
            seen.push(phase);
            phase = phase.next();
        }
        for w in seen.windows(2) {
            assert!(!(w[0] == Phase::Evaluating && w[1] == Phase::Evaluating));
            if w[0] == Phase::Attending {
                assert_eq!(w[1], Phase::Evaluating);
            }
        }
    }

    #[test]
    fn unachievable_and_conflicting_desires_filtered() {
        let rules: Vec<AppraisalRule> = serde_json::from_str(
            r#"[{"id": "r", "process": "p", "atom": "x", "when": "always",
                 "valence": "negative", "magnitude": 0.4, "label": "bad",
                 "desires": [
                   {"label": "later", "option": "alt", "action": {"act": "alt"}, "requires_relaxed": true},
                   {"label": "mine", "option": "self", "action": {"act": "self"}, "conflicts_with": ["g"]},
                   {"label": "plan", "option": "tidy", "action": "plan"}
                 ]}]"#,
        )
        .unwrap();
        let beliefs = BeliefStore::default();
        let empty = BTreeSet::new();
        let env = AffectEnv {
            tick: 0,
            rules: &rules,
            cond: ConditionContext {
                beliefs: &beliefs,
                appraisals: &[],
                proposed: &empty,
                committed: &empty,
            },
            relaxed_active: false,
            planner: &NoPlan,
        };
        let mut proc = AffectiveProcess::new("p", 0, "g");
        proc.phase = Phase::Preparing;
        proc.triggering = vec![Appraisal {
            atom: "x".into(),
            valence: Valence::Negative,
            magnitude: 0.4,
            source_process: "p".into(),
            tick: 0,
            label: "bad".into(),
            rule: "r".into(),
        }];
        let (states, goals, tendencies) = prepare_action(&proc, &env);
        assert_eq!(states.len(), 3);
        assert!(states.iter().all(|s| !s.accepted));
        assert!(goals.is_empty());
        assert!(tendencies.is_empty());
    }
}
