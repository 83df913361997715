//! The three-layer agent and its per-tick loop.
//!
//! A tick runs: scheduled events, perception, reactive rules, deliberation
//! (on cadence or on request), metacognitive monitoring and control, then
//! force-based selection of one pooled tendency and its execution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{
    compute_force, run_affective_cycle, ActionSpec, ActionTendency, AffectEnv, AffectiveProcess, Appraisal,
    AppraisalRule, PlanOracle, TendencyAction,
};
use crate::arguments::{active_set, aggregate, build_case, Argument, ArgumentTemplate, WEIGHT_EPSILON};
use crate::beliefs::{BeliefStore, BeliefValue, Condition, ConditionContext};
use crate::metacog::{
    control, monitor, ActionEffect, Commitment, CountermeasureSpec, EventBody, EventRef, Layer, ReasoningTrace,
};
use crate::planner::{make_plan, simulate_whatif, Plan};
use crate::world::{GoalSpec, GoalVariant, WorldAction, WorldEvent, WorldState};

/// Upper bound on monitor/control passes within one tick.
const MAX_METACOG_PASSES: usize = 4;
/// Consecutive quiet ticks after which [`SimulationState::run`] stops.
pub const QUIESCENCE_TICKS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("action {0} does not come from a pooled tendency")]
    RoutingViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BctProfile {
    #[default]
    Prime,
    Ceos,
}

impl BctProfile {
    fn injected_role(self, layer: Layer) -> &'static str {
        match (self, layer) {
            (BctProfile::Prime, _) => "impulse",
            (BctProfile::Ceos, Layer::Reactive) => "operational",
            (BctProfile::Ceos, _) => "executive",
        }
    }

    fn executed_role(self) -> &'static str {
        match self {
            BctProfile::Prime => "response",
            BctProfile::Ceos => "operational",
        }
    }
}

/// The goal variant a process pursues by following plans, and the option
/// its plan steps are argued under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOwnership {
    pub variant: GoalVariant,
    pub option: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub id: String,
    pub priority_rank: u32,
    pub goal_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanOwnership>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactiveRule {
    pub id: String,
    pub when: Condition,
    pub emits: ActionSpec,
    pub urgency: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    /// Source process; plan-following rules default to the plan owner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
}

fn default_period() -> u64 {
    3
}

fn default_ttl() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub processes: Vec<ProcessSpec>,
    #[serde(default)]
    pub reactive_rules: Vec<ReactiveRule>,
    #[serde(default)]
    pub appraisal_rules: Vec<AppraisalRule>,
    #[serde(default)]
    pub argument_templates: Vec<ArgumentTemplate>,
    #[serde(default)]
    pub countermeasures: Vec<CountermeasureSpec>,
    #[serde(default)]
    pub commitments: Vec<Commitment>,
    #[serde(default = "default_period")]
    pub deliberation_period: u64,
    #[serde(default = "default_ttl")]
    pub tendency_ttl: u64,
}

/// Per-run switches that are not part of the scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub metacognition: bool,
    /// Argument template id → weight.
    pub weight_overrides: BTreeMap<String, f64>,
    pub profile: Option<BctProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: u64,
    pub selected_action: String,
    pub winning_process: String,
    /// Max pooled force per declared process, in declaration order.
    pub forces: Vec<f64>,
    pub misplaced_count: usize,
    pub strict_tidy: bool,
    pub relaxed_tidy: bool,
}

struct PlanView<'a> {
    world: &'a WorldState,
    step: Option<(WorldAction, u64)>,
}

impl PlanOracle for PlanView<'_> {
    fn plan_step(&self) -> Option<(WorldAction, u64)> {
        self.step.clone()
    }

    fn achievable(&self, action: &WorldAction) -> bool {
        self.world.apply_action(action).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub world: WorldState,
    pub goal: GoalSpec,
    pub events: Vec<WorldEvent>,
    pub beliefs: BeliefStore,
    /// Ordered by priority rank.
    pub processes: Vec<AffectiveProcess>,
    pub tendency_pool: Vec<ActionTendency>,
    /// Arguments in force at the last selection.
    pub arguments: Vec<Argument>,
    /// Arguments added by redescription; they persist for the run.
    pub countermeasure_args: Vec<Argument>,
    pub trace: ReasoningTrace,
    pub config: AgentConfig,
    pub bct_profile: BctProfile,
    pub rng_seed: u64,
    pub metacognition: bool,
    pub weight_overrides: BTreeMap<String, f64>,
    pub goal_variant: GoalVariant,
    pub plan: Option<Plan>,
    pub plan_cursor: usize,
    pub metrics: Vec<MetricsRow>,
    next_plan_id: u64,
    next_tendency_id: u64,
    monitor_cursor: usize,
    deliberation_requested: bool,
}

fn max_force_by_process(pool: &[ActionTendency]) -> BTreeMap<&str, f64> {
    let mut out: BTreeMap<&str, f64> = BTreeMap::new();
    for t in pool {
        let e = out.entry(t.source_process.as_str()).or_insert(0.0);
        *e = e.max(t.force);
    }
    out
}

impl SimulationState {
    pub fn new(
        world: WorldState,
        goal: GoalSpec,
        events: Vec<WorldEvent>,
        mut config: AgentConfig,
        profile: BctProfile,
        rng_seed: u64,
        options: RunOptions,
    ) -> Self {
        for t in &mut config.argument_templates {
            if let Some(w) = options.weight_overrides.get(&t.id) {
                t.weight = *w;
            }
        }
        let mut specs = config.processes.clone();
        specs.sort_by_key(|p| p.priority_rank);
        let processes = specs
            .iter()
            .map(|p| AffectiveProcess::new(p.id.clone(), p.priority_rank, p.goal_ref.clone()))
            .collect();
        SimulationState {
            world,
            goal,
            events,
            beliefs: BeliefStore::default(),
            processes,
            tendency_pool: Vec::new(),
            arguments: Vec::new(),
            countermeasure_args: Vec::new(),
            trace: ReasoningTrace::new(),
            config,
            bct_profile: options.profile.unwrap_or(profile),
            rng_seed,
            metacognition: options.metacognition,
            weight_overrides: options.weight_overrides,
            goal_variant: GoalVariant::Strict,
            plan: None,
            plan_cursor: 0,
            metrics: Vec::new(),
            next_plan_id: 1,
            next_tendency_id: 1,
            monitor_cursor: 0,
            deliberation_requested: false,
        }
    }

    pub fn tick_now(&self) -> u64 {
        self.world.tick
    }

    pub fn record(&mut self, tick: u64, layer: Layer, body: EventBody) -> EventRef {
        self.record_with(tick, layer, body, Vec::new())
    }

    fn record_with(&mut self, tick: u64, layer: Layer, body: EventBody, reasons: Vec<String>) -> EventRef {
        self.trace
            .record(tick, layer, body, reasons)
            .expect("simulation ticks never regress")
    }

    fn rank_of(&self, process: &str) -> u32 {
        self.processes
            .iter()
            .find(|p| p.id == process)
            .map_or(u32::MAX, |p| p.priority_rank)
    }

    /// Process that follows plans for the active goal variant; the rank-0
    /// process when none is declared.
    pub fn plan_owner(&self) -> (String, String) {
        self.config
            .processes
            .iter()
            .find(|p| p.plan.as_ref().is_some_and(|o| o.variant == self.goal_variant))
            .map(|p| (p.id.clone(), p.plan.as_ref().expect("matched").option.clone()))
            .unwrap_or_else(|| {
                let id = self.processes.first().map(|p| p.id.clone()).unwrap_or_default();
                (id, "plan".to_string())
            })
    }

    fn plan_step(&self) -> Option<(WorldAction, u64)> {
        let plan = self.plan.as_ref()?;
        plan.steps.get(self.plan_cursor).map(|s| (s.clone(), plan.id))
    }

    fn condition_parts(&self) -> (Vec<Appraisal>, BTreeSet<String>, BTreeSet<String>) {
        let appraisals = self
            .processes
            .iter()
            .flat_map(|p| p.active_appraisals.iter().cloned())
            .collect();
        let proposed = self
            .processes
            .iter()
            .flat_map(|p| p.candidate_goals.iter().map(|g| g.option.clone()))
            .collect();
        let committed = self.config.commitments.iter().map(|c| c.atom.clone()).collect();
        (appraisals, proposed, committed)
    }

    // ---- perception ----

    /// Ground-truth atoms the agent perceives this tick.
    pub fn percepts(&self) -> BTreeMap<String, BeliefValue> {
        let w = &self.world;
        let status = w.evaluate_goal(&self.goal);
        let predicate = self.goal.predicate(self.goal_variant);
        let blocked = w
            .objects
            .values()
            .any(|o| !w.object_satisfies(o, predicate) && w.candidate_targets(o.kind, predicate).is_empty());
        let mut p = BTreeMap::new();
        p.insert("agent_pos".to_string(), BeliefValue::Text(w.agent_pos.to_string()));
        p.insert(
            "holding".to_string(),
            BeliefValue::Text(w.agent_holding.clone().unwrap_or_else(|| "none".into())),
        );
        for o in w.objects.values() {
            p.insert(format!("loc({})", o.id), BeliefValue::Text(o.location.to_string()));
        }
        for f in &w.fixtures {
            p.insert(
                format!("broken({})", f.id),
                BeliefValue::Bool(w.broken_fixtures.contains(&f.id)),
            );
        }
        p.insert("misplaced_count".into(), BeliefValue::Int(status.misplaced_count as i64));
        p.insert("strict_tidy".into(), BeliefValue::Bool(status.strict));
        p.insert("relaxed_tidy".into(), BeliefValue::Bool(status.relaxed));
        p.insert("abandoned".into(), BeliefValue::Bool(w.abandoned));
        p.insert("goal_blocked".into(), BeliefValue::Bool(blocked));
        p.insert(
            "relaxed_active".into(),
            BeliefValue::Bool(self.goal_variant == GoalVariant::Relaxed),
        );
        for (k, v) in &w.facts {
            p.insert(k.clone(), BeliefValue::Bool(*v));
        }
        p
    }

    /// Syncs beliefs with the world, tracing each changed atom.
    pub fn perceive(&mut self) {
        let tick = self.world.tick;
        let deltas = self.beliefs.sync(self.percepts(), tick);
        for d in deltas {
            self.record(
                tick,
                Layer::Reactive,
                EventBody::BeliefChange {
                    atom: d.atom,
                    previous: d.previous,
                    value: d.value,
                },
            );
        }
    }

    // ---- tendency pool ----

    /// Adds a tendency to the pool unless an identical one (same action,
    /// process and option) is already pooled.
    fn inject(&mut self, mut t: ActionTendency, layer: Layer) -> Option<ActionTendency> {
        let duplicate = self.tendency_pool.iter().any(|p| {
            p.action == t.action && p.source_process == t.source_process && p.option == t.option
        });
        if duplicate {
            return None;
        }
        t.id = format!("t{}", self.next_tendency_id);
        self.next_tendency_id += 1;
        t.created_tick = self.world.tick;
        let effect = ActionEffect::classify(&t.action, &self.world, self.goal.predicate(self.goal_variant));
        self.record(
            self.world.tick,
            layer,
            EventBody::TendencyInjected {
                tendency: t.id.clone(),
                process: t.source_process.clone(),
                option: t.option.clone(),
                action: t.action.encode(),
                label: t.label.clone(),
                base_urgency: t.base_urgency,
                effect,
                role: self.bct_profile.injected_role(layer).to_string(),
            },
        );
        self.tendency_pool.push(t.clone());
        Some(t)
    }

    /// Removes a pooled tendency, tracing why.
    pub fn withdraw_tendency(&mut self, id: &str, reason: &str) {
        if let Some(i) = self.tendency_pool.iter().position(|t| t.id == id) {
            self.tendency_pool.remove(i);
            self.record(
                self.world.tick,
                Layer::Deliberative,
                EventBody::TendencyExpired {
                    tendency: id.to_string(),
                    reason: reason.to_string(),
                },
            );
        }
    }

    fn withdraw_where(&mut self, reason: &str, pred: impl Fn(&ActionTendency) -> bool) {
        let ids: Vec<String> = self.tendency_pool.iter().filter(|t| pred(t)).map(|t| t.id.clone()).collect();
        for id in ids {
            self.withdraw_tendency(&id, reason);
        }
    }

    /// Withdraws pooled tendencies for `option`.
    pub fn withdraw_option(&mut self, option: &str, reason: &str) {
        self.withdraw_where(reason, |t| t.option == option);
    }

    pub fn request_deliberation(&mut self, reason: String) {
        self.deliberation_requested = true;
        self.record(
            self.world.tick,
            Layer::Metacognitive,
            EventBody::DeliberationRequested { reason },
        );
    }

    /// Instantiates `template` as an argument against `option`. Adding the
    /// same argument twice has no effect. Returns the argument id.
    pub fn add_redescription(&mut self, template: &str, option: &str, weight: f64) -> String {
        let mut arg = match self.config.argument_templates.iter().find(|t| t.id == template) {
            Some(t) => t.instantiate(option),
            None => Argument {
                id: crate::arguments::argument_id(template, option),
                option: option.to_string(),
                polarity: crate::arguments::Polarity::Con,
                weight,
                grounds: Vec::new(),
                source_process: String::new(),
                undercuts: None,
            },
        };
        arg.polarity = crate::arguments::Polarity::Con;
        arg.weight = weight;
        let id = arg.id.clone();
        if !self.countermeasure_args.iter().any(|a| a.id == id) {
            self.countermeasure_args.push(arg);
        }
        id
    }

    // ---- plans ----

    fn drop_plan(&mut self, reason: &str) {
        if let Some(old) = self.plan.take() {
            self.withdraw_where(reason, |t| t.plan_id == Some(old.id));
        }
        self.plan_cursor = 0;
    }

    /// The current plan's remaining steps no longer work or target the
    /// wrong goal variant.
    fn plan_stale(&self) -> bool {
        match &self.plan {
            None => true,
            Some(p) => {
                p.variant != self.goal_variant
                    || self.plan_cursor >= p.steps.len()
                    || !simulate_whatif(&self.world, &p.steps[self.plan_cursor..], &self.goal).reachable
            }
        }
    }

    fn maintain_plan(&mut self) {
        if !self.plan_stale() {
            return;
        }
        self.drop_plan("superseded");
        let (owner, _) = self.plan_owner();
        let goal_ref = self
            .config
            .processes
            .iter()
            .find(|p| p.id == owner)
            .map(|p| p.goal_ref.clone())
            .unwrap_or_default();
        self.plan = make_plan(&self.world, &self.goal, self.goal_variant, &goal_ref, self.next_plan_id);
        self.next_plan_id += 1;
    }

    fn plan_tendency(&self, urgency: f64, label: &str) -> Option<ActionTendency> {
        let (action, plan_id) = self.plan_step()?;
        let (process, option) = self.plan_owner();
        Some(ActionTendency {
            id: String::new(),
            action: TendencyAction::World(action),
            option,
            label: label.to_string(),
            source_process: process,
            base_urgency: urgency,
            supporting_arguments: Vec::new(),
            created_tick: self.world.tick,
            force: urgency,
            plan_id: Some(plan_id),
        })
    }
}

impl SimulationState {
    // ---- reactive layer ----

    /// Fires every reactive rule whose condition holds, in declaration
    /// order. Returns the tendencies that entered the pool.
    pub fn reactive_step(&mut self) -> Vec<ActionTendency> {
        let (appraisals, proposed, committed) = self.condition_parts();
        let ctx = ConditionContext {
            beliefs: &self.beliefs,
            appraisals: &appraisals,
            proposed: &proposed,
            committed: &committed,
        };
        let fallback = self.processes.first().map(|p| p.id.clone()).unwrap_or_default();
        let mut fired = Vec::new();
        for rule in &self.config.reactive_rules {
            if !rule.when.holds(&ctx) {
                continue;
            }
            let t = match &rule.emits {
                ActionSpec::Plan => self.plan_tendency(rule.urgency, &rule.label).map(|mut t| {
                    if let Some(p) = &rule.process {
                        t.source_process = p.clone();
                    }
                    if let Some(o) = &rule.option {
                        t.option = o.clone();
                    }
                    t
                }),
                spec => {
                    let action = match spec {
                        ActionSpec::World(a) => TendencyAction::World(a.clone()),
                        ActionSpec::Act(a) => TendencyAction::Act(a.clone()),
                        ActionSpec::Plan => unreachable!(),
                    };
                    Some(ActionTendency {
                        id: String::new(),
                        action,
                        option: rule.option.clone().unwrap_or_else(|| rule.id.clone()),
                        label: rule.label.clone(),
                        source_process: rule.process.clone().unwrap_or_else(|| fallback.clone()),
                        base_urgency: rule.urgency,
                        supporting_arguments: Vec::new(),
                        created_tick: self.world.tick,
                        force: rule.urgency,
                        plan_id: None,
                    })
                }
            };
            fired.extend(t);
        }
        fired
            .into_iter()
            .filter_map(|t| self.inject(t, Layer::Reactive))
            .collect()
    }

    // ---- deliberative layer ----

    /// Plan upkeep, one affective phase step for the first process that can
    /// advance, plan-step injection and an argument case over the pool.
    pub fn deliberative_step(&mut self) {
        self.deliberate(true);
    }

    /// Deliberation on request: plan upkeep and injection without moving
    /// any affective process.
    pub fn replan_step(&mut self) {
        self.deliberate(false);
    }

    fn deliberate(&mut self, advance: bool) {
        let tick = self.world.tick;
        self.maintain_plan();

        let focus = if !advance {
            None
        } else {
            let (appraisals, proposed, committed) = self.condition_parts();
            let oracle = PlanView {
                world: &self.world,
                step: self.plan_step(),
            };
            let env = AffectEnv {
                tick,
                rules: &self.config.appraisal_rules,
                cond: ConditionContext {
                    beliefs: &self.beliefs,
                    appraisals: &appraisals,
                    proposed: &proposed,
                    committed: &committed,
                },
                relaxed_active: self.goal_variant == GoalVariant::Relaxed,
                planner: &oracle,
            };
            self.processes.iter().enumerate().find_map(|(i, p)| {
                let (next, out) = run_affective_cycle(p, &env);
                out.advanced.then_some((i, next, out))
            })
        };
        if let Some((i, next, out)) = focus {
            let process = next.id.clone();
            self.record(
                tick,
                Layer::Deliberative,
                EventBody::AttentionShift {
                    process: process.clone(),
                    phase: next.phase.name().to_string(),
                    target: next.attention_target.clone(),
                },
            );
            self.processes[i] = next;
            for a in out.appraisals {
                self.record(
                    tick,
                    Layer::Deliberative,
                    EventBody::AppraisalChange {
                        process: process.clone(),
                        rule: a.rule,
                        atom: a.atom,
                        valence: a.valence,
                        magnitude: a.magnitude,
                        label: a.label,
                    },
                );
            }
            for s in out.desirable_states {
                self.record(
                    tick,
                    Layer::Deliberative,
                    EventBody::GoalChange {
                        process: process.clone(),
                        label: s.label,
                        option: s.option,
                        accepted: s.accepted,
                        reason: s.reason,
                    },
                );
            }
            for t in out.tendencies {
                self.inject(t, Layer::Deliberative);
            }
        }

        let (owner, _) = self.plan_owner();
        let urgency = self
            .config
            .appraisal_rules
            .iter()
            .filter(|r| r.process == owner)
            .map(|r| r.magnitude)
            .fold(0.0, f64::max);
        if let Some(t) = self.plan_tendency(urgency, "plan step") {
            self.inject(t, Layer::Deliberative);
        }

        let options = self.pool_options();
        if !options.is_empty() {
            let args = self.current_arguments(&options);
            if let Ok(report) = aggregate(&options, &args) {
                let reasons = args.iter().map(|a| a.id.clone()).collect();
                self.record_with(
                    tick,
                    Layer::Deliberative,
                    EventBody::OptionSet {
                        options,
                        scores: report.scores,
                        recommended: Some(report.recommended),
                    },
                    reasons,
                );
            }
        }
    }

    fn pool_options(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.tendency_pool.iter().map(|t| &t.option).collect();
        set.into_iter().cloned().collect()
    }

    /// Triggered template arguments plus redescriptions, restricted to
    /// `options`, with undercuts of absent arguments dropped.
    fn current_arguments(&self, options: &[String]) -> Vec<Argument> {
        let (appraisals, proposed, committed) = self.condition_parts();
        let ctx = ConditionContext {
            beliefs: &self.beliefs,
            appraisals: &appraisals,
            proposed: &proposed,
            committed: &committed,
        };
        let mut args = build_case(options, &self.config.argument_templates, &ctx);
        for a in &self.countermeasure_args {
            if options.contains(&a.option) && !args.iter().any(|b| b.id == a.id) {
                args.push(a.clone());
            }
        }
        let ids: BTreeSet<String> = args.iter().map(|a| a.id.clone()).collect();
        for a in &mut args {
            if a.undercuts.as_ref().is_some_and(|u| !ids.contains(u)) {
                a.undercuts = None;
            }
        }
        args
    }

    // ---- metacognitive layer ----

    /// Monitors the trace since the last pass and applies countermeasures,
    /// replanning within the tick when control asks for it.
    pub fn metacognitive_step(&mut self) -> usize {
        let mut found = 0;
        for _ in 0..MAX_METACOG_PASSES {
            let (findings, cursor) = monitor(&self.trace, &self.config.commitments, self.monitor_cursor);
            self.monitor_cursor = cursor;
            if findings.is_empty() {
                break;
            }
            found += findings.len();
            let library = self.config.countermeasures.clone();
            for f in findings {
                self.record(
                    self.world.tick,
                    Layer::Metacognitive,
                    EventBody::InconsistencyDetected {
                        event: f.item.event.expect("monitored items come from the trace"),
                        item: f.item.kind,
                        option: f.item.option.clone(),
                        process: f.item.process.clone(),
                        commitment: f.commitment.atom.clone(),
                    },
                );
                control(&f, &library, self);
            }
            if std::mem::take(&mut self.deliberation_requested) {
                self.replan_step();
            }
        }
        self.monitor_cursor = self.trace.len();
        found
    }

    // ---- selection ----

    /// Drops expired tendencies and recomputes every pooled force against
    /// the arguments active now.
    pub fn refresh_pool(&mut self) {
        let tick = self.world.tick;
        let ttl = self.config.tendency_ttl;
        self.withdraw_where("expired", |t| t.expired(tick, ttl));
        let options = self.pool_options();
        self.arguments = self.current_arguments(&options);
        let active = active_set(&self.arguments).unwrap_or_default();
        let active_args: Vec<&Argument> = self.arguments.iter().filter(|a| active.contains(&a.id)).collect();
        for t in &mut self.tendency_pool {
            t.force = compute_force(t, active_args.iter().copied());
            t.supporting_arguments = active_args
                .iter()
                .filter(|a| a.option == t.option)
                .map(|a| a.id.clone())
                .collect();
        }
    }

    /// Index of the winning pooled tendency: maximal positive force, ties
    /// to the lower priority rank, then the action encoding, then pool order.
    pub fn select_action(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, t) in self.tendency_pool.iter().enumerate() {
            if t.force <= 0.0 {
                continue;
            }
            let Some(b) = best else {
                best = Some(i);
                continue;
            };
            let cur = &self.tendency_pool[b];
            let better = if (t.force - cur.force).abs() > WEIGHT_EPSILON {
                t.force > cur.force
            } else {
                (self.rank_of(&t.source_process), t.action.encode())
                    < (self.rank_of(&cur.source_process), cur.action.encode())
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    /// Executes the pooled tendency at `index`: consumes it, applies its
    /// action (idle if illegal) and records selection and execution.
    fn execute(&mut self, index: usize) -> String {
        let tick = self.world.tick;
        let t = self.tendency_pool.remove(index);
        let on_option: Vec<&Argument> = self.arguments.iter().filter(|a| a.option == t.option).collect();
        if !on_option.is_empty() {
            let reasons = if t.supporting_arguments.is_empty() {
                on_option.iter().map(|a| a.id.clone()).collect()
            } else {
                t.supporting_arguments.clone()
            };
            self.record_with(
                tick,
                Layer::Deliberative,
                EventBody::OptionSelected {
                    option: t.option.clone(),
                    tendency: t.id.clone(),
                    process: t.source_process.clone(),
                    force: t.force,
                },
                reasons,
            );
        }
        let action = t.action.world_action();
        let outcome = match self.world.apply_action(&action) {
            Ok(next) => {
                self.world = next;
                "ok".to_string()
            }
            Err(e) => {
                self.world = self.world.apply_action(&WorldAction::Idle).expect("idle is always legal");
                self.drop_plan("plan invalidated");
                format!("substituted idle: {e}")
            }
        };
        let ok = outcome == "ok";
        self.record(
            tick,
            Layer::Reactive,
            EventBody::ActionExecuted {
                tendency: Some(t.id.clone()),
                process: Some(t.source_process.clone()),
                option: Some(t.option.clone()),
                action: t.action.encode(),
                outcome,
                role: self.bct_profile.executed_role().to_string(),
            },
        );
        if ok {
            if let (Some(pid), Some((step, current))) = (t.plan_id, self.plan_step()) {
                if pid == current && step == action {
                    self.plan_cursor += 1;
                    self.withdraw_where("plan advanced", |o| o.plan_id == Some(pid));
                }
            }
        }
        t.source_process
    }

    fn execute_default_idle(&mut self) {
        let tick = self.world.tick;
        self.record(tick, Layer::Deliberative, EventBody::NoTendency { note: None });
        self.world = self.world.apply_action(&WorldAction::Idle).expect("idle is always legal");
        self.record(
            tick,
            Layer::Reactive,
            EventBody::ActionExecuted {
                tendency: None,
                process: None,
                option: None,
                action: WorldAction::Idle.encode(),
                outcome: "ok".into(),
                role: self.bct_profile.executed_role().to_string(),
            },
        );
    }

    /// Direct execution of a deliberative intent. Only actions some pooled
    /// tendency proposes may run; anything else is a routing violation,
    /// an error under the ceos profile and a traced refusal under prime.
    pub fn execute_intent(&mut self, action: &WorldAction) -> Result<bool, AgentError> {
        let pooled = self
            .tendency_pool
            .iter()
            .position(|t| &t.action.world_action() == action && matches!(t.action, TendencyAction::World(_)));
        if let Some(i) = pooled {
            self.execute(i);
            return Ok(true);
        }
        match self.bct_profile {
            BctProfile::Ceos => Err(AgentError::RoutingViolation(action.encode())),
            BctProfile::Prime => {
                self.record(
                    self.world.tick,
                    Layer::Deliberative,
                    EventBody::NoTendency {
                        note: Some(format!("intent {} has no pooled tendency", action.encode())),
                    },
                );
                Ok(false)
            }
        }
    }

    // ---- the tick ----

    /// Advances the simulation by exactly one world action.
    pub fn tick(&mut self) -> &MetricsRow {
        let tick = self.world.tick;
        let (next, fired) = self
            .world
            .step_events(&self.events)
            .unwrap_or_else(|_| (self.world.clone(), Vec::new()));
        self.world = next;
        for e in fired {
            self.record(tick, Layer::World, EventBody::WorldEventFired { effect: e.effect });
        }
        self.perceive();
        if self.plan.is_some() && self.plan_stale() {
            self.drop_plan("plan no longer valid");
        }
        self.reactive_step();
        let period = self.config.deliberation_period.max(1);
        if tick.is_multiple_of(period) {
            self.deliberative_step();
        }
        if self.metacognition {
            self.metacognitive_step();
        }
        self.refresh_pool();

        let forces_by = max_force_by_process(&self.tendency_pool);
        let forces = self
            .config
            .processes
            .iter()
            .map(|p| forces_by.get(p.id.as_str()).copied().unwrap_or(0.0))
            .collect();
        let (selected_action, winning_process) = match self.select_action() {
            Some(i) => {
                let action = self.tendency_pool[i].action.encode();
                (action, self.execute(i))
            }
            None => {
                self.execute_default_idle();
                (WorldAction::Idle.encode(), "none".to_string())
            }
        };
        let status = self.world.evaluate_goal(&self.goal);
        self.metrics.push(MetricsRow {
            tick,
            selected_action,
            winning_process,
            forces,
            misplaced_count: status.misplaced_count,
            strict_tidy: status.strict,
            relaxed_tidy: status.relaxed,
        });
        self.metrics.last().expect("just pushed")
    }

    /// Whether the tick just run was quiet: idle, strict goal met, no
    /// pending events and no reasoning activity.
    fn quiet(&self, tick: u64, from: usize) -> bool {
        let idle = self.metrics.last().is_some_and(|m| m.selected_action == "idle" && m.strict_tidy);
        let pending = self.events.iter().any(|e| e.fire_tick > tick);
        let active = self.trace.events()[from..].iter().any(|e| {
            !matches!(
                e.body,
                EventBody::BeliefChange { .. }
                    | EventBody::NoTendency { .. }
                    | EventBody::ActionExecuted { .. }
                    | EventBody::TendencyExpired { .. }
                    | EventBody::OptionSet { .. }
            )
        });
        idle && !pending && !active
    }

    /// Runs up to `ticks` ticks, stopping early after
    /// [`QUIESCENCE_TICKS`] consecutive quiet ticks. Returns ticks run.
    pub fn run(&mut self, ticks: u64) -> u64 {
        let mut quiet = 0;
        for n in 0..ticks {
            let from = self.trace.len();
            let tick = self.world.tick;
            self.tick();
            quiet = if self.quiet(tick, from) { quiet + 1 } else { 0 };
            if quiet >= QUIESCENCE_TICKS {
                return n + 1;
            }
        }
        ticks
    }

    /// Number of countermeasures that did something.
    pub fn countermeasures_fired(&self) -> usize {
        self.trace
            .events()
            .iter()
            .filter(|e| matches!(&e.body, EventBody::CountermeasureApplied { outcome, .. } if outcome != "none"))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{bundled_spec, instantiate};
    use crate::world::{EventEffect, Location};

    fn room(metacognition: bool) -> SimulationState {
        let spec = bundled_spec("room_tidy").unwrap();
        instantiate(
            &spec,
            1,
            RunOptions {
                metacognition,
                ..RunOptions::default()
            },
        )
        .unwrap()
    }

    fn kinds_since(s: &SimulationState, from: usize) -> Vec<&'static str> {
        s.trace.events()[from..].iter().map(|e| e.body.kind()).collect()
    }

    fn tendency(id: &str, action: WorldAction, process: &str, force: f64) -> ActionTendency {
        ActionTendency {
            id: id.into(),
            action: TendencyAction::World(action),
            option: "tidy".into(),
            label: String::new(),
            source_process: process.into(),
            base_urgency: force,
            supporting_arguments: vec![],
            created_tick: 0,
            force,
            plan_id: None,
        }
    }

    #[test]
    fn perceive_is_a_fixed_point_on_unchanged_world() {
        let mut s = room(true);
        s.perceive();
        let n = s.trace.len();
        assert!(n > 0);
        s.perceive();
        assert_eq!(s.trace.len(), n);
    }

    #[test]
    fn perceive_reports_breakage() {
        let mut s = room(true);
        s.perceive();
        s.world.broken_fixtures.insert("shelf_1".into());
        let from = s.trace.len();
        s.perceive();
        let hit = s.trace.events()[from..].iter().any(|e| {
            matches!(&e.body, EventBody::BeliefChange { atom, value: Some(BeliefValue::Bool(true)), .. } if atom == "broken(shelf_1)")
        });
        assert!(hit);
    }

    #[test]
    fn perceive_reports_each_moved_object_once() {
        let mut s = room(true);
        s.perceive();
        let before = s.world.clone();
        let moved = ["book_1", "toy_2"];
        for (i, id) in moved.iter().enumerate() {
            s.world.objects.get_mut(*id).unwrap().location = Location::Floor(crate::world::Cell(i as i32 + 5, 3));
        }
        // Oracle: placements that differ between the two worlds.
        let changed = before
            .objects
            .iter()
            .filter(|(id, o)| s.world.objects[*id].location != o.location)
            .count();
        let from = s.trace.len();
        s.perceive();
        let loc_changes = s.trace.events()[from..]
            .iter()
            .filter(|e| matches!(&e.body, EventBody::BeliefChange { atom, .. } if atom.starts_with("loc(")))
            .count();
        assert_eq!(loc_changes, changed);
        assert_eq!(changed, moved.len());
    }

    #[test]
    fn give_up_fires_after_break() {
        let mut s = room(false);
        s.perceive();
        assert!(s.reactive_step().iter().all(|t| t.option != "give_up"));
        s.world = s
            .world
            .step_events(&[WorldEvent {
                fire_tick: s.world.tick,
                effect: EventEffect::BreakFixture("shelf_1".into()),
            }])
            .unwrap()
            .0;
        s.perceive();
        let fired = s.reactive_step();
        let give_up = fired.iter().find(|t| t.option == "give_up").unwrap();
        assert_eq!(give_up.action, TendencyAction::World(WorldAction::Abandon));
        assert_eq!(give_up.base_urgency, 0.9);
        assert_eq!(give_up.source_process, "proc1");
    }

    #[test]
    fn reactive_rules_fire_in_declaration_order() {
        let mut s = room(false);
        let rule = |id: &str, urgency| ReactiveRule {
            id: id.into(),
            when: Condition::Always,
            emits: ActionSpec::Act(id.into()),
            urgency,
            label: String::new(),
            process: Some("proc1".into()),
            option: Some("give_up".into()),
        };
        s.config.reactive_rules = vec![rule("first", 0.1), rule("second", 0.9)];
        s.perceive();
        let fired: Vec<String> = s.reactive_step().iter().map(|t| t.action.encode()).collect();
        assert_eq!(fired, ["act:first", "act:second"]);
        s.config.reactive_rules = vec![ReactiveRule {
            when: Condition::Never,
            ..rule("never", 1.0)
        }];
        assert!(s.reactive_step().is_empty());
    }

    #[test]
    fn first_deliberation_attends_plans_and_injects() {
        let mut s = room(true);
        s.perceive();
        let from = s.trace.len();
        s.deliberative_step();
        let attention = s.trace.events()[from..]
            .iter()
            .find_map(|e| match &e.body {
                EventBody::AttentionShift { process, target, .. } => Some((process.clone(), target.clone())),
                _ => None,
            })
            .unwrap();
        assert_eq!(attention, ("proc0".into(), Some("room".into())));
        let plan = s.plan.clone().unwrap();
        assert_eq!(plan.variant, GoalVariant::Strict);
        let injected = s.tendency_pool.iter().find(|t| t.plan_id == Some(plan.id)).unwrap();
        assert_eq!(injected.action, TendencyAction::World(plan.steps[0].clone()));
        assert!(matches!(plan.steps[0], WorldAction::Move(_) | WorldAction::PickUp(_)));
    }

    #[test]
    fn replanning_targets_the_table() {
        let mut s = room(true);
        for _ in 0..12 {
            s.tick();
        }
        s.world.broken_fixtures.insert("shelf_1".into());
        s.perceive();
        s.goal_variant = GoalVariant::Relaxed;
        s.replan_step();
        let plan = s.plan.clone().unwrap();
        assert_eq!(plan.variant, GoalVariant::Relaxed);
        assert!(plan.steps.contains(&WorldAction::Place("table_1".into())));
        assert!(!plan.steps.iter().any(|a| matches!(a, WorldAction::Place(t) if t.starts_with("shelf"))));
    }

    #[test]
    fn deliberation_waits_for_its_cadence() {
        let mut s = room(false);
        s.tick();
        let before = s.processes.clone();
        s.tick();
        assert_eq!(s.processes, before);
    }

    #[test]
    fn strongest_tendency_wins() {
        let mut s = room(false);
        s.tendency_pool = vec![
            tendency("a", WorldAction::Abandon, "proc1", 0.9),
            tendency("m", WorldAction::Move(crate::world::Direction::North), "proc0", 0.3),
        ];
        assert_eq!(s.select_action(), Some(0));
    }

    #[test]
    fn equal_forces_go_to_lower_rank() {
        let mut s = room(false);
        s.tendency_pool = vec![
            tendency("a", WorldAction::Abandon, "proc1", 0.9),
            tendency("m", WorldAction::Move(crate::world::Direction::North), "proc0", 0.9),
        ];
        assert_eq!(s.select_action(), Some(1));
        // Same process: the action encoding decides.
        s.tendency_pool[1].source_process = "proc1".into();
        assert_eq!(s.select_action(), Some(0));
    }

    #[test]
    fn empty_pool_idles() {
        let mut s = room(false);
        s.config.reactive_rules.clear();
        s.config.appraisal_rules.clear();
        s.goal = GoalSpec {
            strict: Default::default(),
            relaxed: Default::default(),
            deadline_tick: None,
        };
        let from = s.trace.len();
        let row = s.tick().clone();
        assert_eq!(row.selected_action, "idle");
        assert_eq!(row.winning_process, "none");
        let kinds = kinds_since(&s, from);
        let n = kinds.iter().position(|k| *k == "NoTendency").unwrap();
        assert_eq!(kinds[n + 1], "ActionExecuted");
    }

    #[test]
    fn one_world_action_per_tick() {
        let mut s = room(true);
        for t in 0..30 {
            assert_eq!(s.world.tick, t);
            let from = s.trace.len();
            s.tick();
            let executed = kinds_since(&s, from).iter().filter(|k| **k == "ActionExecuted").count();
            assert_eq!(executed, 1);
        }
    }

    #[test]
    fn break_tick_orders_world_then_beliefs_then_tendencies() {
        let mut s = room(true);
        for _ in 0..12 {
            s.tick();
        }
        let from = s.trace.len();
        s.tick();
        let kinds = kinds_since(&s, from);
        let world = kinds.iter().position(|k| *k == "WorldEventFired").unwrap();
        let belief = kinds.iter().position(|k| *k == "BeliefChange").unwrap();
        let tendency = kinds.iter().position(|k| *k == "TendencyInjected").unwrap();
        assert!(world < belief && belief < tendency);
    }

    #[test]
    fn bypass_is_an_error_under_ceos_and_a_warning_under_prime() {
        let mut s = room(false);
        s.bct_profile = BctProfile::Ceos;
        assert_eq!(
            s.execute_intent(&WorldAction::Abandon),
            Err(AgentError::RoutingViolation("abandon".into()))
        );
        s.bct_profile = BctProfile::Prime;
        let n = s.trace.len();
        assert_eq!(s.execute_intent(&WorldAction::Abandon), Ok(false));
        assert_eq!(kinds_since(&s, n), ["NoTendency"]);
        assert!(!s.world.abandoned);
        s.tendency_pool = vec![tendency("a", WorldAction::Abandon, "proc1", 0.9)];
        assert_eq!(s.execute_intent(&WorldAction::Abandon), Ok(true));
        assert!(s.world.abandoned && s.tendency_pool.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let mut a = room(true);
        let mut b = room(true);
        a.run(40);
        b.run(40);
        assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
        assert_eq!(a.metrics, b.metrics);
    }
}
