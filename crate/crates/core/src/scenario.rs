//! Scenario documents: a closed JSON schema describing the room, the story's
//! events, the goal and the agent's rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::ActionSpec;
use crate::agent::{AgentConfig, BctProfile, RunOptions, SimulationState};
use crate::arguments::OptionSelector;
use crate::beliefs::{split_atom, Condition, ConditionRef};
use crate::metacog::CountermeasureAction;
use crate::world::{Cell, EventEffect, Fixture, FixtureKind, GoalSpec, Location, ObjectKind, ObjectState, WorldAction, WorldEvent, WorldState};

pub const FORMAT_VERSION: u32 = 1;

/// Atoms perception always provides.
pub const BUILTIN_ATOMS: [&str; 8] = [
    "agent_pos",
    "holding",
    "misplaced_count",
    "strict_tidy",
    "relaxed_tidy",
    "abandoned",
    "goal_blocked",
    "relaxed_active",
];

fn builtin_relations() -> Vec<String> {
    vec!["loc".into(), "broken".into()]
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("scenario has validation errors:\n{0}")]
    InvalidSpec(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureDecl {
    pub id: String,
    pub kind: FixtureKind,
    pub cell: Cell,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDecl {
    pub id: String,
    pub kind: ObjectKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ontology {
    pub object_kinds: Vec<ObjectKind>,
    #[serde(default)]
    pub fixtures: Vec<FixtureDecl>,
    #[serde(default)]
    pub objects: Vec<ObjectDecl>,
    /// Option ids arguments and tendencies may refer to.
    pub options: Vec<String>,
    /// Names of boolean situation facts.
    #[serde(default)]
    pub facts: Vec<String>,
    #[serde(default = "builtin_relations")]
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatter {
    pub objects: Vec<String>,
    /// Cells to draw from; every free floor cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Cell>>,
}

fn default_side() -> i32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartingState {
    #[serde(default = "default_side")]
    pub width: i32,
    #[serde(default = "default_side")]
    pub height: i32,
    pub agent_pos: Cell,
    #[serde(default)]
    pub placements: BTreeMap<String, Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<Scatter>,
    #[serde(default)]
    pub facts: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub meta: Meta,
    pub ontology: Ontology,
    pub starting_state: StartingState,
    #[serde(default)]
    pub events: Vec<WorldEvent>,
    pub goal: GoalSpec,
    pub agent: AgentConfig,
    pub bct_profile: BctProfile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub code: &'static str,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.errors.iter().chain(&self.warnings).any(|i| i.code == code)
    }

    fn error(&mut self, code: &'static str, location: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue {
            code,
            location: location.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, code: &'static str, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            code,
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (sev, list) in [("error", &self.errors), ("warning", &self.warnings)] {
            for i in list {
                writeln!(f, "{sev} {} at {}: {}", i.code, i.location, i.message)?;
            }
        }
        write!(f, "{} error(s), {} warning(s)", self.errors.len(), self.warnings.len())
    }
}

/// Parses a scenario document. Syntax errors carry line and column; type
/// errors, unknown keys and references to undeclared ids carry the path.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof | serde_json::error::Category::Io => {
                ScenarioError::Parse {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            }
            serde_json::error::Category::Data => ScenarioError::Schema {
                path,
                message: inner.to_string(),
            },
        }
    })?;
    if let Some((path, message)) = dangling_references(&spec).into_iter().next() {
        return Err(ScenarioError::Schema { path, message });
    }
    Ok(spec)
}

pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    serde_json::to_string_pretty(spec).expect("scenario specs serialize")
}

/// Every declared id, by category.
struct Declared<'a> {
    kinds: BTreeSet<ObjectKind>,
    fixtures: BTreeSet<&'a str>,
    targets: BTreeSet<&'a str>,
    objects: BTreeMap<&'a str, ObjectKind>,
    options: BTreeSet<&'a str>,
    facts: BTreeSet<&'a str>,
    relations: BTreeSet<&'a str>,
    processes: BTreeSet<&'a str>,
    templates: BTreeSet<&'a str>,
    eval_atoms: BTreeSet<&'a str>,
    commitments: BTreeSet<&'a str>,
}

impl<'a> Declared<'a> {
    fn of(spec: &'a ScenarioSpec) -> Self {
        let o = &spec.ontology;
        let mut targets = BTreeSet::new();
        for f in &o.fixtures {
            if f.slots.is_empty() {
                targets.insert(f.id.as_str());
            }
            targets.extend(f.slots.iter().map(String::as_str));
        }
        Declared {
            kinds: o.object_kinds.iter().copied().collect(),
            fixtures: o.fixtures.iter().map(|f| f.id.as_str()).collect(),
            targets,
            objects: o.objects.iter().map(|d| (d.id.as_str(), d.kind)).collect(),
            options: o.options.iter().map(String::as_str).collect(),
            facts: o.facts.iter().map(String::as_str).collect(),
            relations: o.relations.iter().map(String::as_str).collect(),
            processes: spec.agent.processes.iter().map(|p| p.id.as_str()).collect(),
            templates: spec.agent.argument_templates.iter().map(|t| t.id.as_str()).collect(),
            eval_atoms: spec.agent.appraisal_rules.iter().map(|r| r.atom.as_str()).collect(),
            commitments: spec.agent.commitments.iter().map(|c| c.atom.as_str()).collect(),
        }
    }

    fn belief_atom_known(&self, atom: &str) -> bool {
        match split_atom(atom) {
            (rel, Some(arg)) => {
                self.relations.contains(rel)
                    && (self.objects.contains_key(arg) || self.fixtures.contains(arg) || self.targets.contains(arg))
            }
            (bare, None) => BUILTIN_ATOMS.contains(&bare) || self.facts.contains(bare),
        }
    }
}

struct RefCheck<'a> {
    d: Declared<'a>,
    out: Vec<(String, String)>,
}

impl RefCheck<'_> {
    fn miss(&mut self, path: String, what: &str, id: &str) {
        self.out.push((path, format!("undeclared {what} {id:?}")));
    }

    fn option(&mut self, path: String, id: &str) {
        if !self.d.options.contains(id) {
            self.miss(path, "option", id);
        }
    }

    fn process(&mut self, path: String, id: &str) {
        if !self.d.processes.contains(id) {
            self.miss(path, "process", id);
        }
    }

    fn world_action(&mut self, path: String, a: &WorldAction) {
        match a {
            WorldAction::PickUp(o) if !self.d.objects.contains_key(o.as_str()) => self.miss(path, "object", o),
            WorldAction::Place(t) if !self.d.targets.contains(t.as_str()) => self.miss(path, "target", t),
            _ => {}
        }
    }

    fn action(&mut self, path: String, a: &ActionSpec) {
        if let ActionSpec::World(w) = a {
            self.world_action(path, w);
        }
    }

    fn condition(&mut self, path: String, c: &Condition) {
        let mut refs = Vec::new();
        c.references(&mut refs);
        for r in refs {
            match r {
                ConditionRef::Belief(a) if !self.d.belief_atom_known(&a) => self.miss(path.clone(), "belief atom", &a),
                ConditionRef::Appraised(a) if !self.d.eval_atoms.contains(a.as_str()) => {
                    self.miss(path.clone(), "evaluation atom", &a)
                }
                ConditionRef::Option(o) => self.option(path.clone(), &o),
                ConditionRef::Commitment(a) if !self.d.commitments.contains(a.as_str()) => {
                    self.miss(path.clone(), "commitment", &a)
                }
                _ => {}
            }
        }
    }
}

/// (path, message) for every reference to an undeclared id, in document
/// order.
pub fn dangling_references(spec: &ScenarioSpec) -> Vec<(String, String)> {
    let mut c = RefCheck {
        d: Declared::of(spec),
        out: Vec::new(),
    };
    for (i, d) in spec.ontology.objects.iter().enumerate() {
        if !c.d.kinds.contains(&d.kind) {
            c.miss(format!("ontology.objects[{i}].kind"), "object kind", d.kind.name());
        }
    }
    let s = &spec.starting_state;
    for (id, loc) in &s.placements {
        let path = format!("starting_state.placements.{id}");
        if !c.d.objects.contains_key(id.as_str()) {
            c.miss(path.clone(), "object", id);
        }
        if let Location::In(t) = loc {
            if !c.d.targets.contains(t.as_str()) {
                c.miss(path, "target", t);
            }
        }
    }
    if let Some(sc) = &s.scatter {
        for (i, id) in sc.objects.iter().enumerate() {
            if !c.d.objects.contains_key(id.as_str()) {
                c.miss(format!("starting_state.scatter.objects[{i}]"), "object", id);
            }
        }
    }
    for name in s.facts.keys() {
        if !c.d.facts.contains(name.as_str()) {
            c.miss(format!("starting_state.facts.{name}"), "fact", name);
        }
    }
    for (i, e) in spec.events.iter().enumerate() {
        let path = format!("events[{i}].effect");
        match &e.effect {
            EventEffect::BreakFixture(f) if !c.d.fixtures.contains(f.as_str()) => c.miss(path, "fixture", f),
            EventEffect::SpawnObject(o) => match c.d.objects.get(o.id.as_str()) {
                None => c.miss(path, "object", &o.id),
                Some(k) if *k != o.kind => c.out.push((path, format!("object {:?} declared with another kind", o.id))),
                _ => {}
            },
            EventEffect::RemoveObject(o) if !c.d.objects.contains_key(o.as_str()) => c.miss(path, "object", o),
            _ => {}
        }
    }
    for (name, pred) in [("strict", &spec.goal.strict), ("relaxed", &spec.goal.relaxed)] {
        for kind in pred.keys() {
            if !c.d.kinds.contains(kind) {
                c.miss(format!("goal.{name}"), "object kind", kind.name());
            }
        }
    }
    let a = &spec.agent;
    for (i, p) in a.processes.iter().enumerate() {
        if let Some(plan) = &p.plan {
            c.option(format!("agent.processes[{i}].plan.option"), &plan.option);
        }
    }
    for (i, r) in a.reactive_rules.iter().enumerate() {
        let base = format!("agent.reactive_rules[{i}]");
        c.condition(format!("{base}.when"), &r.when);
        c.action(format!("{base}.emits"), &r.emits);
        if let Some(p) = &r.process {
            c.process(format!("{base}.process"), p);
        }
        match &r.option {
            Some(o) => c.option(format!("{base}.option"), o),
            None if r.emits != ActionSpec::Plan => c.miss(format!("{base}.option"), "option", ""),
            None => {}
        }
    }
    for (i, r) in a.appraisal_rules.iter().enumerate() {
        let base = format!("agent.appraisal_rules[{i}]");
        c.process(format!("{base}.process"), &r.process);
        c.condition(format!("{base}.when"), &r.when);
        for (j, d) in r.desires.iter().enumerate() {
            c.option(format!("{base}.desires[{j}].option"), &d.option);
            c.action(format!("{base}.desires[{j}].action"), &d.action);
        }
    }
    for (i, t) in a.argument_templates.iter().enumerate() {
        let base = format!("agent.argument_templates[{i}]");
        c.process(format!("{base}.process"), &t.process);
        c.condition(format!("{base}.trigger"), &t.trigger);
        if let OptionSelector::Is(_) | OptionSelector::AnyOf(_) = &t.options {
            for o in t.options.named() {
                c.option(format!("{base}.options"), o);
            }
        }
        if let Some(u) = &t.undercuts {
            if !c.d.templates.contains(u.as_str()) {
                c.miss(format!("{base}.undercuts"), "argument template", u);
            }
        }
    }
    for (i, cm) in a.countermeasures.iter().enumerate() {
        let base = format!("agent.countermeasures[{i}]");
        if let CountermeasureAction::Redescription { template, .. } = &cm.action {
            if !c.d.templates.contains(template.as_str()) {
                c.miss(format!("{base}.action"), "argument template", template);
            }
        }
        if let Some(o) = &cm.matches.option {
            if !c.d.options.contains(o.as_str()) && !c.d.eval_atoms.contains(o.as_str()) {
                c.miss(format!("{base}.matches.option"), "option", o);
            }
        }
    }
    c.out
}

/// Template ids on an undercut cycle, if any.
fn undercut_cycle(spec: &ScenarioSpec) -> Option<Vec<String>> {
    let edges: BTreeMap<&str, &str> = spec
        .agent
        .argument_templates
        .iter()
        .filter_map(|t| t.undercuts.as_deref().map(|u| (t.id.as_str(), u)))
        .collect();
    // Each template undercuts at most one other, so following edges from
    // every start finds any cycle.
    for start in edges.keys() {
        let mut seen = vec![*start];
        let mut cur = *start;
        while let Some(next) = edges.get(cur) {
            if let Some(pos) = seen.iter().position(|s| s == next) {
                return Some(seen[pos..].iter().map(|s| s.to_string()).collect());
            }
            seen.push(next);
            cur = next;
        }
    }
    None
}

fn free_floor_cells(spec: &ScenarioSpec, world: &WorldState) -> Vec<Cell> {
    let s = &spec.starting_state;
    let taken: BTreeSet<Cell> = s
        .placements
        .values()
        .filter_map(|l| match l {
            Location::Floor(c) => Some(*c),
            _ => None,
        })
        .collect();
    match s.scatter.as_ref().and_then(|sc| sc.cells.clone()) {
        Some(cells) => cells,
        None => (0..world.height)
            .flat_map(|y| (0..world.width).map(move |x| Cell(x, y)))
            .filter(|c| world.walkable(*c) && !taken.contains(c))
            .collect(),
    }
}

/// The world with fixtures and fixed placements only.
fn fixed_world(spec: &ScenarioSpec) -> WorldState {
    let s = &spec.starting_state;
    let kinds: BTreeMap<&str, ObjectKind> = spec.ontology.objects.iter().map(|o| (o.id.as_str(), o.kind)).collect();
    let mut w = WorldState::single_cell();
    w.width = s.width;
    w.height = s.height;
    w.agent_pos = s.agent_pos;
    w.fixtures = spec
        .ontology
        .fixtures
        .iter()
        .map(|f| Fixture {
            id: f.id.clone(),
            kind: f.kind,
            cell: f.cell,
            slots: f.slots.clone(),
        })
        .collect();
    for (id, loc) in &s.placements {
        if let Some(kind) = kinds.get(id.as_str()) {
            w.objects.insert(
                id.clone(),
                ObjectState {
                    id: id.clone(),
                    kind: *kind,
                    location: loc.clone(),
                },
            );
        }
    }
    if let Some(h) = w.objects.values().find(|o| o.location == Location::Held) {
        w.agent_holding = Some(h.id.clone());
    }
    w.facts = s.facts.clone();
    w
}

pub fn validate_scenario(spec: &ScenarioSpec) -> ValidationReport {
    let mut r = ValidationReport::default();
    if spec.meta.format_version != FORMAT_VERSION {
        r.error(
            "UNSUPPORTED_VERSION",
            "meta.format_version",
            format!("expected {FORMAT_VERSION}, got {}", spec.meta.format_version),
        );
    }
    for (path, msg) in dangling_references(spec) {
        r.error("DANGLING_REFERENCE", path, msg);
    }

    let mut ids = BTreeSet::new();
    let entity_ids = spec
        .ontology
        .fixtures
        .iter()
        .flat_map(|f| std::iter::once(&f.id).chain(&f.slots))
        .chain(spec.ontology.objects.iter().map(|o| &o.id));
    for id in entity_ids {
        if !ids.insert(id) {
            r.error("DUPLICATE_ID", "ontology", format!("id {id:?} declared twice"));
        }
    }

    if let Some(cycle) = undercut_cycle(spec) {
        r.error("CYCLIC_UNDERCUT", "agent.argument_templates", format!("undercut cycle {}", cycle.join(" -> ")));
    }
    if !spec.goal.strict_entails_relaxed() {
        r.error("GOAL_ENTAILMENT", "goal", "a strict placement is not allowed by the relaxed goal");
    }

    let a = &spec.agent;
    let mut seen_ids = BTreeSet::new();
    let mut seen_ranks = BTreeSet::new();
    for (i, p) in a.processes.iter().enumerate() {
        if !seen_ids.insert(&p.id) {
            r.error("DUPLICATE_PROCESS", format!("agent.processes[{i}]"), format!("process {:?} declared twice", p.id));
        }
        if !seen_ranks.insert(p.priority_rank) {
            r.error(
                "DUPLICATE_PRIORITY",
                format!("agent.processes[{i}]"),
                format!("priority rank {} used twice", p.priority_rank),
            );
        }
    }
    if a.processes.is_empty() {
        r.error("INVALID_PARAMETER", "agent.processes", "at least one process is required");
    }
    let eval_atoms: BTreeSet<&str> = a.appraisal_rules.iter().map(|r| r.atom.as_str()).collect();
    for (i, c) in a.commitments.iter().enumerate() {
        if !eval_atoms.contains(c.atom.as_str()) {
            r.error(
                "UNKNOWN_COMMITMENT_ATOM",
                format!("agent.commitments[{i}]"),
                format!("no appraisal rule evaluates {:?}", c.atom),
            );
        }
        if !(c.weight >= 0.0) {
            r.error("INVALID_PARAMETER", format!("agent.commitments[{i}].weight"), "weight must be non-negative");
        }
    }
    if a.deliberation_period == 0 {
        r.error("INVALID_PARAMETER", "agent.deliberation_period", "must be at least 1");
    }
    if a.tendency_ttl == 0 {
        r.error("INVALID_PARAMETER", "agent.tendency_ttl", "must be at least 1");
    }
    for (i, rule) in a.appraisal_rules.iter().enumerate() {
        if !(rule.magnitude > 0.0) {
            r.error("INVALID_PARAMETER", format!("agent.appraisal_rules[{i}].magnitude"), "must be positive");
        }
    }
    for (i, rule) in a.reactive_rules.iter().enumerate() {
        if !(rule.urgency >= 0.0) {
            r.error("INVALID_PARAMETER", format!("agent.reactive_rules[{i}].urgency"), "must be non-negative");
        }
    }
    for (i, t) in a.argument_templates.iter().enumerate() {
        if !(t.weight >= 0.0) {
            r.error("INVALID_PARAMETER", format!("agent.argument_templates[{i}].weight"), "must be non-negative");
        }
    }
    for (i, cm) in a.countermeasures.iter().enumerate() {
        if let CountermeasureAction::Redescription { weight: Some(w), .. } = &cm.action {
            if !(*w >= 0.0) {
                r.error("INVALID_PARAMETER", format!("agent.countermeasures[{i}].action"), "weight must be non-negative");
            }
        }
    }

    check_starting_state(spec, &mut r);

    if let Some(deadline) = spec.goal.deadline_tick {
        for (i, e) in spec.events.iter().enumerate() {
            if e.fire_tick > deadline {
                r.warn("UNREACHABLE_EVENT", format!("events[{i}]"), format!("fires after deadline tick {deadline}"));
            }
        }
    }
    if spec.events.windows(2).any(|w| w[0].fire_tick > w[1].fire_tick) {
        r.warn("UNSORTED_EVENTS", "events", "events are not ordered by fire_tick");
    }
    for (i, p) in a.processes.iter().enumerate() {
        if !a.argument_templates.iter().any(|t| t.process == p.id) {
            r.warn("PROCESS_WITHOUT_ARGUMENTS", format!("agent.processes[{i}]"), format!("{} has no argument templates", p.id));
        }
    }
    r
}

fn check_starting_state(spec: &ScenarioSpec, r: &mut ValidationReport) {
    let s = &spec.starting_state;
    if s.width < 1 || s.height < 1 {
        r.error("INVALID_STARTING_STATE", "starting_state", "room must be at least 1x1");
        return;
    }
    let w = fixed_world(spec);
    for f in &w.fixtures {
        if !w.in_bounds(f.cell) {
            r.error("INVALID_STARTING_STATE", format!("ontology.fixtures.{}", f.id), "fixture out of bounds");
        }
    }
    if let Err(e) = w.check_invariants() {
        r.error("INVALID_STARTING_STATE", "starting_state", e.to_string());
    }
    let scattered: BTreeSet<&str> = s
        .scatter
        .iter()
        .flat_map(|sc| sc.objects.iter().map(String::as_str))
        .collect();
    let spawned: BTreeSet<&str> = spec
        .events
        .iter()
        .filter_map(|e| match &e.effect {
            EventEffect::SpawnObject(o) => Some(o.id.as_str()),
            _ => None,
        })
        .collect();
    for o in &spec.ontology.objects {
        let placed = s.placements.contains_key(&o.id);
        let scatter = scattered.contains(o.id.as_str());
        if placed && scatter {
            r.error("INVALID_STARTING_STATE", format!("starting_state.placements.{}", o.id), "object is both placed and scattered");
        } else if !placed && !scatter && !spawned.contains(o.id.as_str()) {
            r.error("INVALID_STARTING_STATE", "starting_state", format!("object {:?} has no starting location", o.id));
        }
    }
    if let Some(sc) = &s.scatter {
        let cells = free_floor_cells(spec, &w);
        if cells.iter().any(|c| !w.walkable(*c)) {
            r.error("INVALID_STARTING_STATE", "starting_state.scatter.cells", "scatter cells must be floor cells");
        }
        if cells.iter().collect::<BTreeSet<_>>().len() != cells.len() {
            r.error("INVALID_STARTING_STATE", "starting_state.scatter.cells", "scatter cells repeat");
        }
        if cells.len() < sc.objects.len() {
            r.error("INVALID_STARTING_STATE", "starting_state.scatter", "fewer free cells than scattered objects");
        }
    }
}

/// The initial world for `seed`: scattered objects go to distinct cells
/// drawn without replacement.
pub fn initial_world(spec: &ScenarioSpec, seed: u64) -> WorldState {
    let mut w = fixed_world(spec);
    if let Some(sc) = &spec.starting_state.scatter {
        let cells = free_floor_cells(spec, &w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = sample(&mut rng, cells.len(), sc.objects.len().min(cells.len()));
        for (id, idx) in sc.objects.iter().zip(picks.iter()) {
            if let Some(d) = spec.ontology.objects.iter().find(|o| &o.id == id) {
                w.objects.insert(
                    id.clone(),
                    ObjectState {
                        id: id.clone(),
                        kind: d.kind,
                        location: Location::Floor(cells[idx]),
                    },
                );
            }
        }
    }
    w
}

/// Builds the initial simulation state; fails on a spec with errors.
pub fn instantiate(spec: &ScenarioSpec, seed: u64, options: RunOptions) -> Result<SimulationState, ScenarioError> {
    let report = validate_scenario(spec);
    if !report.is_ok() {
        return Err(ScenarioError::InvalidSpec(report));
    }
    Ok(SimulationState::new(
        initial_world(spec, seed),
        spec.goal.clone(),
        spec.events.clone(),
        spec.agent.clone(),
        spec.bct_profile,
        seed,
        options,
    ))
}

/// Scenario documents shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("room_tidy", include_str!("../scenarios/room_tidy.json")),
    ("room_tidy_redescription", include_str!("../scenarios/room_tidy_redescription.json")),
    ("non_smoking", include_str!("../scenarios/non_smoking.json")),
    ("office_cake", include_str!("../scenarios/office_cake.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn bundled_spec(name: &str) -> Option<ScenarioSpec> {
    bundled(name).map(|t| parse_scenario(t).expect("bundled scenarios parse"))
}
