//! Gridworld environment for the room-tidying task.
//!
//! A [`WorldState`] is a plain value: every operation returns a new state and
//! leaves its input untouched. Fixtures (shelves, boxes, tables) occupy grid
//! cells the agent cannot enter; objects live on the floor, inside a fixture
//! target (a shelf slot or a box/table), or in the agent's hand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("duplicate entity: {0}")]
    DuplicateEntity(String),
}

fn illegal(reason: impl Into<String>) -> WorldError {
    WorldError::IllegalAction(reason.into())
}

/// Grid coordinate `(x, y)`; `y` grows southwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub i32, pub i32);

impl Cell {
    pub fn step(self, dir: Direction) -> Cell {
        match dir {
            Direction::North => Cell(self.0, self.1 - 1),
            Direction::South => Cell(self.0, self.1 + 1),
            Direction::East => Cell(self.0 + 1, self.1),
            Direction::West => Cell(self.0 - 1, self.1),
        }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.0.abs_diff(other.0) + self.1.abs_diff(other.1)
    }

    /// Orthogonal neighbours in N, S, E, W order.
    pub fn neighbours(self) -> [Cell; 4] {
        Direction::ALL.map(|d| self.step(d))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Book,
    Toy,
}

impl ObjectKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Book => "book",
            ObjectKind::Toy => "toy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Shelf,
    Box,
    Table,
}

impl FixtureKind {
    pub fn accepts(self, kind: ObjectKind) -> bool {
        matches!(
            (self, kind),
            (FixtureKind::Shelf, ObjectKind::Book)
                | (FixtureKind::Table, ObjectKind::Book)
                | (FixtureKind::Box, ObjectKind::Toy)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::Shelf => "shelf",
            FixtureKind::Box => "box",
            FixtureKind::Table => "table",
        }
    }
}

/// A piece of furniture. Shelves expose single-capacity slots; boxes and
/// tables are themselves unlimited targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub id: String,
    pub kind: FixtureKind,
    pub cell: Cell,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<String>,
}

impl Fixture {
    /// Placement target ids exposed by this fixture.
    pub fn targets(&self) -> Vec<&str> {
        if self.kind == FixtureKind::Shelf {
            self.slots.iter().map(String::as_str).collect()
        } else {
            vec![self.id.as_str()]
        }
    }

    pub fn target_capacity(&self) -> Option<usize> {
        (self.kind == FixtureKind::Shelf).then_some(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Floor(Cell),
    /// Inside a placement target: a shelf slot id, or a box/table id.
    In(String),
    Held,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Floor(c) => write!(f, "floor:{c}"),
            Location::In(t) => write!(f, "in:{t}"),
            Location::Held => f.write_str("held"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectState {
    pub id: String,
    pub kind: ObjectKind,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldAction {
    Move(Direction),
    PickUp(String),
    Place(String),
    Idle,
    Abandon,
}

impl WorldAction {
    /// Stable textual encoding, also used as the lexicographic tie-break key.
    pub fn encode(&self) -> String {
        match self {
            WorldAction::Move(d) => format!("move:{}", d.name()),
            WorldAction::PickUp(o) => format!("pick_up:{o}"),
            WorldAction::Place(t) => format!("place:{t}"),
            WorldAction::Idle => "idle".to_string(),
            WorldAction::Abandon => "abandon".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventEffect {
    BreakFixture(String),
    SpawnObject(ObjectState),
    RemoveObject(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldEvent {
    pub fire_tick: u64,
    pub effect: EventEffect,
}

/// Allowed fixture kinds per object kind. Kinds absent from the map are
/// unconstrained.
pub type PlacementPredicate = BTreeMap<ObjectKind, Vec<FixtureKind>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub strict: PlacementPredicate,
    pub relaxed: PlacementPredicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_tick: Option<u64>,
}

impl GoalSpec {
    pub fn predicate(&self, variant: GoalVariant) -> &PlacementPredicate {
        match variant {
            GoalVariant::Strict => &self.strict,
            GoalVariant::Relaxed => &self.relaxed,
        }
    }

    /// True when every placement allowed by `strict` is also allowed by
    /// `relaxed`, so any strictly tidy world is relaxed tidy.
    pub fn strict_entails_relaxed(&self) -> bool {
        self.relaxed.iter().all(|(kind, relaxed_allowed)| {
            self.strict.get(kind).is_some_and(|strict_allowed| {
                strict_allowed.iter().all(|f| relaxed_allowed.contains(f))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalVariant {
    Strict,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalStatus {
    pub strict: bool,
    pub relaxed: bool,
    pub misplaced_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub width: i32,
    pub height: i32,
    pub agent_pos: Cell,
    pub agent_holding: Option<String>,
    pub objects: BTreeMap<String, ObjectState>,
    pub fixtures: Vec<Fixture>,
    pub broken_fixtures: BTreeSet<String>,
    /// Set once the agent has executed `abandon`.
    pub abandoned: bool,
    /// Non-spatial situation facts (used by abstract scenarios).
    pub facts: BTreeMap<String, bool>,
}

impl WorldState {
    /// A trivial one-cell room with no fixtures or objects.
    pub fn single_cell() -> Self {
        WorldState {
            tick: 0,
            width: 1,
            height: 1,
            agent_pos: Cell(0, 0),
            agent_holding: None,
            objects: BTreeMap::new(),
            fixtures: Vec::new(),
            broken_fixtures: BTreeSet::new(),
            abandoned: false,
            facts: BTreeMap::new(),
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 >= 0 && c.1 >= 0 && c.0 < self.width && c.1 < self.height
    }

    pub fn fixture_at(&self, c: Cell) -> Option<&Fixture> {
        self.fixtures.iter().find(|f| f.cell == c)
    }

    /// In bounds and not occupied by a fixture.
    pub fn walkable(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.fixture_at(c).is_none()
    }

    pub fn fixture(&self, id: &str) -> Option<&Fixture> {
        self.fixtures.iter().find(|f| f.id == id)
    }

    /// The fixture owning placement target `target`.
    pub fn target_fixture(&self, target: &str) -> Option<&Fixture> {
        self.fixtures
            .iter()
            .find(|f| f.targets().contains(&target))
    }

    pub fn occupancy(&self, target: &str) -> usize {
        self.objects
            .values()
            .filter(|o| matches!(&o.location, Location::In(t) if t == target))
            .count()
    }

    /// Whether an object of `kind` could be placed into `target` right now,
    /// ignoring the agent's position.
    pub fn target_available(&self, target: &str, kind: ObjectKind) -> bool {
        let Some(fixture) = self.target_fixture(target) else {
            return false;
        };
        !self.broken_fixtures.contains(&fixture.id)
            && fixture.kind.accepts(kind)
            && fixture
                .target_capacity()
                .is_none_or(|cap| self.occupancy(target) < cap)
    }

    /// Cells the agent could stand on to reach a fixture.
    pub fn access_cells(&self, fixture: &Fixture) -> Vec<Cell> {
        fixture
            .cell
            .neighbours()
            .into_iter()
            .filter(|c| self.walkable(*c))
            .collect()
    }

    /// Where objects land when their fixture breaks.
    fn drop_cell(&self, fixture: &Fixture) -> Option<Cell> {
        self.access_cells(fixture).into_iter().next()
    }

    /// Cell of an object, if it is on the floor or in a fixture.
    pub fn object_cell(&self, obj: &ObjectState) -> Option<Cell> {
        match &obj.location {
            Location::Floor(c) => Some(*c),
            Location::In(t) => self.target_fixture(t).map(|f| f.cell),
            Location::Held => None,
        }
    }

    /// Checks the structural invariants of a world.
    pub fn check_invariants(&self) -> Result<(), WorldError> {
        if !self.walkable(self.agent_pos) {
            return Err(WorldError::IllegalAction(format!(
                "agent position {} is not a floor cell",
                self.agent_pos
            )));
        }
        let held: Vec<&ObjectState> = self
            .objects
            .values()
            .filter(|o| o.location == Location::Held)
            .collect();
        match (&self.agent_holding, held.as_slice()) {
            (None, []) => {}
            (Some(h), [o]) if &o.id == h => {}
            _ => return Err(illegal("held object and agent_holding disagree")),
        }
        for (id, obj) in &self.objects {
            if id != &obj.id {
                return Err(WorldError::UnknownEntity(id.clone()));
            }
            match &obj.location {
                Location::Floor(c) if !self.walkable(*c) => {
                    return Err(illegal(format!("{id} is not on a floor cell")));
                }
                Location::In(t) => {
                    let fixture = self
                        .target_fixture(t)
                        .ok_or_else(|| WorldError::UnknownEntity(t.clone()))?;
                    if let Some(cap) = fixture.target_capacity() {
                        if self.occupancy(t) > cap {
                            return Err(illegal(format!("{t} over capacity")));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Applies one agent action, returning the successor world.
    pub fn apply_action(&self, action: &WorldAction) -> Result<WorldState, WorldError> {
        if self.abandoned && *action != WorldAction::Idle {
            return Err(illegal("task abandoned; only idle is legal"));
        }
        let mut next = self.clone();
        match action {
            WorldAction::Idle => {}
            WorldAction::Abandon => next.abandoned = true,
            WorldAction::Move(dir) => {
                let to = self.agent_pos.step(*dir);
                if !self.in_bounds(to) {
                    return Err(illegal("out of bounds"));
                }
                if self.fixture_at(to).is_some() {
                    return Err(illegal("cell blocked by fixture"));
                }
                next.agent_pos = to;
            }
            WorldAction::PickUp(id) => {
                if self.agent_holding.is_some() {
                    return Err(illegal("already holding an object"));
                }
                let obj = self
                    .objects
                    .get(id)
                    .ok_or_else(|| illegal(format!("unknown object {id}")))?;
                let cell = self
                    .object_cell(obj)
                    .ok_or_else(|| illegal(format!("{id} is not reachable")))?;
                if self.agent_pos.manhattan(cell) > 1 {
                    return Err(illegal(format!("{id} not adjacent")));
                }
                let o = next.objects.get_mut(id).expect("object exists");
                o.location = Location::Held;
                next.agent_holding = Some(id.clone());
            }
            WorldAction::Place(target) => {
                let held = self
                    .agent_holding
                    .as_ref()
                    .ok_or_else(|| illegal("not holding anything"))?;
                let fixture = self
                    .target_fixture(target)
                    .ok_or_else(|| illegal(format!("unknown target {target}")))?;
                if self.broken_fixtures.contains(&fixture.id) {
                    return Err(illegal("fixture broken"));
                }
                if self.agent_pos.manhattan(fixture.cell) != 1 {
                    return Err(illegal(format!("{target} not adjacent")));
                }
                let kind = self.objects[held].kind;
                if !fixture.kind.accepts(kind) {
                    return Err(illegal(format!(
                        "{} does not accept {}",
                        fixture.kind.name(),
                        kind.name()
                    )));
                }
                if let Some(cap) = fixture.target_capacity() {
                    if self.occupancy(target) >= cap {
                        return Err(illegal("target full"));
                    }
                }
                let o = next.objects.get_mut(held).expect("held object exists");
                o.location = Location::In(target.clone());
                next.agent_holding = None;
            }
        }
        next.tick += 1;
        Ok(next)
    }

    /// Applies every scheduled event whose `fire_tick` equals the current tick,
    /// in schedule order. The tick itself is not advanced.
    pub fn step_events(
        &self,
        schedule: &[WorldEvent],
    ) -> Result<(WorldState, Vec<WorldEvent>), WorldError> {
        let mut next = self.clone();
        let mut fired = Vec::new();
        for event in schedule.iter().filter(|e| e.fire_tick == self.tick) {
            next.apply_effect(&event.effect)?;
            fired.push(event.clone());
        }
        Ok((next, fired))
    }

    fn apply_effect(&mut self, effect: &EventEffect) -> Result<(), WorldError> {
        match effect {
            EventEffect::BreakFixture(id) => {
                let fixture = self
                    .fixture(id)
                    .cloned()
                    .ok_or_else(|| WorldError::UnknownEntity(id.clone()))?;
                self.broken_fixtures.insert(id.clone());
                let targets: Vec<String> =
                    fixture.targets().into_iter().map(str::to_string).collect();
                let drop = self.drop_cell(&fixture);
                for obj in self.objects.values_mut() {
                    if matches!(&obj.location, Location::In(t) if targets.contains(t)) {
                        let cell = drop.ok_or_else(|| {
                            illegal(format!("{id} has no free neighbouring cell"))
                        })?;
                        obj.location = Location::Floor(cell);
                    }
                }
            }
            EventEffect::SpawnObject(obj) => {
                if self.objects.contains_key(&obj.id) {
                    return Err(WorldError::DuplicateEntity(obj.id.clone()));
                }
                match &obj.location {
                    Location::Floor(c) if !self.walkable(*c) => {
                        return Err(WorldError::UnknownEntity(format!("floor cell {c}")));
                    }
                    Location::In(t) if self.target_fixture(t).is_none() => {
                        return Err(WorldError::UnknownEntity(t.clone()));
                    }
                    Location::Held => return Err(illegal("cannot spawn into the agent's hand")),
                    _ => {}
                }
                self.objects.insert(obj.id.clone(), obj.clone());
            }
            EventEffect::RemoveObject(id) => {
                self.objects
                    .remove(id)
                    .ok_or_else(|| WorldError::UnknownEntity(id.clone()))?;
                if self.agent_holding.as_deref() == Some(id.as_str()) {
                    self.agent_holding = None;
                }
            }
        }
        Ok(())
    }

    /// Whether `obj` currently satisfies `predicate`.
    pub fn object_satisfies(&self, obj: &ObjectState, predicate: &PlacementPredicate) -> bool {
        let Some(allowed) = predicate.get(&obj.kind) else {
            return true;
        };
        match &obj.location {
            Location::In(t) => self
                .target_fixture(t)
                .is_some_and(|f| allowed.contains(&f.kind) && !self.broken_fixtures.contains(&f.id)),
            _ => false,
        }
    }

    pub fn evaluate_goal(&self, goal: &GoalSpec) -> GoalStatus {
        let misplaced_count = self
            .objects
            .values()
            .filter(|o| !self.object_satisfies(o, &goal.strict))
            .count();
        let relaxed = self
            .objects
            .values()
            .all(|o| self.object_satisfies(o, &goal.relaxed));
        GoalStatus {
            strict: misplaced_count == 0,
            relaxed,
            misplaced_count,
        }
    }

    /// Placement targets an object of `kind` may go to under `predicate`,
    /// ordered by the predicate's fixture-kind order, then fixture
    /// declaration order, then slot order.
    pub fn candidate_targets(&self, kind: ObjectKind, predicate: &PlacementPredicate) -> Vec<String> {
        let Some(allowed) = predicate.get(&kind) else {
            return Vec::new();
        };
        allowed
            .iter()
            .flat_map(|fk| self.fixtures.iter().filter(move |f| f.kind == *fk))
            .flat_map(|f| f.targets())
            .filter(|t| self.target_available(t, kind))
            .map(str::to_string)
            .collect()
    }
}
