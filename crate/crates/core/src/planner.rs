//! Greedy tidy-up planner and what-if simulation.
//!
//! The planner repeatedly fetches the nearest misplaced object (breadth-first
//! distance, N/S/E/W expansion) that has somewhere to go and carries it to the
//! first free target the active predicate allows.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::world::{Cell, Direction, GoalSpec, GoalStatus, GoalVariant, Location, PlacementPredicate, WorldAction, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub id: u64,
    pub goal_ref: String,
    pub variant: GoalVariant,
    pub steps: Vec<WorldAction>,
    pub valid_from_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedOutcome {
    pub reachable: bool,
    pub failing_step: Option<usize>,
    pub final_goal_status: GoalStatus,
}

/// Breadth-first distances and parent moves over walkable cells.
struct Reach {
    parent: BTreeMap<Cell, Option<(Cell, Direction)>>,
}

impl Reach {
    fn from(world: &WorldState, start: Cell) -> Self {
        let mut parent = BTreeMap::new();
        parent.insert(start, None);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for dir in Direction::ALL {
                let n = c.step(dir);
                if world.walkable(n) && !parent.contains_key(&n) {
                    parent.insert(n, Some((c, dir)));
                    queue.push_back(n);
                }
            }
        }
        Reach { parent }
    }

    fn path(&self, to: Cell) -> Option<Vec<Direction>> {
        self.parent.get(&to)?;
        let mut cur = to;
        let mut moves = Vec::new();
        while let Some(Some((prev, dir))) = self.parent.get(&cur) {
            moves.push(*dir);
            cur = *prev;
        }
        moves.reverse();
        Some(moves)
    }

    /// Nearest reachable cell among `cells`, earliest listed on ties.
    fn nearest(&self, cells: &[Cell]) -> Option<(usize, Cell)> {
        cells
            .iter()
            .filter_map(|c| self.path(*c).map(|p| (p.len(), *c)))
            .min_by_key(|(d, _)| *d)
    }
}

/// Cells from which the agent can reach an object.
fn pickup_cells(world: &WorldState, id: &str) -> Vec<Cell> {
    let Some(obj) = world.objects.get(id) else {
        return Vec::new();
    };
    match &obj.location {
        Location::Floor(c) => std::iter::once(*c).chain(c.neighbours()).filter(|c| world.walkable(*c)).collect(),
        Location::In(t) => world.target_fixture(t).map(|f| world.access_cells(f)).unwrap_or_default(),
        Location::Held => Vec::new(),
    }
}

fn walk(world: &mut WorldState, steps: &mut Vec<WorldAction>, moves: Vec<Direction>) {
    for dir in moves {
        let a = WorldAction::Move(dir);
        *world = world.apply_action(&a).expect("bfs path is walkable");
        steps.push(a);
    }
}

/// Carries the held object to its first reachable target. False when there
/// is none.
fn deliver(world: &mut WorldState, steps: &mut Vec<WorldAction>, predicate: &PlacementPredicate) -> bool {
    let Some(held) = world.agent_holding.clone() else {
        return false;
    };
    let kind = world.objects[&held].kind;
    let reach = Reach::from(world, world.agent_pos);
    for target in world.candidate_targets(kind, predicate) {
        let fixture = world.target_fixture(&target).expect("candidate has fixture");
        if let Some((_, cell)) = reach.nearest(&world.access_cells(fixture)) {
            let moves = reach.path(cell).expect("nearest is reachable");
            walk(world, steps, moves);
            let place = WorldAction::Place(target);
            *world = world.apply_action(&place).expect("target checked available");
            steps.push(place);
            return true;
        }
    }
    false
}

/// Plans the full sequence of actions that tidies the room under
/// `predicate`, as far as the greedy strategy gets.
pub fn plan_steps(world: &WorldState, predicate: &PlacementPredicate) -> Vec<WorldAction> {
    let mut sim = world.clone();
    let mut steps = Vec::new();
    if sim.abandoned {
        return steps;
    }
    if sim.agent_holding.is_some() && !deliver(&mut sim, &mut steps, predicate) {
        return steps;
    }
    // Every pass places one object, so the loop is bounded by the object count.
    for _ in 0..=world.objects.len() {
        let reach = Reach::from(&sim, sim.agent_pos);
        let next = sim
            .objects
            .values()
            .filter(|o| !sim.object_satisfies(o, predicate))
            .filter(|o| !sim.candidate_targets(o.kind, predicate).is_empty())
            .filter_map(|o| reach.nearest(&pickup_cells(&sim, &o.id)).map(|(d, c)| (d, o.id.clone(), c)))
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let Some((_, id, cell)) = next else {
            break;
        };
        walk(&mut sim, &mut steps, reach.path(cell).expect("nearest is reachable"));
        let pick = WorldAction::PickUp(id);
        sim = sim.apply_action(&pick).expect("adjacent to object");
        steps.push(pick);
        if !deliver(&mut sim, &mut steps, predicate) {
            break;
        }
    }
    steps
}

/// Builds a plan for the given goal variant; `None` when nothing is left to do.
pub fn make_plan(
    world: &WorldState,
    goal: &GoalSpec,
    variant: GoalVariant,
    goal_ref: &str,
    id: u64,
) -> Option<Plan> {
    let steps = plan_steps(world, goal.predicate(variant));
    (!steps.is_empty()).then(|| Plan {
        id,
        goal_ref: goal_ref.to_string(),
        variant,
        steps,
        valid_from_tick: world.tick,
    })
}

/// Applies `steps` to a copy of `world`.
pub fn simulate_whatif(world: &WorldState, steps: &[WorldAction], goal: &GoalSpec) -> PredictedOutcome {
    let mut sim = world.clone();
    for (i, step) in steps.iter().enumerate() {
        match sim.apply_action(step) {
            Ok(next) => sim = next,
            Err(_) => {
                return PredictedOutcome {
                    reachable: false,
                    failing_step: Some(i),
                    final_goal_status: sim.evaluate_goal(goal),
                }
            }
        }
    }
    PredictedOutcome {
        reachable: true,
        failing_step: None,
        final_goal_status: sim.evaluate_goal(goal),
    }
}
