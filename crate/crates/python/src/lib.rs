//! Python bindings: load scenarios, step simulations and call the argument
//! aggregation directly.

use std::collections::BTreeMap;

use bctsim::affect::{compute_force as force_of, ActionTendency, TendencyAction};
use bctsim::agent::{BctProfile, RunOptions, SimulationState};
use bctsim::arguments::{aggregate as aggregate_case, Argument, Polarity};
use bctsim::cli::{metrics_csv, outcome};
use bctsim::scenario::{bundled_spec, instantiate, parse_scenario, serialize_scenario, validate_scenario, ScenarioSpec};
use bctsim::world::WorldAction;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed scenario document.
#[pyclass(module = "bctsim_py", frozen)]
pub struct Scenario {
    spec: ScenarioSpec,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_scenario(text).map(|spec| Scenario { spec }).map_err(value_error)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| pyo3::exceptions::PyOSError::new_err(e.to_string()))?;
        Self::from_json(&text)
    }

    /// One of the scenarios shipped with the library.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        bundled_spec(name)
            .map(|spec| Scenario { spec })
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.meta.name.clone()
    }

    /// `{"errors": [(code, location, message)], "warnings": [...]}`
    fn validate(&self) -> BTreeMap<&'static str, Vec<(String, String, String)>> {
        let report = validate_scenario(&self.spec);
        let rows = |issues: &[bctsim::scenario::Issue]| {
            issues
                .iter()
                .map(|i| (i.code.to_string(), i.location.clone(), i.message.clone()))
                .collect()
        };
        BTreeMap::from([("errors", rows(&report.errors)), ("warnings", rows(&report.warnings))])
    }

    fn to_json(&self) -> String {
        serialize_scenario(&self.spec)
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.spec.meta.name)
    }
}

fn parse_profile(name: Option<&str>) -> PyResult<Option<BctProfile>> {
    match name {
        None => Ok(None),
        Some("prime") => Ok(Some(BctProfile::Prime)),
        Some("ceos") => Ok(Some(BctProfile::Ceos)),
        Some(other) => Err(PyValueError::new_err(format!("unknown profile {other:?}"))),
    }
}

/// A running simulation of one scenario.
#[pyclass(module = "bctsim_py")]
pub struct Simulation {
    state: SimulationState,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (scenario, seed=0, metacognition=true, profile=None, weights=None))]
    fn new(
        scenario: &Scenario,
        seed: u64,
        metacognition: bool,
        profile: Option<&str>,
        weights: Option<BTreeMap<String, f64>>,
    ) -> PyResult<Self> {
        let options = RunOptions {
            metacognition,
            weight_overrides: weights.unwrap_or_default(),
            profile: parse_profile(profile)?,
        };
        let state = instantiate(&scenario.spec, seed, options).map_err(value_error)?;
        Ok(Simulation { state })
    }

    /// Advances one tick; returns the selected action and winning process.
    fn tick(&mut self) -> (String, String) {
        let row = self.state.tick();
        (row.selected_action.clone(), row.winning_process.clone())
    }

    /// Runs up to `ticks` ticks, stopping early once the agent is quiescent.
    /// Returns the number of ticks executed.
    fn run(&mut self, ticks: u64) -> u64 {
        self.state.run(ticks)
    }

    #[getter]
    fn current_tick(&self) -> u64 {
        self.state.world.tick
    }

    fn outcome(&self) -> BTreeMap<&'static str, usize> {
        let o = outcome(&self.state);
        BTreeMap::from([
            ("strict", o.strict as usize),
            ("relaxed", o.relaxed as usize),
            ("abandoned", o.abandoned as usize),
            ("countermeasures", o.countermeasures),
        ])
    }

    /// Pooled tendencies as `(id, process, option, action, force)`.
    fn pool(&self) -> Vec<(String, String, String, String, f64)> {
        self.state
            .tendency_pool
            .iter()
            .map(|t| (t.id.clone(), t.source_process.clone(), t.option.clone(), t.action.encode(), t.force))
            .collect()
    }

    fn trace_jsonl(&self) -> String {
        self.state.trace.to_jsonl()
    }

    fn metrics_csv(&self) -> String {
        metrics_csv(&self.state)
    }
}

type PyArgument = (String, String, String, f64, Option<String>);

fn to_arguments(raw: Vec<PyArgument>) -> PyResult<Vec<Argument>> {
    raw.into_iter()
        .map(|(id, option, polarity, weight, undercuts)| {
            let polarity = match polarity.as_str() {
                "pro" => Polarity::Pro,
                "con" => Polarity::Con,
                p => return Err(PyValueError::new_err(format!("polarity must be pro or con, got {p:?}"))),
            };
            Ok(Argument {
                id,
                option,
                polarity,
                weight,
                grounds: Vec::new(),
                source_process: String::new(),
                undercuts,
            })
        })
        .collect()
}

/// Arguments are `(id, option, "pro"|"con", weight, undercut_id_or_None)`.
/// Returns `(ranking, recommended, scores)`.
#[pyfunction]
fn aggregate(options: Vec<String>, arguments: Vec<PyArgument>) -> PyResult<(Vec<String>, String, BTreeMap<String, f64>)> {
    let report = aggregate_case(&options, &to_arguments(arguments)?).map_err(value_error)?;
    Ok((report.ranking, report.recommended, report.scores))
}

/// Force of a tendency on `option` with urgency `base_urgency`, given the
/// active arguments.
#[pyfunction]
fn compute_force(base_urgency: f64, option: String, arguments: Vec<PyArgument>) -> PyResult<f64> {
    let tendency = ActionTendency {
        id: String::new(),
        action: TendencyAction::World(WorldAction::Idle),
        option,
        label: String::new(),
        source_process: String::new(),
        base_urgency,
        supporting_arguments: Vec::new(),
        created_tick: 0,
        force: 0.0,
        plan_id: None,
    };
    Ok(force_of(&tendency, &to_arguments(arguments)?))
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_force, m)?)?;
    Ok(())
}

#[pymodule]
fn bctsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
