//! Command-line front end: `validate`, `run` and `sweep`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{BctProfile, MetricsRow, RunOptions, SimulationState};
use crate::scenario::{instantiate, parse_scenario, validate_scenario, ScenarioError, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(ScenarioError),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse(_) => EXIT_IO,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bctsim", version, about = "Three-layer affective agent simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario document and print the report.
    Validate { path: PathBuf },
    /// Run a scenario, writing a JSON Lines trace and a CSV of metrics.
    Run(RunArgs),
    /// Run a scenario once per weight of one argument template.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Prime,
    Ceos,
}

impl From<ProfileArg> for BctProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Prime => BctProfile::Prime,
            ProfileArg::Ceos => BctProfile::Ceos,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub path: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub ticks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub bct: Option<ProfileArg>,
    #[arg(long)]
    pub no_metacog: bool,
    /// TEMPLATE=WEIGHT; repeatable.
    #[arg(long = "set-weight", value_parser = parse_weight)]
    pub set_weight: Vec<(String, f64)>,
    #[arg(long, default_value = "trace.jsonl")]
    pub trace: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub template: String,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub weights: Vec<f64>,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

fn parse_weight(s: &str) -> Result<(String, f64), String> {
    let (id, w) = s.split_once('=').ok_or("expected TEMPLATE=WEIGHT")?;
    let w: f64 = w.parse().map_err(|e| format!("bad weight {w:?}: {e}"))?;
    if !(w >= 0.0) {
        return Err(format!("weight must be non-negative, got {w}"));
    }
    Ok((id.to_string(), w))
}

/// Validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ScenarioSpec,
    pub ticks: u64,
    pub seed: u64,
    pub options: RunOptions,
}

pub fn load_spec(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(CliError::Parse)
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let spec = load_spec(&args.path)?;
        let report = validate_scenario(&spec);
        if !report.is_ok() {
            return Err(CliError::Invalid(report.to_string()));
        }
        if args.ticks == 0 {
            return Err(CliError::Invalid("--ticks must be at least 1".into()));
        }
        let weight_overrides: BTreeMap<String, f64> = args.set_weight.iter().cloned().collect();
        for id in weight_overrides.keys() {
            if !spec.agent.argument_templates.iter().any(|t| &t.id == id) {
                return Err(CliError::Invalid(format!("unknown argument template {id:?}")));
            }
        }
        Ok(RunConfig {
            spec,
            ticks: args.ticks,
            seed: args.seed,
            options: RunOptions {
                metacognition: !args.no_metacog,
                weight_overrides,
                profile: args.bct.map(Into::into),
            },
        })
    }

    pub fn simulate(&self) -> Result<SimulationState, CliError> {
        let mut state = instantiate(&self.spec, self.seed, self.options.clone())
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        state.run(self.ticks);
        Ok(state)
    }
}

pub fn metrics_csv(state: &SimulationState) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["tick".to_string(), "selected_action".into(), "winning_process".into()];
    header.extend(state.config.processes.iter().map(|p| format!("force_{}", p.id)));
    header.extend(["misplaced_count".into(), "strict_tidy".into(), "relaxed_tidy".into()]);
    w.write_record(&header).expect("in-memory write");
    for MetricsRow {
        tick,
        selected_action,
        winning_process,
        forces,
        misplaced_count,
        strict_tidy,
        relaxed_tidy,
    } in &state.metrics
    {
        let mut row = vec![tick.to_string(), selected_action.clone(), winning_process.clone()];
        row.extend(forces.iter().map(|f| format!("{f:.6}")));
        row.extend([
            misplaced_count.to_string(),
            u8::from(*strict_tidy).to_string(),
            u8::from(*relaxed_tidy).to_string(),
        ]);
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Final goal status and countermeasure count of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub strict: bool,
    pub relaxed: bool,
    pub abandoned: bool,
    pub countermeasures: usize,
}

pub fn outcome(state: &SimulationState) -> Outcome {
    let status = state.world.evaluate_goal(&state.goal);
    Outcome {
        strict: status.strict,
        relaxed: status.relaxed,
        abandoned: state.world.abandoned,
        countermeasures: state.countermeasures_fired(),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_validate(path: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let spec = load_spec(path)?;
    let report = validate_scenario(&spec);
    writeln!(out, "{report}").map_err(|e| CliError::Io(e.to_string()))?;
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{} has validation errors", path.display())))
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut impl Write) -> Result<Outcome, CliError> {
    let config = RunConfig::from_args(args)?;
    let state = config.simulate()?;
    write(&args.trace, &state.trace.to_jsonl())?;
    write(&args.metrics, &metrics_csv(&state))?;
    let o = outcome(&state);
    writeln!(
        out,
        "{}: {} ticks, strict_tidy={} relaxed_tidy={} abandoned={} countermeasures={}",
        config.spec.meta.name,
        state.metrics.len(),
        o.strict,
        o.relaxed,
        o.abandoned,
        o.countermeasures
    )
    .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(o)
}

/// One outcome per weight, in input order.
pub fn sweep(config: &RunConfig, template: &str, weights: &[f64]) -> Result<Vec<Outcome>, CliError> {
    weights
        .par_iter()
        .map(|w| {
            let mut c = config.clone();
            c.options.weight_overrides.insert(template.to_string(), *w);
            c.simulate().map(|s| outcome(&s))
        })
        .collect()
}

pub fn sweep_csv(weights: &[f64], outcomes: &[Outcome]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["weight", "final_strict", "final_relaxed", "abandoned", "countermeasures_fired"])
        .expect("in-memory write");
    for (weight, o) in weights.iter().zip(outcomes) {
        w.write_record([
            weight.to_string(),
            u8::from(o.strict).to_string(),
            u8::from(o.relaxed).to_string(),
            u8::from(o.abandoned).to_string(),
            o.countermeasures.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut impl Write) -> Result<Vec<Outcome>, CliError> {
    if args.weights.is_empty() {
        return Err(CliError::Invalid("--weights needs at least one value".into()));
    }
    if let Some(w) = args.weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(CliError::Invalid(format!("weights must be non-negative, got {w}")));
    }
    let config = RunConfig::from_args(&args.run)?;
    if !config.spec.agent.argument_templates.iter().any(|t| t.id == args.template) {
        return Err(CliError::Invalid(format!("unknown argument template {:?}", args.template)));
    }
    let outcomes = sweep(&config, &args.template, &args.weights)?;
    write(&args.out, &sweep_csv(&args.weights, &outcomes))?;
    writeln!(out, "{} runs written to {}", outcomes.len(), args.out.display()).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(outcomes)
}

/// Runs the parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut stdout = std::io::stdout();
    let result = match &cli.command {
        Command::Validate { path } => cmd_validate(path, &mut stdout),
        Command::Run(args) => cmd_run(args, &mut stdout).map(|_| ()),
        Command::Sweep(args) => cmd_sweep(args, &mut stdout).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
