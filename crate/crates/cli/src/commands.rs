use std::fs;
use std::path::{Path, PathBuf};

use frugal_core::baselines::{random_baseline_average, RandomThreshold};
use frugal_core::generators::generate;
use frugal_core::harness::experiment::{
    build_mechanism, run_experiment, ExperimentRow, MechanismSpec,
};
use frugal_core::harness::{
    check_run_invariants, default_bid_grid, default_time_grid, test_cost_truthfulness,
    test_time_truthfulness, DeviationReport, HarnessError, Instance,
};
use frugal_core::model::frugality_report;
use frugal_core::{AuctionParams, Declaration, Mechanism, MechanismKind, Profile, StageSchedule};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Format, RunSpec};
use crate::golden::{render_decision_log, verify_examples, Divergence, GoldenError, VerifyReport};
use crate::instance_file::{format_instance, parse_instance};
use crate::output::{render_rows, render_summaries, to_csv, CellSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("golden file integrity: {0}")]
    Integrity(GoldenError),
    #[error("verification failed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Mismatch(Vec<Divergence>),
    #[error("{0} profitable deviation(s) found")]
    ProfitableDeviations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) | CliError::ProfitableDeviations(_) => 1,
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Integrity(GoldenError::Io { .. }) => 3,
            CliError::Integrity(_) => 4,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<frugal_core::generators::GenError> for CliError {
    fn from(e: frugal_core::generators::GenError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<frugal_core::MechanismError> for CliError {
    fn from(e: frugal_core::MechanismError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes `content` to `dir/name`, creating `dir`. Returns the path.
pub fn write_output(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Text to print plus files written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandOutput {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

impl CommandOutput {
    fn emit(&mut self, dir: Option<&Path>, name: &str, content: String) -> Result<(), CliError> {
        match dir {
            Some(d) => self.files.push(write_output(d, name, &content)?),
            None => self.stdout.push_str(&content),
        }
        Ok(())
    }
}

pub fn cmd_verify_examples(golden_dir: Option<&Path>) -> Result<VerifyReport, CliError> {
    let report = verify_examples(golden_dir).map_err(CliError::Integrity)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Mismatch(report.divergences))
    }
}

fn spec_for(spec: &RunSpec, kind: MechanismKind) -> MechanismSpec {
    MechanismSpec::new(kind, spec.delta)
}

/// Users for one seed: the replay file, or a generated stream.
fn users_for(spec: &RunSpec, seed: u64) -> Result<Vec<Profile>, CliError> {
    match &spec.instance_file {
        Some(path) => Ok(parse_instance(&read_file(path)?, spec.instance.horizon)?),
        None => Ok(generate(&spec.instance.clone().with_seed(seed))?),
    }
}

fn seeds_for(spec: &RunSpec) -> Vec<u64> {
    if spec.instance_file.is_some() {
        vec![0]
    } else {
        spec.sweep.seeds.clone()
    }
}

/// Fits a truthful stream to what the mechanism accepts.
fn input_for(
    mechanism: &dyn Mechanism<f64>,
    users: &[Profile],
) -> Result<Vec<Declaration>, CliError> {
    if mechanism.requires_unit_capacity() && users.iter().any(|u| u.capacity != 1) {
        return Err(CliError::Invalid(format!(
            "{} needs every capacity to be 1",
            mechanism.name()
        )));
    }
    Ok(users
        .iter()
        .map(|u| {
            let mut d = u.truthful();
            if mechanism.requires_zero_interval() {
                d.departure = d.arrival;
            }
            d
        })
        .collect())
}

fn mechanism_for(
    spec: &RunSpec,
    kind: MechanismKind,
    seed: u64,
) -> Result<Box<dyn Mechanism<f64> + Send + Sync>, CliError> {
    let i = &spec.instance;
    if kind == MechanismKind::Random {
        let stream: [Declaration; 0] = [];
        let drawn = random_baseline_average(
            &stream,
            i.tasks,
            i.horizon,
            1,
            seed,
            spec.settings.random_range,
        )?;
        return Ok(Box::new(RandomThreshold::new(
            i.tasks,
            i.horizon,
            drawn.thresholds[0],
        )));
    }
    Ok(build_mechanism(
        spec_for(spec, kind),
        AuctionParams::new(i.tasks, i.horizon, spec.settings.beta),
    )?)
}

/// Runs each mechanism once per seed on the configured instance. Writes the
/// decision logs and the instance when an output directory is set.
pub fn cmd_run(spec: &RunSpec) -> Result<CommandOutput, CliError> {
    let mut out = CommandOutput::default();
    let mut rows = Vec::new();
    let dir = spec.output.dir.as_deref();
    for seed in seeds_for(spec) {
        let users = users_for(spec, seed)?;
        if let Some(d) = dir {
            out.files.push(write_output(
                d,
                &format!("instance-seed{seed}.txt"),
                &format_instance(&users),
            )?);
        }
        for &kind in &spec.mechanisms {
            let mechanism = mechanism_for(spec, kind, seed)?;
            let input = input_for(mechanism.as_ref(), &users)?;
            let outcome = mechanism.run(&input)?;
            let check = check_run_invariants(&outcome, &users, &input, spec.instance.tasks);
            if !check.passed() {
                return Err(CliError::Invalid(format!(
                    "{kind} seed {seed}: invariant violations {:?}",
                    check.violations
                )));
            }
            if let Some(d) = dir {
                let log = render_decision_log(&outcome);
                out.files.push(write_output(
                    d,
                    &format!("log-{kind}-seed{seed}.csv"),
                    &log,
                )?);
            }
            let f = frugality_report(&outcome, &users, spec.instance.tasks);
            let tasks = f.tasks_completed as f64;
            rows.push(ExperimentRow {
                mechanism: kind.to_string(),
                seed,
                horizon: spec.instance.horizon,
                tasks: spec.instance.tasks,
                lambda: spec.instance.lambda,
                delta: spec_for(spec, kind).effective_delta(),
                beta: if kind == MechanismKind::Random {
                    mechanism.params().beta
                } else {
                    spec.settings.beta
                },
                total_payment: f.payment,
                tasks_completed: tasks,
                price_per_task: outcome.price_per_task(),
                opt_cost_l: f.opt_cost_l,
                opt_cost_2l: f.opt_cost_2l,
                idealistic_ratio: f.idealistic_ratio,
                realistic_ratio: f.realistic_ratio,
                winner_cost: Some(outcome.winner_cost(&users)),
                users: users.len(),
            });
        }
    }
    let rendered =
        render_rows(&rows, spec.output.format, spec.output.layout).map_err(CliError::Invalid)?;
    out.emit(dir, &format!("runs.{}", ext(spec.output.format)), rendered)?;
    Ok(out)
}

/// Every `(L, lambda)` cell, L-major.
pub fn sweep_cells(spec: &RunSpec) -> Vec<(u64, f64)> {
    spec.sweep
        .tasks
        .iter()
        .flat_map(|&l| spec.sweep.lambdas.iter().map(move |&x| (l, x)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<CellSummary>,
    pub violations: usize,
}

pub fn run_sweep(spec: &RunSpec) -> Result<SweepResult, CliError> {
    if spec.instance_file.is_some() {
        return Err(CliError::Config(ConfigError {
            line: None,
            message: "sweep generates its instances; remove `instance.file`".into(),
        }));
    }
    let specs: Vec<MechanismSpec> = spec.mechanisms.iter().map(|&k| spec_for(spec, k)).collect();
    let mut result = SweepResult::default();
    for (tasks, lambda) in sweep_cells(spec) {
        let config = frugal_core::generators::InstanceConfig {
            tasks,
            lambda,
            ..spec.instance.clone()
        };
        let cell = run_experiment(&config, &specs, &spec.settings, &spec.sweep.seeds)?;
        result.violations += cell.violations.len();
        result.rows.extend(cell.rows);
        result.summaries.extend(
            cell.summaries
                .into_iter()
                .map(|summary| CellSummary::new(tasks, lambda, summary)),
        );
    }
    Ok(result)
}

/// Cartesian sweep over `(L, lambda, mechanism, seed)`. Writes
/// `sweep.{csv,json}` and `summary.{csv,json}`.
pub fn cmd_sweep(spec: &RunSpec) -> Result<CommandOutput, CliError> {
    let result = run_sweep(spec)?;
    if result.violations > 0 {
        return Err(CliError::Invalid(format!(
            "{} invariant violations during sweep",
            result.violations
        )));
    }
    let mut out = CommandOutput::default();
    let dir = spec.output.dir.as_deref();
    let e = ext(spec.output.format);
    let rows = render_rows(&result.rows, spec.output.format, spec.output.layout)
        .map_err(CliError::Invalid)?;
    out.emit(dir, &format!("sweep.{e}"), rows)?;
    if dir.is_some() {
        let summary =
            render_summaries(&result.summaries, spec.output.format).map_err(CliError::Invalid)?;
        out.emit(dir, &format!("summary.{e}"), summary)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub seed: u64,
    pub mechanism: String,
    pub user: u32,
    /// `cost` or `time`.
    pub kind: &'static str,
    pub truthful_tasks: u64,
    pub truthful_price: f64,
    pub truthful_utility: f64,
    pub deviations: usize,
    pub max_gain: f64,
    pub best_arrival: Option<u32>,
    pub best_departure: Option<u32>,
    pub best_bid: Option<f64>,
}

fn deviation_row(seed: u64, kind: &'static str, r: &DeviationReport<f64>) -> DeviationRow {
    let best = r.best_deviation();
    DeviationRow {
        seed,
        mechanism: r.mechanism.to_string(),
        user: r.user,
        kind,
        truthful_tasks: r.truthful_tasks,
        truthful_price: r.truthful_price,
        truthful_utility: r.truthful_utility,
        deviations: r.deviations.len(),
        max_gain: r.max_gain,
        best_arrival: best.map(|d| d.declared.arrival),
        best_departure: best.map(|d| d.declared.departure),
        best_bid: best.map(|d| d.declared.bid),
    }
}

/// Replays every user's cost deviations (all mechanisms) and window
/// deviations (mechanisms that keep users online), others truthful.
pub fn run_deviations(spec: &RunSpec) -> Result<Vec<DeviationRow>, CliError> {
    let schedule = StageSchedule::build(spec.instance.horizon, spec.instance.tasks)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut rows = Vec::new();
    for seed in seeds_for(spec) {
        let users = users_for(spec, seed)?;
        for &kind in &spec.mechanisms {
            let mechanism = mechanism_for(spec, kind, seed)?;
            let input = input_for(mechanism.as_ref(), &users)?;
            let truths: Vec<Profile> = users
                .iter()
                .zip(&input)
                .map(|(u, d)| Profile {
                    departure: d.departure,
                    ..*u
                })
                .collect();
            let instance = Instance {
                truths,
                declared: input,
            };
            let truthful = mechanism.run(&instance.declared)?;
            let mut thresholds = truthful.thresholds_seen();
            thresholds.push(mechanism.params().beta);
            for truth in &instance.truths {
                let grid = default_bid_grid(truth.unit_cost, &thresholds);
                let r = test_cost_truthfulness(mechanism.as_ref(), &instance, truth.id, &grid)?;
                rows.push(deviation_row(seed, "cost", &r));
                if !mechanism.requires_zero_interval() && !truth.is_zero_interval() {
                    let grid = default_time_grid(truth, &schedule);
                    let r = test_time_truthfulness(mechanism.as_ref(), &instance, truth.id, &grid)?;
                    rows.push(deviation_row(seed, "time", &r));
                }
            }
        }
    }
    Ok(rows)
}

/// Writes `deviations.{csv,json}`; fails with exit code 1 if any
/// deviation was profitable.
pub fn cmd_deviations(spec: &RunSpec) -> Result<CommandOutput, CliError> {
    let rows = run_deviations(spec)?;
    let mut out = CommandOutput::default();
    let rendered = match spec.output.format {
        Format::Csv => to_csv(&rows).map_err(|e| CliError::Invalid(e.to_string()))?,
        Format::Json => {
            serde_json::to_string_pretty(&rows).map_err(|e| CliError::Invalid(e.to_string()))?
                + "\n"
        }
    };
    out.emit(
        spec.output.dir.as_deref(),
        &format!("deviations.{}", ext(spec.output.format)),
        rendered,
    )?;
    let profitable = rows.iter().filter(|r| r.max_gain > 0.0).count();
    if profitable > 0 {
        if let Some(d) = spec.output.dir.as_deref() {
            eprintln!("details in {}", d.display());
        }
        return Err(CliError::ProfitableDeviations(profitable));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn spec(text: &str) -> RunSpec {
        parse_config(text).unwrap()
    }

    #[test]
    fn sweep_cell_counts() {
        let s = spec("command = sweep\nT = 100\nsweep.L = 10..40 step 10\nseeds = 2\nmechanism = hetero-omz, random");
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.rows.len(), 4 * 2 * 2);
        assert_eq!(r.summaries.len(), 4 * 2);
        assert_eq!(r.violations, 0);
        let s = spec("command = sweep\nT = 100\nL = 10\nsweep.lambda = 0.2..1 step 0.2");
        assert_eq!(sweep_cells(&s).len(), 5);
        let single = run_sweep(&spec("command = sweep\nT = 50\nL = 5")).unwrap();
        assert_eq!(single.rows.len(), 1);
    }

    #[test]
    fn sweep_rejects_instance_file() {
        let s = spec("command = sweep\nL = 5\ninstance.file = x.txt");
        assert_eq!(run_sweep(&s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn run_replays_instance_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex2.txt");
        fs::write(
            &path,
            format_instance(&frugal_core::reference::example_two().users),
        )
        .unwrap();
        let text = format!(
            "L = 8\nT = 8\nbeta = 5\nmechanism = hetero-omg, hetero-omz\ninstance.file = {}\n",
            path.display()
        );
        let out = cmd_run(&spec(&text)).unwrap();
        let mut lines = out.stdout.lines().skip(1);
        let omg: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!((omg[0], omg[7], omg[8]), ("hetero-omg", "40.0", "8.0"));
        let omz: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(omz[0], "hetero-omz");
    }

    #[test]
    fn homogeneous_mechanism_needs_unit_capacity() {
        let s = spec("L = 5\nT = 50\ninstance.capacity = uniform 1 10\nmechanism = homo-omz");
        assert_eq!(cmd_run(&s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_instance_file_is_io() {
        let s = spec("L = 5\ninstance.file = /nonexistent/users.txt");
        assert_eq!(cmd_run(&s).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn deviations_on_worked_example() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex1.txt");
        fs::write(
            &path,
            format_instance(&frugal_core::reference::example_one().users),
        )
        .unwrap();
        let text = format!(
            "L = 8\nT = 8\nbeta = 5\ninstance.file = {}\n",
            path.display()
        );
        let rows = run_deviations(&spec(&text)).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.max_gain <= 0.0));
        assert_eq!(rows[3].truthful_utility, 12.0);
    }
}
