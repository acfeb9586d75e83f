//! Seeded experiment runner: generate a stream per seed, run every selected
//! mechanism on it, and compare against the offline optimum at `L` and `2L`.

use serde::Serialize;

use crate::baselines::{random_baseline_average, RandomThreshold};
use crate::generators::{generate, InstanceConfig};
use crate::mechanisms::{AuctionParams, HeteroOmg, HeteroOmz, HomoOmz, Mechanism, MechanismKind};
use crate::model::{frugality_report, DeclaredProfile, UserProfile};

use super::properties::{check_run_invariants, Violation};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    /// Ignored by `homo-omz` and `random`.
    pub delta: f64,
}

impl MechanismSpec {
    pub fn new(kind: MechanismKind, delta: f64) -> Self {
        MechanismSpec { kind, delta }
    }

    /// The delta actually used, if any.
    pub fn effective_delta(&self) -> Option<f64> {
        match self.kind {
            MechanismKind::HeteroOmz | MechanismKind::HeteroOmg => Some(self.delta),
            MechanismKind::HomoOmz | MechanismKind::Random => None,
        }
    }
}

/// Builds a mechanism. `random` posts `params.beta` as its fixed threshold.
pub fn build_mechanism(
    spec: MechanismSpec,
    params: AuctionParams<f64>,
) -> Result<Box<dyn Mechanism<f64> + Send + Sync>, HarnessError> {
    params.validate()?;
    if let Some(d) = spec.effective_delta() {
        crate::mechanisms::validate_delta(d)?;
    }
    Ok(match spec.kind {
        MechanismKind::HomoOmz => Box::new(HomoOmz::new(params)),
        MechanismKind::HeteroOmz => Box::new(HeteroOmz::new(params, spec.delta)),
        MechanismKind::HeteroOmg => Box::new(HeteroOmg::new(params, spec.delta)),
        MechanismKind::Random => Box::new(RandomThreshold { params }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSettings {
    pub beta: f64,
    pub random_trials: usize,
    /// Range the random baseline draws its threshold from.
    pub random_range: (f64, f64),
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            beta: 10.0,
            random_trials: 50,
            random_range: (1.0, 10.0),
        }
    }
}

/// One mechanism on one seeded stream. For `random` the payment and task
/// figures are means over its trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub mechanism: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: u32,
    #[serde(rename = "L")]
    pub tasks: u64,
    pub lambda: f64,
    pub delta: Option<f64>,
    pub beta: f64,
    pub total_payment: f64,
    pub tasks_completed: f64,
    pub price_per_task: Option<f64>,
    #[serde(rename = "opt_cost_L")]
    pub opt_cost_l: Option<f64>,
    #[serde(rename = "opt_cost_2L")]
    pub opt_cost_2l: Option<f64>,
    pub idealistic_ratio: Option<f64>,
    pub realistic_ratio: Option<f64>,
    /// True cost of the allocated tasks; `None` for the random baseline.
    pub winner_cost: Option<f64>,
    pub users: usize,
}

impl ExperimentRow {
    pub fn completed_all(&self) -> bool {
        self.tasks_completed >= self.tasks as f64
    }
}

/// Aggregates over the rows of one mechanism, computed only from those rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismSummary {
    pub mechanism: String,
    pub delta: Option<f64>,
    pub runs: usize,
    pub mean_payment: f64,
    pub mean_tasks: f64,
    /// Fraction of runs that allocated all `L` tasks.
    pub completion_rate: f64,
    /// Over runs where supply covers `L` tasks.
    pub mean_opt_cost_l: Option<f64>,
    /// Over runs where supply covers `2L` tasks.
    pub mean_opt_cost_2l: Option<f64>,
    /// Mean payment over mean `opt(L)`, both taken on runs where `opt(L)` exists.
    pub payment_over_opt_l: Option<f64>,
    pub payment_over_opt_2l: Option<f64>,
    pub mean_winner_cost: Option<f64>,
    /// Mean winner cost over mean `opt(L)`.
    pub winner_cost_over_opt_l: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `mean(num) / mean(den)` over rows where `den` is present and positive.
fn ratio_of_means<'a>(
    rows: &[&'a ExperimentRow],
    num: impl Fn(&'a ExperimentRow) -> Option<f64>,
    den: impl Fn(&'a ExperimentRow) -> Option<f64>,
) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((num(r)?, den(r).filter(|d| *d > 0.0)?)))
        .collect();
    let n = mean(pairs.iter().map(|p| p.0))?;
    let d = mean(pairs.iter().map(|p| p.1))?;
    Some(n / d)
}

impl MechanismSummary {
    /// `None` when `rows` is empty.
    pub fn from_rows(rows: &[&ExperimentRow]) -> Option<Self> {
        let first = rows.first()?;
        let n = rows.len() as f64;
        Some(MechanismSummary {
            mechanism: first.mechanism.clone(),
            delta: first.delta,
            runs: rows.len(),
            mean_payment: mean(rows.iter().map(|r| r.total_payment))?,
            mean_tasks: mean(rows.iter().map(|r| r.tasks_completed))?,
            completion_rate: rows.iter().filter(|r| r.completed_all()).count() as f64 / n,
            mean_opt_cost_l: mean(rows.iter().filter_map(|r| r.opt_cost_l)),
            mean_opt_cost_2l: mean(rows.iter().filter_map(|r| r.opt_cost_2l)),
            payment_over_opt_l: ratio_of_means(rows, |r| Some(r.total_payment), |r| r.opt_cost_l),
            payment_over_opt_2l: ratio_of_means(rows, |r| Some(r.total_payment), |r| r.opt_cost_2l),
            mean_winner_cost: mean(rows.iter().filter_map(|r| r.winner_cost)),
            winner_cost_over_opt_l: ratio_of_means(rows, |r| r.winner_cost, |r| r.opt_cost_l),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantFailure {
    pub mechanism: String,
    pub seed: u64,
    pub violation: Violation<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ExperimentResult {
    /// Seed-major, then mechanism in selection order.
    pub rows: Vec<ExperimentRow>,
    /// One per mechanism, in selection order.
    pub summaries: Vec<MechanismSummary>,
    pub violations: Vec<InvariantFailure>,
}

impl ExperimentResult {
    pub fn summary(&self, mechanism: MechanismKind) -> Option<&MechanismSummary> {
        self.summaries
            .iter()
            .find(|s| s.mechanism == mechanism.as_str())
    }
}

fn project_zero_interval(stream: &[DeclaredProfile<f64>]) -> Vec<DeclaredProfile<f64>> {
    stream
        .iter()
        .map(|d| DeclaredProfile {
            departure: d.arrival,
            ..*d
        })
        .collect()
}

/// Runs every spec on the stream generated for each seed. Mechanisms that
/// decide at arrival see the stream with departures set to arrivals.
pub fn run_experiment(
    config: &InstanceConfig,
    specs: &[MechanismSpec],
    settings: &ExperimentSettings,
    seeds: &[u64],
) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let params = AuctionParams::new(config.tasks, config.horizon, settings.beta);
    let mechanisms = specs
        .iter()
        .map(|&s| build_mechanism(s, params).map(|m| (s, m)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut result = ExperimentResult::default();
    for &seed in seeds {
        let users: Vec<UserProfile<f64>> = generate(&config.clone().with_seed(seed))?;
        let stream: Vec<DeclaredProfile<f64>> = users.iter().map(UserProfile::truthful).collect();
        let zero_interval = project_zero_interval(&stream);
        let unit_capacity = users.iter().all(|u| u.capacity == 1);
        for (spec, mechanism) in &mechanisms {
            let name = spec.kind.as_str().to_string();
            let row_base = |payment: f64, tasks: f64, winner_cost: Option<f64>, opt_l, opt_2l| {
                let ratio = |o: Option<f64>| o.filter(|c| *c > 0.0).map(|c| payment / c);
                ExperimentRow {
                    mechanism: name.clone(),
                    seed,
                    horizon: config.horizon,
                    tasks: config.tasks,
                    lambda: config.lambda,
                    delta: spec.effective_delta(),
                    beta: settings.beta,
                    total_payment: payment,
                    tasks_completed: tasks,
                    price_per_task: (tasks > 0.0).then(|| payment / tasks),
                    opt_cost_l: opt_l,
                    opt_cost_2l: opt_2l,
                    idealistic_ratio: ratio(opt_l),
                    realistic_ratio: ratio(opt_2l),
                    winner_cost,
                    users: users.len(),
                }
            };
            if spec.kind == MechanismKind::Random {
                let s = random_baseline_average(
                    &stream,
                    config.tasks,
                    config.horizon,
                    settings.random_trials,
                    seed,
                    settings.random_range,
                )?;
                let f =
                    frugality_report(&crate::model::AuctionOutcome::empty(), &users, config.tasks);
                result.rows.push(row_base(
                    s.mean_payment,
                    s.mean_tasks,
                    None,
                    f.opt_cost_l,
                    f.opt_cost_2l,
                ));
                continue;
            }
            if mechanism.requires_unit_capacity() && !unit_capacity {
                return Err(HarnessError::Incompatible {
                    mechanism: name,
                    reason: "every user must have capacity 1".into(),
                });
            }
            let input = if mechanism.requires_zero_interval() {
                &zero_interval
            } else {
                &stream
            };
            let outcome = mechanism.run(input)?;
            let report = check_run_invariants(&outcome, &users, input, config.tasks);
            result
                .violations
                .extend(
                    report
                        .violations
                        .into_iter()
                        .map(|violation| InvariantFailure {
                            mechanism: name.clone(),
                            seed,
                            violation,
                        }),
                );
            let f = frugality_report(&outcome, &users, config.tasks);
            result.rows.push(row_base(
                f.payment,
                f.tasks_completed as f64,
                Some(outcome.winner_cost(&users)),
                f.opt_cost_l,
                f.opt_cost_2l,
            ));
        }
    }
    result.summaries = specs
        .iter()
        .filter_map(|spec| {
            let rows: Vec<&ExperimentRow> = result
                .rows
                .iter()
                .filter(|r| r.mechanism == spec.kind.as_str() && r.delta == spec.effective_delta())
                .collect();
            MechanismSummary::from_rows(&rows)
        })
        .collect();
    Ok(result)
}
