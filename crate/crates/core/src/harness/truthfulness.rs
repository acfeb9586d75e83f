//! Deviation replay: rerun the whole auction with one user's report changed
//! and compare its utility, under its true cost, against the truthful run.

use rand::Rng;
use serde::Serialize;

use crate::generators::{substream, Substream};
use crate::mechanisms::Mechanism;
use crate::model::{utility, DeclaredProfile, ModelError, TimeStep, UserId, UserProfile};
use crate::schedule::StageSchedule;
use crate::Scalar;

use super::properties::{check_capacity, check_price_floor, check_run_invariants, Violation};
use super::HarnessError;

/// True profiles plus the declarations actually submitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub truths: Vec<UserProfile<S>>,
    pub declared: Vec<DeclaredProfile<S>>,
}

impl<S: Scalar> Instance<S> {
    pub fn truthful(truths: Vec<UserProfile<S>>) -> Self {
        let declared = truths.iter().map(UserProfile::truthful).collect();
        Instance { truths, declared }
    }

    /// Replaces the submitted declarations; each must be feasible for its owner.
    pub fn with_declared(
        truths: Vec<UserProfile<S>>,
        declared: Vec<DeclaredProfile<S>>,
    ) -> Result<Self, HarnessError> {
        if truths.len() != declared.len() {
            return Err(HarnessError::Mismatch(
                "one declaration per user required".into(),
            ));
        }
        for d in &declared {
            let t = truths
                .iter()
                .find(|t| t.id == d.user_id)
                .ok_or(ModelError::UnknownUser(d.user_id))?;
            d.check_against(t)?;
        }
        Ok(Instance { truths, declared })
    }

    pub fn truth(&self, user: UserId) -> Result<&UserProfile<S>, HarnessError> {
        self.truths
            .iter()
            .find(|t| t.id == user)
            .ok_or(HarnessError::Model(ModelError::UnknownUser(user)))
    }

    /// The submitted stream with `user`'s entry replaced.
    pub fn replaced(&self, replacement: DeclaredProfile<S>) -> Vec<DeclaredProfile<S>> {
        self.declared
            .iter()
            .map(|d| {
                if d.user_id == replacement.user_id {
                    replacement
                } else {
                    *d
                }
            })
            .collect()
    }

    /// Zero-interval view used for mechanisms that decide at arrival.
    pub fn zero_interval(&self) -> Self {
        let squash_t = |mut u: UserProfile<S>| {
            u.departure = u.arrival;
            u
        };
        let squash_d = |mut d: DeclaredProfile<S>| {
            d.departure = d.arrival;
            d
        };
        Instance {
            truths: self.truths.iter().copied().map(squash_t).collect(),
            declared: self.declared.iter().copied().map(squash_d).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation<S> {
    pub declared: DeclaredProfile<S>,
    pub tasks: u64,
    pub price: S,
    pub utility: S,
    /// `utility - truthful utility`.
    pub gain: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport<S> {
    pub user: UserId,
    pub mechanism: &'static str,
    pub truthful_tasks: u64,
    pub truthful_price: S,
    pub truthful_utility: S,
    pub deviations: Vec<Deviation<S>>,
    /// Largest gain over the grid, `0` for an empty grid.
    pub max_gain: S,
    /// Price-floor and capacity violations in any replayed run, and
    /// individual rationality in the truthful one.
    pub violations: Vec<Violation<S>>,
}

impl<S: Scalar> DeviationReport<S> {
    /// No profitable deviation was found.
    pub fn is_truthful(&self) -> bool {
        self.max_gain <= S::zero()
    }

    pub fn best_deviation(&self) -> Option<&Deviation<S>> {
        self.deviations.iter().find(|d| d.gain == self.max_gain)
    }
}

fn replay<S: Scalar, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    instance: &Instance<S>,
    truth: &UserProfile<S>,
    truthful_declaration: DeclaredProfile<S>,
    deviations: impl IntoIterator<Item = DeclaredProfile<S>>,
) -> Result<DeviationReport<S>, HarnessError> {
    let tasks_total = mechanism.params().tasks;
    let base_stream = instance.replaced(truthful_declaration);
    let base = mechanism.run(&base_stream)?;
    let (t_tasks, t_price) = base
        .award(truth.id)
        .map_or((0, S::zero()), |a| (a.tasks, a.price));
    let t_util = utility(truth.unit_cost, t_tasks, t_price);
    let honest: Vec<UserProfile<S>> = instance
        .truths
        .iter()
        .filter(|t| base_stream.contains(&t.truthful()))
        .copied()
        .collect();
    let base_check = check_run_invariants(&base, &honest, &base_stream, tasks_total);
    let mut report = DeviationReport {
        user: truth.id,
        mechanism: mechanism.name(),
        truthful_tasks: t_tasks,
        truthful_price: t_price,
        truthful_utility: t_util,
        deviations: Vec::new(),
        max_gain: S::zero(),
        violations: base_check.violations,
    };
    let mut first = true;
    for declared in deviations {
        let stream = instance.replaced(declared);
        let out = mechanism.run(&stream)?;
        let check =
            check_price_floor(&out, &stream).merge(check_capacity(&out, &stream, tasks_total));
        report.violations.extend(check.violations);
        let (tasks, price) = out
            .award(truth.id)
            .map_or((0, S::zero()), |a| (a.tasks, a.price));
        let u = utility(truth.unit_cost, tasks, price);
        let gain = u - t_util;
        if first || gain > report.max_gain {
            report.max_gain = gain;
            first = false;
        }
        report.deviations.push(Deviation {
            declared,
            tasks,
            price,
            utility: u,
            gain,
        });
    }
    Ok(report)
}

/// Replays the auction once per bid in `bid_grid`, keeping the user's
/// true window and all other declarations fixed.
pub fn test_cost_truthfulness<S: Scalar, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    instance: &Instance<S>,
    user: UserId,
    bid_grid: &[S],
) -> Result<DeviationReport<S>, HarnessError> {
    let truth = *instance.truth(user)?;
    if let Some(b) = bid_grid.iter().find(|b| !(**b > S::zero())) {
        return Err(HarnessError::Mismatch(format!(
            "bid grid value {b} is not positive"
        )));
    }
    let honest = truth.truthful();
    let deviations: Vec<_> = bid_grid
        .iter()
        .map(|&bid| DeclaredProfile { bid, ..honest })
        .collect();
    replay(mechanism, instance, &truth, honest, deviations)
}

/// Replays the auction once per declared window in `time_grid`, bidding the
/// true cost. Every window must satisfy `a <= a' <= d' <= d`.
pub fn test_time_truthfulness<S: Scalar, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    instance: &Instance<S>,
    user: UserId,
    time_grid: &[(TimeStep, TimeStep)],
) -> Result<DeviationReport<S>, HarnessError> {
    let truth = *instance.truth(user)?;
    let deviations = time_grid
        .iter()
        .map(|&(a, d)| truth.declare(a, d, truth.unit_cost))
        .collect::<Result<Vec<_>, _>>()?;
    replay(mechanism, instance, &truth, truth.truthful(), deviations)
}

const BID_FACTORS: [f64; 8] = [0.25, 0.5, 0.9, 0.99, 1.01, 1.1, 2.0, 4.0];
const STRADDLE: f64 = 1e-6;

/// Multiplicative factors of the true cost plus, for every threshold the
/// user could face, the threshold itself and values just below and above.
pub fn default_bid_grid<S: Scalar>(true_cost: S, thresholds: &[S]) -> Vec<S> {
    let mut grid: Vec<S> = BID_FACTORS
        .iter()
        .map(|&f| true_cost * S::from_f64_lossy(f))
        .collect();
    let below = S::from_f64_lossy(1.0 - STRADDLE);
    let above = S::from_f64_lossy(1.0 + STRADDLE);
    for &t in thresholds {
        grid.extend([t * below, t, t * above]);
    }
    let mut out: Vec<S> = Vec::with_capacity(grid.len());
    for g in grid {
        if g > S::zero() && g != true_cost && !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

/// Candidate declared windows inside `[a, d]`: the true endpoints, the
/// steps next to them, and every stage end `e` and `e + 1` inside the
/// window. Thresholds and caps only change at stage ends, so the grid hits
/// every stage-membership pattern of the declared window. Steps between
/// stage ends are sampled only at the window edges.
pub fn default_time_grid<S: Scalar>(
    truth: &UserProfile<S>,
    schedule: &StageSchedule,
) -> Vec<(TimeStep, TimeStep)> {
    let (a, d) = (truth.arrival, truth.departure);
    let mut points = vec![a, d, a + 1, d.saturating_sub(1)];
    for e in schedule.ends() {
        points.extend([e, e + 1]);
    }
    points.retain(|&p| a <= p && p <= d);
    points.sort_unstable();
    points.dedup();
    let mut grid = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        for &y in &points[i..] {
            if (x, y) != (a, d) {
                grid.push((x, y));
            }
        }
    }
    grid
}

/// Every feasible declared window other than the truth.
pub fn full_time_grid<S: Scalar>(truth: &UserProfile<S>) -> Vec<(TimeStep, TimeStep)> {
    let (a, d) = (truth.arrival, truth.departure);
    (a..=d)
        .flat_map(|x| (x..=d).map(move |y| (x, y)))
        .filter(|&p| p != (a, d))
        .collect()
}

/// Fixed misreports for the other users: a `fraction` of them shade their
/// bid by a random factor in `[0.5, 2]` and, when their window allows it,
/// shrink it. Used to test dominance against non-truthful opponents.
pub fn random_misreports(instance: &Instance<f64>, fraction: f64, seed: u64) -> Instance<f64> {
    let mut rng = substream(seed, Substream::Misreports);
    let declared = instance
        .truths
        .iter()
        .map(|t| {
            if rng.random::<f64>() >= fraction {
                return t.truthful();
            }
            let bid = t.unit_cost * rng.random_range(0.5..=2.0);
            let arrival = rng.random_range(t.arrival..=t.departure);
            let departure = rng.random_range(arrival..=t.departure);
            DeclaredProfile {
                user_id: t.id,
                arrival,
                departure,
                capacity: t.capacity,
                bid,
            }
        })
        .collect();
    Instance {
        truths: instance.truths.clone(),
        declared,
    }
}
