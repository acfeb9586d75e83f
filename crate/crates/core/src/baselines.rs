//! Comparison points: the full-information offline optimum and the
//! fixed-random-threshold mechanism.

use rand::Rng;
use serde::Serialize;

use crate::generators::{substream, Substream};
use crate::mechanisms::{AuctionParams, Mechanism, MechanismError};
use crate::model::{
    validate_stream, AuctionOutcome, Award, DeclaredProfile, Event, StepRecord, TimeStep, UserId,
    UserProfile,
};
use crate::schedule::StageTasks;
use crate::thresholds::{greedy_min_cost_allocation, SampleEntry, SampleSet};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineSolution<S> {
    pub picks: Vec<(UserId, u64)>,
    /// `sum f_i * c_i` over the true costs.
    pub total_cost: S,
    pub tasks: u64,
    /// `false` when total capacity is below the target.
    pub sufficient: bool,
}

/// Minimum true cost of `target` tasks: cheapest users first. Exact for
/// this linear problem.
pub fn offline_optimal<S: Scalar>(users: &[UserProfile<S>], target: u64) -> OfflineSolution<S> {
    let sample: SampleSet<S> = users
        .iter()
        .map(|u| SampleEntry {
            user: u.id,
            capacity: u.capacity,
            bid: u.unit_cost,
        })
        .collect();
    let g = greedy_min_cost_allocation(S::from_count(target), &sample);
    OfflineSolution {
        picks: g.picks,
        total_cost: g.total_cost,
        tasks: g.allocated,
        sufficient: g.sufficient,
    }
}

/// Posts one fixed threshold for the whole horizon. Winners are paid the
/// threshold, not their bid, so the mechanism stays bid-independent.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomThreshold<S> {
    /// `beta` holds the fixed threshold.
    pub params: AuctionParams<S>,
}

impl<S: Scalar> RandomThreshold<S> {
    pub fn new(tasks: u64, horizon: TimeStep, threshold: S) -> Self {
        RandomThreshold {
            params: AuctionParams::new(tasks, horizon, threshold),
        }
    }
}

impl<S: Scalar> Mechanism<S> for RandomThreshold<S> {
    fn name(&self) -> &'static str {
        "random"
    }

    fn params(&self) -> &AuctionParams<S> {
        &self.params
    }

    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        random_threshold_run(
            stream,
            self.params.tasks,
            self.params.horizon,
            self.params.beta,
        )
    }
}

/// Any arrival bidding at most `threshold` wins `min(tau, L - allocated)`
/// tasks at the threshold, until `L` tasks are gone.
pub fn random_threshold_run<S: Scalar>(
    stream: &[DeclaredProfile<S>],
    tasks: u64,
    horizon: TimeStep,
    threshold: S,
) -> Result<AuctionOutcome<S>, MechanismError> {
    AuctionParams::new(tasks, horizon, threshold).validate()?;
    validate_stream(stream, horizon)?;
    let by_step = crate::mechanisms::arrivals_by_step(stream, horizon);
    let mut awards = crate::mechanisms::initial_awards(stream);
    let mut allocated = 0u64;
    let mut log = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let mut events = Vec::new();
        for &i in &by_step[t as usize] {
            let d = &stream[i];
            events.push(Event::Arrive { user: d.user_id });
            if d.bid <= threshold && allocated < tasks {
                let f = d.capacity.min(tasks - allocated);
                awards.insert(
                    d.user_id,
                    Award {
                        tasks: f,
                        price: threshold,
                    },
                );
                events.push(Event::Accept {
                    user: d.user_id,
                    tasks: f,
                    price: threshold,
                    allocated_before: allocated,
                });
                allocated += f;
            } else {
                events.push(Event::Reject {
                    user: d.user_id,
                    allocated_before: allocated,
                });
            }
        }
        log.push(StepRecord {
            t,
            threshold,
            stage_tasks: StageTasks::whole(tasks),
            events,
        });
    }
    Ok(AuctionOutcome { awards, log })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomBaselineSummary {
    pub trials: usize,
    pub mean_payment: f64,
    pub mean_tasks: f64,
    /// Total payment over total tasks across trials; `None` if nothing was allocated.
    pub price_per_task: Option<f64>,
    pub thresholds: Vec<f64>,
}

/// Averages `trials` runs of [`random_threshold_run`] with thresholds drawn
/// uniformly from `[low, high]`. Trial `k` draws from its own substream of
/// `seed`, so results do not depend on evaluation order.
pub fn random_baseline_average<S: Scalar>(
    stream: &[DeclaredProfile<S>],
    tasks: u64,
    horizon: TimeStep,
    trials: usize,
    seed: u64,
    (low, high): (f64, f64),
) -> Result<RandomBaselineSummary, MechanismError> {
    if trials == 0 {
        return Err(MechanismError::InvalidParameter(
            "random baseline needs at least one trial".into(),
        ));
    }
    if !(0.0 < low && low <= high) {
        return Err(MechanismError::InvalidParameter(format!(
            "bad threshold range [{low}, {high}]"
        )));
    }
    let mut total_payment = 0.0;
    let mut total_tasks = 0u64;
    let mut thresholds = Vec::with_capacity(trials);
    for k in 0..trials {
        let mut rng = substream(seed, Substream::RandomBaseline(k as u64));
        let threshold: f64 = if low == high {
            low
        } else {
            rng.random_range(low..=high)
        };
        let outcome = random_threshold_run(stream, tasks, horizon, S::from_f64_lossy(threshold))?;
        total_payment += outcome.total_payment().to_f64_lossy();
        total_tasks += outcome.total_tasks();
        thresholds.push(threshold);
    }
    let n = trials as f64;
    Ok(RandomBaselineSummary {
        trials,
        mean_payment: total_payment / n,
        mean_tasks: total_tasks as f64 / n,
        price_per_task: (total_tasks > 0).then(|| total_payment / total_tasks as f64),
        thresholds,
    })
}
