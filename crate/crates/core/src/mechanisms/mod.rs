//! The online mechanisms, each a deterministic state machine stepped over
//! `t = 1..=T`.
//!
//! Within one time step the order is fixed: arrivals are decided, then
//! departures move into the sample (general-interval mechanism only), then,
//! if `t` closes a stage, the threshold is recomputed and the stage cap
//! doubles. The threshold after the final stage would never be used and is
//! not computed.

mod hetero_omg;
mod hetero_omz;
mod homo_omz;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use hetero_omg::HeteroOmg;
pub use hetero_omz::HeteroOmz;
pub use homo_omz::HomoOmz;

use crate::model::{
    validate_stream, AuctionOutcome, Award, DeclaredProfile, Event, ModelError, StepRecord,
    TimeStep, UserId,
};
use crate::schedule::{StageSchedule, StageTasks};
use crate::thresholds::SampleSet;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("user {user}: homogeneous mechanism requires capacity 1, got {capacity}")]
    NotHomogeneous { user: UserId, capacity: u64 },
    #[error("user {user}: zero-interval mechanism requires arrival == departure, got [{arrival}, {departure}]")]
    NotZeroInterval {
        user: UserId,
        arrival: TimeStep,
        departure: TimeStep,
    },
    #[error("invalid mechanism parameter: {0}")]
    InvalidParameter(String),
}

/// Parameters common to every mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuctionParams<S> {
    /// Number of tasks `L`.
    pub tasks: u64,
    /// Deadline `T`.
    pub horizon: TimeStep,
    /// Initial threshold used before the first stage boundary.
    pub beta: S,
}

impl<S: Scalar> AuctionParams<S> {
    pub fn new(tasks: u64, horizon: TimeStep, beta: S) -> Self {
        AuctionParams {
            tasks,
            horizon,
            beta,
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.tasks == 0 {
            return Err(MechanismError::InvalidParameter(
                "L must be at least 1".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(MechanismError::InvalidParameter(
                "T must be at least 1".into(),
            ));
        }
        if !(self.beta > S::zero()) {
            return Err(MechanismError::InvalidParameter(
                "beta must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn validate_delta<S: Scalar>(delta: S) -> Result<(), MechanismError> {
    if delta >= S::one() {
        Ok(())
    } else {
        Err(MechanismError::InvalidParameter(format!(
            "delta must be at least 1, got {delta}"
        )))
    }
}

/// A truthfulness-relevant auction run over a declared stream.
pub trait Mechanism<S: Scalar> {
    fn name(&self) -> &'static str;

    fn params(&self) -> &AuctionParams<S>;

    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError>;

    /// Whether users must be decided at their arrival step.
    fn requires_zero_interval(&self) -> bool {
        false
    }

    /// Whether every user must have capacity 1.
    fn requires_unit_capacity(&self) -> bool {
        false
    }
}

impl<S: Scalar, M: Mechanism<S> + ?Sized> Mechanism<S> for &M {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn params(&self) -> &AuctionParams<S> {
        (**self).params()
    }
    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        (**self).run(stream)
    }
    fn requires_zero_interval(&self) -> bool {
        (**self).requires_zero_interval()
    }
    fn requires_unit_capacity(&self) -> bool {
        (**self).requires_unit_capacity()
    }
}

impl<S: Scalar> Mechanism<S> for Box<dyn Mechanism<S> + Send + Sync> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn params(&self) -> &AuctionParams<S> {
        (**self).params()
    }
    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        (**self).run(stream)
    }
    fn requires_zero_interval(&self) -> bool {
        (**self).requires_zero_interval()
    }
    fn requires_unit_capacity(&self) -> bool {
        (**self).requires_unit_capacity()
    }
}

/// Mechanism names accepted by configuration and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MechanismKind {
    HomoOmz,
    HeteroOmz,
    HeteroOmg,
    Random,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [
        MechanismKind::HomoOmz,
        MechanismKind::HeteroOmz,
        MechanismKind::HeteroOmg,
        MechanismKind::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::HomoOmz => "homo-omz",
            MechanismKind::HeteroOmz => "hetero-omz",
            MechanismKind::HeteroOmg => "hetero-omg",
            MechanismKind::Random => "random",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown mechanism `{s}` (expected one of homo-omz, hetero-omz, hetero-omg, random)"))
    }
}

/// How a zero-interval mechanism treats a declared window with `a < d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum IntervalPolicy {
    /// Reject the stream.
    #[default]
    Reject,
    /// Decide the user at its declared arrival and ignore the departure.
    DecideAtArrival,
}

/// Indices of `stream` grouped by arrival step, stream order kept within a step.
pub(crate) fn arrivals_by_step<S>(
    stream: &[DeclaredProfile<S>],
    horizon: TimeStep,
) -> Vec<Vec<usize>> {
    let mut by_step = vec![Vec::new(); horizon as usize + 1];
    for (i, d) in stream.iter().enumerate() {
        by_step[d.arrival as usize].push(i);
    }
    by_step
}

pub(crate) fn initial_awards<S: Scalar>(
    stream: &[DeclaredProfile<S>],
) -> std::collections::BTreeMap<UserId, Award<S>> {
    stream.iter().map(|d| (d.user_id, Award::none())).collect()
}

/// Shared machinery of the two zero-interval mechanisms: every user is
/// decided once at arrival and enters the sample immediately.
pub(crate) fn run_zero_interval<S, F>(
    stream: &[DeclaredProfile<S>],
    params: &AuctionParams<S>,
    policy: IntervalPolicy,
    unit_capacity: bool,
    mut threshold: F,
) -> Result<AuctionOutcome<S>, MechanismError>
where
    S: Scalar,
    F: FnMut(StageTasks, &SampleSet<S>) -> S,
{
    params.validate()?;
    validate_stream(stream, params.horizon)?;
    for d in stream {
        if unit_capacity && d.capacity != 1 {
            return Err(MechanismError::NotHomogeneous {
                user: d.user_id,
                capacity: d.capacity,
            });
        }
        if policy == IntervalPolicy::Reject && !d.is_zero_interval() {
            return Err(MechanismError::NotZeroInterval {
                user: d.user_id,
                arrival: d.arrival,
                departure: d.departure,
            });
        }
    }

    let schedule = StageSchedule::build(params.horizon, params.tasks)?;
    let stages = schedule.stages();
    let by_step = arrivals_by_step(stream, params.horizon);
    let mut awards = initial_awards(stream);
    let mut log = Vec::with_capacity(params.horizon as usize);
    let mut sample = SampleSet::new();
    let mut stage = 0usize;
    let mut stage_tasks = stages[0].tasks;
    let mut price = params.beta;
    let mut allocated = 0u64;

    for t in 1..=params.horizon {
        let mut events = Vec::new();
        for &i in &by_step[t as usize] {
            let d = &stream[i];
            events.push(Event::Arrive { user: d.user_id });
            if d.bid <= price && stage_tasks.exceeds(allocated) {
                let room = stage_tasks.residual_ceil(0, allocated) as u64;
                let tasks = d.capacity.min(room);
                awards.insert(d.user_id, Award { tasks, price });
                events.push(Event::Accept {
                    user: d.user_id,
                    tasks,
                    price,
                    allocated_before: allocated,
                });
                allocated += tasks;
            } else {
                events.push(Event::Reject {
                    user: d.user_id,
                    allocated_before: allocated,
                });
            }
            sample.insert(d.into());
        }
        let record_threshold = price;
        let record_tasks = stage_tasks;
        if t == stages[stage].end && stage + 1 < stages.len() {
            price = threshold(stage_tasks, &sample);
            events.push(Event::Threshold { price });
            stage += 1;
            stage_tasks = stages[stage].tasks;
        }
        log.push(StepRecord {
            t,
            threshold: record_threshold,
            stage_tasks: record_tasks,
            events,
        });
    }
    Ok(AuctionOutcome { awards, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in MechanismKind::ALL {
            assert_eq!(k.as_str().parse::<MechanismKind>().unwrap(), k);
        }
        assert!("omz".parse::<MechanismKind>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AuctionParams::new(0, 8, 5.0).validate().is_err());
        assert!(AuctionParams::new(8, 0, 5.0).validate().is_err());
        assert!(AuctionParams::new(8, 8, 0.0).validate().is_err());
        assert!(AuctionParams::new(8, 8, 5.0).validate().is_ok());
        assert!(validate_delta(0.5).is_err());
        assert!(validate_delta(1.0).is_ok());
        assert!(validate_delta(2.0).is_ok());
    }
}
