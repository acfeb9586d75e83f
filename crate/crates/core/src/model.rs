//! Domain types shared by every mechanism: true and declared user profiles,
//! auction outcomes with their per-step decision log, utilities and
//! frugality metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::baselines::offline_optimal;
use crate::schedule::StageTasks;
use crate::Scalar;

pub type UserId = u32;
pub type TimeStep = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("user {id}: arrival {arrival} is after departure {departure}")]
    ArrivalAfterDeparture {
        id: UserId,
        arrival: TimeStep,
        departure: TimeStep,
    },
    #[error("user {id}: arrival must be at least time step 1")]
    ArrivalBeforeStart { id: UserId },
    #[error("user {id}: departure {departure} is past the horizon {horizon}")]
    DepartureAfterHorizon {
        id: UserId,
        departure: TimeStep,
        horizon: TimeStep,
    },
    #[error("user {id}: capacity must be at least 1")]
    ZeroCapacity { id: UserId },
    #[error("user {id}: cost or bid must be positive")]
    NonPositiveCost { id: UserId },
    #[error("duplicate user id {0}")]
    DuplicateId(UserId),
    #[error("unknown user id {0}")]
    UnknownUser(UserId),
    #[error("user {id}: declared window [{arrival}, {departure}] is not inside the true window [{true_arrival}, {true_departure}]")]
    InfeasibleWindow {
        id: UserId,
        arrival: TimeStep,
        departure: TimeStep,
        true_arrival: TimeStep,
        true_departure: TimeStep,
    },
    #[error("user {id}: declared capacity {declared} differs from true capacity {actual}")]
    CapacityMisreport {
        id: UserId,
        declared: u64,
        actual: u64,
    },
    #[error("{0}")]
    InvalidParameter(String),
}

/// A user's true type: arrival, departure, task capacity and unit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserProfile<S> {
    pub id: UserId,
    pub arrival: TimeStep,
    pub departure: TimeStep,
    pub capacity: u64,
    pub unit_cost: S,
}

impl<S: Scalar> UserProfile<S> {
    pub fn new(
        id: UserId,
        arrival: TimeStep,
        departure: TimeStep,
        capacity: u64,
        unit_cost: S,
    ) -> Self {
        UserProfile {
            id,
            arrival,
            departure,
            capacity,
            unit_cost,
        }
    }

    pub fn is_zero_interval(&self) -> bool {
        self.arrival == self.departure
    }

    /// The truthful report.
    pub fn truthful(&self) -> DeclaredProfile<S> {
        DeclaredProfile {
            user_id: self.id,
            arrival: self.arrival,
            departure: self.departure,
            capacity: self.capacity,
            bid: self.unit_cost,
        }
    }

    /// A possibly untruthful report. The declared window must sit inside the
    /// true one; users cannot announce an earlier arrival or a later departure.
    pub fn declare(
        &self,
        arrival: TimeStep,
        departure: TimeStep,
        bid: S,
    ) -> Result<DeclaredProfile<S>, ModelError> {
        let declared = DeclaredProfile {
            user_id: self.id,
            arrival,
            departure,
            capacity: self.capacity,
            bid,
        };
        declared.check_against(self)?;
        Ok(declared)
    }
}

/// Validates the field invariants of a true profile under horizon `horizon`.
pub fn validate_profile<S: Scalar>(
    profile: UserProfile<S>,
    horizon: TimeStep,
) -> Result<UserProfile<S>, ModelError> {
    check_fields(
        profile.id,
        profile.arrival,
        profile.departure,
        profile.capacity,
        profile.unit_cost,
        horizon,
    )?;
    Ok(profile)
}

/// Validates every profile and checks that ids are unique.
pub fn validate_instance<S: Scalar>(
    profiles: &[UserProfile<S>],
    horizon: TimeStep,
) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for p in profiles {
        validate_profile(*p, horizon)?;
        if !seen.insert(p.id) {
            return Err(ModelError::DuplicateId(p.id));
        }
    }
    Ok(())
}

fn check_fields<S: Scalar>(
    id: UserId,
    arrival: TimeStep,
    departure: TimeStep,
    capacity: u64,
    cost: S,
    horizon: TimeStep,
) -> Result<(), ModelError> {
    if arrival == 0 {
        return Err(ModelError::ArrivalBeforeStart { id });
    }
    if arrival > departure {
        return Err(ModelError::ArrivalAfterDeparture {
            id,
            arrival,
            departure,
        });
    }
    if departure > horizon {
        return Err(ModelError::DepartureAfterHorizon {
            id,
            departure,
            horizon,
        });
    }
    if capacity == 0 {
        return Err(ModelError::ZeroCapacity { id });
    }
    // written so that NaN is rejected too
    if !(cost > S::zero()) {
        return Err(ModelError::NonPositiveCost { id });
    }
    Ok(())
}

/// The report a user submits to the auction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeclaredProfile<S> {
    pub user_id: UserId,
    pub arrival: TimeStep,
    pub departure: TimeStep,
    pub capacity: u64,
    pub bid: S,
}

impl<S: Scalar> DeclaredProfile<S> {
    pub fn validate(&self, horizon: TimeStep) -> Result<(), ModelError> {
        check_fields(
            self.user_id,
            self.arrival,
            self.departure,
            self.capacity,
            self.bid,
            horizon,
        )
    }

    pub fn is_zero_interval(&self) -> bool {
        self.arrival == self.departure
    }

    pub fn check_against(&self, truth: &UserProfile<S>) -> Result<(), ModelError> {
        if self.user_id != truth.id {
            return Err(ModelError::UnknownUser(self.user_id));
        }
        if self.capacity != truth.capacity {
            return Err(ModelError::CapacityMisreport {
                id: truth.id,
                declared: self.capacity,
                actual: truth.capacity,
            });
        }
        if !(truth.arrival <= self.arrival
            && self.arrival <= self.departure
            && self.departure <= truth.departure)
        {
            return Err(ModelError::InfeasibleWindow {
                id: truth.id,
                arrival: self.arrival,
                departure: self.departure,
                true_arrival: truth.arrival,
                true_departure: truth.departure,
            });
        }
        Ok(())
    }
}

/// Validates a declared stream and checks ids are unique.
pub fn validate_stream<S: Scalar>(
    stream: &[DeclaredProfile<S>],
    horizon: TimeStep,
) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for d in stream {
        d.validate(horizon)?;
        if !seen.insert(d.user_id) {
            return Err(ModelError::DuplicateId(d.user_id));
        }
    }
    Ok(())
}

/// `f * (p - c)`, and exactly zero for losers.
pub fn utility<S: Scalar>(true_cost: S, tasks: u64, price: S) -> S {
    if tasks == 0 {
        S::zero()
    } else {
        S::from_count(tasks) * (price - true_cost)
    }
}

/// Tasks and per-task price awarded to one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Award<S> {
    pub tasks: u64,
    pub price: S,
}

impl<S: Scalar> Award<S> {
    pub fn none() -> Self {
        Award {
            tasks: 0,
            price: S::zero(),
        }
    }

    pub fn payment(&self) -> S {
        S::from_count(self.tasks) * self.price
    }

    pub fn is_win(&self) -> bool {
        self.tasks > 0
    }
}

/// One entry of the per-step decision log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event<S> {
    Arrive {
        user: UserId,
    },
    /// First allocation to a user. `allocated_before` is the running total
    /// of allocated tasks just before the decision.
    Accept {
        user: UserId,
        tasks: u64,
        price: S,
        allocated_before: u64,
    },
    Reject {
        user: UserId,
        allocated_before: u64,
    },
    /// Stage-boundary reconfiguration of an online user.
    Upgrade {
        user: UserId,
        tasks: u64,
        price: S,
        allocated_before: u64,
    },
    Depart {
        user: UserId,
    },
    /// Threshold recomputed at the end of a stage, in force from the next step.
    Threshold {
        price: S,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord<S> {
    pub t: TimeStep,
    /// Threshold in force while decisions of this step were taken.
    pub threshold: S,
    /// Stage-task-number in force while decisions of this step were taken.
    pub stage_tasks: StageTasks,
    pub events: Vec<Event<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionOutcome<S> {
    /// Final award of every user in the stream, losers included.
    pub awards: BTreeMap<UserId, Award<S>>,
    pub log: Vec<StepRecord<S>>,
}

impl<S: Scalar> AuctionOutcome<S> {
    pub fn empty() -> Self {
        AuctionOutcome {
            awards: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn award(&self, user: UserId) -> Option<&Award<S>> {
        self.awards.get(&user)
    }

    pub fn tasks_of(&self, user: UserId) -> u64 {
        self.awards.get(&user).map_or(0, |a| a.tasks)
    }

    pub fn payment_of(&self, user: UserId) -> S {
        self.awards.get(&user).map_or(S::zero(), Award::payment)
    }

    pub fn winners(&self) -> BTreeSet<UserId> {
        self.awards
            .iter()
            .filter(|(_, a)| a.is_win())
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn total_payment(&self) -> S {
        self.awards
            .values()
            .fold(S::zero(), |acc, a| acc + a.payment())
    }

    pub fn total_tasks(&self) -> u64 {
        self.awards.values().map(|a| a.tasks).sum()
    }

    /// Mean price per allocated task, if anything was allocated.
    pub fn price_per_task(&self) -> Option<S> {
        let tasks = self.total_tasks();
        (tasks > 0).then(|| self.total_payment() / S::from_count(tasks))
    }

    /// Sequence of thresholds computed at stage boundaries.
    pub fn threshold_updates(&self) -> Vec<S> {
        self.log
            .iter()
            .flat_map(|r| r.events.iter())
            .filter_map(|e| match e {
                Event::Threshold { price } => Some(*price),
                _ => None,
            })
            .collect()
    }

    /// Every distinct threshold value in force at some step.
    pub fn thresholds_seen(&self) -> Vec<S> {
        let mut out: Vec<S> = Vec::new();
        for r in &self.log {
            if !out.contains(&r.threshold) {
                out.push(r.threshold);
            }
        }
        for p in self.threshold_updates() {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Total cost incurred by winners under their true costs.
    pub fn winner_cost(&self, truths: &[UserProfile<S>]) -> S {
        truths.iter().fold(S::zero(), |acc, p| {
            acc + S::from_count(self.tasks_of(p.id)) * p.unit_cost
        })
    }
}

/// `f(X) = sum of f_i over X`.
pub fn allocation_total<'a, S: Scalar>(
    outcome: &AuctionOutcome<S>,
    subset: impl IntoIterator<Item = &'a UserId>,
) -> Result<u64, ModelError> {
    subset.into_iter().try_fold(0u64, |acc, id| {
        outcome
            .awards
            .get(id)
            .map(|a| acc + a.tasks)
            .ok_or(ModelError::UnknownUser(*id))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrugalityReport<S> {
    pub payment: S,
    pub tasks_completed: u64,
    pub opt_cost_l: Option<S>,
    pub opt_cost_2l: Option<S>,
    /// `payment / opt(L)`; `None` when supply cannot cover `L` tasks.
    pub idealistic_ratio: Option<S>,
    /// `payment / opt(2L)`; `None` when supply cannot cover `2L` tasks.
    pub realistic_ratio: Option<S>,
}

pub fn frugality_report<S: Scalar>(
    outcome: &AuctionOutcome<S>,
    all_users: &[UserProfile<S>],
    tasks: u64,
) -> FrugalityReport<S> {
    let payment = outcome.total_payment();
    let opt = |target: u64| {
        let sol = offline_optimal(all_users, target);
        sol.sufficient.then_some(sol.total_cost)
    };
    let opt_cost_l = opt(tasks);
    let opt_cost_2l = opt(2 * tasks);
    let ratio = |o: Option<S>| o.filter(|c| *c > S::zero()).map(|c| payment / c);
    FrugalityReport {
        payment,
        tasks_completed: outcome.total_tasks(),
        idealistic_ratio: ratio(opt_cost_l),
        realistic_ratio: ratio(opt_cost_2l),
        opt_cost_l,
        opt_cost_2l,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(awards: &[(UserId, u64, f64)]) -> AuctionOutcome<f64> {
        AuctionOutcome {
            awards: awards
                .iter()
                .map(|&(id, tasks, price)| (id, Award { tasks, price }))
                .collect(),
            log: vec![],
        }
    }

    #[test]
    fn validate_accepts_worked_profiles() {
        assert!(validate_profile(UserProfile::new(1, 1, 1, 4, 2.0), 8).is_ok());
        assert!(validate_profile(UserProfile::new(1, 1, 5, 4, 2.0), 8).is_ok());
    }

    #[test]
    fn validate_rejects_bad_fields() {
        assert!(matches!(
            validate_profile(UserProfile::new(1, 5, 3, 1, 1.0), 8),
            Err(ModelError::ArrivalAfterDeparture { .. })
        ));
        assert!(matches!(
            validate_profile(UserProfile::new(1, 5, 9, 1, 1.0), 8),
            Err(ModelError::DepartureAfterHorizon { .. })
        ));
        assert!(matches!(
            validate_profile(UserProfile::new(1, 1, 1, 0, 1.0), 8),
            Err(ModelError::ZeroCapacity { .. })
        ));
        assert!(matches!(
            validate_profile(UserProfile::new(1, 1, 1, 1, 0.0), 8),
            Err(ModelError::NonPositiveCost { .. })
        ));
        assert!(matches!(
            validate_profile(UserProfile::new(1, 1, 1, 1, f64::NAN), 8),
            Err(ModelError::NonPositiveCost { .. })
        ));
        assert!(matches!(
            validate_profile(UserProfile::new(1, 0, 1, 1, 1.0), 8),
            Err(ModelError::ArrivalBeforeStart { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let users = [
            UserProfile::new(1, 1, 1, 1, 1.0),
            UserProfile::new(1, 2, 2, 1, 1.0),
        ];
        assert_eq!(
            validate_instance(&users, 8),
            Err(ModelError::DuplicateId(1))
        );
    }

    #[test]
    fn declarations_stay_inside_true_window() {
        let truth = UserProfile::new(1, 1, 5, 4, 2.0);
        assert!(truth.declare(5, 5, 2.0).is_ok());
        assert!(truth.declare(2, 4, 9.0).is_ok());
        assert!(matches!(
            truth.declare(0, 5, 2.0),
            Err(ModelError::InfeasibleWindow { .. })
        ));
        assert!(matches!(
            truth.declare(1, 6, 2.0),
            Err(ModelError::InfeasibleWindow { .. })
        ));
        assert!(matches!(
            truth.declare(4, 3, 2.0),
            Err(ModelError::InfeasibleWindow { .. })
        ));
        let mut d = truth.truthful();
        d.capacity = 3;
        assert!(matches!(
            d.check_against(&truth),
            Err(ModelError::CapacityMisreport { .. })
        ));
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(3.0, 3, 4.0), 3.0);
        assert_eq!(utility(5.0, 0, 0.0), 0.0);
        assert_eq!(utility(2.0, 4, 5.0), 12.0);
    }

    #[test]
    fn allocation_totals() {
        let o = outcome(&[
            (1, 1, 5.0),
            (2, 0, 0.0),
            (3, 0, 0.0),
            (4, 4, 4.0),
            (5, 3, 4.0),
        ]);
        assert_eq!(allocation_total(&o, &[1, 4, 5]).unwrap(), 8);
        assert_eq!(allocation_total(&o, &[]).unwrap(), 0);
        assert_eq!(allocation_total(&o, &[9]), Err(ModelError::UnknownUser(9)));
        assert_eq!(o.winners(), BTreeSet::from([1, 4, 5]));
        assert_eq!(o.total_payment(), 33.0);
        assert_eq!(o.total_tasks(), 8);
    }

    #[test]
    fn frugality_of_first_worked_example() {
        let users: Vec<_> = [(1, 2.0), (2, 4.0), (3, 5.0), (4, 1.0), (5, 3.0)]
            .iter()
            .map(|&(id, c)| UserProfile::new(id, id, id, 4, c))
            .collect();
        let o = outcome(&[
            (1, 1, 5.0),
            (2, 0, 0.0),
            (3, 0, 0.0),
            (4, 4, 4.0),
            (5, 3, 4.0),
        ]);
        let r = frugality_report(&o, &users, 8);
        assert_eq!(r.payment, 33.0);
        assert_eq!(r.opt_cost_l, Some(12.0));
        assert_eq!(r.opt_cost_2l, Some(40.0));
        assert_eq!(r.idealistic_ratio, Some(2.75));
        assert_eq!(r.realistic_ratio, Some(0.825));

        // 5 users x 4 tasks cannot cover 2L = 24
        let r = frugality_report(&o, &users, 12);
        assert!(r.idealistic_ratio.is_some());
        assert_eq!(r.realistic_ratio, None);
        assert_eq!(r.opt_cost_2l, None);
    }

    #[test]
    fn self_ratio_is_one() {
        let users = [UserProfile::new(1, 1, 1, 10, 1.0)];
        let o = outcome(&[(1, 10, 1.0)]);
        assert_eq!(frugality_report(&o, &users, 10).idealistic_ratio, Some(1.0));
    }
}
