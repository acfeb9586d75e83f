//! Invariant checks run against outcomes: individual rationality, capacity
//! limits, consumer sovereignty and the half-supply guarantee of the
//! proportional-share price.

use serde::Serialize;

use crate::mechanisms::Mechanism;
use crate::model::{utility, AuctionOutcome, DeclaredProfile, Event, UserId, UserProfile};
use crate::thresholds::{budget_feasible_selection, SampleSet};
use crate::Scalar;

use super::truthfulness::Instance;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation<S> {
    NegativeUtility {
        user: UserId,
        utility: S,
    },
    PriceBelowBid {
        user: UserId,
        price: S,
        bid: S,
    },
    OverCapacity {
        user: UserId,
        tasks: u64,
        capacity: u64,
    },
    OverAllocation {
        total: u64,
        tasks: u64,
    },
    /// A loser with a non-zero price, or a winner without a positive price.
    InconsistentAward {
        user: UserId,
        tasks: u64,
        price: S,
    },
    UnknownUser {
        user: UserId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport<S> {
    pub violations: Vec<Violation<S>>,
}

impl<S: Scalar> CheckReport<S> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(mut self, other: CheckReport<S>) -> Self {
        self.violations.extend(other.violations);
        self
    }
}

/// Utility `>= 0` for every user and `p_i >= b_i` for every winner, on an
/// outcome produced from truthful reports (so `b_i = c_i`).
pub fn check_individual_rationality<S: Scalar>(
    outcome: &AuctionOutcome<S>,
    truths: &[UserProfile<S>],
) -> CheckReport<S> {
    let mut violations = Vec::new();
    for t in truths {
        let Some(a) = outcome.award(t.id) else {
            continue;
        };
        let u = utility(t.unit_cost, a.tasks, a.price);
        if u < S::zero() {
            violations.push(Violation::NegativeUtility {
                user: t.id,
                utility: u,
            });
        }
        if a.is_win() && a.price < t.unit_cost {
            violations.push(Violation::PriceBelowBid {
                user: t.id,
                price: a.price,
                bid: t.unit_cost,
            });
        }
    }
    CheckReport { violations }
}

/// `p_i >= b_i` for winners against whatever was declared.
pub fn check_price_floor<S: Scalar>(
    outcome: &AuctionOutcome<S>,
    declared: &[DeclaredProfile<S>],
) -> CheckReport<S> {
    let violations = declared
        .iter()
        .filter_map(|d| {
            let a = outcome.award(d.user_id)?;
            (a.is_win() && a.price < d.bid).then_some(Violation::PriceBelowBid {
                user: d.user_id,
                price: a.price,
                bid: d.bid,
            })
        })
        .collect();
    CheckReport { violations }
}

/// `f_i <= tau_i`, `sum f_i <= L`, and `f_i = 0` exactly when `p_i = 0`.
pub fn check_capacity<S: Scalar>(
    outcome: &AuctionOutcome<S>,
    declared: &[DeclaredProfile<S>],
    tasks: u64,
) -> CheckReport<S> {
    let mut violations = Vec::new();
    for (&user, a) in &outcome.awards {
        let Some(d) = declared.iter().find(|d| d.user_id == user) else {
            violations.push(Violation::UnknownUser { user });
            continue;
        };
        if a.tasks > d.capacity {
            violations.push(Violation::OverCapacity {
                user,
                tasks: a.tasks,
                capacity: d.capacity,
            });
        }
        let priced = a.price > S::zero();
        if a.is_win() != priced {
            violations.push(Violation::InconsistentAward {
                user,
                tasks: a.tasks,
                price: a.price,
            });
        }
    }
    let total = outcome.total_tasks();
    if total > tasks {
        violations.push(Violation::OverAllocation { total, tasks });
    }
    CheckReport { violations }
}

/// Every check that must hold on any run from truthful reports.
pub fn check_run_invariants<S: Scalar>(
    outcome: &AuctionOutcome<S>,
    truths: &[UserProfile<S>],
    declared: &[DeclaredProfile<S>],
    tasks: u64,
) -> CheckReport<S> {
    check_individual_rationality(outcome, truths)
        .merge(check_price_floor(outcome, declared))
        .merge(check_capacity(outcome, declared, tasks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Sovereignty<S> {
    /// The user, rebid at the threshold it faced, won at least one task.
    Pass {
        threshold: S,
        tasks: u64,
    },
    Fail {
        threshold: S,
    },
    /// No residual stage capacity at the user's decision point.
    Vacuous,
}

/// Replays with the user's bid set to the threshold in force at its first
/// decision and checks that it wins, whenever the stage still had room.
pub fn probe_consumer_sovereignty<S: Scalar, M: Mechanism<S> + ?Sized>(
    mechanism: &M,
    instance: &Instance<S>,
    user: UserId,
) -> Result<Sovereignty<S>, HarnessError> {
    instance.truth(user)?;
    let declared =
        *instance
            .declared
            .iter()
            .find(|d| d.user_id == user)
            .ok_or(HarnessError::Model(crate::model::ModelError::UnknownUser(
                user,
            )))?;
    let outcome = mechanism.run(&instance.declared)?;
    let decision = outcome.log.iter().find_map(|r| {
        r.events.iter().find_map(|e| match *e {
            Event::Accept {
                user: u,
                allocated_before,
                ..
            }
            | Event::Reject {
                user: u,
                allocated_before,
            } if u == user => Some((r.threshold, r.stage_tasks, allocated_before)),
            _ => None,
        })
    });
    let Some((threshold, stage_tasks, allocated_before)) = decision else {
        return Err(HarnessError::Mismatch(format!(
            "user {user} was never decided"
        )));
    };
    if !stage_tasks.exceeds(allocated_before) {
        return Ok(Sovereignty::Vacuous);
    }
    let rebid = DeclaredProfile {
        bid: threshold,
        ..declared
    };
    let replay = mechanism.run(&instance.replaced(rebid))?;
    let tasks = replay.tasks_of(user);
    Ok(if tasks >= 1 {
        Sovereignty::Pass { threshold, tasks }
    } else {
        Sovereignty::Fail { threshold }
    })
}

/// Most tasks a budget buys when each user is paid its own bid: cheapest
/// units first. Kept separate from the threshold code it is used to check.
pub fn max_tasks_under_budget<S: Scalar>(budget: S, sample: &[(u64, S)]) -> u64 {
    let mut units: Vec<(u64, S)> = sample.to_vec();
    units.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("comparable bids"));
    let mut left = budget;
    let mut bought = 0u64;
    for (capacity, bid) in units {
        let f = capacity.min((left / bid).floor_count());
        bought += f;
        left = left - S::from_count(f) * bid;
        if f < capacity {
            break;
        }
    }
    bought
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSupplyCheck<S> {
    /// Proportional-share price, `None` when no user is accepted.
    pub price: Option<S>,
    /// `min(supply at or below price, floor(B / price))`.
    pub purchasable: u64,
    pub oracle_max: u64,
    pub passed: bool,
}

/// The tasks buyable at the proportional-share price must be at least half
/// the oracle maximum under the same budget.
pub fn check_bfm_half_supply<S: Scalar>(budget: S, sample: &SampleSet<S>) -> HalfSupplyCheck<S> {
    let pairs: Vec<(u64, S)> = sample.iter().map(|e| (e.capacity, e.bid)).collect();
    let oracle_max = max_tasks_under_budget(budget, &pairs);
    let Some(choice) = budget_feasible_selection(budget, sample) else {
        return HalfSupplyCheck {
            price: None,
            purchasable: 0,
            oracle_max,
            passed: oracle_max == 0,
        };
    };
    let price = choice.price;
    let supply: u64 = pairs
        .iter()
        .filter(|(_, b)| *b <= price)
        .map(|(c, _)| c)
        .sum();
    let purchasable = supply.min((budget / price).floor_count());
    HalfSupplyCheck {
        price: Some(price),
        purchasable,
        oracle_max,
        passed: 2 * purchasable >= oracle_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::HeteroOmz;
    use crate::model::Award;
    use crate::reference::example_one;
    use crate::thresholds::SampleEntry;

    fn sample(entries: &[(u64, f64)]) -> SampleSet<f64> {
        entries
            .iter()
            .enumerate()
            .map(|(i, &(capacity, bid))| SampleEntry {
                user: i as u32 + 1,
                capacity,
                bid,
            })
            .collect()
    }

    #[test]
    fn rationality_on_first_example() {
        let ex = example_one();
        let o = HeteroOmz::new(ex.params, ex.delta)
            .run(&ex.truthful_stream())
            .unwrap();
        assert!(check_individual_rationality(&o, &ex.users).passed());
        let utils: Vec<f64> = [1, 4, 5]
            .iter()
            .map(|&id| {
                utility(
                    ex.user(id).unit_cost,
                    o.tasks_of(id),
                    o.award(id).unwrap().price,
                )
            })
            .collect();
        assert_eq!(utils, vec![3.0, 12.0, 3.0]);
        assert!(check_capacity(&o, &ex.truthful_stream(), 8).passed());
        assert!(check_individual_rationality(&AuctionOutcome::empty(), &ex.users).passed());
    }

    #[test]
    fn injected_violations_reported() {
        let ex = example_one();
        let mut o = HeteroOmz::new(ex.params, ex.delta)
            .run(&ex.truthful_stream())
            .unwrap();
        o.awards.insert(
            4,
            Award {
                tasks: 4,
                price: 0.5,
            },
        );
        let r = check_individual_rationality(&o, &ex.users);
        assert!(!r.passed());
        assert!(r.violations.contains(&Violation::PriceBelowBid {
            user: 4,
            price: 0.5,
            bid: 1.0
        }));
        o.awards.insert(
            3,
            Award {
                tasks: 9,
                price: 6.0,
            },
        );
        let r = check_capacity(&o, &ex.truthful_stream(), 8);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OverCapacity { user: 3, .. })));
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OverAllocation { .. })));
    }

    #[test]
    fn sovereignty_probe() {
        let ex = example_one();
        let inst = Instance::truthful(ex.users.clone());
        let m = HeteroOmz::new(ex.params, ex.delta);
        assert_eq!(
            probe_consumer_sovereignty(&m, &inst, 2).unwrap(),
            Sovereignty::Pass {
                threshold: 2.0,
                tasks: 1
            }
        );
        // stage one (L' = 1) is full when a second user arrives at t = 1
        let mut users = ex.users.clone();
        users.push(UserProfile::new(6, 1, 1, 4, 9.0));
        let inst = Instance::truthful(users);
        assert_eq!(
            probe_consumer_sovereignty(&m, &inst, 6).unwrap(),
            Sovereignty::Vacuous
        );
        assert!(matches!(
            probe_consumer_sovereignty(&m, &inst, 1).unwrap(),
            Sovereignty::Pass { .. }
        ));
        assert!(probe_consumer_sovereignty(&m, &inst, 42).is_err());
    }

    #[test]
    fn half_supply_examples() {
        let c = check_bfm_half_supply(24.0, &sample(&[(4, 2.0), (4, 4.0), (4, 5.0)]));
        assert_eq!(c.price, Some(4.0));
        assert_eq!(c.purchasable, 6);
        assert_eq!(c.oracle_max, 8);
        assert!(c.passed);

        let c = check_bfm_half_supply(0.0, &sample(&[(4, 2.0)]));
        assert_eq!(c.oracle_max, 0);
        assert!(c.passed);

        let c = check_bfm_half_supply(2.0, &sample(&[(2, 1.0)]));
        assert_eq!((c.price, c.purchasable, c.oracle_max), (Some(1.0), 2, 2));
        assert!(c.passed);
    }

    /// Exhaustive maximum of `sum f` subject to `sum f * b <= B`.
    fn brute_force_max_tasks(budget: f64, sample: &[(u64, f64)]) -> u64 {
        fn go(budget: f64, rest: &[(u64, f64)]) -> u64 {
            match rest.split_first() {
                None => 0,
                Some((&(cap, bid), tail)) => (0..=cap)
                    .take_while(|&f| f as f64 * bid <= budget)
                    .map(|f| f + go(budget - f as f64 * bid, tail))
                    .max()
                    .unwrap_or(0),
            }
        }
        go(budget, sample)
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cheapest_units_oracle_is_exact(
                entries in prop::collection::vec((1u64..4, 1u32..10), 0..6),
                budget in 0u32..60,
            ) {
                let pairs: Vec<(u64, f64)> = entries.iter().map(|&(c, b)| (c, b as f64)).collect();
                prop_assert_eq!(max_tasks_under_budget(budget as f64, &pairs), brute_force_max_tasks(budget as f64, &pairs));
            }
        }
    }
}
