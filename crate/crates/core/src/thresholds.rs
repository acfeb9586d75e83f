//! Bid-threshold subroutines.
//!
//! * [`lth_lowest_bid_threshold`]: the `ceil(L')`-th lowest sampled bid.
//! * [`greedy_min_cost_allocation`]: cheapest way to buy a target number of
//!   tasks from the sample when paying each user its bid.
//! * [`budget_feasible_price`]: proportional-share uniform price under a budget.
//! * [`get_bid_threshold2`]: greedy budget estimate followed by the
//!   proportional-share price.
//!
//! All of them see the sample in ascending-bid order with ties broken by
//! ascending user id, so the order in which users were inserted never
//! matters.

use serde::Serialize;

use crate::model::{DeclaredProfile, UserId};
use crate::scalar::bid_order;
use crate::schedule::StageTasks;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleEntry<S> {
    pub user: UserId,
    pub capacity: u64,
    pub bid: S,
}

impl<S: Scalar> From<&DeclaredProfile<S>> for SampleEntry<S> {
    fn from(d: &DeclaredProfile<S>) -> Self {
        SampleEntry {
            user: d.user_id,
            capacity: d.capacity,
            bid: d.bid,
        }
    }
}

/// Observed users, kept sorted by (bid, id).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SampleSet<S> {
    entries: Vec<SampleEntry<S>>,
}

impl<S: Scalar> SampleSet<S> {
    pub fn new() -> Self {
        SampleSet {
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, entry: SampleEntry<S>) {
        let pos = self
            .entries
            .partition_point(|e| bid_order((e.bid, e.user), (entry.bid, entry.user)).is_lt());
        self.entries.insert(pos, entry);
    }

    /// Entries in ascending-bid order.
    pub fn iter(&self) -> std::slice::Iter<'_, SampleEntry<S>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_capacity(&self) -> u64 {
        self.entries.iter().map(|e| e.capacity).sum()
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.entries.iter().any(|e| e.user == user)
    }
}

impl<S: Scalar> FromIterator<SampleEntry<S>> for SampleSet<S> {
    fn from_iter<I: IntoIterator<Item = SampleEntry<S>>>(iter: I) -> Self {
        let mut entries: Vec<_> = iter.into_iter().collect();
        entries.sort_by(|a, b| bid_order((a.bid, a.user), (b.bid, b.user)));
        SampleSet { entries }
    }
}

/// Returns the `ceil(L')`-th lowest bid, or `beta` when the sample is too small.
pub fn lth_lowest_bid_threshold<S: Scalar>(
    stage_tasks: StageTasks,
    sample: &SampleSet<S>,
    beta: S,
) -> S {
    let rank = stage_tasks.ceil() as usize;
    if rank == 0 {
        return beta;
    }
    sample.entries.get(rank - 1).map_or(beta, |e| e.bid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyAllocation<S> {
    /// Selected users with their task counts, in selection order.
    pub picks: Vec<(UserId, u64)>,
    /// `sum f_j * b_j` over the picks.
    pub total_cost: S,
    /// `ceil(target)`.
    pub requested: u64,
    pub allocated: u64,
    /// Whether the sample could cover `requested`.
    pub sufficient: bool,
}

/// Buys `ceil(target)` tasks from the cheapest bidders first; the last pick
/// is truncated. Shortfall is reported through `sufficient`, not as an error.
pub fn greedy_min_cost_allocation<S: Scalar>(
    target: S,
    sample: &SampleSet<S>,
) -> GreedyAllocation<S> {
    let requested = target.ceil_count();
    let mut picks = Vec::new();
    let mut allocated = 0u64;
    let mut total_cost = S::zero();
    for e in sample.iter() {
        if allocated >= requested {
            break;
        }
        let f = e.capacity.min(requested - allocated);
        picks.push((e.user, f));
        allocated += f;
        total_cost = total_cost + S::from_count(f) * e.bid;
    }
    GreedyAllocation {
        picks,
        total_cost,
        requested,
        allocated,
        sufficient: allocated >= requested,
    }
}

/// Result of the proportional-share rule when at least one user is accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetFeasibleChoice<S> {
    pub price: S,
    /// Accepted users and their task counts.
    pub picks: Vec<(UserId, u64)>,
    pub tasks: u64,
}

/// Proportional-share rule: walks users by ascending bid while
/// `b_i <= B / (sum f_j + 1)`, setting `p = b_i` and
/// `f_i = min(tau_i, floor(B / p) - sum f_j)`.
///
/// Returns `None` when even the cheapest bid fails the test.
pub fn budget_feasible_selection<S: Scalar>(
    budget: S,
    sample: &SampleSet<S>,
) -> Option<BudgetFeasibleChoice<S>> {
    let mut choice: Option<BudgetFeasibleChoice<S>> = None;
    let mut picks = Vec::new();
    let mut tasks = 0u64;
    for e in sample.iter() {
        if !(e.bid <= budget / S::from_count(tasks + 1)) {
            break;
        }
        let price = e.bid;
        let affordable = (budget / price).floor_count();
        let f = e.capacity.min(affordable.saturating_sub(tasks));
        picks.push((e.user, f));
        tasks += f;
        choice = Some(BudgetFeasibleChoice {
            price,
            picks: Vec::new(),
            tasks,
        });
    }
    choice.map(|mut c| {
        c.picks = picks;
        c
    })
}

/// Uniform price from the proportional-share rule, `beta` if nobody is accepted.
pub fn budget_feasible_price<S: Scalar>(budget: S, sample: &SampleSet<S>, beta: S) -> S {
    budget_feasible_selection(budget, sample).map_or(beta, |c| c.price)
}

/// Threshold used by the heterogeneous mechanisms: the budget is the greedy
/// cost of `delta * L'` tasks, the price is the proportional-share price for
/// that budget. Falls back to `beta` when the sample cannot cover the target.
pub fn get_bid_threshold2<S: Scalar>(
    stage_tasks: StageTasks,
    delta: S,
    beta: S,
    sample: &SampleSet<S>,
) -> S {
    let target = delta * stage_tasks.to_scalar::<S>();
    let greedy = greedy_min_cost_allocation(target, sample);
    if !greedy.sufficient {
        return beta;
    }
    budget_feasible_price(greedy.total_cost, sample, beta)
}
