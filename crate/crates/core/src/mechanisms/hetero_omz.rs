//! Heterogeneous mechanism under the zero-interval model: each winner takes
//! up to its capacity, and stage thresholds come from the budget-feasible
//! rule applied to a greedy budget estimate.

use crate::model::{AuctionOutcome, DeclaredProfile};
use crate::thresholds::get_bid_threshold2;
use crate::Scalar;

use super::{
    run_zero_interval, validate_delta, AuctionParams, IntervalPolicy, Mechanism, MechanismError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroOmz<S> {
    pub params: AuctionParams<S>,
    /// Budget overestimation factor. Values above 1 give the frugality
    /// guarantee; exactly 1 is accepted as a comparison point.
    pub delta: S,
    pub interval_policy: IntervalPolicy,
}

impl<S: Scalar> HeteroOmz<S> {
    pub fn new(params: AuctionParams<S>, delta: S) -> Self {
        HeteroOmz {
            params,
            delta,
            interval_policy: IntervalPolicy::Reject,
        }
    }

    /// Accepts non-zero windows and decides each user at its declared arrival.
    /// This is how the mechanism behaves when deployed where users are not
    /// impatient, and is what exposes its lack of time-truthfulness.
    pub fn deciding_at_arrival(mut self) -> Self {
        self.interval_policy = IntervalPolicy::DecideAtArrival;
        self
    }
}

impl<S: Scalar> Mechanism<S> for HeteroOmz<S> {
    fn name(&self) -> &'static str {
        "hetero-omz"
    }

    fn params(&self) -> &AuctionParams<S> {
        &self.params
    }

    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        validate_delta(self.delta)?;
        let (beta, delta) = (self.params.beta, self.delta);
        run_zero_interval(
            stream,
            &self.params,
            self.interval_policy,
            false,
            |stage_tasks, sample| get_bid_threshold2(stage_tasks, delta, beta, sample),
        )
    }

    fn requires_zero_interval(&self) -> bool {
        self.interval_policy == IntervalPolicy::Reject
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::model::{Event, UserProfile};
    use crate::reference::{example_one, example_two};

    #[test]
    fn first_worked_example() {
        let ex = example_one();
        let m = HeteroOmz::new(ex.params, ex.delta);
        let o = m.run(&ex.truthful_stream()).unwrap();
        assert_eq!(o.winners(), BTreeSet::from([1, 4, 5]));
        assert_eq!(o.threshold_updates(), vec![2.0, 2.0, 4.0]);
        assert_eq!((o.tasks_of(1), o.tasks_of(4), o.tasks_of(5)), (1, 4, 3));
        assert_eq!(
            (o.payment_of(1), o.payment_of(4), o.payment_of(5)),
            (5.0, 16.0, 12.0)
        );
        assert_eq!(o.total_payment(), 33.0);
        assert_eq!(o.total_tasks(), 8);
        // thresholds in force at each arrival
        let at = |t: u32| o.log[t as usize - 1].threshold;
        assert_eq!(
            (at(1), at(2), at(4), at(6), at(7)),
            (5.0, 2.0, 2.0, 4.0, 4.0)
        );
    }

    #[test]
    fn empty_stream() {
        let ex = example_one();
        let o = HeteroOmz::new(ex.params, ex.delta).run(&[]).unwrap();
        assert!(o.winners().is_empty());
        assert_eq!(o.total_payment(), 0.0);
        assert_eq!(o.log.len(), 8);
    }

    #[test]
    fn raised_bid_loses() {
        let ex = example_one();
        let mut stream = ex.truthful_stream();
        stream[3].bid = 9.0;
        let o = HeteroOmz::new(ex.params, ex.delta).run(&stream).unwrap();
        assert_eq!(o.winners(), BTreeSet::from([1, 5]));
        assert!(o.log[5].events.contains(&Event::Reject {
            user: 4,
            allocated_before: 1
        }));
        // user 5 now takes the remaining min(4, 8 - 1) tasks
        assert_eq!(o.tasks_of(5), 4);
    }

    #[test]
    fn interval_policy() {
        let ex = example_two();
        let m = HeteroOmz::new(ex.params, ex.delta);
        assert!(matches!(
            m.run(&ex.truthful_stream()),
            Err(MechanismError::NotZeroInterval { user: 1, .. })
        ));
        let o = m
            .clone()
            .deciding_at_arrival()
            .run(&ex.truthful_stream())
            .unwrap();
        assert_eq!(o.payment_of(1), 5.0);
        let mut late = ex.truthful_stream();
        late[0] = ex.users[0].declare(5, 5, 2.0).unwrap();
        let o = m.run(&late).unwrap();
        assert_eq!(o.payment_of(1), 20.0);
    }

    #[test]
    fn rejects_small_delta() {
        let ex = example_one();
        let m = HeteroOmz::new(ex.params, 0.5);
        assert!(matches!(
            m.run(&ex.truthful_stream()),
            Err(MechanismError::InvalidParameter(_))
        ));
    }

    #[test]
    fn simultaneous_arrivals_processed_in_stream_order() {
        let users = [
            UserProfile::new(7, 1, 1, 3, 1.0),
            UserProfile::new(3, 1, 1, 3, 1.0),
        ];
        let stream: Vec<_> = users.iter().map(UserProfile::truthful).collect();
        let o = HeteroOmz::new(AuctionParams::new(4, 4, 5.0), 2.0)
            .run(&stream)
            .unwrap();
        // L' = 1 in the first stage: the first listed user takes the only task
        assert_eq!(o.tasks_of(7), 1);
        assert_eq!(o.tasks_of(3), 0);
    }
}
