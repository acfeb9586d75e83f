//! Homogeneous mechanism under the zero-interval model: one task per user,
//! threshold set to the `L'`-th lowest sampled bid.

use crate::model::{AuctionOutcome, DeclaredProfile};
use crate::thresholds::lth_lowest_bid_threshold;
use crate::Scalar;

use super::{run_zero_interval, AuctionParams, IntervalPolicy, Mechanism, MechanismError};

#[derive(Debug, Clone, PartialEq)]
pub struct HomoOmz<S> {
    pub params: AuctionParams<S>,
    pub interval_policy: IntervalPolicy,
}

impl<S: Scalar> HomoOmz<S> {
    pub fn new(params: AuctionParams<S>) -> Self {
        HomoOmz {
            params,
            interval_policy: IntervalPolicy::Reject,
        }
    }

    pub fn deciding_at_arrival(mut self) -> Self {
        self.interval_policy = IntervalPolicy::DecideAtArrival;
        self
    }
}

impl<S: Scalar> Mechanism<S> for HomoOmz<S> {
    fn name(&self) -> &'static str {
        "homo-omz"
    }

    fn params(&self) -> &AuctionParams<S> {
        &self.params
    }

    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        let beta = self.params.beta;
        run_zero_interval(
            stream,
            &self.params,
            self.interval_policy,
            true,
            |stage_tasks, sample| lth_lowest_bid_threshold(stage_tasks, sample, beta),
        )
    }

    fn requires_zero_interval(&self) -> bool {
        self.interval_policy == IntervalPolicy::Reject
    }

    fn requires_unit_capacity(&self) -> bool {
        true
    }
}
