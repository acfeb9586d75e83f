//! Heterogeneous mechanism under the general interval model.
//!
//! Users stay online over their declared window. A user enters the sample
//! only when it departs. Online users are scanned by descending capacity
//! (ties by ascending id) rather than by bid. At every stage boundary each
//! online user, winners included, may be reconfigured to the new threshold
//! when that strictly raises its total payment, so the final payment is the
//! maximum reached during the window.

use crate::model::{AuctionOutcome, DeclaredProfile, Event, StepRecord};
use crate::schedule::StageSchedule;
use crate::thresholds::{get_bid_threshold2, SampleSet};
use crate::Scalar;

use super::{
    arrivals_by_step, initial_awards, validate_delta, AuctionParams, Mechanism, MechanismError,
};
use crate::model::{validate_stream, Award};

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroOmg<S> {
    pub params: AuctionParams<S>,
    pub delta: S,
}

impl<S: Scalar> HeteroOmg<S> {
    pub fn new(params: AuctionParams<S>, delta: S) -> Self {
        HeteroOmg { params, delta }
    }
}

impl<S: Scalar> Mechanism<S> for HeteroOmg<S> {
    fn name(&self) -> &'static str {
        "hetero-omg"
    }

    fn params(&self) -> &AuctionParams<S> {
        &self.params
    }

    fn run(&self, stream: &[DeclaredProfile<S>]) -> Result<AuctionOutcome<S>, MechanismError> {
        let params = &self.params;
        params.validate()?;
        validate_delta(self.delta)?;
        validate_stream(stream, params.horizon)?;

        let schedule = StageSchedule::build(params.horizon, params.tasks)?;
        let stages = schedule.stages();
        let by_step = arrivals_by_step(stream, params.horizon);
        let mut departs_at = vec![Vec::new(); params.horizon as usize + 1];
        for (i, d) in stream.iter().enumerate() {
            departs_at[d.departure as usize].push(i);
        }

        let mut awards = initial_awards(stream);
        let mut log = Vec::with_capacity(params.horizon as usize);
        let mut sample = SampleSet::new();
        // online users, kept in scan order: capacity descending, id ascending
        let mut online: Vec<usize> = Vec::new();
        let mut stage = 0usize;
        let mut stage_tasks = stages[0].tasks;
        let mut price = params.beta;
        let mut allocated = 0u64;

        let scan_key = |i: &usize| (std::cmp::Reverse(stream[*i].capacity), stream[*i].user_id);

        for t in 1..=params.horizon {
            let mut events = Vec::new();
            let arrivals = &by_step[t as usize];
            for &i in arrivals {
                events.push(Event::Arrive {
                    user: stream[i].user_id,
                });
                let pos = online.partition_point(|j| scan_key(j) < scan_key(&i));
                online.insert(pos, i);
            }

            for &i in &online {
                let d = &stream[i];
                if awards[&d.user_id].is_win() {
                    continue;
                }
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
                } else if d.arrival == t {
                    // later re-scans of a loser change nothing and are not logged
                    events.push(Event::Reject {
                        user: d.user_id,
                        allocated_before: allocated,
                    });
                }
            }

            for &i in &departs_at[t as usize] {
                let d = &stream[i];
                online.retain(|&j| j != i);
                sample.insert(d.into());
                events.push(Event::Depart { user: d.user_id });
            }

            let record_threshold = price;
            let record_tasks = stage_tasks;
            if t == stages[stage].end && stage + 1 < stages.len() {
                price = get_bid_threshold2(stage_tasks, self.delta, params.beta, &sample);
                events.push(Event::Threshold { price });
                stage += 1;
                stage_tasks = stages[stage].tasks;

                for &i in &online {
                    let d = &stream[i];
                    let current = awards[&d.user_id];
                    if !(d.bid <= price) {
                        continue;
                    }
                    let room = stage_tasks.residual_ceil(current.tasks, allocated);
                    let tasks = if room <= 0 {
                        0
                    } else {
                        d.capacity.min(room as u64)
                    };
                    if S::from_count(tasks) * price > current.payment() {
                        let before = allocated;
                        allocated = allocated - current.tasks + tasks;
                        awards.insert(d.user_id, Award { tasks, price });
                        events.push(if current.is_win() {
                            Event::Upgrade {
                                user: d.user_id,
                                tasks,
                                price,
                                allocated_before: before,
                            }
                        } else {
                            Event::Accept {
                                user: d.user_id,
                                tasks,
                                price,
                                allocated_before: before,
                            }
                        });
                    }
                }
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
}
