//! Seeded user-stream generators.
//!
//! Randomness comes from ChaCha8 seeded with the instance seed; each purpose
//! (arrivals, costs, capacities, intervals, ordering, ...) reads its own
//! ChaCha stream id, so changing one distribution never shifts the draws
//! of another.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::model::{TimeStep, UserId, UserProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("arrival rate must be positive, got {0}")]
    BadRate(f64),
    #[error("secretary stream of {users} users does not fit in {horizon} distinct steps")]
    TooManyUsers { users: usize, horizon: TimeStep },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
}

/// Independent random substreams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Arrivals,
    Costs,
    Capacities,
    Intervals,
    Order,
    Misreports,
    /// One per random-baseline trial.
    RandomBaseline(u64),
}

impl Substream {
    fn id(self) -> u64 {
        match self {
            Substream::Arrivals => 1,
            Substream::Costs => 2,
            Substream::Capacities => 3,
            Substream::Intervals => 4,
            Substream::Order => 5,
            Substream::Misreports => 6,
            Substream::RandomBaseline(k) => 1 << 32 | k,
        }
    }
}

pub fn substream(seed: u64, which: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// Real-valued distribution for unit costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CostDist {
    Constant(f64),
    /// Continuous uniform over `[low, high]`.
    Uniform {
        low: f64,
        high: f64,
    },
}

impl CostDist {
    pub fn validate(&self) -> Result<(), GenError> {
        match *self {
            CostDist::Constant(c) if c > 0.0 && c.is_finite() => Ok(()),
            CostDist::Uniform { low, high } if low > 0.0 && low <= high && high.is_finite() => {
                Ok(())
            }
            other => Err(GenError::BadDistribution(format!(
                "cost distribution {other:?} must be positive"
            ))),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            CostDist::Constant(c) => c,
            CostDist::Uniform { low, high } if low == high => low,
            CostDist::Uniform { low, high } => rng.random_range(low..=high),
        }
    }
}

/// Integer distribution for capacities and interval lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountDist {
    Constant(u64),
    /// Discrete uniform over `low..=high`.
    Uniform {
        low: u64,
        high: u64,
    },
}

impl CountDist {
    pub fn validate(&self, min: u64) -> Result<(), GenError> {
        match *self {
            CountDist::Constant(c) if c >= min => Ok(()),
            CountDist::Uniform { low, high } if low >= min && low <= high => Ok(()),
            other => Err(GenError::BadDistribution(format!(
                "{other:?} must stay at or above {min}"
            ))),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match *self {
            CountDist::Constant(c) => c,
            CountDist::Uniform { low, high } => rng.random_range(low..=high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderModel {
    /// Users arrive by a per-step Poisson process with i.i.d. types.
    Iid,
    /// Values are drawn up front, then placed in uniformly random order on
    /// distinct steps.
    Secretary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceConfig {
    pub horizon: TimeStep,
    pub tasks: u64,
    /// Expected arrivals per step.
    pub lambda: f64,
    pub cost: CostDist,
    pub capacity: CountDist,
    /// Length of `departure - arrival`, clipped at the horizon.
    pub interval: CountDist,
    pub order: OrderModel,
    /// Secretary capacity bound: every capacity should be at most `L / omega`.
    pub omega: Option<f64>,
    pub seed: u64,
}

impl InstanceConfig {
    /// Homogeneous, zero-interval users: `T = 1800`, `lambda = 0.6`,
    /// `tau = 1`, `c ~ U[1, 10]`.
    pub fn homogeneous(tasks: u64) -> Self {
        InstanceConfig {
            horizon: 1800,
            tasks,
            lambda: 0.6,
            cost: CostDist::Uniform {
                low: 1.0,
                high: 10.0,
            },
            capacity: CountDist::Constant(1),
            interval: CountDist::Constant(0),
            order: OrderModel::Iid,
            omega: None,
            seed: 0,
        }
    }

    /// Heterogeneous users with `tau ~ U{1..10}`, zero interval.
    pub fn heterogeneous(tasks: u64) -> Self {
        InstanceConfig {
            capacity: CountDist::Uniform { low: 1, high: 10 },
            ..Self::homogeneous(tasks)
        }
    }

    pub fn with_intervals(self, interval: CountDist) -> Self {
        InstanceConfig { interval, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        InstanceConfig { seed, ..self }
    }

    pub fn with_horizon(self, horizon: TimeStep) -> Self {
        InstanceConfig { horizon, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        InstanceConfig { lambda, ..self }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(GenError::BadRate(self.lambda));
        }
        self.cost.validate()?;
        self.capacity.validate(1)?;
        self.interval.validate(0)?;
        if let Some(w) = self.omega {
            if !(w > 0.0) {
                return Err(GenError::BadDistribution(format!(
                    "omega must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-step arrival counts for steps `1..=horizon` (index 0 is step 1).
pub fn gen_poisson_arrivals<R: Rng>(
    lambda: f64,
    horizon: TimeStep,
    rng: &mut R,
) -> Result<Vec<u32>, GenError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GenError::BadRate(lambda));
    }
    let dist = Poisson::new(lambda).map_err(|_| GenError::BadRate(lambda))?;
    Ok((0..horizon).map(|_| dist.sample(rng) as u32).collect())
}

/// i.i.d. users: Poisson arrivals, then capacity, cost and interval drawn
/// independently per user. Users sharing a step keep their draw order.
pub fn gen_iid_users(config: &InstanceConfig) -> Result<Vec<UserProfile<f64>>, GenError> {
    config.validate()?;
    let counts = gen_poisson_arrivals(
        config.lambda,
        config.horizon,
        &mut substream(config.seed, Substream::Arrivals),
    )?;
    let mut costs = substream(config.seed, Substream::Costs);
    let mut caps = substream(config.seed, Substream::Capacities);
    let mut intervals = substream(config.seed, Substream::Intervals);
    let mut users = Vec::new();
    let mut next_id: UserId = 1;
    for (step, &n) in counts.iter().enumerate() {
        let arrival = step as TimeStep + 1;
        for _ in 0..n {
            let capacity = config.capacity.sample(&mut caps);
            let unit_cost = config.cost.sample(&mut costs);
            let span = config.interval.sample(&mut intervals);
            let departure = (arrival as u64 + span).min(config.horizon as u64) as TimeStep;
            users.push(UserProfile::new(
                next_id, arrival, departure, capacity, unit_cost,
            ));
            next_id += 1;
        }
    }
    Ok(users)
}

/// Places an adversarial multiset of `(capacity, cost)` values on distinct,
/// uniformly chosen steps in uniformly random order. Users are zero-interval
/// and numbered by arrival.
pub fn gen_secretary_stream<R: Rng>(
    values: &[(u64, f64)],
    horizon: TimeStep,
    rng: &mut R,
) -> Result<Vec<UserProfile<f64>>, GenError> {
    if values.len() > horizon as usize {
        return Err(GenError::TooManyUsers {
            users: values.len(),
            horizon,
        });
    }
    let mut steps: Vec<TimeStep> = rand::seq::index::sample(rng, horizon as usize, values.len())
        .into_iter()
        .map(|s| s as TimeStep + 1)
        .collect();
    steps.sort_unstable();
    let mut order: Vec<(u64, f64)> = values.to_vec();
    order.shuffle(rng);
    Ok(steps
        .into_iter()
        .zip(order)
        .enumerate()
        .map(|(i, (t, (capacity, cost)))| UserProfile::new(i as UserId + 1, t, t, capacity, cost))
        .collect())
}

/// Secretary-model instance: `round(lambda * T)` values (at most `T`) drawn
/// from the configured distributions, then randomly ordered.
pub fn gen_secretary_users(config: &InstanceConfig) -> Result<Vec<UserProfile<f64>>, GenError> {
    config.validate()?;
    let n = ((config.lambda * config.horizon as f64).round() as usize).min(config.horizon as usize);
    let mut costs = substream(config.seed, Substream::Costs);
    let mut caps = substream(config.seed, Substream::Capacities);
    let values: Vec<(u64, f64)> = (0..n)
        .map(|_| {
            (
                config.capacity.sample(&mut caps),
                config.cost.sample(&mut costs),
            )
        })
        .collect();
    gen_secretary_stream(
        &values,
        config.horizon,
        &mut substream(config.seed, Substream::Order),
    )
}

pub fn generate(config: &InstanceConfig) -> Result<Vec<UserProfile<f64>>, GenError> {
    match config.order {
        OrderModel::Iid => gen_iid_users(config),
        OrderModel::Secretary => gen_secretary_users(config),
    }
}

/// Users whose capacity exceeds `tasks / omega`.
pub fn capacity_bound_violations(
    users: &[UserProfile<f64>],
    tasks: u64,
    omega: f64,
) -> Vec<UserId> {
    let bound = tasks as f64 / omega;
    users
        .iter()
        .filter(|u| u.capacity as f64 > bound)
        .map(|u| u.id)
        .collect()
}
