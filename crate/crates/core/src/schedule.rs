//! Doubling stage schedule.
//!
//! The horizon `1..=T` is split into `floor(log2 T) + 1` stages. Stage `i`
//! ends at `floor(2^(i-1) T / 2^k)` and carries the cumulative task cap
//! `2^(i-1) L / 2^k`, with `k = floor(log2 T)`. The cap is a dyadic rational
//! and is kept exact in [`StageTasks`].

use std::fmt;

use serde::Serialize;

use crate::model::{ModelError, TimeStep};

/// Exact dyadic task count `numer / 2^shift`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct StageTasks {
    numer: u64,
    shift: u32,
}

impl StageTasks {
    pub fn new(numer: u64, shift: u32) -> Self {
        assert!(shift < 63, "stage task denominator out of range");
        let mut st = StageTasks { numer, shift };
        while st.shift > 0 && st.numer.is_multiple_of(2) {
            st.numer /= 2;
            st.shift -= 1;
        }
        st
    }

    pub fn whole(tasks: u64) -> Self {
        StageTasks::new(tasks, 0)
    }

    pub fn numer(&self) -> u64 {
        self.numer
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn is_integral(&self) -> bool {
        self.shift == 0
    }

    pub fn is_positive(&self) -> bool {
        self.numer > 0
    }

    /// `ceil(L')`.
    pub fn ceil(&self) -> u64 {
        let den = 1u128 << self.shift;
        (self.numer as u128).div_ceil(den) as u64
    }

    /// `count < L'`, compared exactly.
    pub fn exceeds(&self, count: u64) -> bool {
        ((count as u128) << self.shift) < self.numer as u128
    }

    /// `ceil(L' + extra - allocated)`, which may be zero or negative.
    pub fn residual_ceil(&self, extra: u64, allocated: u64) -> i128 {
        let den = 1i128 << self.shift;
        let num = self.numer as i128 + ((extra as i128 - allocated as i128) << self.shift);
        num.div_euclid(den) + i128::from(num.rem_euclid(den) != 0)
    }

    pub fn doubled(&self) -> Self {
        if self.shift > 0 {
            StageTasks {
                numer: self.numer,
                shift: self.shift - 1,
            }
        } else {
            StageTasks {
                numer: self.numer.checked_mul(2).expect("stage task overflow"),
                shift: 0,
            }
        }
    }

    pub fn to_scalar<S: crate::Scalar>(&self) -> S {
        S::from_count(self.numer) / S::from_count(1u64 << self.shift)
    }

    pub fn to_f64(&self) -> f64 {
        self.numer as f64 / (1u64 << self.shift) as f64
    }
}

impl fmt::Display for StageTasks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.shift == 0 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, 1u64 << self.shift)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Stage {
    pub index: usize,
    pub end: TimeStep,
    pub tasks: StageTasks,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageSchedule {
    horizon: TimeStep,
    tasks: u64,
    stages: Vec<Stage>,
}

impl StageSchedule {
    pub fn build(horizon: TimeStep, tasks: u64) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::InvalidParameter(
                "horizon T must be at least 1".into(),
            ));
        }
        if tasks == 0 {
            return Err(ModelError::InvalidParameter(
                "task count L must be at least 1".into(),
            ));
        }
        let k = horizon.ilog2();
        let stages = (0..=k)
            .map(|i| {
                let end = ((horizon as u64) << i) >> k;
                Stage {
                    index: i as usize + 1,
                    end: end as TimeStep,
                    tasks: StageTasks::new(tasks << i, k),
                }
            })
            .collect();
        Ok(StageSchedule {
            horizon,
            tasks,
            stages,
        })
    }

    pub fn horizon(&self) -> TimeStep {
        self.horizon
    }

    pub fn tasks(&self) -> u64 {
        self.tasks
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn first(&self) -> &Stage {
        &self.stages[0]
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn ends(&self) -> impl Iterator<Item = TimeStep> + '_ {
        self.stages.iter().map(|s| s.end)
    }

    pub fn is_boundary(&self, t: TimeStep) -> bool {
        self.stages.iter().any(|s| s.end == t)
    }
}
