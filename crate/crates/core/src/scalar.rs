//! Currency scalar abstraction.
//!
//! Every mechanism is generic over the type used for bids, prices and
//! payments. `f64` is the working type for simulation; `Rational64` gives
//! exact arithmetic for small hand-built instances.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type usable as a currency amount.
///
/// Comparisons are plain `PartialOrd` with no tolerance.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Largest integer `n` with `n <= self`, clamped to `0` for negative input.
    fn floor_count(self) -> u64;

    /// Smallest integer `n` with `n >= self`, clamped to `0` for negative input.
    fn ceil_count(self) -> u64;

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("task count representable in scalar type")
    }

    /// Lossy conversion used for reporting and sampling.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value representable in scalar type")
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn floor_count(self) -> u64 {
                if self <= 0.0 {
                    0
                } else {
                    self.floor() as u64
                }
            }

            fn ceil_count(self) -> u64 {
                if self <= 0.0 {
                    0
                } else {
                    self.ceil() as u64
                }
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Rational64 {
    fn floor_count(self) -> u64 {
        if self <= Rational64::from_integer(0) {
            0
        } else {
            self.floor().to_integer() as u64
        }
    }

    fn ceil_count(self) -> u64 {
        if self <= Rational64::from_integer(0) {
            0
        } else {
            self.ceil().to_integer() as u64
        }
    }

    fn from_f64_lossy(x: f64) -> Self {
        // approximate_float keeps denominators small; from_f64 would be exact
        // but overflows i64 for most non-dyadic inputs.
        Rational64::approximate_float(x).expect("finite value representable as Rational64")
    }
}

/// Sorts `(bid, id)` keyed items ascending by bid, ties by ascending id.
pub(crate) fn bid_order<S: Scalar>(a: (S, u32), b: (S, u32)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .expect("bids must be comparable (no NaN)")
        .then(a.1.cmp(&b.1))
}
