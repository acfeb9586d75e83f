//! Frugal online incentive mechanisms for mobile crowd sensing.
//!
//! Users arrive over `T` time steps, each able to perform up to `tau` tasks at
//! a private unit cost. The mechanisms post a threshold price learned from
//! earlier bids and buy `L` tasks in doubling stages. Everything is generic
//! over the scalar type so runs can use `f64` or exact `Rational64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;

pub mod baselines;
pub mod generators;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod reference;
pub mod schedule;
pub mod thresholds;

mod scalar;

pub use num_rational::Rational64;
pub use scalar::Scalar;

pub use mechanisms::{
    AuctionParams, HeteroOmg, HeteroOmz, HomoOmz, Mechanism, MechanismError, MechanismKind,
};
pub use model::{
    AuctionOutcome, Award, DeclaredProfile, Event, ModelError, StepRecord, TimeStep, UserId,
    UserProfile,
};
pub use schedule::{StageSchedule, StageTasks};

pub type Price = f64;
pub type Profile = UserProfile<f64>;
pub type Declaration = DeclaredProfile<f64>;
pub type Outcome = AuctionOutcome<f64>;
pub type ExactProfile = UserProfile<Rational64>;
pub type ExactDeclaration = DeclaredProfile<Rational64>;
pub type ExactOutcome = AuctionOutcome<Rational64>;
