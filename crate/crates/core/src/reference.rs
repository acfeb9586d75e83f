//! The two hand-traceable instances used as golden references.
//!
//! Both use `L = 8`, `T = 8`, `beta = 5`, `delta = 2` and five users with
//! capacity 4. The second differs only in user 1 staying online over
//! `[1, 5]`.

use crate::mechanisms::AuctionParams;
use crate::model::{DeclaredProfile, UserProfile};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceInstance<S> {
    pub name: &'static str,
    pub params: AuctionParams<S>,
    pub delta: S,
    pub users: Vec<UserProfile<S>>,
}

impl<S: Scalar> ReferenceInstance<S> {
    pub fn truthful_stream(&self) -> Vec<DeclaredProfile<S>> {
        self.users.iter().map(UserProfile::truthful).collect()
    }

    pub fn user(&self, id: u32) -> &UserProfile<S> {
        self.users
            .iter()
            .find(|u| u.id == id)
            .expect("reference user exists")
    }
}

fn build<S: Scalar>(name: &'static str, first_departure: u32) -> ReferenceInstance<S> {
    let s = |n: u64| S::from_count(n);
    let users = [
        (1, 1, first_departure, 2),
        (2, 2, 2, 4),
        (3, 4, 4, 5),
        (4, 6, 6, 1),
        (5, 7, 7, 3),
    ]
    .into_iter()
    .map(|(id, a, d, c)| UserProfile::new(id, a, d, 4, s(c)))
    .collect();
    ReferenceInstance {
        name,
        params: AuctionParams::new(8, 8, s(5)),
        delta: s(2),
        users,
    }
}

/// Zero-interval instance: `theta_1 = (1,1,4,2)`, `theta_2 = (2,2,4,4)`,
/// `theta_3 = (4,4,4,5)`, `theta_4 = (6,6,4,1)`, `theta_5 = (7,7,4,3)`.
pub fn example_one() -> ReferenceInstance<f64> {
    example_one_in()
}

/// Same as [`example_one`] with `theta_1 = (1,5,4,2)`.
pub fn example_two() -> ReferenceInstance<f64> {
    example_two_in()
}

pub fn example_one_in<S: Scalar>() -> ReferenceInstance<S> {
    build("example-1", 1)
}

pub fn example_two_in<S: Scalar>() -> ReferenceInstance<S> {
    build("example-2", 5)
}
