use frugal_core::harness::{
    check_run_invariants, default_bid_grid, full_time_grid, probe_consumer_sovereignty,
    test_cost_truthfulness, test_time_truthfulness, Instance, Sovereignty,
};
use frugal_core::{
    AuctionParams, Event, HeteroOmg, HeteroOmz, HomoOmz, Mechanism, Profile, Rational64,
    UserProfile,
};
use proptest::prelude::*;

const T: u32 = 16;
const L: u64 = 6;

fn params() -> AuctionParams<f64> {
    AuctionParams::new(L, T, 6.0)
}

/// Small instances with integer costs in `1..=8`, so ties and threshold hits are common.
fn arb_users(max_capacity: u64, max_interval: u32) -> impl Strategy<Value = Vec<Profile>> {
    prop::collection::vec(
        (1u32..=T, 0u32..=max_interval, 1u64..=max_capacity, 1u32..=8),
        1..12,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (a, len, cap, c))| {
                UserProfile::new(i as u32 + 1, a, (a + len).min(T), cap, c as f64)
            })
            .collect()
    })
}

fn mechanisms() -> Vec<Box<dyn Mechanism<f64> + Send + Sync>> {
    vec![
        Box::new(HeteroOmz::new(params(), 2.0)),
        Box::new(HeteroOmz::new(params(), 1.0)),
    ]
}

fn bid_grid(mech: &dyn Mechanism<f64>, instance: &Instance<f64>, cost: f64) -> Vec<f64> {
    let truthful = mech.run(&instance.declared).unwrap();
    let mut thresholds = truthful.thresholds_seen();
    thresholds.push(mech.params().beta);
    let mut grid = default_bid_grid(cost, &thresholds);
    grid.extend((1..=10).map(f64::from).filter(|&b| b != cost));
    grid
}

/// Whether `user` was ever upgraded to a lower per-task price.
fn price_cut(outcome: &frugal_core::Outcome, user: u32) -> bool {
    let mut last = None;
    for e in outcome.log.iter().flat_map(|r| &r.events) {
        match *e {
            Event::Accept { user: u, price, .. } if u == user => last = Some(price),
            Event::Upgrade { user: u, price, .. } if u == user => {
                if last.is_some_and(|p| price < p) {
                    return true;
                }
                last = Some(price);
            }
            _ => {}
        }
    }
    false
}

/// Payment-raising upgrades can lower utility: user 5 (cost 4, three
/// tasks) is moved from 2 tasks at 6 to 3 tasks at 5. Leaving before that
/// boundary, or bidding above the new threshold, keeps 2 tasks at 6.
#[test]
fn general_interval_upgrade_can_cost_utility() {
    let users: Vec<Profile> = [
        (1, 1, 1, 1, 5.0),
        (2, 4, 5, 1, 1.0),
        (3, 1, 3, 1, 5.0),
        (4, 3, 3, 1, 1.0),
        (5, 1, 5, 3, 4.0),
        (6, 3, 3, 1, 5.0),
        (7, 2, 5, 1, 1.0),
    ]
    .iter()
    .map(|&(i, a, d, c, x)| UserProfile::new(i, a, d, c, x))
    .collect();
    let inst = Instance::truthful(users);
    let m = HeteroOmg::new(params(), 2.0);
    let truthful = m.run(&inst.declared).unwrap();
    assert_eq!(
        truthful.award(5).map(|a| (a.tasks, a.price)),
        Some((3, 5.0))
    );
    let r = test_time_truthfulness(&m, &inst, 5, &[(1, 3)]).unwrap();
    assert_eq!((r.deviations[0].tasks, r.deviations[0].price), (2, 6.0));
    assert_eq!(r.max_gain, 1.0);
    let r = test_cost_truthfulness(&m, &inst, 5, &[5.5]).unwrap();
    assert_eq!(r.max_gain, 1.0);
    assert!(price_cut(&truthful, 5));
}

/// A low bid wins a slot at a cheap threshold; the next boundary counts the
/// user's own tasks as room, so it keeps the slot and is lifted to the new,
/// higher threshold. Bidding truthfully, users 1 and 2 take the slots first.
#[test]
fn general_interval_low_bid_can_reserve_capacity() {
    let users: Vec<Profile> = [
        (1, 1, 5, 1, 2.0),
        (2, 1, 5, 1, 2.0),
        (3, 5, 5, 1, 1.0),
        (4, 4, 5, 1, 2.0),
        (5, 3, 5, 1, 2.0),
        (6, 1, 1, 2, 1.0),
        (7, 1, 5, 1, 2.0),
    ]
    .iter()
    .map(|&(i, a, d, c, x)| UserProfile::new(i, a, d, c, x))
    .collect();
    let inst = Instance::truthful(users);
    let m = HeteroOmg::new(params(), 2.0);
    assert_eq!(m.run(&inst.declared).unwrap().tasks_of(4), 0);
    let r = test_cost_truthfulness(&m, &inst, 4, &[0.5]).unwrap();
    assert_eq!((r.deviations[0].tasks, r.deviations[0].price), (1, 6.0));
    assert_eq!(r.max_gain, 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn runs_are_deterministic_and_satisfy_invariants(users in arb_users(4, 6)) {
        let inst = Instance::truthful(users);
        let zero = inst.zero_interval();
        let mut all = mechanisms();
        all.push(Box::new(HeteroOmg::new(params(), 2.0)));
        for m in all {
            let input = if m.requires_zero_interval() { &zero } else { &inst };
            let a = m.run(&input.declared).unwrap();
            let b = m.run(&input.declared).unwrap();
            prop_assert_eq!(&a, &b);
            let report = check_run_invariants(&a, &input.truths, &input.declared, L);
            prop_assert!(report.passed(), "{}: {:?}", m.name(), report.violations);
        }
    }

    #[test]
    fn no_profitable_bid(users in arb_users(4, 6), pick in any::<prop::sample::Index>()) {
        let inst = Instance::truthful(users);
        let zero = inst.zero_interval();
        let user = inst.truths[pick.index(inst.truths.len())];
        for m in mechanisms() {
            let input = if m.requires_zero_interval() { &zero } else { &inst };
            let grid = bid_grid(m.as_ref(), input, user.unit_cost);
            let r = test_cost_truthfulness(m.as_ref(), input, user.id, &grid).unwrap();
            prop_assert!(r.max_gain <= 0.0, "{}: {:?}", m.name(), r.best_deviation());
        }
    }

    #[test]
    fn homogeneous_no_profitable_bid(users in arb_users(1, 0), pick in any::<prop::sample::Index>()) {
        let inst = Instance::truthful(users);
        let user = inst.truths[pick.index(inst.truths.len())];
        let m = HomoOmz::new(params());
        let grid = bid_grid(&m, &inst, user.unit_cost);
        let r = test_cost_truthfulness(&m, &inst, user.id, &grid).unwrap();
        prop_assert!(r.max_gain <= 0.0, "{:?}", r.best_deviation());
    }

    #[test]
    fn general_interval_deviations_never_raise_payment(users in arb_users(4, 6), pick in any::<prop::sample::Index>()) {
        let inst = Instance::truthful(users);
        let user = inst.truths[pick.index(inst.truths.len())];
        let m = HeteroOmg::new(params(), 2.0);
        let truthful = m.run(&inst.declared).unwrap().payment_of(user.id);
        let windows = test_time_truthfulness(&m, &inst, user.id, &full_time_grid(&user)).unwrap();
        let bids = test_cost_truthfulness(&m, &inst, user.id, &bid_grid(&m, &inst, user.unit_cost)).unwrap();
        for d in windows.deviations.iter().chain(&bids.deviations) {
            let paid = d.tasks as f64 * d.price;
            if d.declared.bid == user.unit_cost {
                prop_assert!(paid <= truthful, "{:?} paid {} > {}", d.declared, paid, truthful);
            }
        }
    }

    #[test]
    fn upgrades_only_raise_payment(users in arb_users(4, 10)) {
        let stream: Vec<_> = users.iter().map(UserProfile::truthful).collect();
        let out = HeteroOmg::new(params(), 2.0).run(&stream).unwrap();
        let mut paid = std::collections::BTreeMap::new();
        for rec in &out.log {
            for e in &rec.events {
                match *e {
                    Event::Accept { user, tasks, price, .. } => {
                        paid.insert(user, tasks as f64 * price);
                    }
                    Event::Upgrade { user, tasks, price, .. } => {
                        let now = tasks as f64 * price;
                        let before = paid.insert(user, now).expect("upgrade follows an accept");
                        prop_assert!(now > before);
                    }
                    _ => {}
                }
            }
        }
        for (user, p) in paid {
            prop_assert_eq!(out.payment_of(user), p);
        }
    }

    #[test]
    fn sovereignty_never_fails(users in arb_users(4, 0), pick in any::<prop::sample::Index>()) {
        let inst = Instance::truthful(users);
        let user = inst.truths[pick.index(inst.truths.len())];
        let m = HeteroOmz::new(params(), 2.0);
        let s = probe_consumer_sovereignty(&m, &inst, user.id).unwrap();
        prop_assert!(!matches!(s, Sovereignty::Fail { .. }), "{:?}", s);
    }

    #[test]
    fn exact_and_float_runs_agree(users in arb_users(4, 6)) {
        let exact: Vec<UserProfile<Rational64>> = users
            .iter()
            .map(|u| UserProfile::new(u.id, u.arrival, u.departure, u.capacity, Rational64::from_integer(u.unit_cost as i64)))
            .collect();
        let float_stream: Vec<_> = users.iter().map(UserProfile::truthful).collect();
        let exact_stream: Vec<_> = exact.iter().map(UserProfile::truthful).collect();
        let p = AuctionParams::new(L, T, Rational64::from_integer(6));
        let two = Rational64::from_integer(2);
        let f = HeteroOmg::new(params(), 2.0).run(&float_stream).unwrap();
        let e = HeteroOmg::new(p, two).run(&exact_stream).unwrap();
        for (id, a) in &f.awards {
            let b = e.award(*id).unwrap();
            prop_assert_eq!(a.tasks, b.tasks);
            let bp = *b.price.numer() as f64 / *b.price.denom() as f64;
            prop_assert!((a.price - bp).abs() < 1e-9, "user {}: {} vs {}", id, a.price, b.price);
        }
    }
}
