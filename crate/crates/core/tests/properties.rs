use proptest::prelude::*;

use jca_core::engine::{classify_regime, run, Regime};
use jca_core::oracle::{grid_solve, primal_objective};
use jca_core::protocol::{CarrierAgentState, DecayPolicy, PriceQuote, SolverLimits, UserAgentState};
use jca_core::scenario::{Carrier, Settings, User};
use jca_core::trace_io::{fmt_num, read_trace, trace_rows, write_trace};
use jca_core::utility::{Rate, UtilityFunction, DEFAULT_TOL, RATE_FLOOR};
use jca_core::{AllocationMatrix, Bid, CarrierId, Scenario, UeId};

fn utility() -> impl Strategy<Value = UtilityFunction> {
    prop_oneof![
        (0.5f64..10.0, 5.0f64..50.0).prop_map(|(a, b)| UtilityFunction::Sigmoidal { a, b }),
        (0.1f64..20.0, 10.0f64..200.0).prop_map(|(k, r_max)| UtilityFunction::Logarithmic { k, r_max }),
    ]
}

fn rate(v: f64) -> Rate {
    Rate::new(v).unwrap()
}

/// One or two carriers, two to four users with random coverage.
fn small_scenario() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(20.0f64..120.0, 1..=2),
        prop::collection::vec((utility(), 0u8..3), 2..=4),
    )
        .prop_map(|(caps, users)| {
            let k = caps.len();
            Scenario {
                carriers: caps
                    .iter()
                    .enumerate()
                    .map(|(i, &capacity)| Carrier { id: CarrierId(i as u32 + 1), capacity })
                    .collect(),
                users: users
                    .into_iter()
                    .enumerate()
                    .map(|(i, (utility, cov))| User {
                        id: UeId(i as u32 + 1),
                        utility,
                        coverage: match (k, cov) {
                            (1, _) => vec![CarrierId(1)],
                            (_, 0) => vec![CarrierId(1)],
                            (_, 1) => vec![CarrierId(2)],
                            _ => vec![CarrierId(1), CarrierId(2)],
                        },
                    })
                    .collect(),
                settings: Settings::default(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn utility_is_increasing_and_normalized(u in utility(), r1 in 0.0f64..300.0, dr in 1e-3f64..50.0) {
        let (lo, hi) = (u.evaluate(rate(r1)), u.evaluate(rate(r1 + dr)));
        prop_assert!(hi > lo || (hi == lo && hi == 1.0));
        prop_assert!(lo >= 0.0);
        prop_assert_eq!(u.evaluate(Rate::ZERO), 0.0);
        if let UtilityFunction::Sigmoidal { .. } = u {
            prop_assert!(hi <= 1.0);
        }
        if let UtilityFunction::Logarithmic { r_max, .. } = u {
            prop_assert!((u.evaluate(rate(r_max)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_slope_is_positive_and_decreasing(u in utility(), r in 0.01f64..100.0, dr in 0.01f64..10.0) {
        let s1 = u.log_slope(rate(r)).unwrap();
        let s2 = u.log_slope(rate(r + dr)).unwrap();
        prop_assert!(s1 > 0.0 || s1 == 0.0 && s2 == 0.0);
        prop_assert!(s2 <= s1);
    }

    #[test]
    fn first_curvature_matches_difference(u in utility(), r in 0.2f64..100.0) {
        let h = match u {
            UtilityFunction::Sigmoidal { a, .. } => 1e-4 * r.min(1.0 / a),
            UtilityFunction::Logarithmic { .. } => 1e-4 * r,
        };
        let s = |x: f64| u.log_slope(rate(x)).unwrap();
        let fd = (s(r + h) - s(r - h)) / (2.0 * h);
        let analytic = u.log_slope_curvature(rate(r)).unwrap().first;
        prop_assert!(analytic <= 0.0);
        // skip points where the difference is below rounding of S itself
        prop_assume!(analytic.abs() * h > 1e-9 * s(r));
        prop_assume!(analytic.is_normal() && s(r + h).is_normal());
        prop_assert!((fd - analytic).abs() <= 1e-4 * analytic.abs(), "fd {} analytic {}", fd, analytic);
    }

    #[test]
    fn inverse_hits_the_price(u in utility(), log_r in -5.0f64..2.4) {
        let r = 10f64.powf(log_r);
        let p = u.log_slope(rate(r)).unwrap();
        prop_assume!(p > 0.0);
        let got = u.inverse_log_slope(p, 270.0, DEFAULT_TOL).unwrap().value();
        let err = (u.log_slope(rate(got)).unwrap() - p).abs();
        prop_assert!(err <= DEFAULT_TOL || got == RATE_FLOOR || got == 270.0, "r {} got {} err {}", r, got, err);
    }

    #[test]
    fn inverse_is_monotone(u in utility(), p1 in 1e-4f64..5.0, p2 in 1e-4f64..5.0) {
        let d = |p| u.inverse_log_slope(p, 270.0, DEFAULT_TOL).unwrap().value();
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(d(lo) >= d(hi) - DEFAULT_TOL);
    }

    #[test]
    fn carrier_price_and_allocation(bids in prop::collection::vec(0.0f64..20.0, 1..6), cap in 1.0f64..200.0) {
        let ues: Vec<UeId> = (1..=bids.len() as u32).map(UeId).collect();
        let mut c = CarrierAgentState::new(CarrierId(1), cap, &ues, 1e-3);
        let msgs: Vec<Bid> = bids
            .iter()
            .zip(&ues)
            .map(|(&amount, &ue)| Bid { ue, carrier: CarrierId(1), amount, iteration: 1 })
            .collect();
        let q = c.update(&msgs, 1).unwrap();
        let sum: f64 = bids.iter().sum();
        prop_assert!(q.price > 0.0);
        if sum > 0.0 {
            prop_assert!((q.price - sum / cap).abs() <= 1e-15 * q.price.max(1.0));
        }
        let q = c.update(&msgs, 2).unwrap();
        prop_assert!(q.stop);
        let rates = c.final_allocation().unwrap();
        let total: f64 = rates.values().map(|r| r.value()).sum();
        if sum > 1e-9 * cap {
            prop_assert!((total - cap).abs() < 1e-9 * cap);
        }
    }

    #[test]
    fn ue_bids_respect_clamp_and_order(
        u in utility(),
        p1 in 1e-3f64..3.0,
        p2 in 1e-3f64..3.0,
        prev in (0.0f64..5.0, 0.0f64..5.0),
        h3 in 0.01f64..5.0,
        n in 1u64..100,
    ) {
        let limits = SolverLimits { rate_cap: 200.0, tol: DEFAULT_TOL };
        let decay = DecayPolicy::Rational { h3 };
        let mut ue = UserAgentState::new(UeId(1), u, &[CarrierId(1), CarrierId(2)], decay, 1.0, limits);
        ue.prev_bids.insert(CarrierId(1), prev.0);
        ue.prev_bids.insert(CarrierId(2), prev.1);
        let quotes = [
            PriceQuote { carrier: CarrierId(1), price: p1, iteration: n, stop: false },
            PriceQuote { carrier: CarrierId(2), price: p2, iteration: n, stop: false },
        ];
        let bids = ue.update(&quotes, n).unwrap();
        prop_assert_eq!(bids.len(), 2);
        let limit = decay.limit(n);
        for (b, before) in bids.iter().zip([prev.0, prev.1]) {
            prop_assert!(b.amount >= 0.0);
            prop_assert!((b.amount - before).abs() <= limit * (1.0 + 1e-12) + 4.0 * f64::EPSILON * before.max(1.0));
            prop_assert_eq!(b.iteration, n + 1);
        }

        let mut free = UserAgentState::new(UeId(1), u, &[CarrierId(1), CarrierId(2)], DecayPolicy::Off, 1.0, limits);
        let bids = free.update(&quotes, n).unwrap();
        let (cheap, dear) = if p1 <= p2 { (0, 1) } else { (1, 0) };
        prop_assert_eq!(bids[dear].amount, 0.0);
        let p = quotes[cheap].price;
        let demand = u.inverse_log_slope(p, 200.0, DEFAULT_TOL).unwrap().value();
        prop_assert!((bids[cheap].amount - p * demand).abs() <= 1e-12 * bids[cheap].amount.max(1.0));
    }

    #[test]
    fn decay_limits_shrink(h1 in 0.1f64..20.0, h2 in 1.0f64..100.0, h3 in 0.1f64..20.0, n in 1u64..10_000) {
        let e = DecayPolicy::Exponential { h1, h2 };
        let r = DecayPolicy::Rational { h3 };
        let (now, next) = (e.limit(n), e.limit(n + 1));
        prop_assert!(next <= now);
        if next.is_normal() {
            prop_assert!(next < now);
        }
        prop_assert!(r.limit(n + 1) < r.limit(n));
        prop_assert_eq!(e.to_string().parse::<DecayPolicy>().unwrap(), e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn converged_runs_spend_the_budget(s in small_scenario()) {
        let t = run(&s).unwrap();
        prop_assert_eq!(run(&s).unwrap(), t.clone());
        if t.converged {
            for c in &s.carriers {
                let price = t.price(c.id).unwrap();
                if price > jca_core::protocol::PRICE_FLOOR {
                    let load = t.allocation.carrier_load(c.id);
                    prop_assert!((load - c.capacity).abs() < 1e-6 * c.capacity, "{} vs {}", load, c.capacity);
                }
            }
        }
        for (_, _, r) in t.allocation.iter() {
            prop_assert!(r.is_finite() && r >= 0.0);
        }
    }

    #[test]
    fn trace_csv_round_trips(s in small_scenario()) {
        let mut s = s;
        s.settings.max_iterations = 40;
        let t = run(&s).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        let rows = trace_rows(&t);
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(fmt_num(a.bid).parse::<f64>().unwrap(), b.bid);
            prop_assert_eq!(fmt_num(a.price).parse::<f64>().unwrap(), b.price);
            prop_assert_eq!(fmt_num(a.rate).parse::<f64>().unwrap(), b.rate);
        }
    }

    #[test]
    fn all_log_scenarios_are_abundant(k in prop::collection::vec(0.1f64..20.0, 1..6), cap in 1.0f64..100.0) {
        let s = Scenario {
            carriers: vec![Carrier { id: CarrierId(1), capacity: cap }],
            users: k
                .iter()
                .enumerate()
                .map(|(i, &k)| User {
                    id: UeId(i as u32 + 1),
                    utility: UtilityFunction::Logarithmic { k, r_max: 100.0 },
                    coverage: vec![CarrierId(1)],
                })
                .collect(),
            settings: Settings::default(),
        };
        prop_assert_eq!(classify_regime(&s).unwrap().regime, Regime::Abundant);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    /// The oracle beats every random grid-feasible allocation.
    #[test]
    fn oracle_dominates_feasible_points(
        caps in (4.0f64..12.0, 4.0f64..12.0),
        utils in prop::collection::vec(utility(), 3),
        shares in prop::collection::vec(0.05f64..1.0, 6),
    ) {
        let s = Scenario {
            carriers: vec![
                Carrier { id: CarrierId(1), capacity: caps.0 },
                Carrier { id: CarrierId(2), capacity: caps.1 },
            ],
            users: utils
                .iter()
                .enumerate()
                .map(|(i, &utility)| User {
                    id: UeId(i as u32 + 1),
                    utility,
                    coverage: match i {
                        0 => vec![CarrierId(1)],
                        1 => vec![CarrierId(1), CarrierId(2)],
                        _ => vec![CarrierId(2)],
                    },
                })
                .collect(),
            settings: Settings::default(),
        };
        let best = primal_objective(&s, &grid_solve(&s, 0.25).unwrap()).unwrap();

        // split each carrier among its users by normalized random shares
        let mut alloc = AllocationMatrix::new();
        let c1 = shares[0] + shares[1];
        alloc.set(UeId(1), CarrierId(1), caps.0 * shares[0] / c1);
        alloc.set(UeId(2), CarrierId(1), caps.0 * shares[1] / c1);
        let c2 = shares[2] + shares[3];
        alloc.set(UeId(2), CarrierId(2), caps.1 * shares[2] / c2);
        alloc.set(UeId(3), CarrierId(2), caps.1 * shares[3] / c2);
        let mut grid = AllocationMatrix::new();
        for (ue, c, r) in alloc.iter() {
            grid.set(ue, c, (r / 0.25).floor() * 0.25);
        }
        if s.users.iter().all(|u| grid.total(u.id) > 0.0) {
            prop_assert!(primal_objective(&s, &grid).unwrap() <= best + 1e-12);
        }
    }
}
