//! The exact engine against a naive enumeration with no pruning, no symmetry
//! breaking and an independent multiplier-block oracle.

mod common;

use std::collections::BTreeSet;

use common::{grid_ok_direct, structural, McmOracle};
use iirforge::filterspec::{benchmark_by_id, discretize};
use iirforge::fixedpoint::{CoefficientFormat, QuantizedFilter};
use iirforge::response::satisfies_grid;
use iirforge::search::{enumerate_feasible, sbc_region, solve, symmetric_orbit, DesignProblem, Status};

fn problem(id: &str, w: u32, points: usize, sbc: bool) -> DesignProblem {
    let spec = benchmark_by_id(id).unwrap();
    let grid = discretize(&spec, points).unwrap();
    let mut p = DesignProblem::new(spec, grid, w).unwrap();
    p.options.use_sbc = sbc;
    p.options.time_limit = None;
    p
}

fn stable(q: &QuantizedFilter) -> bool {
    let (a, _) = q.to_f64();
    a[2].abs() < 1.0 && a[1].abs() < 1.0 + a[2]
}

/// Minimal total adder count over every filter in the problem's format ranges.
fn naive_optimum(p: &DesignProblem) -> Option<u32> {
    let half = 1i64 << (p.w - 1);
    let mut oracle = McmOracle::new();
    let mut best: Option<u32> = None;
    for g_a in p.options.g_a_range.0..=p.options.g_a_range.1 {
        let fa = CoefficientFormat::new(p.w, g_a).unwrap();
        for a1 in -half..half {
            for a2 in -half..half {
                for g_b in p.g_b_range.0..=p.g_b_range.1 {
                    let fb = CoefficientFormat::new(p.w, g_b).unwrap();
                    let probe = QuantizedFilter::new([a1, a2], [0, 0, 0], fa, fb).unwrap();
                    if !stable(&probe) {
                        break;
                    }
                    let a_cost = oracle.cost(&[a1, a2]);
                    for b0 in -half..half {
                        for b1 in -half..half {
                            for b2 in -half..half {
                                if b0 == 0 && b1 == 0 && b2 == 0 {
                                    continue;
                                }
                                let q = QuantizedFilter::new([a1, a2], [b0, b1, b2], fa, fb).unwrap();
                                let s = structural(&q);
                                if best.is_some_and(|b| a_cost + s >= b) {
                                    continue;
                                }
                                let ok = match grid_ok_direct(&q, &p.grid) {
                                    Some(ok) => ok,
                                    None => satisfies_grid(&q, &p.grid).unwrap().is_ok(),
                                };
                                if ok {
                                    let c = a_cost + oracle.cost(&[b0, b1, b2]) + s;
                                    best = Some(best.map_or(c, |b| b.min(c)));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn naive_enumeration_agrees_on_lp1_0_and_lp4() {
    for id in ["lp1_0", "lp4"] {
        for w in 2..=4 {
            let p = problem(id, w, 40, false);
            let want = naive_optimum(&p);
            let r = solve(&p).unwrap();
            let got = (r.status == Status::Optimal).then_some(r.a_total);
            assert_eq!(got, want, "{id} w={w}");
            if r.status == Status::Infeasible {
                assert!(want.is_none());
            }
            let with_sbc = solve(&problem(id, w, 40, true)).unwrap();
            assert_eq!(with_sbc.status, r.status, "{id} w={w}");
            assert_eq!(with_sbc.a_total, r.a_total, "{id} w={w}");
        }
    }
}

type Key = (i64, i64, i32, [i64; 3], i32);

fn key(q: &QuantizedFilter) -> Key {
    (q.a1, q.a2, q.fmt_a.g, q.b_int(), q.fmt_b.g)
}

#[test]
fn sbc_orbits_reproduce_the_full_feasible_set() {
    let mut full: BTreeSet<Key> = BTreeSet::new();
    enumerate_feasible(&problem("lp1_0", 4, 300, false), |f| {
        full.insert(key(&f.filter));
    })
    .unwrap();
    let mut expanded: BTreeSet<Key> = BTreeSet::new();
    let mut reps = 0;
    enumerate_feasible(&problem("lp1_0", 4, 300, true), |f| {
        let q = f.filter;
        let representable = |b: &[i64; 3]| b.iter().all(|v| (-8..8).contains(v));
        let orbit: Vec<[i64; 3]> =
            symmetric_orbit(q.b0, q.b1, q.b2).into_iter().filter(representable).collect();
        let in_sigma1 = |b: &[i64; 3]| sbc_region(b[0], b[1], b[2]);
        // The representative lies in Σ₁ unless no representable member does.
        assert!(in_sigma1(&q.b_int()) || !orbit.iter().any(in_sigma1), "{q:?}");
        reps += 1;
        for b in orbit {
            expanded.insert((q.a1, q.a2, q.fmt_a.g, b, q.fmt_b.g));
        }
    })
    .unwrap();
    assert!(reps > 0);
    assert_eq!(expanded, full);
    let with = solve(&problem("lp1_0", 4, 300, true)).unwrap();
    let without = solve(&problem("lp1_0", 4, 300, false)).unwrap();
    assert_eq!(with.status, Status::Optimal);
    assert_eq!(with.a_total, without.a_total);
    assert_eq!(with.a_total, 5);
}

#[test]
fn orbit_members_share_cost() {
    let mut oracle = McmOracle::new();
    let f = CoefficientFormat::new(6, 0).unwrap();
    for b in [[3, 5, 3], [1, 2, 3], [7, -4, 0], [12, 0, -5]] {
        let costs: BTreeSet<u32> = symmetric_orbit(b[0], b[1], b[2])
            .into_iter()
            .map(|t| {
                let q = QuantizedFilter::new([-20, 9], t, f, f).unwrap();
                oracle.cost(&t) + structural(&q)
            })
            .collect();
        assert_eq!(costs.len(), 1, "{b:?}");
    }
}
