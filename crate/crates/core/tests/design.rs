//! End-to-end design runs on the benchmark specifications.

mod common;

use common::{grid_ok_direct, McmOracle};
use iirforge::bounds::b_bounds;
use iirforge::filterspec::{benchmark_by_id, discretize, FrequencyGrid, FrequencySpec};
use iirforge::response::{verify_spec, Verification};
use iirforge::search::{
    design_with_verification, enumerate_feasible, solve, tighten_bounds, wordlength_sweep, DesignProblem, Status,
    DEFAULT_VERIFY_STEP,
};

fn problem(id: &str, w: u32, points: usize) -> DesignProblem {
    let spec = benchmark_by_id(id).unwrap();
    let grid = discretize(&spec, points).unwrap();
    DesignProblem::new(spec, grid, w).unwrap()
}

#[test]
fn lp1_0_at_w4() {
    let r = solve(&problem("lp1_0", 4, 300)).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert_eq!((r.a_total, r.a_m, r.a_s), (5, 1, 4));
    let q = r.filter.unwrap();
    assert_eq!(r.a_m, r.graph_a.adder_count() + r.graph_b.adder_count());
    assert_eq!(McmOracle::new().cost(&q.a_int()) + McmOracle::new().cost(&q.b_int()), r.a_m);
    let d = design_with_verification(&problem("lp1_0", 4, 300), DEFAULT_VERIFY_STEP).unwrap();
    assert!(d.verified);
    assert_eq!(d.iterations, 1);
}

#[test]
fn lp1_4_at_w4_is_infeasible() {
    let p = problem("lp1_4", 4, 300);
    let r = solve(&p).unwrap();
    assert_eq!(r.status, Status::Infeasible);
    assert!(r.filter.is_none());
    let d = design_with_verification(&p, DEFAULT_VERIFY_STEP).unwrap();
    assert_eq!(d.result.status, Status::Infeasible);
    assert_eq!(tighten_bounds(&p).unwrap(), None);
}

#[test]
fn hp0_at_w6_is_sparse() {
    let r = solve(&problem("hp0", 6, 300)).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert_eq!((r.a_total, r.a_s), (3, 2));
    assert!(r.zeros.iter().filter(|z| **z).count() >= 2);
}

#[test]
fn lp1_4_sweep() {
    let rs = wordlength_sweep(&problem("lp1_4", 4, 300), 4, 7).unwrap();
    let got: Vec<Option<u32>> = rs.iter().map(|r| (r.status == Status::Optimal).then_some(r.a_total)).collect();
    assert_eq!(got, vec![None, Some(8), Some(8), Some(7)]);
}

#[test]
fn lp1_3_sweep_is_monotone() {
    let rs = wordlength_sweep(&problem("lp1_3", 4, 300), 4, 7).unwrap();
    let got: Vec<u32> = rs.iter().map(|r| r.a_total).collect();
    assert!(rs.iter().all(|r| r.status == Status::Optimal));
    assert_eq!(got[0], 7);
    assert!(got.windows(2).all(|w| w[1] <= w[0]), "{got:?}");
}

fn three_point_grid(spec: &FrequencySpec, omegas: [f64; 3]) -> FrequencyGrid {
    omegas.iter().fold(FrequencyGrid::default(), |g, &w| g.append_frequency(w, spec).unwrap())
}

#[test]
fn coarse_grid_design_is_caught_and_refined() {
    let spec = benchmark_by_id("lp1_0").unwrap();
    let grid = three_point_grid(&spec, [0.0, 0.3, 1.0]);
    let mut p = DesignProblem::new(spec.clone(), grid, 5).unwrap();
    p.g_b_range = (-4, 1);
    let coarse = solve(&p).unwrap();
    assert_eq!(coarse.status, Status::Optimal);
    let q = coarse.filter.unwrap();
    assert!(matches!(verify_spec(&q, &spec, DEFAULT_VERIFY_STEP).unwrap(), Verification::Counterexample(_)));
    let d = design_with_verification(&p, DEFAULT_VERIFY_STEP).unwrap();
    assert!(d.verified);
    assert!(d.iterations >= 2);
    assert_eq!(d.added_frequencies.len(), d.iterations - 1);
    let fine = solve(&problem("lp1_0", 5, 300)).unwrap();
    assert!(d.result.a_total >= coarse.a_total);
    assert!(d.result.a_total <= fine.a_total);
}

#[test]
fn b_box_contains_every_feasible_lattice_point() {
    for id in ["lp1_0", "lp3_1", "hp0"] {
        let mut p = problem(id, 5, 60);
        p.options.use_sbc = false;
        let bx = b_bounds(&p.grid).unwrap();
        let mut n = 0;
        enumerate_feasible(&p, |f| {
            let (_, b) = f.filter.to_f64();
            assert!(grid_ok_direct(&f.filter, &p.grid).unwrap_or(true));
            for k in 0..3 {
                assert!(b[k].abs() <= bx.bound[k], "{id}: {b:?} outside {:?}", bx.bound);
            }
            n += 1;
        })
        .unwrap();
        assert!(n > 0, "{id}");
    }
}

#[test]
fn tightened_boxes_hold_the_optimum() {
    let p = problem("lp1_2", 4, 300);
    let r = solve(&p).unwrap();
    let q = r.filter.unwrap();
    let boxes = tighten_bounds(&p).unwrap().unwrap();
    let (_, bx) = boxes.iter().find(|(g, _)| *g == q.fmt_b.g).unwrap();
    for (k, v) in q.b_int().iter().enumerate() {
        assert!((bx[k].0..=bx[k].1).contains(v));
    }
}

#[test]
fn sparse_objective_selects_the_same_optima() {
    // With nnz(b) ≥ 1, A_S = 4 - Σζ, so A_M + A_S and A_M - Σζ differ by a constant.
    let mut oracle = McmOracle::new();
    for id in ["lp1_0", "lp4", "lp3_1"] {
        let p = problem(id, 4, 60);
        let mut best_total = u32::MAX;
        let mut best_sparse = i64::MAX;
        let mut argmin_total = Vec::new();
        let mut argmin_sparse = Vec::new();
        enumerate_feasible(&p, |f| {
            let q = f.filter;
            let a_m = oracle.cost(&q.a_int()) + oracle.cost(&q.b_int());
            let (na, nb) = q.nonzeros();
            let zeros = (5 - na - nb) as i64;
            let total = a_m + (nb.saturating_sub(1) + na) as u32;
            let sparse = a_m as i64 - zeros;
            if total < best_total {
                best_total = total;
                argmin_total.clear();
            }
            if total == best_total {
                argmin_total.push(q);
            }
            if sparse < best_sparse {
                best_sparse = sparse;
                argmin_sparse.clear();
            }
            if sparse == best_sparse {
                argmin_sparse.push(q);
            }
        })
        .unwrap();
        assert_eq!(argmin_total, argmin_sparse, "{id}");
        assert_eq!(best_total, solve(&p).unwrap().a_total);
    }
}
