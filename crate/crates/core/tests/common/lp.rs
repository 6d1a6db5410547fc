//! Exhaustive projections of the linear model and of the engine.

use std::collections::BTreeSet;

use num_traits::ToPrimitive;

use iirforge::bounds::a_code_ranges;
use iirforge::fixedpoint::{CoefficientFormat, QuantizedFilter};
use iirforge::milp::{
    assignment_for_filter, build_design_model, check_values, LinearModel, ModelFormats, ModelMode, Relation, VarKind,
};
use iirforge::search::{enumerate_feasible, symmetric_orbit, DesignProblem};

/// Every full assignment of `model` with `fixed` values, by depth-first search
/// over the variable domains; returns the values taken by `watch`.
pub fn feasible_values(model: &LinearModel, fixed: &[(usize, i64)], watch: usize) -> BTreeSet<i64> {
    let n = model.variables.len();
    let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in model.constraints.iter().enumerate() {
        let last = c.terms.iter().map(|(v, _)| *v).max().unwrap();
        by_last[last].push(ci);
    }
    let domain = |v: usize| -> Vec<i64> {
        if let Some(&(_, x)) = fixed.iter().find(|(id, _)| *id == v) {
            return vec![x];
        }
        let var = &model.variables[v];
        match var.kind {
            VarKind::Binary => vec![0, 1],
            _ => (var.lower.unwrap()..=var.upper.unwrap()).collect(),
        }
    };
    let holds = |ci: usize, vals: &[i64]| -> bool {
        let c = &model.constraints[ci];
        let lhs: f64 = c.terms.iter().map(|(v, a)| a.to_f64().unwrap() * vals[*v] as f64).sum();
        let rhs = c.rhs.to_f64().unwrap();
        match c.relation {
            Relation::Le => lhs <= rhs + 1e-9,
            Relation::Ge => lhs >= rhs - 1e-9,
            Relation::Eq => (lhs - rhs).abs() <= 1e-9,
        }
    };
    fn dfs(
        k: usize,
        vals: &mut Vec<i64>,
        domain: &dyn Fn(usize) -> Vec<i64>,
        holds: &dyn Fn(usize, &[i64]) -> bool,
        by_last: &[Vec<usize>],
        watch: usize,
        out: &mut BTreeSet<i64>,
    ) {
        if k == vals.len() {
            out.insert(vals[watch]);
            return;
        }
        for x in domain(k) {
            vals[k] = x;
            if by_last[k].iter().all(|&ci| holds(ci, vals)) {
                dfs(k + 1, vals, domain, holds, by_last, watch, out);
            }
        }
    }
    let mut vals = vec![0i64; n];
    let mut out = BTreeSet::new();
    dfs(0, &mut vals, &domain, &holds, &by_last, watch, &mut out);
    out
}

pub type Real = (i64, i64, i32, [i64; 3], i32);

/// Codes reduced to the highest MSB at which they are representable.
pub fn canonical(q: &QuantizedFilter) -> Real {
    let (mut a, mut ga) = (q.a_int(), q.fmt_a.g);
    let (mut b, mut gb) = (q.b_int(), q.fmt_b.g);
    // a0 = 2^(w-1-g_a) is even for g_a < w - 1.
    while a.iter().all(|v| v % 2 == 0) && ga < q.w() as i32 - 2 {
        a = a.map(|v| v / 2);
        ga += 1;
    }
    while b != [0, 0, 0] && b.iter().all(|v| v % 2 == 0) {
        b = b.map(|v| v / 2);
        gb += 1;
    }
    (a[0], a[1], ga, b, gb)
}

pub fn engine_set(p: &DesignProblem) -> BTreeSet<Real> {
    let mut out = BTreeSet::new();
    enumerate_feasible(p, |f| {
        out.insert(canonical(&f.filter));
    })
    .unwrap();
    out
}

/// Coefficient projection of the exported model over every format pair.
pub fn model_set(p: &DesignProblem) -> BTreeSet<Real> {
    let mut out = BTreeSet::new();
    for g_a in p.options.g_a_range.0..=p.options.g_a_range.1 {
        let fa = CoefficientFormat::new(p.w, g_a).unwrap();
        let ((l1, h1), (l2, h2)) = a_code_ranges(fa);
        for g_b in p.g_b_range.0..=p.g_b_range.1 {
            let fb = CoefficientFormat::new(p.w, g_b).unwrap();
            let m = build_design_model(p, ModelFormats { g_a, g_b }, None, ModelMode::Feasibility).unwrap();
            let bv: Vec<_> = ["b0", "b1", "b2"].iter().map(|n| &m.variables[m.var(n).unwrap()]).collect();
            let range = |k: usize| bv[k].lower.unwrap()..=bv[k].upper.unwrap();
            for a1 in l1..=h1 {
                for a2 in l2..=h2 {
                    // Stability rows involve a only, so one probe decides every b.
                    let probe = QuantizedFilter::new([a1, a2], [0, 0, 0], fa, fb).unwrap();
                    let c = check_values(&m, &assignment_for_filter(&m, &probe).unwrap());
                    if c.violated.is_some_and(|v| v.starts_with("stab")) {
                        continue;
                    }
                    for b0 in range(0) {
                        for b1 in range(1) {
                            for b2 in range(2) {
                                let q = QuantizedFilter::new([a1, a2], [b0, b1, b2], fa, fb).unwrap();
                                let vals = assignment_for_filter(&m, &q).unwrap();
                                if check_values(&m, &vals).feasible && !q.is_zero_b() {
                                    out.insert(canonical(&q));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn representable_orbit(r: &Real, w: u32) -> Vec<Real> {
    let half = 1i64 << (w - 1);
    symmetric_orbit(r.3[0], r.3[1], r.3[2])
        .into_iter()
        .filter(|b| b.iter().all(|v| (-half..half).contains(v)))
        .map(|b| (r.0, r.1, r.2, b, r.4))
        .collect()
}

