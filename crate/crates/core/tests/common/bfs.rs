//! Breadth-first enumeration of fundamental sets as an oracle for `solve_mcm`.

use std::collections::HashSet;

use iirforge::mcm::{solve_mcm, DEFAULT_CAP};

pub fn odd(x: u64) -> u64 {
    x >> x.trailing_zeros()
}

pub fn successors(set: &[u64], limit: u64) -> Vec<u64> {
    let bits = 64 - limit.leading_zeros();
    let mut out = Vec::new();
    for &x in set {
        for &y in set {
            for s in 0..=bits {
                let xs = x << s;
                for v in [xs + y, xs.abs_diff(y)] {
                    if v == 0 {
                        continue;
                    }
                    let v = odd(v);
                    if v < limit && !set.contains(&v) && !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

/// Fundamental sets reachable with exactly `d` adders, for `d = 0..=depth`.
pub fn levels(limit: u64, depth: usize) -> Vec<Vec<Vec<u64>>> {
    let mut levels = vec![vec![vec![1u64]]];
    for _ in 0..depth {
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        for set in levels.last().unwrap() {
            for v in successors(set, limit) {
                let mut next = set.clone();
                next.push(v);
                next.sort_unstable();
                seen.insert(next);
            }
        }
        let mut next: Vec<Vec<u64>> = seen.into_iter().collect();
        next.sort();
        levels.push(next);
    }
    levels
}

/// Optimal adder counts of the odd constants below 4096.
pub fn single_costs() -> Vec<u32> {
    let limit = 1 << 13;
    let lv = levels(limit, 3);
    let mut cost = vec![u32::MAX; 4096];
    for (d, sets) in lv.iter().enumerate() {
        for set in sets {
            for &m in set {
                if m < 4096 {
                    cost[m as usize] = cost[m as usize].min(d as u32);
                }
            }
        }
    }
    for set in &lv[3] {
        for v in successors(set, limit) {
            if v < 4096 && cost[v as usize] == u32::MAX {
                cost[v as usize] = 4;
            }
        }
    }
    cost
}

fn pair_idx(a: u64, b: u64) -> usize {
    (a.min(b) as usize) * 256 + a.max(b) as usize
}

/// Optimal adder counts of odd pairs below 256, indexed by `pair_idx`.
pub fn pair_costs() -> Vec<u32> {
    let limit = 1 << 9;
    let lv = levels(limit, 3);
    let mut cost = vec![u32::MAX; 256 * 256];
    for (d, sets) in lv.iter().enumerate() {
        for set in sets {
            for &a in set.iter().filter(|&&a| a < 256) {
                for &b in set.iter().filter(|&&b| b < 256) {
                    let c = &mut cost[pair_idx(a, b)];
                    *c = (*c).min(d as u32);
                }
            }
        }
    }
    for set in &lv[3] {
        for v in successors(set, limit).into_iter().filter(|&v| v < 256) {
            for &m in set.iter().chain(std::iter::once(&v)).filter(|&&m| m < 256) {
                let c = &mut cost[pair_idx(m, v)];
                *c = (*c).min(4);
            }
        }
    }
    // A five-adder set can be ordered so that its last adder is one of the
    // targets and the other target is among the first four.
    let left: Vec<(u64, u64)> = (1..256u64)
        .step_by(2)
        .flat_map(|a| (a..256u64).step_by(2).map(move |b| (a, b)))
        .filter(|&(a, b)| cost[pair_idx(a, b)] == u32::MAX)
        .collect();
    for &(a, b) in &left {
        let closes = |t: &[u64]| {
            (t.contains(&a) && successors(t, limit).contains(&b)) || (t.contains(&b) && successors(t, limit).contains(&a))
        };
        let found = lv[3].iter().any(|set| {
            let succ = successors(set, limit);
            let holds = set.contains(&a) || set.contains(&b);
            succ.iter().filter(|&&v| holds || v == a || v == b).any(|&v| {
                let mut t = set.clone();
                t.push(v);
                closes(&t)
            })
        });
        if found {
            cost[pair_idx(a, b)] = 5;
        }
    }
    cost
}

/// Outcome of comparing `solve_mcm` with the oracle tables.
pub struct McmComparison {
    pub cases: usize,
    pub unresolved: usize,
    /// `(targets, solver, oracle)`.
    pub mismatches: Vec<(Vec<u64>, u32, u32)>,
}

/// Every single target in `1..=4096` and every pair `a < b <= 255`.
pub fn compare_with_solver() -> McmComparison {
    let singles = single_costs();
    let pairs = pair_costs();
    let mut out = McmComparison { cases: 0, unresolved: 0, mismatches: Vec::new() };
    let mut check = |targets: Vec<u64>, want: u32| {
        out.cases += 1;
        if want == u32::MAX {
            out.unresolved += 1;
            return;
        }
        let ts: Vec<i64> = targets.iter().map(|&t| t as i64).collect();
        let g = solve_mcm(&ts, DEFAULT_CAP).unwrap().unwrap();
        let products_ok = ts.iter().all(|&t| g.multiply(t, -5) == Some(-5 * t as i128));
        if g.adder_count() != want || !products_ok {
            out.mismatches.push((targets, g.adder_count(), want));
        }
    };
    for t in 1..=4096u64 {
        check(vec![t], singles[odd(t) as usize]);
    }
    for a in 1..=255u64 {
        for b in a + 1..=255u64 {
            check(vec![a, b], pairs[pair_idx(odd(a), odd(b))]);
        }
    }
    out
}
