//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod bfs;
pub mod lp;

use std::collections::HashMap;

use iirforge::filterspec::FrequencyGrid;
use iirforge::fixedpoint::QuantizedFilter;

/// `|H|²` bounds check by direct complex evaluation. `None` when a point is
/// within rounding distance of its bound.
pub fn grid_ok_direct(q: &QuantizedFilter, grid: &FrequencyGrid) -> Option<bool> {
    let (a, b) = q.to_f64();
    let mut tie = false;
    for pt in &grid.points {
        let w = std::f64::consts::PI * pt.omega;
        let re = |c: &[f64; 3]| c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
        let im = |c: &[f64; 3]| c[1] * w.sin() + c[2] * (2.0 * w).sin();
        let nb = re(&b).powi(2) + im(&b).powi(2);
        let na = re(&a).powi(2) + im(&a).powi(2);
        let scale = nb.abs() + pt.beta_hi_sq * na.abs() + 1e-300;
        for (beta_sq, upper) in [(pt.beta_hi_sq, true), (pt.beta_lo_sq, false)] {
            let d = nb - beta_sq * na;
            if d.abs() <= 1e-9 * scale {
                tie = true;
            } else if (upper && d > 0.0) || (!upper && d < 0.0) {
                return Some(false);
            }
        }
    }
    (!tie).then_some(true)
}

fn odd(x: u64) -> u64 {
    x >> x.trailing_zeros()
}

fn covers(set: &[u64], targets: &[u64], limit: u64, budget: u32) -> bool {
    if targets.iter().all(|t| set.contains(t)) {
        return true;
    }
    if budget == 0 {
        return false;
    }
    let bits = 64 - limit.leading_zeros();
    for i in 0..set.len() {
        for j in 0..set.len() {
            for s in 0..=bits {
                let xs = set[i] << s;
                for v in [xs + set[j], xs.abs_diff(set[j])] {
                    if v == 0 {
                        continue;
                    }
                    let v = odd(v);
                    if v >= limit || set.contains(&v) {
                        continue;
                    }
                    let mut next = set.to_vec();
                    next.push(v);
                    if covers(&next, targets, limit, budget - 1) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Minimal adder count of a constant set by iterative deepening.
pub struct McmOracle {
    memo: HashMap<Vec<u64>, u32>,
}

impl McmOracle {
    pub fn new() -> Self {
        McmOracle { memo: HashMap::new() }
    }

    pub fn cost(&mut self, constants: &[i64]) -> u32 {
        let mut t: Vec<u64> = constants.iter().filter(|&&c| c != 0).map(|&c| odd(c.unsigned_abs())).filter(|&o| o > 1).collect();
        t.sort_unstable();
        t.dedup();
        if let Some(&c) = self.memo.get(&t) {
            return c;
        }
        let bits = t.iter().map(|&v| 64 - v.leading_zeros()).max().unwrap_or(1);
        let limit = 1u64 << (bits + 1);
        let c = (0..).find(|&d| covers(&[1], &t, limit, d)).unwrap();
        self.memo.insert(t, c);
        c
    }
}

/// `max(nnz(b) - 1, 0) + nnz(a)`.
pub fn structural(q: &QuantizedFilter) -> u32 {
    let (na, nb) = q.nonzeros();
    (nb.saturating_sub(1) + na) as u32
}
