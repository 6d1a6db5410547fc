//! Coefficient boxes and MSB positions derived before the exact search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterspec::{cos_pi, FrequencyGrid, GridPoint};
use crate::fixedpoint::{integer_range, msb_for_bound, CoefficientFormat};

/// Open stability box for the denominator and the MSB it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ABox {
    pub a1: (f64, f64),
    pub a2: (f64, f64),
    pub g_a: i32,
}

/// `a1 ∈ (-2, 2)`, `a2 ∈ (-1, 1)`, hence `g_a = 1`.
pub fn a_bounds() -> ABox {
    ABox { a1: (-2.0, 2.0), a2: (-1.0, 1.0), g_a: 1 }
}

/// Closed integer ranges of `(a1', a2')` compatible with strict stability.
pub fn a_code_ranges(fmt: CoefficientFormat) -> ((i64, i64), (i64, i64)) {
    let (lo, hi) = integer_range(fmt);
    let e = -fmt.lsb();
    if !(0..=60).contains(&e) {
        return ((lo, hi), (lo, hi));
    }
    let u = 1i64 << e;
    let r1 = (lo.max(-(2 * u - 1)), hi.min(2 * u - 1));
    let r2 = (lo.max(-(u - 1)), hi.min(u - 1));
    (r1, r2)
}

/// `Q_kl = cos((k - l)πω)`.
pub fn q_matrix(omega: f64) -> [[f64; 3]; 3] {
    let c1 = cos_pi(omega.abs() % 2.0);
    let c2 = cos_pi((2.0 * omega).abs() % 2.0);
    [[1.0, c1, c2], [c1, 1.0, c1], [c2, c1, 1.0]]
}

/// Symmetric box `|b_k| <= bound[k]` and the MSB covering it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub bound: [f64; 3],
    pub g_b: i32,
}

/// Points used by the pairwise bound.
pub const BOUND_SUBSAMPLE: usize = 32;

const PD_TOL: f64 = 1e-9;

fn add(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][j] + b[i][j];
        }
    }
    m
}

/// Diagonal of the inverse of a positive-definite 3×3 matrix, or `None`.
fn inverse_diagonal(m: &[[f64; 3]; 3]) -> Option<[f64; 3]> {
    let d1 = m[0][0];
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c22 = d2;
    let det = m[0][0] * c00 - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if d1 <= PD_TOL || d2 <= PD_TOL || det <= PD_TOL {
        return None;
    }
    Some([c00 / det, c11 / det, c22 / det])
}

fn subsample(points: &[GridPoint], n: usize) -> Vec<GridPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.beta_hi_sq.total_cmp(&b.beta_hi_sq)));
    pts.dedup_by(|a, b| a.omega == b.omega);
    if pts.len() <= n {
        return pts;
    }
    (0..n).map(|k| pts[k * (pts.len() - 1) / (n - 1)]).collect()
}

/// Outer box on `b` implied by `|B|² <= 16 β̄²` at pairs of grid frequencies.
///
/// For any pair `(i, j)` with `Q_i + Q_j` positive definite, every feasible `b`
/// satisfies `bᵀ(Q_i + Q_j)b <= 16(β̄_i² + β̄_j²)`, whose coordinate extrema are
/// `sqrt(16(β̄_i² + β̄_j²) · ((Q_i + Q_j)⁻¹)_kk)`.
pub fn b_bounds(grid: &FrequencyGrid) -> Result<BBox> {
    let pts = subsample(&grid.points, BOUND_SUBSAMPLE);
    let mut bound = [f64::INFINITY; 3];
    let qs: Vec<_> = pts.iter().map(|p| q_matrix(p.omega)).collect();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let Some(inv) = inverse_diagonal(&add(&qs[i], &qs[j])) else { continue };
            let rhs = 16.0 * (pts[i].beta_hi_sq + pts[j].beta_hi_sq);
            for k in 0..3 {
                let v = (rhs * inv[k]).sqrt() * (1.0 + 1e-9);
                bound[k] = bound[k].min(v);
            }
        }
    }
    if bound.iter().any(|b| !b.is_finite()) {
        return Err(Error::Degenerate("no positive-definite frequency pair on the grid".into()));
    }
    // The form is persymmetric, so b0 and b2 share one bound.
    let outer = bound[0].max(bound[2]);
    bound[0] = outer;
    bound[2] = outer;
    let max = bound.iter().copied().fold(0.0, f64::max);
    let g_b = if max > 0.0 { msb_for_bound(max)? } else { 0 };
    Ok(BBox { bound, g_b })
}

/// Integer code box implied by `bbox` at format `fmt`.
pub fn b_code_box(bbox: &BBox, fmt: CoefficientFormat) -> [(i64, i64); 3] {
    let (lo, hi) = integer_range(fmt);
    let scale = 2f64.powi(-fmt.lsb());
    bbox.bound.map(|b| {
        let m = (b * scale).floor();
        let m = if m >= -(lo as f64) { -lo } else { m as i64 };
        (lo.max(-m), hi.min(m))
    })
}
