//! Exact joint design, quantization and adder-cost minimization.

mod engine;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bounds::b_bounds;
use crate::error::{Error, Result};
use crate::filterspec::{FrequencyGrid, FrequencySpec};
use crate::fixedpoint::QuantizedFilter;
use crate::mcm::{self, AdderGraph};
use crate::response::{verify_spec, Verification};

pub use engine::{enumerate_feasible, FeasibleFilter};

/// Default per-problem time limit.
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);

/// Default spacing of the dense verification scan.
pub const DEFAULT_VERIFY_STEP: f64 = 1e-3;

/// Default range of denominator MSB positions.
pub const DEFAULT_G_A_RANGE: (i32, i32) = (-1, 1);

/// Refinement rounds before the verification loop gives up.
pub const MAX_REFINEMENTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub use_sbc: bool,
    pub mcm_cap: u32,
    pub max_bits_slack: u32,
    pub time_limit: Option<Duration>,
    pub g_a_range: (i32, i32),
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            use_sbc: true,
            mcm_cap: mcm::DEFAULT_CAP,
            max_bits_slack: mcm::DEFAULT_MAX_BITS_SLACK,
            time_limit: Some(DEFAULT_TIME_LIMIT),
            g_a_range: DEFAULT_G_A_RANGE,
            threads: None,
        }
    }
}

/// One instance of the optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub spec: FrequencySpec,
    pub grid: FrequencyGrid,
    pub w: u32,
    pub g_b_range: (i32, i32),
    pub options: SearchOptions,
    /// A known grid-feasible filter at this word length, used as first incumbent.
    pub seed: Option<QuantizedFilter>,
}

impl DesignProblem {
    /// Problem with default options and the default `g_b` range.
    pub fn new(spec: FrequencySpec, grid: FrequencyGrid, w: u32) -> Result<Self> {
        if w < 2 {
            return Err(Error::InvalidFormat(format!("word length {w} must be at least 2")));
        }
        if grid.is_empty() {
            return Err(Error::InvalidSpec("empty frequency grid".into()));
        }
        let g_b_range = default_g_b_range(&grid, w)?;
        Ok(DesignProblem { spec, grid, w, g_b_range, options: SearchOptions::default(), seed: None })
    }
}

/// `[g_upper - w - 2, g_upper]`, where `g_upper` covers the pairwise `b` box.
pub fn default_g_b_range(grid: &FrequencyGrid, w: u32) -> Result<(i32, i32)> {
    let upper = b_bounds(grid)?.g_b;
    Ok((upper - w as i32 - 2, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    TimedOut,
}

/// Enumeration counters reported with each result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub a_pairs: u64,
    pub a_pairs_visited: u64,
    pub b_windows: u64,
    pub candidates_checked: u64,
    pub grid_feasible: u64,
    pub pruned_by_cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub status: Status,
    pub filter: Option<QuantizedFilter>,
    pub graph_a: AdderGraph,
    pub graph_b: AdderGraph,
    pub a_m: u32,
    pub a_s: u32,
    pub a_total: u32,
    /// Zero flags for `[a1, a2, b0, b1, b2]`.
    pub zeros: [bool; 5],
    pub stats: SearchStats,
    pub elapsed_s: f64,
    pub grid_points: usize,
}

impl DesignResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// `max(nnz(b) - 1, 0) + nnz(a)`.
pub fn structural_adders(q: &QuantizedFilter) -> u32 {
    let (na, nb) = q.nonzeros();
    (nb.saturating_sub(1) + na) as u32
}

/// Symmetry-breaking region `b0 >= |b2|`.
pub fn sbc_region(b0: i64, _b1: i64, b2: i64) -> bool {
    b0 >= b2.abs()
}

/// The triple, its negation, its reversal and the negated reversal.
pub fn symmetric_orbit(b0: i64, b1: i64, b2: i64) -> Vec<[i64; 3]> {
    let mut out: Vec<[i64; 3]> = Vec::with_capacity(4);
    for t in [[b0, b1, b2], [-b0, -b1, -b2], [b2, b1, b0], [-b2, -b1, -b0]] {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Exact optimum over every filter at word length `p.w` with MSBs in range.
pub fn solve(p: &DesignProblem) -> Result<DesignResult> {
    engine::solve(p)
}

/// Per-`g_b` integer box of every grid-feasible `b'`, or `None` when infeasible.
pub fn tighten_bounds(p: &DesignProblem) -> Result<Option<Vec<(i32, [(i64, i64); 3])>>> {
    let mut boxes: Vec<(i32, [(i64, i64); 3])> = Vec::new();
    enumerate_feasible(p, |f| {
        let b = f.filter.b_int();
        let g = f.filter.fmt_b.g;
        match boxes.iter_mut().find(|(gb, _)| *gb == g) {
            Some((_, bx)) => {
                for k in 0..3 {
                    bx[k].0 = bx[k].0.min(b[k]);
                    bx[k].1 = bx[k].1.max(b[k]);
                }
            }
            None => boxes.push((g, b.map(|v| (v, v)))),
        }
    })?;
    boxes.sort_by_key(|(g, _)| *g);
    Ok((!boxes.is_empty()).then_some(boxes))
}

/// Result of the design-and-verify loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedDesign {
    pub result: DesignResult,
    pub verified: bool,
    pub iterations: usize,
    pub added_frequencies: Vec<f64>,
}

/// Solves, verifies on the continuum and re-solves with each counterexample
/// frequency added to the grid until the optimum verifies.
pub fn design_with_verification(p: &DesignProblem, step: f64) -> Result<VerifiedDesign> {
    let mut problem = p.clone();
    let mut added = Vec::new();
    for iteration in 1..=MAX_REFINEMENTS {
        let result = solve(&problem)?;
        let Some(filter) = result.filter.filter(|_| result.status == Status::Optimal) else {
            return Ok(VerifiedDesign { result, verified: false, iterations: iteration, added_frequencies: added });
        };
        let omega = match verify_spec(&filter, &problem.spec, step)? {
            Verification::Verified => {
                return Ok(VerifiedDesign { result, verified: true, iterations: iteration, added_frequencies: added });
            }
            Verification::Counterexample(w) | Verification::Inconclusive(w) => w,
        };
        let grid = problem.grid.append_frequency(omega, &problem.spec)?;
        let still_ok = crate::response::satisfies_grid(&filter, &grid)?.is_ok();
        if still_ok {
            return Err(Error::Verification(format!(
                "the optimum touches the specification at omega = {omega} without violating it"
            )));
        }
        problem.grid = grid;
        problem.seed = None;
        added.push(omega);
    }
    Err(Error::Verification(format!("no verified optimum after {MAX_REFINEMENTS} refinements")))
}

/// Solves every word length in `[w_lo, w_hi]`, seeding each with the previous optimum.
pub fn wordlength_sweep(p: &DesignProblem, w_lo: u32, w_hi: u32) -> Result<Vec<DesignResult>> {
    if w_lo > w_hi {
        return Err(Error::InvalidFormat(format!("empty word-length range [{w_lo}, {w_hi}]")));
    }
    let mut out: Vec<DesignResult> = Vec::new();
    let mut seed: Option<QuantizedFilter> = None;
    for w in w_lo..=w_hi {
        let mut problem = p.clone();
        problem.w = w;
        problem.g_b_range = if p.g_b_range == default_g_b_range(&p.grid, p.w)? {
            default_g_b_range(&p.grid, w)?
        } else {
            p.g_b_range
        };
        problem.seed = seed.and_then(|q| widen(&q, w));
        let r = solve(&problem)?;
        if r.status == Status::Optimal {
            seed = r.filter;
        }
        out.push(r);
    }
    Ok(out)
}

/// The same real filter at word length `w` (codes scaled, MSBs kept).
pub fn widen(q: &QuantizedFilter, w: u32) -> Option<QuantizedFilter> {
    if w < q.w() {
        return None;
    }
    let k = w - q.w();
    let fa = crate::fixedpoint::CoefficientFormat::new(w, q.fmt_a.g).ok()?;
    let fb = crate::fixedpoint::CoefficientFormat::new(w, q.fmt_b.g).ok()?;
    QuantizedFilter::new(q.a_int().map(|v| v << k), q.b_int().map(|v| v << k), fa, fb).ok()
}
