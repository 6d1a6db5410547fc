//! Result documents written by the command-line tool.

use serde::{Deserialize, Serialize};

use crate::filterspec::FrequencySpec;
use crate::fixedpoint::{CoefficientFormat, QuantizedFilter};
use crate::mcm::AdderGraph;
use crate::search::{SearchStats, Status, VerifiedDesign};
use crate::{Error, Result};

/// JSON schema of [`DesignReport`].
pub const RESULT_SCHEMA: &str = include_str!("../schema/result.schema.json");

pub const REPORT_FORMAT: &str = "iirforge-result";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub w: u32,
    pub g_a_range: [i32; 2],
    pub g_b_range: [i32; 2],
    pub points_per_band: usize,
    pub use_sbc: bool,
    pub verify_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub w: u32,
    pub g_a: i32,
    pub g_b: i32,
    /// `[a1', a2']`, with `a0' = 2^(w-1-g_a)` implied.
    pub a_int: [i64; 2],
    pub b_int: [i64; 3],
    /// Exact decimal values of `[a0, a1, a2]`.
    pub a: [String; 3],
    pub b: [String; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub a_m: u32,
    pub a_s: u32,
    pub a_total: u32,
    pub zeros: [bool; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub exhaustive: bool,
    pub grid_points: usize,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub format: String,
    pub version: u32,
    pub spec: FrequencySpec,
    pub problem: ProblemSummary,
    pub status: Status,
    pub verified: bool,
    pub iterations: usize,
    pub added_frequencies: Vec<f64>,
    pub filter: Option<FilterReport>,
    pub cost: CostReport,
    pub graph_a: AdderGraph,
    pub graph_b: AdderGraph,
    pub certificate: Certificate,
    pub elapsed_s: f64,
}

/// Exact decimal expansion of `n · 2^e`.
pub fn dyadic_decimal(n: i64, e: i32) -> String {
    if e >= 0 {
        return (num_bigint::BigInt::from(n) << e as usize).to_string();
    }
    let k = (-e) as usize;
    let digits = (num_bigint::BigInt::from(n.unsigned_abs()) * num_bigint::BigInt::from(5u8).pow(k as u32)).to_string();
    let digits = format!("{digits:0>width$}", width = k + 1);
    let (int, frac) = digits.split_at(digits.len() - k);
    let frac = frac.trim_end_matches('0');
    let sign = if n < 0 { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

impl FilterReport {
    pub fn new(q: &QuantizedFilter) -> Self {
        let (la, lb) = (q.fmt_a.lsb(), q.fmt_b.lsb());
        let a0 = 1i64 << (q.w() as i32 - 1 - q.fmt_a.g);
        FilterReport {
            w: q.w(),
            g_a: q.fmt_a.g,
            g_b: q.fmt_b.g,
            a_int: q.a_int(),
            b_int: q.b_int(),
            a: [dyadic_decimal(a0, la), dyadic_decimal(q.a1, la), dyadic_decimal(q.a2, la)],
            b: q.b_int().map(|v| dyadic_decimal(v, lb)),
        }
    }

    pub fn to_filter(&self) -> Result<QuantizedFilter> {
        let fa = CoefficientFormat::new(self.w, self.g_a)?;
        let fb = CoefficientFormat::new(self.w, self.g_b)?;
        QuantizedFilter::new(self.a_int, self.b_int, fa, fb)
    }
}

impl DesignReport {
    pub fn new(spec: &FrequencySpec, problem: ProblemSummary, design: &VerifiedDesign) -> Self {
        let r = &design.result;
        DesignReport {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            spec: spec.clone(),
            problem,
            status: r.status,
            verified: design.verified,
            iterations: design.iterations,
            added_frequencies: design.added_frequencies.clone(),
            filter: r.filter.as_ref().map(FilterReport::new),
            cost: CostReport { a_m: r.a_m, a_s: r.a_s, a_total: r.a_total, zeros: r.zeros },
            graph_a: r.graph_a.clone(),
            graph_b: r.graph_b.clone(),
            certificate: Certificate {
                exhaustive: r.status != Status::TimedOut,
                grid_points: r.grid_points,
                stats: r.stats,
            },
            elapsed_s: r.elapsed_s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses and checks a report: format tag, filter codes and adder graphs.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: DesignReport = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::Parse(format!("unsupported result document {} v{}", r.format, r.version)));
        }
        if let Some(f) = &r.filter {
            let q = f.to_filter()?;
            for (g, taps) in [(&r.graph_a, &q.a_int()[..]), (&r.graph_b, &q.b_int()[..])] {
                g.validate()?;
                for &c in taps {
                    if g.multiply(c, 1) != Some(c as i128) {
                        return Err(Error::InvalidGraph(format!("graph does not realize constant {c}")));
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn quantized(&self) -> Result<Option<QuantizedFilter>> {
        self.filter.as_ref().map(FilterReport::to_filter).transpose()
    }
}
