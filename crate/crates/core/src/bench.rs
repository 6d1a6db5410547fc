//! The reference benchmark table and a runner that diffs against it.

use std::time::Instant;

use serde::Serialize;

use crate::filterspec::{benchmark_by_id, discretize};
use crate::search::{design_with_verification, DesignProblem, SearchOptions, Status, DEFAULT_VERIFY_STEP};
use crate::{Error, Result};

/// Expected optima shipped with the crate (`id,w,a_m,a_s,a_total`).
pub const EXPECTED_TABLE: &str = include_str!("../bench/expected.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedRow {
    pub id: String,
    pub w: u32,
    pub a_m: u32,
    pub a_s: u32,
    pub a_total: u32,
}

pub fn parse_expected(text: &str) -> Result<Vec<ExpectedRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty benchmark table".into()))?;
    if header.trim() != "id,w,a_m,a_s,a_total" {
        return Err(Error::Parse(format!("unexpected benchmark header `{header}`")));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let num = |i: usize| -> Result<u32> {
                f.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse(format!("bad benchmark row `{l}`")))
            };
            if f.len() != 5 {
                return Err(Error::Parse(format!("bad benchmark row `{l}`")));
            }
            Ok(ExpectedRow { id: f[0].to_string(), w: num(1)?, a_m: num(2)?, a_s: num(3)?, a_total: num(4)? })
        })
        .collect()
}

pub fn expected_table() -> Vec<ExpectedRow> {
    parse_expected(EXPECTED_TABLE).expect("shipped benchmark table parses")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOutcome {
    pub id: String,
    pub w: u32,
    pub expected: u32,
    pub status: Status,
    pub verified: bool,
    pub a_m: Option<u32>,
    pub a_s: Option<u32>,
    pub a_total: Option<u32>,
    pub elapsed_s: f64,
}

impl BenchOutcome {
    pub fn matches(&self) -> bool {
        self.status == Status::Optimal && self.verified && self.a_total == Some(self.expected)
    }
}

/// Designs one row with the verification loop.
pub fn run_row(row: &ExpectedRow, points_per_band: usize, options: &SearchOptions) -> Result<BenchOutcome> {
    let start = Instant::now();
    let spec = benchmark_by_id(&row.id)?;
    let grid = discretize(&spec, points_per_band)?;
    let mut p = DesignProblem::new(spec, grid, row.w)?;
    p.options = options.clone();
    let d = design_with_verification(&p, DEFAULT_VERIFY_STEP)?;
    let ok = d.result.status == Status::Optimal;
    Ok(BenchOutcome {
        id: row.id.clone(),
        w: row.w,
        expected: row.a_total,
        status: d.result.status,
        verified: d.verified,
        a_m: ok.then_some(d.result.a_m),
        a_s: ok.then_some(d.result.a_s),
        a_total: ok.then_some(d.result.a_total),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// CSV with columns `id,w,expected,status,verified,a_m,a_s,a_total,match,elapsed_s`.
pub fn outcomes_csv(rows: &[BenchOutcome]) -> String {
    let mut out = String::from("id,w,expected,status,verified,a_m,a_s,a_total,match,elapsed_s\n");
    let opt = |v: Option<u32>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.3}\n",
            r.id,
            r.w,
            r.expected,
            status,
            r.verified,
            opt(r.a_m),
            opt(r.a_s),
            opt(r.a_total),
            r.matches(),
            r.elapsed_s
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_parses() {
        let t = expected_table();
        assert_eq!(t.len(), 16);
        assert!(t.iter().all(|r| r.a_m + r.a_s == r.a_total));
        assert_eq!(t.iter().find(|r| r.id == "hp0").unwrap().a_total, 3);
        assert!(parse_expected("id,w\nlp4,4\n").is_err());
    }
}
