//! Effective configuration: flags, then the `[options]` table of a spec file, then defaults.

use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use iirforge::filterspec::{benchmark_by_id, FrequencySpec, DEFAULT_POINTS_PER_BAND};
use iirforge::search::{SearchOptions, DEFAULT_G_A_RANGE, DEFAULT_TIME_LIMIT, DEFAULT_VERIFY_STEP};

use crate::SpecArgs;

pub enum SpecSource {
    File(String),
    Benchmark(String),
}

/// Optional design settings stored next to the bands of a spec file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOptions {
    wordlength: Option<u32>,
    points_per_band: Option<usize>,
    use_sbc: Option<bool>,
    g_a_range: Option<(i32, i32)>,
    g_b_range: Option<(i32, i32)>,
    time_limit: Option<f64>,
    verify_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileHead {
    #[serde(default)]
    options: FileOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignConfig {
    pub spec: Option<String>,
    pub wordlength: Option<u32>,
    pub points_per_band: usize,
    pub use_sbc: bool,
    pub g_a_range: (i32, i32),
    /// `None` derives the range from the coefficient bounds.
    pub g_b_range: Option<(i32, i32)>,
    pub time_limit_s: Option<f64>,
    pub verify_step: f64,
    pub threads: Option<usize>,
    pub seed: u64,
}

impl DesignConfig {
    pub fn defaults(threads: Option<usize>, seed: u64) -> Self {
        DesignConfig {
            spec: None,
            wordlength: None,
            points_per_band: DEFAULT_POINTS_PER_BAND,
            use_sbc: true,
            g_a_range: DEFAULT_G_A_RANGE,
            g_b_range: None,
            time_limit_s: Some(DEFAULT_TIME_LIMIT.as_secs_f64()),
            verify_step: DEFAULT_VERIFY_STEP,
            threads,
            seed,
        }
    }

    pub fn with_points(mut self, points: Option<usize>) -> Self {
        if let Some(p) = points {
            self.points_per_band = p;
        }
        self
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            use_sbc: self.use_sbc,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            g_a_range: self.g_a_range,
            threads: self.threads,
            ..SearchOptions::default()
        }
    }
}

/// Parses `lo:hi` into an inclusive range.
pub fn parse_range(s: &str) -> std::result::Result<(i32, i32), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: i32 = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: i32 = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(crate::usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn resolve(
    source: &SpecSource,
    flags: &SpecArgs,
    wordlength: Option<u32>,
    threads: Option<usize>,
    seed: u64,
) -> Result<(FrequencySpec, DesignConfig)> {
    let (spec, file) = match source {
        SpecSource::File(text) => {
            let head: FileHead = toml::from_str(text).context("reading the [options] table")?;
            (FrequencySpec::from_toml_str(text)?, head.options)
        }
        SpecSource::Benchmark(id) => {
            (benchmark_by_id(id).map_err(|e| crate::usage(e.to_string()))?, FileOptions::default())
        }
    };
    let mut c = DesignConfig::defaults(threads, seed);
    c.spec = Some(spec.name.clone());
    c.wordlength = wordlength.or(file.wordlength);
    c.points_per_band = flags.points_per_band.or(file.points_per_band).unwrap_or(c.points_per_band);
    c.use_sbc = if flags.no_sbc { false } else { file.use_sbc.unwrap_or(true) };
    c.g_a_range = flags.g_a_range.or(file.g_a_range).unwrap_or(c.g_a_range);
    c.g_b_range = flags.g_b_range.or(file.g_b_range);
    if let Some(t) = flags.time_limit.or(file.time_limit) {
        c.time_limit_s = Some(positive("time limit", t)?);
    }
    c.verify_step = positive("verify step", flags.verify_step.or(file.verify_step).unwrap_or(c.verify_step))?;
    if c.points_per_band == 0 {
        return Err(crate::usage("points per band must be positive"));
    }
    if let Some(w) = c.wordlength {
        if !(2..=24).contains(&w) {
            return Err(crate::usage(format!("word length {w} outside 2..=24")));
        }
    }
    Ok((spec, c))
}
