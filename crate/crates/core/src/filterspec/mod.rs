//! Frequency-domain specifications, built-in benchmarks and grid discretization.
//!
//! Frequencies are normalized to `[0, 1]` in units of π rad/sample. A
//! specification is an ordered list of bands; everything between bands is a
//! don't-care region. Each band carries a lower and an upper bound on
//! `|H(e^{jπω})|`, either constant or tabulated with linear interpolation.

mod hp0_data;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hp0_data::HP0_RESPONSE;

/// Points per band used when the caller does not choose a density.
pub const DEFAULT_POINTS_PER_BAND: usize = 300;

/// Relative tolerance around the tabulated hp0 response.
pub const DEFAULT_HP0_TOLERANCE: f64 = 0.02;

/// Magnitude bound as a function of frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Constant(f64),
    Table { omega: Vec<f64>, value: Vec<f64> },
}

impl Bound {
    /// Evaluates the bound, clamping outside the tabulated range.
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Bound::Constant(v) => *v,
            Bound::Table { omega: xs, value: ys } => {
                if omega <= xs[0] {
                    return ys[0];
                }
                let last = xs.len() - 1;
                if omega >= xs[last] {
                    return ys[last];
                }
                let i = xs.partition_point(|&x| x <= omega) - 1;
                let t = (omega - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
        }
    }

    /// Breakpoints strictly inside `(lo, hi)`.
    fn breakpoints_within(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Bound::Constant(_) => Vec::new(),
            Bound::Table { omega, .. } => {
                omega.iter().copied().filter(|&x| x > lo && x < hi).collect()
            }
        }
    }

    /// Maximum over `[lo, hi]` (attained at an endpoint or a breakpoint).
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.eval(lo).max(self.eval(hi));
        for x in self.breakpoints_within(lo, hi) {
            m = m.max(self.eval(x));
        }
        m
    }

    /// Largest absolute slope (per unit of normalized frequency) on `[lo, hi]`.
    pub fn max_slope_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Bound::Constant(_) => 0.0,
            Bound::Table { omega, value } => omega
                .windows(2)
                .zip(value.windows(2))
                .filter(|(x, _)| x[1] > lo && x[0] < hi)
                .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Bound::Constant(v) => {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidSpec(format!("bound {v} must be finite and >= 0")));
                }
            }
            Bound::Table { omega, value } => {
                if omega.is_empty() || omega.len() != value.len() {
                    return Err(Error::InvalidSpec(
                        "tabulated bound needs equally long, non-empty `omega` and `value`".into(),
                    ));
                }
                if omega.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidSpec(
                        "tabulated bound frequencies must be strictly increasing".into(),
                    ));
                }
                if omega.iter().chain(value).any(|v| !v.is_finite()) || value.iter().any(|&v| v < 0.0)
                {
                    return Err(Error::InvalidSpec(
                        "tabulated bound values must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One constrained band `[omega_lo, omega_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    #[serde(rename = "lo")]
    pub omega_lo: f64,
    #[serde(rename = "hi")]
    pub omega_hi: f64,
    pub beta_lo: Bound,
    pub beta_hi: Bound,
}

impl BandSpec {
    pub fn new(omega_lo: f64, omega_hi: f64, beta_lo: Bound, beta_hi: Bound) -> Result<Self> {
        let band = BandSpec { omega_lo, omega_hi, beta_lo, beta_hi };
        band.validate()?;
        Ok(band)
    }

    /// Band with constant bounds.
    pub fn constant(omega_lo: f64, omega_hi: f64, beta_lo: f64, beta_hi: f64) -> Result<Self> {
        Self::new(omega_lo, omega_hi, Bound::Constant(beta_lo), Bound::Constant(beta_hi))
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.omega_lo && omega <= self.omega_hi
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.omega_lo, self.omega_hi);
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidSpec(format!("band [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")));
        }
        self.beta_lo.validate()?;
        self.beta_hi.validate()?;
        // Both bounds are piecewise linear, so checking every breakpoint suffices.
        let mut xs = vec![lo, hi];
        xs.extend(self.beta_lo.breakpoints_within(lo, hi));
        xs.extend(self.beta_hi.breakpoints_within(lo, hi));
        for x in xs {
            let (l, h) = (self.beta_lo.eval(x), self.beta_hi.eval(x));
            if l > h {
                return Err(Error::InvalidSpec(format!(
                    "lower bound {l} exceeds upper bound {h} at omega = {x}"
                )));
            }
        }
        Ok(())
    }
}

/// A complete specification: named, ordered, non-overlapping bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub name: String,
    pub bands: Vec<BandSpec>,
}

impl FrequencySpec {
    pub fn new(name: impl Into<String>, mut bands: Vec<BandSpec>) -> Result<Self> {
        bands.sort_by(|x, y| x.omega_lo.total_cmp(&y.omega_lo).then(x.omega_hi.total_cmp(&y.omega_hi)));
        let spec = FrequencySpec { name: name.into(), bands };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidSpec("specification has no bands".into()));
        }
        for band in &self.bands {
            band.validate()?;
        }
        for pair in self.bands.windows(2) {
            if pair[1].omega_lo < pair[0].omega_hi {
                return Err(Error::InvalidSpec(format!(
                    "bands [{}, {}] and [{}, {}] overlap",
                    pair[0].omega_lo, pair[0].omega_hi, pair[1].omega_lo, pair[1].omega_hi
                )));
            }
        }
        Ok(())
    }

    /// Magnitude bounds at `omega`, intersected over every band containing it.
    pub fn bounds_at(&self, omega: f64) -> Option<(f64, f64)> {
        let mut found: Option<(f64, f64)> = None;
        for band in self.bands.iter().filter(|b| b.contains(omega)) {
            let (l, h) = (band.beta_lo.eval(omega), band.beta_hi.eval(omega));
            found = Some(match found {
                None => (l, h),
                Some((fl, fh)) => (fl.max(l), fh.min(h)),
            });
        }
        found
    }

    /// True when some band has a strictly positive lower bound.
    pub fn has_lower_bounds(&self) -> bool {
        self.bands
            .iter()
            .any(|b| b.beta_lo.max_on(b.omega_lo, b.omega_hi) > 0.0)
    }

    /// Parses the TOML specification document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            name: String,
            bands: Vec<BandSpec>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        FrequencySpec::new(raw.name, raw.bands)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Lowpass benchmark with passband `[0, wp]`, stopband `[ws, 1]` and ripple `delta`.
pub fn lowpass(name: &str, wp: f64, ws: f64, delta: f64) -> Result<FrequencySpec> {
    FrequencySpec::new(
        name,
        vec![
            BandSpec::constant(0.0, wp, 1.0 - delta, 1.0 + delta)?,
            BandSpec::constant(ws, 1.0, 0.0, delta)?,
        ],
    )
}

/// The hp0 compensator: tabulated reference response with a relative tolerance.
///
/// The first three samples (ω ≤ 0.02) cover the steep transition and are left
/// unconstrained.
pub fn hp0(tolerance: f64) -> Result<FrequencySpec> {
    if !(0.0..1.0).contains(&tolerance) {
        return Err(Error::InvalidSpec(format!("hp0 tolerance {tolerance} must lie in [0, 1)")));
    }
    let omega: Vec<f64> = (3..=100).map(|i| i as f64 / 100.0).collect();
    let scaled = |f: f64| -> Vec<f64> { HP0_RESPONSE[3..].iter().map(|h| f * h).collect() };
    let band = BandSpec::new(
        omega[0],
        1.0,
        Bound::Table { omega: omega.clone(), value: scaled(1.0 - tolerance) },
        Bound::Table { omega, value: scaled(1.0 + tolerance) },
    )?;
    FrequencySpec::new("hp0", vec![band])
}

/// Returns one of the built-in benchmark specifications.
///
/// `lp1_k`: δ = 0.1 − 0.01k (k ≤ 6); `lp2_k`: passband [0, 0.3 + 0.05k];
/// `lp3_k`: stopband [0.7 − 0.05k, 1] (k ≤ 4); `lp4` and `hp0` take no index.
pub fn builtin_benchmark(name: &str, k: Option<u32>) -> Result<FrequencySpec> {
    let unknown = || Error::UnknownBenchmark(match k {
        Some(k) => format!("{name}_{k}"),
        None => name.to_string(),
    });
    match (name, k) {
        ("lp1", Some(k)) if k <= 6 => {
            lowpass(&format!("lp1_{k}"), 0.3, 0.7, (10 - k) as f64 / 100.0)
        }
        ("lp2", Some(k)) if k <= 4 => {
            lowpass(&format!("lp2_{k}"), (30 + 5 * k) as f64 / 100.0, 0.7, 0.1)
        }
        ("lp3", Some(k)) if k <= 4 => {
            lowpass(&format!("lp3_{k}"), 0.3, (70 - 5 * k) as f64 / 100.0, 0.1)
        }
        ("lp4", None) => lowpass("lp4", 0.5, 0.9, 0.1),
        ("hp0", None) => hp0(DEFAULT_HP0_TOLERANCE),
        _ => Err(unknown()),
    }
}

/// Parses identifiers such as `lp1_4`, `lp4` or `hp0`.
pub fn benchmark_by_id(id: &str) -> Result<FrequencySpec> {
    match id.split_once('_') {
        Some((family, k)) => {
            let k: u32 = k.parse().map_err(|_| Error::UnknownBenchmark(id.to_string()))?;
            builtin_benchmark(family, Some(k))
        }
        None => builtin_benchmark(id, None),
    }
}

/// One grid frequency with its squared bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub omega: f64,
    pub beta_lo_sq: f64,
    pub beta_hi_sq: f64,
}

impl GridPoint {
    /// Squares the bounds once, rounding the lower bound up and the upper bound
    /// down so the stored dyadic values never relax the specification.
    pub(crate) fn new(omega: f64, beta_lo: f64, beta_hi: f64) -> Self {
        GridPoint { omega, beta_lo_sq: square_up(beta_lo), beta_hi_sq: square_down(beta_hi) }
    }

    /// `(cos(πω), cos(2πω))`.
    pub fn cosines(&self) -> (f64, f64) {
        (cos_pi(self.omega), cos_pi(2.0 * self.omega))
    }
}

fn square_up(x: f64) -> f64 {
    let p = x * x;
    if x.mul_add(x, -p) > 0.0 { p.next_up() } else { p }
}

fn square_down(x: f64) -> f64 {
    let p = x * x;
    if x.mul_add(x, -p) < 0.0 { p.next_down() } else { p }
}

/// `cos(π x)` for `x ∈ [0, 2]`, exact at multiples of 1/2.
pub fn cos_pi(x: f64) -> f64 {
    use std::f64::consts::PI;
    let x = if x > 1.0 { 2.0 - x } else { x };
    if x == 0.0 {
        1.0
    } else if x == 0.5 {
        0.0
    } else if x == 1.0 {
        -1.0
    } else if x < 0.25 {
        (PI * x).cos()
    } else if x <= 0.75 {
        (PI * (0.5 - x)).sin()
    } else {
        -(PI * (1.0 - x)).cos()
    }
}

/// Finite set of constrained frequencies.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub points: Vec<GridPoint>,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of distinct frequencies.
    pub fn distinct_frequencies(&self) -> usize {
        let mut om: Vec<f64> = self.points.iter().map(|p| p.omega).collect();
        om.sort_by(f64::total_cmp);
        om.dedup();
        om.len()
    }

    /// Adds `omega` with its squared bounds; a frequency already on the grid is
    /// ignored.
    pub fn append_frequency(&self, omega: f64, spec: &FrequencySpec) -> Result<FrequencyGrid> {
        let (lo, hi) = spec.bounds_at(omega).ok_or(Error::OutsideBands(omega))?;
        let mut grid = self.clone();
        if grid.points.iter().any(|p| p.omega == omega) {
            return Ok(grid);
        }
        let at = grid.points.partition_point(|p| p.omega < omega);
        grid.points.insert(at, GridPoint::new(omega, lo, hi));
        Ok(grid)
    }
}

/// Uniform, endpoint-inclusive grid with `points_per_band` samples per band.
pub fn discretize(spec: &FrequencySpec, points_per_band: usize) -> Result<FrequencyGrid> {
    if points_per_band < 2 {
        return Err(Error::InvalidSpec("points_per_band must be at least 2".into()));
    }
    let mut omegas = Vec::with_capacity(spec.bands.len() * points_per_band);
    for band in &spec.bands {
        let n = points_per_band - 1;
        for j in 0..=n {
            let omega = if j == 0 {
                band.omega_lo
            } else if j == n {
                band.omega_hi
            } else {
                band.omega_lo + (band.omega_hi - band.omega_lo) * (j as f64 / n as f64)
            };
            omegas.push(omega);
        }
    }
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let points = omegas
        .into_iter()
        .map(|omega| {
            let (lo, hi) = spec.bounds_at(omega).expect("grid frequency inside a band");
            GridPoint::new(omega, lo, hi)
        })
        .collect();
    Ok(FrequencyGrid { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp1_family_bounds() {
        let s = builtin_benchmark("lp1", Some(0)).unwrap();
        assert_eq!(s.bands.len(), 2);
        assert_eq!((s.bands[0].omega_lo, s.bands[0].omega_hi), (0.0, 0.3));
        assert_eq!(s.bands[0].beta_lo, Bound::Constant(0.9));
        assert_eq!(s.bands[0].beta_hi, Bound::Constant(1.1));
        assert_eq!((s.bands[1].omega_lo, s.bands[1].omega_hi), (0.7, 1.0));
        assert_eq!(s.bands[1].beta_hi, Bound::Constant(0.1));

        let s = builtin_benchmark("lp1", Some(4)).unwrap();
        assert_eq!(s.bands[0].beta_lo, Bound::Constant(0.94));
        assert_eq!(s.bands[0].beta_hi, Bound::Constant(1.06));
        assert_eq!(s.bands[1].beta_hi, Bound::Constant(0.06));
    }

    #[test]
    fn lp2_lp3_lp4_shapes() {
        let s = builtin_benchmark("lp2", Some(3)).unwrap();
        assert_eq!(s.bands[0].omega_hi, 0.45);
        let s = builtin_benchmark("lp3", Some(2)).unwrap();
        assert_eq!(s.bands[1].omega_lo, 0.6);
        let s = builtin_benchmark("lp4", None).unwrap();
        assert_eq!((s.bands[0].omega_hi, s.bands[1].omega_lo), (0.5, 0.9));
    }

    #[test]
    fn unknown_benchmarks_are_rejected() {
        assert!(matches!(builtin_benchmark("lp1", Some(7)), Err(Error::UnknownBenchmark(_))));
        assert!(builtin_benchmark("lp2", Some(5)).is_err());
        assert!(builtin_benchmark("lp4", Some(0)).is_err());
        assert!(builtin_benchmark("bp9", None).is_err());
        assert!(benchmark_by_id("lp1_x").is_err());
        assert_eq!(benchmark_by_id("lp3_1").unwrap().name, "lp3_1");
    }

    #[test]
    fn hp0_skips_transition() {
        let s = builtin_benchmark("hp0", None).unwrap();
        assert_eq!(s.bands.len(), 1);
        assert_eq!(s.bands[0].omega_lo, 0.03);
        let (lo, hi) = s.bounds_at(1.0).unwrap();
        assert!((lo - 0.98 * 1.0152414977269706).abs() < 1e-15);
        assert!((hi - 1.02 * 1.0152414977269706).abs() < 1e-15);
        assert!(s.bounds_at(0.02).is_none());
    }

    #[test]
    fn four_point_stopband() {
        let s = builtin_benchmark("lp1", Some(0)).unwrap();
        let g = discretize(&s, 4).unwrap();
        let stop: Vec<_> = g.points.iter().filter(|p| p.omega >= 0.7).collect();
        let expected = [0.7, 0.8, 0.9, 1.0];
        assert_eq!(stop.len(), 4);
        for (p, e) in stop.iter().zip(expected) {
            assert!((p.omega - e).abs() < 1e-12);
            assert!((p.beta_hi_sq - 0.01).abs() < 1e-15);
            assert_eq!(p.beta_lo_sq, 0.0);
        }
    }

    #[test]
    fn two_points_are_endpoints_and_sizes_add_up() {
        let s = builtin_benchmark("lp4", None).unwrap();
        let g = discretize(&s, 2).unwrap();
        let om: Vec<f64> = g.points.iter().map(|p| p.omega).collect();
        assert_eq!(om, vec![0.0, 0.5, 0.9, 1.0]);
        let g = discretize(&builtin_benchmark("lp1", Some(0)).unwrap(), 300).unwrap();
        assert_eq!(g.len(), 600);
        assert!(discretize(&s, 1).is_err());
    }

    #[test]
    fn squared_bounds_never_relax() {
        for x in [0.9, 1.1, 0.94, 1.06, 0.1, 0.3] {
            assert!(square_up(x) >= x * x);
            assert!(square_down(x) <= x * x);
        }
    }

    #[test]
    fn append_rules() {
        let s = builtin_benchmark("lp1", Some(0)).unwrap();
        let g = discretize(&s, 4).unwrap();
        let g2 = g.append_frequency(0.75, &s).unwrap();
        assert_eq!(g2.len(), g.len() + 1);
        let p = g2.points.iter().find(|p| p.omega == 0.75).unwrap();
        assert!((p.beta_hi_sq - 0.01).abs() < 1e-15);
        assert_eq!(g2.append_frequency(0.75, &s).unwrap(), g2);
        assert!(matches!(g.append_frequency(0.5, &s), Err(Error::OutsideBands(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(BandSpec::constant(0.5, 0.2, 0.0, 1.0).is_err());
        assert!(BandSpec::constant(0.0, 0.2, 1.0, 0.5).is_err());
        assert!(BandSpec::constant(0.0, 1.2, 0.0, 0.5).is_err());
        let a = BandSpec::constant(0.0, 0.5, 0.9, 1.1).unwrap();
        let b = BandSpec::constant(0.4, 1.0, 0.0, 0.1).unwrap();
        assert!(FrequencySpec::new("x", vec![a, b]).is_err());
        assert!(FrequencySpec::new("x", vec![]).is_err());
    }

    #[test]
    fn table_interpolation() {
        let b = Bound::Table { omega: vec![0.0, 0.5, 1.0], value: vec![0.0, 1.0, 3.0] };
        assert_eq!(b.eval(0.25), 0.5);
        assert_eq!(b.eval(0.75), 2.0);
        assert_eq!(b.eval(2.0), 3.0);
        assert!((b.max_on(0.0, 0.6) - 1.4).abs() < 1e-15);
        assert_eq!(b.max_slope_on(0.0, 0.4), 2.0);
        assert_eq!(b.max_slope_on(0.0, 1.0), 4.0);
    }

    #[test]
    fn toml_round_trip_with_table() {
        let text = r#"
name = "custom"

[[bands]]
lo = 0.0
hi = 0.3
beta_lo = 0.9
beta_hi = 1.1

[[bands]]
lo = 0.6
hi = 1.0
beta_lo = 0.0
beta_hi = { omega = [0.6, 1.0], value = [0.2, 0.1] }
"#;
        let s = FrequencySpec::from_toml_str(text).unwrap();
        assert_eq!(s.bands.len(), 2);
        assert!((s.bounds_at(0.8).unwrap().1 - 0.15).abs() < 1e-15);
        let again = FrequencySpec::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, s);
        assert!(FrequencySpec::from_toml_str("name = 1").is_err());
    }

    #[test]
    fn cos_pi_exact_points() {
        assert_eq!(cos_pi(0.0), 1.0);
        assert_eq!(cos_pi(0.5), 0.0);
        assert_eq!(cos_pi(1.0), -1.0);
        assert_eq!(cos_pi(2.0), 1.0);
        assert_eq!(cos_pi(1.5), 0.0);
        for i in 0..=200 {
            let x = i as f64 / 100.0;
            assert!((cos_pi(x) - (std::f64::consts::PI * x).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn discretize_is_deterministic() {
        let s = builtin_benchmark("hp0", None).unwrap();
        assert_eq!(discretize(&s, 300).unwrap(), discretize(&s, 300).unwrap());
    }
}
