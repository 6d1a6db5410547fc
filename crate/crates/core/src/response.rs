//! Squared-magnitude forms, stability, grid feasibility and dense verification.

use std::f64::consts::PI;

use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterspec::{cos_pi, Bound, FrequencyGrid, FrequencySpec, GridPoint};
use crate::fixedpoint::{dyadic, CoefficientFormat, QuantizedFilter};

/// `|b0 + b1 e^{-jπω} + b2 e^{-2jπω}|²`.
pub fn mag2_num(b: [f64; 3], omega: f64) -> f64 {
    let (c1, c2) = (cos_pi(omega), cos_pi((2.0 * omega) % 2.0));
    let v = b[0] * b[0] + b[1] * b[1] + b[2] * b[2]
        + 2.0 * (b[0] * b[1] + b[1] * b[2]) * c1
        + 2.0 * b[0] * b[2] * c2;
    v.max(0.0)
}

/// `|1 + a1 e^{-jπω} + a2 e^{-2jπω}|²`.
pub fn mag2_den(a1: f64, a2: f64, omega: f64) -> f64 {
    mag2_num([1.0, a1, a2], omega)
}

/// `|H(e^{jπω})|`.
pub fn magnitude(q: &QuantizedFilter, omega: f64) -> f64 {
    let (a, b) = q.to_f64();
    (mag2_num(b, omega) / mag2_num(a, omega)).sqrt()
}

/// Strict stability triangle: `-2 < a1 < 2` and `|a1| - 1 < a2 < 1`.
pub fn is_stable(a1: f64, a2: f64) -> bool {
    -2.0 < a1 && a1 < 2.0 && a1.abs() - 1.0 < a2 && a2 < 1.0
}

/// Exact stability test on rational coefficients.
pub fn is_stable_exact(a1: &BigRational, a2: &BigRational) -> bool {
    let one = BigRational::from_integer(1.into());
    let two = BigRational::from_integer(2.into());
    a1.abs() < two && &(a1.abs() - &one) < a2 && a2 < &one
}

/// Stability of integer codes `(a1', a2')` at format `fmt`.
///
/// With `U = 2^(w-1-g)` the strict real triangle becomes
/// `|a1'| <= 2U - 1`, `a2' <= U - 1` and `|a1'| - a2' <= U - 1`.
pub fn is_stable_codes(a1: i64, a2: i64, fmt: CoefficientFormat) -> bool {
    let e = -fmt.lsb();
    if (0..=100).contains(&e) {
        let u = 1i128 << e;
        let (a1, a2) = (a1 as i128, a2 as i128);
        a1.abs() < 2 * u && a2 < u && a1.abs() - a2 < u
    } else {
        is_stable_exact(&fmt.to_real(a1), &fmt.to_real(a2))
    }
}

/// Integer quadratic form `k0 + k1 cos(πω) + k2 cos(2πω)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quad {
    pub k0: i128,
    pub k1: i128,
    pub k2: i128,
}

impl Quad {
    /// Squared magnitude of the integer taps `x0 + x1 z^-1 + x2 z^-2`.
    pub fn from_taps(x: [i64; 3]) -> Quad {
        let [x0, x1, x2] = x.map(|v| v as i128);
        Quad { k0: x0 * x0 + x1 * x1 + x2 * x2, k1: 2 * (x0 * x1 + x1 * x2), k2: 2 * x0 * x2 }
    }

    pub fn eval(&self, c1: f64, c2: f64) -> f64 {
        self.k0 as f64 + self.k1 as f64 * c1 + self.k2 as f64 * c2
    }

    /// Sum of absolute term magnitudes, used for rounding-error bounds.
    pub fn abs_sum(&self, c1: f64, c2: f64) -> f64 {
        (self.k0 as f64).abs() + (self.k1 as f64 * c1).abs() + (self.k2 as f64 * c2).abs()
    }

    pub fn eval_exact(&self, c1: &BigRational, c2: &BigRational) -> BigRational {
        BigRational::from_integer(self.k0.into())
            + BigRational::from_integer(self.k1.into()) * c1
            + BigRational::from_integer(self.k2.into()) * c2
    }
}

pub(crate) fn exact_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Which side of the magnitude constraint fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// Outcome of a grid check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridCheck {
    Ok,
    Violation { omega: f64, side: Side },
}

/// Relative margin above which the floating-point comparison is trusted.
const FLOAT_MARGIN: f64 = 1e-12;

/// Decides `sign(lhs - factor · rhs)` for two forms at `(c1, c2)`, exactly.
/// Returns `Ordering` of `lhs` against `factor · rhs`.
pub(crate) fn compare_forms(
    lhs: &Quad,
    rhs: &Quad,
    factor: f64,
    scale_exp: i32,
    c1: f64,
    c2: f64,
) -> std::cmp::Ordering {
    let s = 2f64.powi(scale_exp);
    let l = lhs.eval(c1, c2);
    let r = factor * s * rhs.eval(c1, c2);
    let err = FLOAT_MARGIN * (lhs.abs_sum(c1, c2) + factor * s * rhs.abs_sum(c1, c2)) + f64::MIN_POSITIVE;
    if l - r > err {
        return std::cmp::Ordering::Greater;
    }
    if r - l > err {
        return std::cmp::Ordering::Less;
    }
    let (e1, e2) = (exact_f64(c1), exact_f64(c2));
    let l = lhs.eval_exact(&e1, &e2);
    let r = exact_f64(factor) * dyadic(1, scale_exp) * rhs.eval_exact(&e1, &e2);
    l.cmp(&r)
}

/// Denominator taps in units of the a-format LSB (`a0' = 2^(w-1-g_a)`).
pub(crate) fn den_taps(q: &QuantizedFilter) -> Result<[i64; 3]> {
    let e = -q.fmt_a.lsb();
    if !(0..=40).contains(&e) {
        return Err(Error::InvalidFormat(format!(
            "g_a = {} does not represent a0 = 1 as an integer code",
            q.fmt_a.g
        )));
    }
    Ok([1i64 << e, q.a1, q.a2])
}

/// Exact per-point test; `(lower_ok, upper_ok)`.
pub(crate) fn point_sides(bq: &Quad, aq: &Quad, scale_exp: i32, p: &GridPoint) -> (bool, bool) {
    let (c1, c2) = p.cosines();
    let lower = p.beta_lo_sq == 0.0
        || compare_forms(bq, aq, p.beta_lo_sq, scale_exp, c1, c2) != std::cmp::Ordering::Less;
    let upper = compare_forms(bq, aq, p.beta_hi_sq, scale_exp, c1, c2) != std::cmp::Ordering::Greater;
    (lower, upper)
}

fn forms(q: &QuantizedFilter) -> Result<(Quad, Quad, i32)> {
    let (a1, a2) = (q.fmt_a.to_real(q.a1), q.fmt_a.to_real(q.a2));
    if !is_stable_exact(&a1, &a2) {
        let (a, _) = q.to_f64();
        return Err(Error::Unstable { a1: a[1], a2: a[2] });
    }
    let aq = Quad::from_taps(den_taps(q)?);
    let bq = Quad::from_taps(q.b_int());
    Ok((bq, aq, 2 * (q.fmt_a.lsb() - q.fmt_b.lsb())))
}

/// Checks `|A|²β̲² <= |B|² <= |A|²β̄²` at every grid point.
pub fn satisfies_grid(q: &QuantizedFilter, grid: &FrequencyGrid) -> Result<GridCheck> {
    let (bq, aq, s) = forms(q)?;
    for p in &grid.points {
        match point_sides(&bq, &aq, s, p) {
            (false, _) => return Ok(GridCheck::Violation { omega: p.omega, side: Side::Lower }),
            (_, false) => return Ok(GridCheck::Violation { omega: p.omega, side: Side::Upper }),
            _ => {}
        }
    }
    Ok(GridCheck::Ok)
}

/// Outcome of dense verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verification {
    Verified,
    /// A frequency where the constraint fails exactly.
    Counterexample(f64),
    /// Neither certified nor refuted down to the bisection limit (tangency).
    Inconclusive(f64),
}

const MIN_WIDTH: f64 = 1e-12;

struct Checker<'a> {
    bq: Quad,
    aq: Quad,
    scale_exp: i32,
    spec: &'a FrequencySpec,
    b: [f64; 3],
    a: [f64; 3],
    lip_b: f64,
    lip_a: f64,
    max_a: f64,
}

impl Checker<'_> {
    /// `(slack_lo, slack_hi, lower_active)` in real units, error-adjusted downward.
    fn slacks(&self, band: usize, omega: f64) -> (f64, f64, bool) {
        let band = &self.spec.bands[band];
        let (lo, hi) = (band.beta_lo.eval(omega), band.beta_hi.eval(omega));
        let nb = mag2_num(self.b, omega);
        let na = mag2_num(self.a, omega);
        let err = 1e-13 * (1.0 + self.b.iter().map(|v| v.abs()).sum::<f64>().powi(2))
            + 1e-13 * self.max_a * hi * hi;
        (nb - lo * lo * na - err, hi * hi * na - nb - err, lo > 0.0)
    }

    fn exact_ok(&self, omega: f64) -> bool {
        match self.spec.bounds_at(omega) {
            None => true,
            Some((lo, hi)) => {
                let p = GridPoint::new(omega, lo, hi);
                let (l, h) = point_sides(&self.bq, &self.aq, self.scale_exp, &p);
                l && h
            }
        }
    }

    fn lipschitz(&self, band: usize, x0: f64, x1: f64) -> (f64, f64) {
        let band = &self.spec.bands[band];
        let bl = band.beta_lo.max_on(x0, x1);
        let bh = band.beta_hi.max_on(x0, x1);
        let sl = band.beta_lo.max_slope_on(x0, x1);
        let sh = band.beta_hi.max_slope_on(x0, x1);
        let l_lo = self.lip_b + self.lip_a * bl * bl + self.max_a * 2.0 * bl * sl;
        let l_hi = self.lip_b + self.lip_a * bh * bh + self.max_a * 2.0 * bh * sh;
        (l_lo, l_hi)
    }

    fn interval(&self, band: usize, x0: f64, x1: f64, s0: (f64, f64, bool), s1: (f64, f64, bool)) -> Verification {
        let mut stack = vec![(x0, x1, s0, s1)];
        while let Some((x0, x1, s0, s1)) = stack.pop() {
            let h = x1 - x0;
            let (l_lo, l_hi) = self.lipschitz(band, x0, x1);
            let lower_active = s0.2 || s1.2 || self.spec.bands[band].beta_lo.max_on(x0, x1) > 0.0;
            let lower_ok = !lower_active || s0.0 + s1.0 >= l_lo * h;
            let upper_ok = s0.1 + s1.1 >= l_hi * h;
            if lower_ok && upper_ok {
                continue;
            }
            let mid = 0.5 * (x0 + x1);
            if !self.exact_ok(mid) {
                return Verification::Counterexample(mid);
            }
            if h < MIN_WIDTH {
                return Verification::Inconclusive(mid);
            }
            let sm = self.slacks(band, mid);
            stack.push((mid, x1, sm, s1));
            stack.push((x0, mid, s0, sm));
        }
        Verification::Verified
    }
}

fn lipschitz_form(x: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        for l in k + 1..3 {
            s += (x[k] * x[l]).abs() * (l - k) as f64;
        }
    }
    2.0 * PI * s
}

/// `p0 + p1 x + p2 x²` with `x = cos(πω)` for the form `k0 + k1 x + k2 (2x² - 1)`.
fn poly_in_x(q: &Quad) -> [BigRational; 3] {
    let r = |v: i128| BigRational::from_integer(v.into());
    [r(q.k0 - q.k2), r(q.k1), r(2 * q.k2)]
}

fn eval_poly(p: &[BigRational; 3], x: &BigRational) -> BigRational {
    &p[0] + x * (&p[1] + x * &p[2])
}

/// Exact check of a band with constant bounds: both sides are quadratics in
/// `cos(πω)`, so their minimum over the band is at an endpoint or the vertex.
/// Returns a violating frequency, if any.
fn constant_band_violation(bq: &Quad, aq: &Quad, scale_exp: i32, w0: f64, w1: f64, lo: f64, hi: f64) -> Option<f64> {
    let p = GridPoint::new(w0, lo, hi);
    let pb = poly_in_x(bq);
    let pa = poly_in_x(aq);
    let s = dyadic(1, scale_exp);
    let (x_lo, x_hi) = (exact_f64(cos_pi(w1)), exact_f64(cos_pi(w0)));
    let mut sides = vec![(exact_f64(p.beta_hi_sq) * &s, true)];
    if p.beta_lo_sq > 0.0 {
        sides.push((exact_f64(p.beta_lo_sq) * &s, false));
    }
    for (f, upper) in sides {
        // Slack polynomial, nonnegative when the side holds.
        let poly: [BigRational; 3] = std::array::from_fn(|k| {
            let t = &f * &pa[k];
            if upper { t - &pb[k] } else { &pb[k] - t }
        });
        if eval_poly(&poly, &x_lo).is_negative() {
            return Some(w1);
        }
        if eval_poly(&poly, &x_hi).is_negative() {
            return Some(w0);
        }
        if poly[2].is_positive() {
            let v = -&poly[1] / (BigRational::from_integer(2.into()) * &poly[2]);
            if v > x_lo && v < x_hi && eval_poly(&poly, &v).is_negative() {
                let x = num_traits::ToPrimitive::to_f64(&v).unwrap_or(0.0).clamp(-1.0, 1.0);
                return Some((x.acos() / PI).clamp(w0, w1));
            }
        }
    }
    None
}

/// Certifies the magnitude constraints on every band for all frequencies.
///
/// Bands with constant bounds are decided exactly in `cos(πω)`. Tabulated
/// bands are sampled with spacing at most `step` (plus breakpoints) and
/// each interval is certified from the endpoint slacks and a Lipschitz bound,
/// bisecting intervals that fail the certificate.
pub fn verify_spec(q: &QuantizedFilter, spec: &FrequencySpec, step: f64) -> Result<Verification> {
    if !(step > 0.0) {
        return Err(Error::InvalidSpec(format!("verification step {step} must be positive")));
    }
    let (bq, aq, scale_exp) = forms(q)?;
    let (a, b) = q.to_f64();
    let checker = Checker {
        bq,
        aq,
        scale_exp,
        spec,
        b,
        a,
        lip_b: lipschitz_form(b),
        lip_a: lipschitz_form(a),
        max_a: (1.0 + a[1].abs() + a[2].abs()).powi(2),
    };
    for (bi, band) in spec.bands.iter().enumerate() {
        let mut xs = Vec::new();
        let n = ((band.omega_hi - band.omega_lo) / step).ceil().max(1.0) as usize;
        for j in 0..=n {
            xs.push(if j == n {
                band.omega_hi
            } else {
                band.omega_lo + (band.omega_hi - band.omega_lo) * j as f64 / n as f64
            });
        }
        for bound in [&band.beta_lo, &band.beta_hi] {
            if let crate::filterspec::Bound::Table { omega, .. } = bound {
                xs.extend(omega.iter().copied().filter(|&x| x > band.omega_lo && x < band.omega_hi));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if let (Bound::Constant(lo), Bound::Constant(hi)) = (&band.beta_lo, &band.beta_hi) {
            if let Some(x) = constant_band_violation(&checker.bq, &checker.aq, scale_exp, band.omega_lo, band.omega_hi, *lo, *hi) {
                return Ok(Verification::Counterexample(x));
            }
            continue;
        }
        for &x in &xs {
            if !checker.exact_ok(x) {
                return Ok(Verification::Counterexample(x));
            }
        }
        let slacks: Vec<_> = xs.iter().map(|&x| checker.slacks(bi, x)).collect();
        for i in 0..xs.len().saturating_sub(1) {
            match checker.interval(bi, xs[i], xs[i + 1], slacks[i], slacks[i + 1]) {
                Verification::Verified => {}
                other => return Ok(other),
            }
        }
    }
    Ok(Verification::Verified)
}

/// One row of the response export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseRow {
    pub omega: f64,
    pub magnitude: f64,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
}

/// Magnitude response on `n` uniform frequencies with the applicable bounds.
pub fn response_table(q: &QuantizedFilter, spec: &FrequencySpec, n: usize) -> Vec<ResponseRow> {
    (0..n)
        .map(|i| {
            let omega = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let bounds = spec.bounds_at(omega);
            ResponseRow {
                omega,
                magnitude: magnitude(q, omega),
                beta_lo: bounds.map(|b| b.0),
                beta_hi: bounds.map(|b| b.1),
            }
        })
        .collect()
}

/// CSV with columns `omega,magnitude,beta_lo,beta_hi` (empty bounds in gaps).
pub fn response_csv(rows: &[ResponseRow]) -> String {
    let mut out = String::from("omega,magnitude,beta_lo,beta_hi\n");
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.omega, r.magnitude, opt(r.beta_lo), opt(r.beta_hi)));
    }
    out
}

/// Largest `|A|²` over the grid, for diagnostics.
pub fn max_den_on(a1: f64, a2: f64, omegas: impl IntoIterator<Item = f64>) -> f64 {
    omegas.into_iter().map(|w| mag2_den(a1, a2, w)).fold(0.0, f64::max)
}

impl GridCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, GridCheck::Ok)
    }
}

impl Verification {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verification::Verified)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterspec::{builtin_benchmark, discretize, BandSpec};

    fn lp1_4_reference() -> QuantizedFilter {
        QuantizedFilter::new(
            [-40, 20],
            [25, 40, 25],
            CoefficientFormat::new(7, 0).unwrap(),
            CoefficientFormat::new(7, -1).unwrap(),
        )
        .unwrap()
    }

    fn hp0_reference() -> QuantizedFilter {
        QuantizedFilter::new(
            [-31, 0],
            [16, -16, 0],
            CoefficientFormat::new(6, 0).unwrap(),
            CoefficientFormat::new(6, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn magnitude_examples() {
        let b = [25.0 / 128.0, 40.0 / 128.0, 25.0 / 128.0];
        assert!((mag2_num(b, 0.0) - (90.0f64 / 128.0).powi(2)).abs() < 1e-15);
        assert!((mag2_num(b, 0.0) - 0.494385).abs() < 1e-6);
        assert_eq!(mag2_num([1.0, -1.0, 0.0], 1.0), 4.0);
        assert_eq!(mag2_den(0.0, 0.0, 0.37), 1.0);
        assert_eq!(mag2_den(-0.625, 0.3125, 1.0), 3.75390625);
    }

    #[test]
    fn stability_examples() {
        assert!(is_stable(0.0, 0.0));
        assert!(is_stable(-0.625, 0.3125));
        assert!(!is_stable(1.0, 0.0));
        assert!(!is_stable(0.0, 1.0));
        assert!(!is_stable(2.0, 0.99));
    }

    #[test]
    fn stability_codes_match_reals() {
        for w in 2..=8u32 {
            for g in -1..=1 {
                let fmt = CoefficientFormat::new(w, g).unwrap();
                let (lo, hi) = crate::fixedpoint::integer_range(fmt);
                for a1 in lo..=hi {
                    for a2 in lo..=hi {
                        let exact = is_stable_exact(&fmt.to_real(a1), &fmt.to_real(a2));
                        assert_eq!(is_stable_codes(a1, a2, fmt), exact, "w={w} g={g} a=({a1},{a2})");
                    }
                }
            }
        }
    }

    #[test]
    fn reference_designs_satisfy_grids() {
        let lp = builtin_benchmark("lp1", Some(4)).unwrap();
        let g = discretize(&lp, 300).unwrap();
        assert_eq!(satisfies_grid(&lp1_4_reference(), &g).unwrap(), GridCheck::Ok);
        let hp = builtin_benchmark("hp0", None).unwrap();
        let g = discretize(&hp, 300).unwrap();
        assert_eq!(satisfies_grid(&hp0_reference(), &g).unwrap(), GridCheck::Ok);
    }

    #[test]
    fn scaled_b_violates_passband_upper() {
        let spec = builtin_benchmark("lp1", Some(0)).unwrap();
        let g = discretize(&spec, 300).unwrap();
        let q = lp1_4_reference();
        let big = QuantizedFilter { b0: 100, b1: 160, b2: 100, fmt_b: CoefficientFormat::new(9, 1).unwrap(), fmt_a: CoefficientFormat::new(9, 0).unwrap(), a1: -160, a2: 80 };
        assert_eq!(satisfies_grid(&q, &g).unwrap(), GridCheck::Ok);
        match satisfies_grid(&big, &g).unwrap() {
            GridCheck::Violation { omega, side } => {
                assert_eq!(side, Side::Upper);
                assert!(omega <= 0.3);
            }
            GridCheck::Ok => panic!("scaled filter accepted"),
        }
    }

    #[test]
    fn unstable_rejected() {
        let spec = builtin_benchmark("lp1", Some(0)).unwrap();
        let g = discretize(&spec, 10).unwrap();
        let fmt = CoefficientFormat::new(4, 0).unwrap();
        let q = QuantizedFilter::new([0, -8], [1, 0, 0], fmt, fmt).unwrap();
        assert!(matches!(satisfies_grid(&q, &g), Err(Error::Unstable { .. })));
    }

    #[test]
    fn constant_ratio_verifies() {
        // |H| = 0.25 everywhere.
        let fa = CoefficientFormat::new(6, 0).unwrap();
        let fb = CoefficientFormat::new(6, -1).unwrap();
        let q = QuantizedFilter::new([16, 0], [16, 8, 0], fa, fb).unwrap();
        let spec = FrequencySpec::new(
            "flat",
            vec![
                BandSpec::constant(0.0, 0.4, 0.24, 0.26).unwrap(),
                BandSpec::constant(0.6, 1.0, 0.1, 0.3).unwrap(),
            ],
        )
        .unwrap();
        for step in [0.3, 1e-2, 1e-3] {
            assert_eq!(verify_spec(&q, &spec, step).unwrap(), Verification::Verified);
        }
    }

    #[test]
    fn reference_lp1_4_verifies() {
        let spec = builtin_benchmark("lp1", Some(4)).unwrap();
        assert_eq!(verify_spec(&lp1_4_reference(), &spec, 1e-4).unwrap(), Verification::Verified);
    }

    #[test]
    fn counterexample_is_genuine() {
        let spec = builtin_benchmark("lp1", Some(0)).unwrap();
        // b = (1, 0, 0), a = 0: |H| = 1 fails every stopband point.
        let fmt = CoefficientFormat::new(4, 0).unwrap();
        let q = QuantizedFilter::new([0, 0], [2, 0, 0], fmt, CoefficientFormat::new(4, 2).unwrap()).unwrap();
        match verify_spec(&q, &spec, 1e-3).unwrap() {
            Verification::Counterexample(w) => assert!(w >= 0.7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_has_header() {
        let spec = builtin_benchmark("lp1", Some(4)).unwrap();
        let rows = response_table(&lp1_4_reference(), &spec, 5);
        let csv = response_csv(&rows);
        assert!(csv.starts_with("omega,magnitude,beta_lo,beta_hi\n"));
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().nth(3).unwrap().ends_with(",,"));
    }
}
