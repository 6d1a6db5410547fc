//! Fixed-point coefficient formats and the exact integer/real mapping.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Word length `w` (sign included) and MSB position `g`; the LSB weight is `2^(g-w+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoefficientFormat {
    pub w: u32,
    pub g: i32,
}

impl CoefficientFormat {
    pub fn new(w: u32, g: i32) -> Result<Self> {
        if !(2..=62).contains(&w) {
            return Err(Error::InvalidFormat(format!("word length {w} outside [2, 62]")));
        }
        Ok(CoefficientFormat { w, g })
    }

    pub fn lsb(&self) -> i32 {
        self.g - self.w as i32 + 1
    }

    /// Exact real value of the integer code `n`.
    pub fn to_real(&self, n: i64) -> BigRational {
        dyadic(n, self.lsb())
    }

    /// Integer code of `x`, if `x` is exactly representable.
    pub fn quantize(&self, x: &BigRational) -> Option<i64> {
        let scaled = x / dyadic(1, self.lsb());
        if !scaled.is_integer() {
            return None;
        }
        let n: i64 = scaled.to_integer().try_into().ok()?;
        let (lo, hi) = integer_range(*self);
        (lo..=hi).contains(&n).then_some(n)
    }
}

/// `n · 2^e` as an exact rational.
pub fn dyadic(n: i64, e: i32) -> BigRational {
    let n = BigInt::from(n);
    if e >= 0 {
        BigRational::from_integer(n << e as usize)
    } else {
        BigRational::new(n, BigInt::one() << (-e) as usize)
    }
}

/// Representable integer codes `[-2^(w-1), 2^(w-1) - 1]`.
pub fn integer_range(fmt: CoefficientFormat) -> (i64, i64) {
    let half = 1i64 << (fmt.w - 1);
    (-half, half - 1)
}

/// Smallest `g` with `2^g >= max_abs`.
pub fn msb_for_bound(max_abs: f64) -> Result<i32> {
    if !(max_abs > 0.0) || !max_abs.is_finite() {
        return Err(Error::InvalidFormat(format!("MSB bound needs a finite positive magnitude, got {max_abs}")));
    }
    let mut g = max_abs.log2().ceil() as i32;
    while 2f64.powi(g) < max_abs {
        g += 1;
    }
    while 2f64.powi(g - 1) >= max_abs {
        g -= 1;
    }
    Ok(g)
}

/// Exact real coefficients of a quantized filter (`a0 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RealCoefficients {
    pub a1: BigRational,
    pub a2: BigRational,
    pub b0: BigRational,
    pub b1: BigRational,
    pub b2: BigRational,
}

/// Second-order section with integer coefficient codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedFilter {
    pub a1: i64,
    pub a2: i64,
    pub b0: i64,
    pub b1: i64,
    pub b2: i64,
    pub fmt_a: CoefficientFormat,
    pub fmt_b: CoefficientFormat,
}

impl QuantizedFilter {
    pub fn new(a: [i64; 2], b: [i64; 3], fmt_a: CoefficientFormat, fmt_b: CoefficientFormat) -> Result<Self> {
        if fmt_a.w != fmt_b.w {
            return Err(Error::InvalidFormat("a and b must share one word length".into()));
        }
        let q = QuantizedFilter { a1: a[0], a2: a[1], b0: b[0], b1: b[1], b2: b[2], fmt_a, fmt_b };
        for (fmt, vals) in [(fmt_a, &a[..]), (fmt_b, &b[..])] {
            let (lo, hi) = integer_range(fmt);
            if let Some(v) = vals.iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::InvalidFormat(format!("code {v} outside [{lo}, {hi}] for w = {}", fmt.w)));
            }
        }
        Ok(q)
    }

    pub fn w(&self) -> u32 {
        self.fmt_a.w
    }

    pub fn a_int(&self) -> [i64; 2] {
        [self.a1, self.a2]
    }

    pub fn b_int(&self) -> [i64; 3] {
        [self.b0, self.b1, self.b2]
    }

    pub fn to_real(&self) -> RealCoefficients {
        RealCoefficients {
            a1: self.fmt_a.to_real(self.a1),
            a2: self.fmt_a.to_real(self.a2),
            b0: self.fmt_b.to_real(self.b0),
            b1: self.fmt_b.to_real(self.b1),
            b2: self.fmt_b.to_real(self.b2),
        }
    }

    /// Floating-point coefficients `([a0, a1, a2], [b0, b1, b2])`.
    pub fn to_f64(&self) -> ([f64; 3], [f64; 3]) {
        let sa = 2f64.powi(self.fmt_a.lsb());
        let sb = 2f64.powi(self.fmt_b.lsb());
        (
            [1.0, self.a1 as f64 * sa, self.a2 as f64 * sa],
            [self.b0 as f64 * sb, self.b1 as f64 * sb, self.b2 as f64 * sb],
        )
    }

    /// Number of nonzero `(a, b)` codes.
    pub fn nonzeros(&self) -> (usize, usize) {
        (
            self.a_int().iter().filter(|&&v| v != 0).count(),
            self.b_int().iter().filter(|&&v| v != 0).count(),
        )
    }

    pub fn is_zero_b(&self) -> bool {
        self.b_int().iter().all(Zero::is_zero)
    }
}
