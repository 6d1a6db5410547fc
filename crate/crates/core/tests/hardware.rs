//! Datapath sizing and bit-true simulation against independent references.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iirforge::fixedpoint::{CoefficientFormat, QuantizedFilter};
use iirforge::hardware::{
    compare_with_reference, emit_dot, emit_vhdl, size_datapath, wcpg_denominator, wcpg_filter, IoFormat,
};

fn filter(a: [i64; 2], b: [i64; 3], w: u32, ga: i32, gb: i32) -> QuantizedFilter {
    QuantizedFilter::new(a, b, CoefficientFormat::new(w, ga).unwrap(), CoefficientFormat::new(w, gb).unwrap()).unwrap()
}

fn lp1_4() -> QuantizedFilter {
    filter([-40, 20], [25, 40, 25], 7, 0, -1)
}

fn hp0() -> QuantizedFilter {
    filter([-31, 0], [16, -16, 0], 6, 0, 1)
}

fn big_to_f64(v: &BigInt, frac_bits: u64) -> f64 {
    let bits = v.bits();
    let drop = bits.saturating_sub(60);
    (v >> drop).to_f64().unwrap() * 2f64.powi(drop as i32 - frac_bits as i32)
}

/// Partial sum `Σ_{k<n} |h_k|` of the impulse response of `B/A`, with `h_k` exact.
fn exact_partial_wcpg(q: &QuantizedFilter, b: [i64; 3], n: usize) -> f64 {
    let f = (-q.fmt_a.lsb()) as u64;
    let [a1, a2] = q.a_int();
    // h_k = H_k / 2^{f k} for the denominator part.
    let mut h: Vec<BigInt> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = if k == 0 { BigInt::from(1) } else { BigInt::from(0) };
        if k >= 1 {
            v -= &h[k - 1] * a1;
        }
        if k >= 2 {
            v -= (&h[k - 2] * a2) << f;
        }
        h.push(v);
    }
    let mut sum = 0.0;
    for k in 0..n {
        // g_k = Σ_j b_j h_{k-j}, scaled to 2^{f k}.
        let mut g = BigInt::from(0);
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0 && k >= j {
                g += (&h[k - j] * bj) << (f * j as u64);
            }
        }
        sum += big_to_f64(&g.abs(), f * k as u64);
    }
    sum
}

#[test]
fn wcpg_agrees_with_exact_partial_sums() {
    for q in [lp1_4(), hp0(), filter([-20, 10], [3, 5, 3], 7, 1, 0)] {
        let exact = exact_partial_wcpg(&q, [1, 0, 0], 10_000);
        let bound = wcpg_denominator(&q, 1e-12).unwrap();
        assert!(exact <= bound * (1.0 + 1e-14), "{exact} {bound}");
        assert!(bound - exact < 1e-9, "{exact} {bound}");
        let scale = 2f64.powi(q.fmt_b.lsb());
        let exact = exact_partial_wcpg(&q, q.b_int(), 10_000) * scale;
        let bound = wcpg_filter(&q, 1e-12).unwrap();
        assert!(exact <= bound * (1.0 + 1e-14) && bound - exact < 1e-9, "{exact} {bound}");
    }
}

fn faithful(q: &QuantizedFilter, n: usize, seed: u64) -> (f64, u32) {
    let io = IoFormat::symmetric(16, -1, q).unwrap();
    let dp = size_datapath(q, None, io).unwrap();
    let lim = 1i64 << (dp.io.m_in - dp.io.l_in);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<i64> = (0..n).map(|_| rng.gen_range(-lim..lim)).collect();
    let (_, _, s) = compare_with_reference(&dp, &xs).unwrap();
    assert_eq!(s.samples, n);
    (s.max_raw_ulps, dp.guard_bits)
}

#[test]
fn random_inputs_are_rounded_faithfully() {
    let (e, g) = faithful(&lp1_4(), 20_000, 1);
    assert!(e < 1.0, "{e}");
    assert_eq!(g, 3);
    let (e, g) = faithful(&hp0(), 20_000, 2);
    assert!(e < 1.0, "{e}");
    assert_eq!(g, 7);
}

#[test]
fn extreme_inputs_are_rounded_faithfully() {
    for q in [lp1_4(), hp0()] {
        let io = IoFormat::symmetric(16, -1, &q).unwrap();
        let dp = size_datapath(&q, None, io).unwrap();
        let lim = 1i64 << (dp.io.m_in - dp.io.l_in);
        // Sign-alternating full-scale input drives the worst case of a high-gain pole.
        let xs: Vec<i64> = (0..4000).map(|n| if n % 2 == 0 { lim - 1 } else { -lim }).collect();
        let (_, _, s) = compare_with_reference(&dp, &xs).unwrap();
        assert!(s.max_raw_ulps < 1.0, "{}", s.max_raw_ulps);
        let xs = vec![-lim; 4000];
        let (_, _, s) = compare_with_reference(&dp, &xs).unwrap();
        assert!(s.max_raw_ulps < 1.0, "{}", s.max_raw_ulps);
    }
}

#[test]
fn hp0_vhdl_matches_golden_file() {
    let q = hp0();
    let dp = size_datapath(&q, None, IoFormat::symmetric(16, -1, &q).unwrap()).unwrap();
    let vhdl = emit_vhdl(&dp, "hp0_filter");
    let golden = include_str!("golden/hp0_filter.vhd");
    assert_eq!(vhdl, golden);
    assert_eq!(emit_vhdl(&dp, "hp0_filter"), vhdl);
    assert!(emit_dot(&dp).starts_with("digraph"));
}
