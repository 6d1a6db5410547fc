//! Worst-case peak gain, datapath sizing, bit-accurate simulation and RTL
//! emission for the transposed direct form II realization.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::QuantizedFilter;
use crate::mcm::{solve_mcm, AdderGraph, Operand, DEFAULT_CAP};
use crate::response::is_stable_codes;

/// Default WCPG tolerance.
pub const DEFAULT_WCPG_TOL: f64 = 1e-9;

const MAX_TERMS: usize = 1 << 20;

/// Integer recurrence of `1/A` at code scale: `n_k = h_k · U^k`.
struct Impulse {
    a1: BigInt,
    a2u: BigInt,
    prev: BigInt,
    prev2: BigInt,
    started: bool,
}

impl Impulse {
    fn new(a1: i64, a2: i64, u: i64) -> Self {
        Impulse { a1: a1.into(), a2u: BigInt::from(a2) * u, prev: BigInt::zero(), prev2: BigInt::zero(), started: false }
    }

    fn next(&mut self) -> BigInt {
        let n = if !self.started {
            self.started = true;
            BigInt::one()
        } else {
            -(&self.a1 * &self.prev) - (&self.a2u * &self.prev2)
        };
        self.prev2 = std::mem::replace(&mut self.prev, n.clone());
        n
    }
}

fn denominator_codes(q: &QuantizedFilter) -> Result<(i64, i64, u32)> {
    let e = -q.fmt_a.lsb();
    if !(0..=60).contains(&e) || !is_stable_codes(q.a1, q.a2, q.fmt_a) {
        return Err(Error::Unstable { a1: q.to_f64().0[1], a2: q.to_f64().0[2] });
    }
    Ok((q.a1, q.a2, e as u32))
}

/// Row-sum norm of the companion matrix powers `C^j`, `j < m`, and of `C^m`.
fn companion_norms(a1: f64, a2: f64, m: usize) -> (f64, f64) {
    let mut p = [[1.0, 0.0], [0.0, 1.0]];
    let c = [[-a1, -a2], [1.0, 0.0]];
    let norm = |p: &[[f64; 2]; 2]| (p[0][0].abs() + p[0][1].abs()).max(p[1][0].abs() + p[1][1].abs());
    let mut max_lower = 1.0f64;
    for j in 0..m {
        if j > 0 {
            max_lower = max_lower.max(norm(&p));
        }
        let q = p;
        for i in 0..2 {
            for k in 0..2 {
                p[i][k] = c[i][0] * q[0][k] + c[i][1] * q[1][k];
            }
        }
    }
    let safety = 1.0 + 1e-9;
    (max_lower * safety, norm(&p) * safety)
}

/// Rigorous bound on `Σ_{k≥N} |h_k|` from the state `(h_N, h_{N-1})`.
fn tail_bound(a1: f64, a2: f64, state: f64) -> f64 {
    let mut m = 1usize;
    loop {
        let (lower, cm) = companion_norms(a1, a2, m);
        if cm < 0.5 {
            return m as f64 * lower * state / (1.0 - cm);
        }
        if m > 1 << 16 {
            return f64::INFINITY;
        }
        m *= 2;
    }
}

/// Upper bound with a rigorous tail on `Σ|g_k|`, where `g = (b * h)` and `h`
/// is the impulse response of `1/A`.
fn wcpg_impl(q: &QuantizedFilter, taps: Option<[i64; 3]>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidSpec(format!("WCPG tolerance {tol} must be positive")));
    }
    let (a1, a2, e) = denominator_codes(q)?;
    let u = 1i64 << e;
    let (af1, af2) = (a1 as f64 / u as f64, a2 as f64 / u as f64);
    let (b, b_scale) = match taps {
        Some(b) => (b, -q.fmt_b.lsb()),
        None => ([1, 0, 0], 0),
    };
    let b_abs: f64 = b.iter().map(|v| v.unsigned_abs() as f64).sum::<f64>() * 2f64.powi(-b_scale);
    let mut imp = Impulse::new(a1, a2, u);
    let mut hist: Vec<BigInt> = Vec::new();
    // S_k = Σ_{j≤k} |g_j| · U^{k}, maintained in Horner form.
    let mut acc = BigInt::zero();
    let mut k = 0usize;
    let mut n_target = 64usize;
    loop {
        while k < n_target {
            let n = imp.next();
            hist.push(n);
            // g_k U^k = Σ_j b_j n_{k-j} U^j.
            let mut g = BigInt::zero();
            for (j, &bj) in b.iter().enumerate() {
                if bj != 0 && k >= j {
                    g += &hist[k - j] * BigInt::from(bj) * BigInt::from(u).pow(j as u32);
                }
            }
            acc = acc * u + g.abs();
            k += 1;
            if hist.len() > 3 {
                hist[k - 4] = BigInt::zero();
            }
        }
        let denom = BigInt::from(u).pow((k - 1) as u32);
        let partial = BigRational::new(acc.clone(), denom.clone()) * crate::fixedpoint::dyadic(1, -b_scale);
        let h_last = BigRational::new(hist[k - 1].abs(), denom.clone()).to_f64().unwrap_or(f64::INFINITY);
        let h_prev = BigRational::new(hist[k - 2].abs() * u, denom).to_f64().unwrap_or(f64::INFINITY);
        // Σ_{k≥N} |h_k| from the state (h_{N-1}, h_{N-2}); the taps reach two samples back.
        let tail = if h_last == 0.0 && h_prev == 0.0 {
            0.0
        } else {
            b_abs * (tail_bound(af1, af2, h_last.max(h_prev)) + h_last + h_prev)
        };
        if tail < tol {
            let p = partial.to_f64().unwrap_or(f64::INFINITY);
            if tail == 0.0 && BigRational::from_float(p).as_ref() == Some(&partial) {
                return Ok(p);
            }
            return Ok((p * (1.0 + 1e-15) + tail).next_up());
        }
        if n_target >= MAX_TERMS {
            return Err(Error::Model("WCPG did not converge".into()));
        }
        n_target *= 2;
    }
}

/// Upper bound on `Σ|h_k|` for `h = Z⁻¹{1/A}`, within `tol` of the true value.
pub fn wcpg_denominator(q: &QuantizedFilter, tol: f64) -> Result<f64> {
    wcpg_impl(q, None, tol)
}

/// Upper bound on `Σ|g_k|` for `g = Z⁻¹{B/A}`.
pub fn wcpg_filter(q: &QuantizedFilter, tol: f64) -> Result<f64> {
    wcpg_impl(q, Some(q.b_int()), tol)
}

/// `ceil(log2(W + 1)) + 1` for the denominator WCPG `W`.
pub fn guard_bits(q: &QuantizedFilter, tol: f64) -> Result<u32> {
    let w = wcpg_denominator(q, tol)?;
    Ok(ceil_log2(w + 1.0) as u32 + 1)
}

fn ceil_log2(x: f64) -> i32 {
    let mut e = x.log2().ceil() as i32;
    while 2f64.powi(e) < x {
        e += 1;
    }
    while e > i32::MIN + 1 && 2f64.powi(e - 1) >= x {
        e -= 1;
    }
    e
}

/// Input and output fixed-point formats (`msb` is the weight of the sign bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoFormat {
    pub m_in: i32,
    pub l_in: i32,
    pub l_out: i32,
    /// Output MSB override; the output saturates to it.
    pub m_out: Option<i32>,
}

impl IoFormat {
    /// `bits`-bit input in `[-2^m_in, 2^m_in)` and an output of the same width.
    pub fn symmetric(bits: u32, m_in: i32, q: &QuantizedFilter) -> Result<IoFormat> {
        let l_in = m_in - bits as i32 + 1;
        let w = wcpg_filter(q, DEFAULT_WCPG_TOL)?;
        let m_out = m_in + ceil_log2(w).max(0);
        Ok(IoFormat { m_in, l_in, l_out: m_out - bits as i32 + 1, m_out: None })
    }
}

/// Two's-complement format with range `[-2^msb, 2^msb - 2^lsb]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalFormat {
    pub msb: i32,
    pub lsb: i32,
}

impl SignalFormat {
    pub fn width(&self) -> u32 {
        (self.msb - self.lsb + 1) as u32
    }

    fn contains(&self, code: i128) -> bool {
        let e = (self.msb - self.lsb) as u32;
        let lim = 1i128 << e;
        (-lim..lim).contains(&code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub format: SignalFormat,
}

/// A sized TDF-II datapath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datapath {
    pub filter: QuantizedFilter,
    pub io: IoFormat,
    pub m_out: i32,
    pub l_ext: i32,
    pub guard_bits: u32,
    /// Common LSB of the accumulation chain.
    pub l_acc: i32,
    pub graph_b: AdderGraph,
    pub graph_a: AdderGraph,
    /// Multiplier-block nodes of the input (`xb_*`) and feedback (`ya_*`)
    /// graphs, taps, the state registers, the accumulator and the outputs.
    pub signals: Vec<Signal>,
    pub wcpg_filter: f64,
    pub wcpg_denominator: f64,
}

fn msb_for_abs(max_abs: f64) -> i32 {
    // Smallest m with max_abs < 2^m.
    let mut m = if max_abs > 0.0 { max_abs.log2().floor() as i32 } else { -1 };
    while 2f64.powi(m) <= max_abs {
        m += 1;
    }
    m
}

impl Datapath {
    pub fn signal(&self, name: &str) -> Option<&Signal> {
        self.signals.iter().find(|s| s.name == name)
    }

    /// Multiplier-block plus structural adders.
    pub fn adder_count(&self) -> u32 {
        self.graph_a.adder_count() + self.graph_b.adder_count() + crate::search::structural_adders(&self.filter)
    }

    pub fn y_ext_format(&self) -> SignalFormat {
        self.signal("y_ext").expect("sized datapath has y_ext").format
    }

    pub fn out_format(&self) -> SignalFormat {
        SignalFormat { msb: self.m_out, lsb: self.io.l_out }
    }

    pub fn in_format(&self) -> SignalFormat {
        SignalFormat { msb: self.io.m_in, lsb: self.io.l_in }
    }
}

/// Sizes the datapath of `q`. Graphs default to optimal multiplier blocks.
pub fn size_datapath(
    q: &QuantizedFilter,
    graphs: Option<(AdderGraph, AdderGraph)>,
    io: IoFormat,
) -> Result<Datapath> {
    if io.l_in > io.m_in {
        return Err(Error::InvalidFormat(format!("input LSB {} above MSB {}", io.l_in, io.m_in)));
    }
    let (graph_b, graph_a) = match graphs {
        Some(g) => g,
        None => (
            solve_mcm(&q.b_int(), DEFAULT_CAP)?.ok_or_else(|| Error::Model("b block exceeds the adder cap".into()))?,
            solve_mcm(&q.a_int(), DEFAULT_CAP)?.ok_or_else(|| Error::Model("a block exceeds the adder cap".into()))?,
        ),
    };
    graph_b.validate()?;
    graph_a.validate()?;
    let wd = wcpg_denominator(q, DEFAULT_WCPG_TOL)?;
    let wf = wcpg_filter(q, DEFAULT_WCPG_TOL)?;
    let g = ceil_log2(wd + 1.0) as u32 + 1;
    let l_ext = io.l_out - g as i32;
    let (lb, la) = (q.fmt_b.lsb(), q.fmt_a.lsb());
    let l_acc = (io.l_in + lb).min(l_ext + la);
    let x_max = 2f64.powi(io.m_in);
    let y_ext_max = wf * x_max + wd * 2f64.powi(l_ext);
    let m_ext = msb_for_abs(y_ext_max);
    let m_out_needed = msb_for_abs(y_ext_max + 2f64.powi(io.l_out - 1)).max(io.m_in + ceil_log2(wf).max(0));
    let m_out = io.m_out.unwrap_or(m_out_needed);
    if m_out < io.l_out {
        return Err(Error::InvalidFormat(format!("output MSB {m_out} below LSB {}", io.l_out)));
    }
    let mut signals = vec![Signal { name: "x".into(), format: SignalFormat { msb: io.m_in, lsb: io.l_in } }];
    let y_fmt = SignalFormat { msb: m_ext, lsb: l_ext };
    // Multiplier-block nodes grow exactly from their inputs.
    let node_fmts = |prefix: &str, graph: &AdderGraph, src: SignalFormat, signals: &mut Vec<Signal>| {
        let mut fmts: Vec<SignalFormat> = Vec::new();
        for (i, n) in graph.nodes.iter().enumerate() {
            let of = |op: Operand| match op {
                Operand::Input => src.msb,
                Operand::Node(j) => fmts[j].msb,
            };
            let msb = (of(n.left) + n.left_shift as i32).max(of(n.right) + n.right_shift as i32) + 1;
            let exact = src.msb + (64 - n.value.leading_zeros()) as i32;
            let f = SignalFormat { msb: msb.min(exact), lsb: src.lsb };
            fmts.push(f);
            signals.push(Signal { name: format!("{prefix}_n{i}"), format: f });
        }
    };
    node_fmts("xb", &graph_b, SignalFormat { msb: io.m_in, lsb: io.l_in }, &mut signals);
    node_fmts("ya", &graph_a, y_fmt, &mut signals);
    // Aligned tap products.
    let tap = |c: i64, src: SignalFormat, lsb: i32| -> SignalFormat {
        let m = if c == 0 { src.msb } else { src.msb + (64 - c.unsigned_abs().leading_zeros()) as i32 + lsb };
        SignalFormat { msb: m, lsb: l_acc }
    };
    let b = q.b_int();
    let a = q.a_int();
    let bt: Vec<SignalFormat> = b.iter().map(|&c| tap(c, signals[0].format, lb)).collect();
    let at: Vec<SignalFormat> = a.iter().map(|&c| tap(c, y_fmt, la)).collect();
    for k in 0..3 {
        signals.push(Signal { name: format!("bx{k}"), format: bt[k] });
    }
    for k in 0..2 {
        signals.push(Signal { name: format!("ay{}", k + 1), format: at[k] });
    }
    let grow = |xs: &[(i64, SignalFormat)]| -> Option<SignalFormat> {
        let live: Vec<SignalFormat> = xs.iter().filter(|(c, _)| *c != 0).map(|(_, f)| *f).collect();
        let m = live.iter().map(|f| f.msb).max()?;
        Some(SignalFormat { msb: m + live.len() as i32 - 1, lsb: l_acc })
    };
    let s2 = grow(&[(b[2], bt[2]), (a[1], at[1])]);
    let s1_inputs: Vec<(i64, SignalFormat)> = [(b[1], bt[1]), (a[0], at[0])]
        .into_iter()
        .chain(s2.map(|f| (1, f)))
        .collect();
    let s1 = grow(&s1_inputs);
    let t_inputs: Vec<(i64, SignalFormat)> = [(b[0], bt[0])].into_iter().chain(s1.map(|f| (1, f))).collect();
    let t = grow(&t_inputs).unwrap_or(SignalFormat { msb: l_acc, lsb: l_acc });
    if let Some(f) = s2 {
        signals.push(Signal { name: "s2".into(), format: f });
    }
    if let Some(f) = s1 {
        signals.push(Signal { name: "s1".into(), format: f });
    }
    signals.push(Signal { name: "t".into(), format: t });
    signals.push(Signal { name: "y_ext".into(), format: y_fmt });
    signals.push(Signal { name: "y".into(), format: SignalFormat { msb: m_out, lsb: io.l_out } });
    Ok(Datapath {
        filter: *q,
        io,
        m_out,
        l_ext,
        guard_bits: g,
        l_acc,
        graph_b,
        graph_a,
        signals,
        wcpg_filter: wf,
        wcpg_denominator: wd,
    })
}

fn check(dp: &Datapath, name: &str, code: i128, sample: usize) -> Result<()> {
    match dp.signal(name) {
        Some(s) if !s.format.contains(code) => Err(Error::Overflow { signal: name.to_string(), sample }),
        _ => Ok(()),
    }
}

fn node_values(graph: &AdderGraph, x: i128) -> Vec<i128> {
    let mut vals: Vec<i128> = Vec::with_capacity(graph.nodes.len());
    for n in &graph.nodes {
        let get = |op: Operand| match op {
            Operand::Input => x,
            Operand::Node(i) => vals[i],
        };
        let raw = (get(n.left) << n.left_shift) + n.right_sign as i128 * (get(n.right) << n.right_shift);
        let full = |op: Operand| match op {
            Operand::Input => 1i128,
            Operand::Node(i) => graph.nodes[i].value as i128,
        };
        let f = (full(n.left) << n.left_shift) + n.right_sign as i128 * (full(n.right) << n.right_shift);
        let sh = f.unsigned_abs().trailing_zeros();
        vals.push(if f < 0 { -(raw >> sh) } else { raw >> sh });
    }
    vals
}

fn tap_value(graph: &AdderGraph, vals: &[i128], x: i128, c: i64) -> Result<i128> {
    if c == 0 {
        return Ok(0);
    }
    let t = graph
        .targets
        .iter()
        .find(|t| t.constant == c)
        .ok_or_else(|| Error::InvalidGraph(format!("graph does not realize {c}")))?;
    let v = match t.source {
        Operand::Input => x,
        Operand::Node(i) => vals[i],
    };
    Ok(t.sign as i128 * (v << t.output_shift))
}

/// Cycle-accurate simulation. Inputs and outputs are integer codes at
/// `l_in` and `l_out`.
pub fn simulate_fixed(dp: &Datapath, inputs: &[i64]) -> Result<Vec<i64>> {
    let q = &dp.filter;
    let (b, a) = (q.b_int(), q.a_int());
    let sh_b = (dp.io.l_in + q.fmt_b.lsb() - dp.l_acc) as u32;
    let sh_a = (dp.l_ext + q.fmt_a.lsb() - dp.l_acc) as u32;
    let sh_y = (dp.l_ext - dp.l_acc) as u32;
    let g = dp.guard_bits;
    let out = dp.out_format();
    let lim = 1i128 << (out.msb - out.lsb) as u32;
    let (mut s1, mut s2) = (0i128, 0i128);
    let mut ys = Vec::with_capacity(inputs.len());
    for (n, &x) in inputs.iter().enumerate() {
        let x = x as i128;
        if !dp.in_format().contains(x) {
            return Err(Error::InputRange { index: n, value: x as i64 });
        }
        let xv = node_values(&dp.graph_b, x);
        for (i, v) in xv.iter().enumerate() {
            check(dp, &format!("xb_n{i}"), *v, n)?;
        }
        let bx: Vec<i128> = (0..3).map(|k| tap_value(&dp.graph_b, &xv, x, b[k]).map(|v| v << sh_b)).collect::<Result<_>>()?;
        for k in 0..3 {
            check(dp, &format!("bx{k}"), bx[k], n)?;
        }
        let t = bx[0] + s1;
        check(dp, "t", t, n)?;
        let y_ext = t >> sh_y;
        check(dp, "y_ext", y_ext, n)?;
        let yv = node_values(&dp.graph_a, y_ext);
        for (i, v) in yv.iter().enumerate() {
            check(dp, &format!("ya_n{i}"), *v, n)?;
        }
        let ay: Vec<i128> = (0..2).map(|k| tap_value(&dp.graph_a, &yv, y_ext, a[k]).map(|v| v << sh_a)).collect::<Result<_>>()?;
        check(dp, "ay1", ay[0], n)?;
        check(dp, "ay2", ay[1], n)?;
        let new_s2 = bx[2] - ay[1];
        let new_s1 = bx[1] - ay[0] + s2;
        check(dp, "s2", new_s2, n)?;
        check(dp, "s1", new_s1, n)?;
        s1 = new_s1;
        s2 = new_s2;
        let mut y = (y_ext + (1i128 << (g - 1))) >> g;
        if dp.io.m_out.is_some() {
            y = y.clamp(-lim, lim - 1);
        } else if !out.contains(y) {
            return Err(Error::Overflow { signal: "y".into(), sample: n });
        }
        ys.push(y as i64);
    }
    Ok(ys)
}

/// Exact reference recurrence, streamed. `Y_n = y_n · 2^{e n - (l_in + lsb_b)}`.
pub struct Reference {
    b: [BigInt; 3],
    a1: BigInt,
    a2u: BigInt,
    e: u32,
    l_base: i32,
    x: [i64; 3],
    y: [BigInt; 2],
    n: u32,
}

impl Reference {
    pub fn new(q: &QuantizedFilter, l_in: i32) -> Result<Self> {
        let (a1, a2, e) = denominator_codes(q)?;
        Ok(Reference {
            b: q.b_int().map(BigInt::from),
            a1: a1.into(),
            a2u: BigInt::from(a2) << e,
            e,
            l_base: l_in + q.fmt_b.lsb(),
            x: [0; 3],
            y: [BigInt::zero(), BigInt::zero()],
            n: 0,
        })
    }

    /// Advances by one input code; returns `(Y_n, exponent)` with
    /// `y_n = Y_n · 2^exponent`.
    pub fn step(&mut self, x: i64) -> (BigInt, i64) {
        self.x = [x, self.x[0], self.x[1]];
        let fir: BigInt = self.b.iter().zip(self.x).map(|(b, x)| b * x).sum();
        let y = (fir << (self.e as u64 * self.n as u64)) - &self.a1 * &self.y[0] - &self.a2u * &self.y[1];
        self.y = [y.clone(), std::mem::take(&mut self.y[0])];
        let exp = self.l_base as i64 - self.e as i64 * self.n as i64;
        self.n += 1;
        (y, exp)
    }
}

/// Exact output sequence for `inputs` (codes at `l_in`).
pub fn simulate_reference(q: &QuantizedFilter, inputs: &[i64], l_in: i32) -> Result<Vec<BigRational>> {
    let mut r = Reference::new(q, l_in)?;
    Ok(inputs
        .iter()
        .map(|&x| {
            let (y, e) = r.step(x);
            scaled(y, e)
        })
        .collect())
}

fn scaled(v: BigInt, e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(v << e as u64)
    } else {
        BigRational::new(v, BigInt::one() << (-e) as u64)
    }
}

/// Error of one output sample against the exact reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleError {
    /// `(fixed - reference) / 2^l_out`.
    pub raw_ulps: f64,
    /// `fixed - round(reference)` in output codes.
    pub rounded_ulps: i64,
    pub reference: f64,
}

/// Compares an output code with `Y · 2^e` at LSB `l_out`.
pub fn sample_error(y_fixed: i64, y_ref: &BigInt, e: i64, l_out: i32) -> SampleError {
    // diff · 2^{min} with both sides brought to a common exponent.
    let lo = e.min(l_out as i64);
    let f = BigInt::from(y_fixed) << (l_out as i64 - lo) as u64;
    let r = y_ref.clone() << (e - lo) as u64;
    let diff = f - &r;
    let to_ulps = |v: &BigInt, shift: i64| -> f64 {
        // v · 2^{lo - l_out}
        let bits = v.bits() as i64;
        let drop = (bits - 60).max(0);
        let m = (v >> drop as u64).to_f64().unwrap_or(0.0);
        m * 2f64.powi((drop + shift) as i32)
    };
    let raw = to_ulps(&diff, lo - l_out as i64);
    // round(reference / 2^l_out) = floor(r · 2^{lo - l_out} + 1/2).
    let k = l_out as i64 - lo;
    let rounded = if k == 0 { r.clone() } else { (r.clone() + (BigInt::one() << (k - 1) as u64)) >> k as u64 };
    let rounded_ulps = (BigInt::from(y_fixed) - rounded).to_i64().unwrap_or(i64::MAX);
    let reference = to_ulps(&r, lo - l_out as i64);
    SampleError { raw_ulps: raw, rounded_ulps, reference }
}

/// Summary of a fixed-versus-reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub samples: usize,
    pub max_raw_ulps: f64,
    pub max_rounded_ulps: i64,
}

/// One trace row per sample, plus the summary.
pub fn compare_with_reference(dp: &Datapath, inputs: &[i64]) -> Result<(Vec<i64>, Vec<SampleError>, ErrorSummary)> {
    let ys = simulate_fixed(dp, inputs)?;
    let mut r = Reference::new(&dp.filter, dp.io.l_in)?;
    let mut errs = Vec::with_capacity(inputs.len());
    let mut s = ErrorSummary { samples: inputs.len(), max_raw_ulps: 0.0, max_rounded_ulps: 0 };
    for (&x, &y) in inputs.iter().zip(&ys) {
        let (yr, e) = r.step(x);
        let err = sample_error(y, &yr, e, dp.io.l_out);
        s.max_raw_ulps = s.max_raw_ulps.max(err.raw_ulps.abs());
        s.max_rounded_ulps = s.max_rounded_ulps.max(err.rounded_ulps.abs());
        errs.push(err);
    }
    Ok((ys, errs, s))
}

/// CSV with columns `n,x,y_fixed,y_reference,error_ulps` (values in codes).
pub fn trace_csv(inputs: &[i64], outputs: &[i64], errors: &[SampleError]) -> String {
    let mut out = String::from("n,x,y_fixed,y_reference,error_ulps\n");
    for (n, ((x, y), e)) in inputs.iter().zip(outputs).zip(errors).enumerate() {
        let _ = writeln!(out, "{n},{x},{y},{},{}", e.reference, e.raw_ulps);
    }
    out
}

fn vhdl_operand(prefix: &str, op: Operand) -> String {
    match op {
        Operand::Input => if prefix == "xb" { "x".to_string() } else { "y_ext".to_string() },
        Operand::Node(i) => format!("{prefix}_n{i}"),
    }
}

fn vhdl_resized(name: &str, width: u32, shift: u32) -> String {
    if shift == 0 {
        format!("resize({name}, {width})")
    } else {
        format!("shift_left(resize({name}, {width}), {shift})")
    }
}

/// Synthesizable VHDL entity for the datapath.
pub fn emit_vhdl(dp: &Datapath, entity: &str) -> String {
    let mut o = String::new();
    let win = dp.in_format().width();
    let wout = dp.out_format().width();
    let q = &dp.filter;
    let _ = writeln!(o, "-- {entity}: b' = {:?} (lsb {}), a' = {:?} (lsb {})", q.b_int(), q.fmt_b.lsb(), q.a_int(), q.fmt_a.lsb());
    let _ = writeln!(o, "-- input  lsb {} msb {}; output lsb {} msb {}; l_ext {} (G = {})", dp.io.l_in, dp.io.m_in, dp.io.l_out, dp.m_out, dp.l_ext, dp.guard_bits);
    o.push_str("library ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\n\n");
    let _ = writeln!(o, "entity {entity} is\n  port (\n    clk   : in  std_logic;\n    rst   : in  std_logic;");
    let _ = writeln!(o, "    x_in  : in  std_logic_vector({} downto 0);\n    y_out : out std_logic_vector({} downto 0)\n  );\nend entity;\n", win - 1, wout - 1);
    let _ = writeln!(o, "architecture rtl of {entity} is");
    for s in &dp.signals {
        let _ = writeln!(o, "  signal {} : signed({} downto 0);", s.name, s.format.width() - 1);
    }
    o.push_str("begin\n  x <= signed(x_in);\n");
    let width = |n: &str| dp.signal(n).map_or(1, |s| s.format.width());
    for (prefix, graph) in [("xb", &dp.graph_b), ("ya", &dp.graph_a)] {
        for (i, n) in graph.nodes.iter().enumerate() {
            let name = format!("{prefix}_n{i}");
            let opw = |op: Operand| width(&vhdl_operand(prefix, op));
            let w = (opw(n.left) + n.left_shift).max(opw(n.right) + n.right_shift).max(width(&name) + 16) + 1;
            let l = vhdl_resized(&vhdl_operand(prefix, n.left), w, n.left_shift);
            let r = vhdl_resized(&vhdl_operand(prefix, n.right), w, n.right_shift);
            let full = |op: Operand| match op {
                Operand::Input => 1i128,
                Operand::Node(j) => graph.nodes[j].value as i128,
            };
            let f = (full(n.left) << n.left_shift) + n.right_sign as i128 * (full(n.right) << n.right_shift);
            let sh = f.unsigned_abs().trailing_zeros();
            let op = if n.right_sign < 0 { "-" } else { "+" };
            let expr = format!("shift_right({l} {op} {r}, {sh})");
            let expr = if f < 0 { format!("-({expr})") } else { expr };
            let _ = writeln!(o, "  {name} <= resize({expr}, {});", width(&name));
        }
    }
    let taps = |prefix: &str, graph: &AdderGraph, c: i64, target: &str, extra: u32| -> String {
        let w = width(target);
        match graph.targets.iter().find(|t| t.constant == c) {
            Some(t) if c != 0 => {
                let src = vhdl_operand(prefix, t.source);
                let e = vhdl_resized(&src, w, t.output_shift + extra);
                if t.sign < 0 { format!("  {target} <= -({e});") } else { format!("  {target} <= {e};") }
            }
            _ => format!("  {target} <= (others => '0');"),
        }
    };
    let sh_b = (dp.io.l_in + q.fmt_b.lsb() - dp.l_acc) as u32;
    let sh_a = (dp.l_ext + q.fmt_a.lsb() - dp.l_acc) as u32;
    for (k, &c) in q.b_int().iter().enumerate() {
        let _ = writeln!(o, "{}", taps("xb", &dp.graph_b, c, &format!("bx{k}"), sh_b));
    }
    for (k, &c) in q.a_int().iter().enumerate() {
        let _ = writeln!(o, "{}", taps("ya", &dp.graph_a, c, &format!("ay{}", k + 1), sh_a));
    }
    let wt = width("t");
    let s1 = if dp.signal("s1").is_some() { format!(" + resize(s1, {wt})") } else { String::new() };
    let _ = writeln!(o, "  t <= resize(bx0, {wt}){s1};");
    let sh_y = (dp.l_ext - dp.l_acc) as u32;
    let _ = writeln!(o, "  y_ext <= resize(shift_right(t, {sh_y}), {});", width("y_ext"));
    let wy = width("y_ext") + 1;
    let _ = writeln!(
        o,
        "  y <= resize(shift_right(resize(y_ext, {wy}) + to_signed({}, {wy}), {}), {});",
        1u64 << (dp.guard_bits - 1),
        dp.guard_bits,
        width("y")
    );
    o.push_str("  y_out <= std_logic_vector(y);\n\n  process (clk)\n  begin\n    if rising_edge(clk) then\n      if rst = '1' then\n");
    for s in ["s1", "s2"] {
        if dp.signal(s).is_some() {
            let _ = writeln!(o, "        {s} <= (others => '0');");
        }
    }
    o.push_str("      else\n");
    if let Some(s) = dp.signal("s2") {
        let w = s.format.width();
        let _ = writeln!(o, "        s2 <= resize(bx2, {w}) - resize(ay2, {w});");
    }
    if let Some(s) = dp.signal("s1") {
        let w = s.format.width();
        let s2 = if dp.signal("s2").is_some() { format!(" + resize(s2, {w})") } else { String::new() };
        let _ = writeln!(o, "        s1 <= resize(bx1, {w}) - resize(ay1, {w}){s2};");
    }
    o.push_str("      end if;\n    end if;\n  end process;\nend architecture;\n");
    o
}

/// DOT rendering of the two multiplier blocks.
pub fn emit_dot(dp: &Datapath) -> String {
    crate::mcm::emit_dot(&[("b (input)", &dp.graph_b), ("a (feedback)", &dp.graph_a)])
}
