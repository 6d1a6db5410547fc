//! Enumeration core: stable denominators in cost order, numerators by
//! geometric windows, exact grid checks and exact adder costs.

use std::cmp::Ordering as Cmp;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::time::Instant;

use parking_lot::Mutex;
use rayon::prelude::*;

use super::{DesignProblem, DesignResult, SearchStats, Status};
use crate::error::{Error, Result};
use crate::fixedpoint::{integer_range, CoefficientFormat, QuantizedFilter};
use crate::mcm::{fundamentals_of, solve_mcm_with, AdderGraph, McmCache};
use crate::response::{compare_forms, is_stable_codes, satisfies_grid, Quad};

/// Screening frequencies used to derive enumeration windows.
const SCREEN_POINTS: usize = 48;
/// Relative inflation applied to screening envelopes.
const REL: f64 = 1e-9;
/// Absolute inflation (code units).
const ABS: f64 = 1e-7;
/// Relative error bound under which a float comparison is re-done exactly.
const EXACT_MARGIN: f64 = 1e-12;
/// Denominator pairs handed to the worker pool at once.
const BATCH: usize = 64;

/// A grid-feasible filter found by [`enumerate_feasible`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleFilter {
    pub filter: QuantizedFilter,
}

struct Prepared {
    c1: Vec<f64>,
    c2: Vec<f64>,
    lo2: Vec<f64>,
    hi2: Vec<f64>,
    screen: Vec<usize>,
    sin2: Vec<f64>,
    has_lower: bool,
}

impl Prepared {
    fn new(p: &DesignProblem) -> Self {
        let pts = &p.grid.points;
        let (c1, c2): (Vec<f64>, Vec<f64>) = pts.iter().map(|q| q.cosines()).unzip();
        let lo2: Vec<f64> = pts.iter().map(|q| q.beta_lo_sq).collect();
        let hi2: Vec<f64> = pts.iter().map(|q| q.beta_hi_sq).collect();
        let mut screen: Vec<usize> = Vec::new();
        let edges: Vec<f64> = p.spec.bands.iter().flat_map(|b| [b.omega_lo, b.omega_hi]).collect();
        for (i, q) in pts.iter().enumerate() {
            if edges.contains(&q.omega) {
                screen.push(i);
            }
        }
        let n = pts.len();
        let extra = SCREEN_POINTS.saturating_sub(screen.len()).max(2);
        for k in 0..extra {
            screen.push(if extra > 1 { k * (n - 1) / (extra - 1) } else { 0 });
        }
        screen.sort_unstable_by(|&x, &y| pts[x].omega.total_cmp(&pts[y].omega).then(x.cmp(&y)));
        screen.dedup();
        let sin2 = c1.iter().map(|c| if c.abs() == 1.0 { 0.0 } else { 1.0 - c * c }).collect();
        let has_lower = lo2.iter().any(|&v| v > 0.0);
        Prepared { c1, c2, lo2, hi2, screen, sin2, has_lower }
    }
}

/// Per-denominator data in real units.
struct ACtx {
    g_a: i32,
    aq: Quad,
    /// `|A|²` at screening points (real units).
    den: Vec<f64>,
    s_max: f64,
    g_lo: i32,
    g_hi: i32,
}

fn nnz(v: &[i64]) -> u32 {
    v.iter().filter(|&&x| x != 0).count() as u32
}

struct Engine<'a> {
    p: &'a DesignProblem,
    prep: Prepared,
    cache: McmCache,
    scm: Vec<u8>,
    stats: Stats,
    deadline: Option<Instant>,
    timed_out: AtomicBool,
}

#[derive(Default)]
struct Stats {
    a_pairs: AtomicU64,
    a_visited: AtomicU64,
    windows: AtomicU64,
    checked: AtomicU64,
    feasible: AtomicU64,
    pruned: AtomicU64,
}

impl Stats {
    fn snapshot(&self) -> SearchStats {
        SearchStats {
            a_pairs: self.a_pairs.load(Ordering::Relaxed),
            a_pairs_visited: self.a_visited.load(Ordering::Relaxed),
            b_windows: self.windows.load(Ordering::Relaxed),
            candidates_checked: self.checked.load(Ordering::Relaxed),
            grid_feasible: self.feasible.load(Ordering::Relaxed),
            pruned_by_cost: self.pruned.load(Ordering::Relaxed),
        }
    }
}

/// Ranking of a candidate: total cost, then more zeros, then smaller
/// magnitudes, then lexicographic codes and MSBs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    total: u32,
    nonzeros: u32,
    magnitude: i64,
    codes: [i64; 5],
    msbs: [i32; 2],
}

#[derive(Debug, Clone, Copy)]
struct Best {
    key: Key,
    filter: QuantizedFilter,
}

fn key_of(q: &QuantizedFilter, total: u32) -> Key {
    let codes = [q.a1, q.a2, q.b0, q.b1, q.b2];
    Key {
        total,
        nonzeros: nnz(&codes),
        magnitude: codes.iter().map(|v| v.abs()).sum(),
        codes,
        msbs: [q.fmt_a.g, q.fmt_b.g],
    }
}

impl<'a> Engine<'a> {
    fn new(p: &'a DesignProblem) -> Self {
        let cache = McmCache::new(p.options.mcm_cap, p.options.max_bits_slack);
        let half = 1usize << (p.w - 1).min(16);
        let scm = (0..=half)
            .map(|v| {
                if v % 2 == 0 {
                    0
                } else {
                    cache.cost_within(fundamentals_of(&[v as i64]), u32::MAX).map_or(u8::MAX, |c| c as u8)
                }
            })
            .collect();
        Engine {
            p,
            prep: Prepared::new(p),
            cache,
            scm,
            stats: Stats::default(),
            deadline: p.options.time_limit.map(|t| Instant::now() + t),
            timed_out: AtomicBool::new(false),
        }
    }

    fn fmt(&self, g: i32) -> CoefficientFormat {
        CoefficientFormat { w: self.p.w, g }
    }

    /// Single-constant cost of `v`.
    fn scm(&self, v: i64) -> u32 {
        if v == 0 {
            return 0;
        }
        let m = v.unsigned_abs();
        let odd = m >> m.trailing_zeros();
        match self.scm.get(odd as usize) {
            Some(&c) => c as u32,
            None => self.cache.cost_within(vec![odd], u32::MAX).unwrap_or(u32::MAX),
        }
    }

    /// Lower bound on the multiplier-block adders for `values`.
    fn mcm_lb(&self, values: &[i64]) -> u32 {
        let f = fundamentals_of(values);
        let single = values.iter().map(|&v| self.scm(v)).max().unwrap_or(0);
        single.max(f.len() as u32)
    }

    fn out_of_time(&self) -> bool {
        if self.timed_out.load(Ordering::Relaxed) {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out.store(true, Ordering::Relaxed);
            return true;
        }
        false
    }

    /// Stable denominators, excluding codes that duplicate a higher MSB.
    fn a_pairs(&self) -> Vec<(u32, i32, [i64; 2])> {
        let (ga_lo, ga_hi) = self.p.options.g_a_range;
        let mut out = Vec::new();
        for g_a in (ga_lo..=ga_hi).rev() {
            let fmt = self.fmt(g_a);
            if -fmt.lsb() < 0 {
                continue;
            }
            let ((l1, h1), (l2, h2)) = crate::bounds::a_code_ranges(fmt);
            for a1 in l1..=h1 {
                for a2 in l2..=h2 {
                    if !is_stable_codes(a1, a2, fmt) {
                        continue;
                    }
                    if g_a < ga_hi && a1 % 2 == 0 && a2 % 2 == 0 {
                        continue;
                    }
                    let lb = self.mcm_lb(&[a1, a2]) + nnz(&[a1, a2]);
                    out.push((lb, g_a, [a1, a2]));
                }
            }
        }
        out.sort_by_key(|&(lb, g_a, a)| (lb, -g_a, a[0].abs() + a[1].abs(), a));
        out
    }

    fn a_ctx(&self, g_a: i32, a: [i64; 2]) -> Option<ACtx> {
        let fmt = self.fmt(g_a);
        let e = -fmt.lsb();
        let aq = Quad::from_taps([1i64 << e, a[0], a[1]]);
        let scale = 4f64.powi(-e);
        let pr = &self.prep;
        let den: Vec<f64> = pr.screen.iter().map(|&i| aq.eval(pr.c1[i], pr.c2[i]).max(0.0) * scale).collect();
        let h: Vec<f64> = pr.screen.iter().zip(&den).map(|(&i, d)| (pr.hi2[i] * d).sqrt()).collect();
        let mut s_max = f64::INFINITY;
        for x in 0..pr.screen.len() {
            for y in x + 1..pr.screen.len() {
                let dc = (pr.c1[pr.screen[x]] - pr.c1[pr.screen[y]]).abs();
                if dc > 1e-6 {
                    s_max = s_max.min((h[x] + h[y]) / dc);
                }
            }
        }
        let mut d_max = f64::INFINITY;
        let mut b1_max = f64::INFINITY;
        let mut m = 0.0f64;
        for (k, &i) in pr.screen.iter().enumerate() {
            if pr.sin2[i] > 0.0 {
                d_max = d_max.min(h[k] / pr.sin2[i].sqrt());
            }
            b1_max = b1_max.min(h[k] + s_max * pr.c1[i].abs());
            m = m.max((pr.lo2[i] * den[k]).sqrt() / 3.0);
        }
        let bbox = ((s_max + d_max) / 2.0).max(b1_max) * (1.0 + 1e-6) + 1e-12;
        if !bbox.is_finite() {
            return None;
        }
        let (gb_lo, gb_hi) = self.p.g_b_range;
        let g_hi = gb_hi.min(bbox.log2().floor() as i32 + 1);
        let g_lo = if m > 0.0 { gb_lo.max((m * (1.0 - 1e-6)).log2().ceil() as i32) } else { gb_lo };
        if g_lo > g_hi {
            return None;
        }
        Some(ACtx { g_a, aq, den, s_max, g_lo, g_hi })
    }

    /// Enumerates every `b` in the window of `(ctx, g_b)` that passes the
    /// screening constraints and the budget test, calling `visit`.
    fn windows<F>(&self, ctx: &ACtx, g_b: i32, budget: &dyn Fn() -> Option<u32>, mut visit: F)
    where
        F: FnMut([i64; 3]),
    {
        self.stats.windows.fetch_add(1, Ordering::Relaxed);
        let pr = &self.prep;
        let w = self.p.w;
        let half = 1i64 << (w - 1);
        let sig = 2f64.powi(-self.fmt(g_b).lsb());
        let sig2 = sig * sig;
        let k_n = pr.screen.len();
        let mut hh = Vec::with_capacity(k_n);
        let mut ll = Vec::with_capacity(k_n);
        let mut rh = Vec::with_capacity(k_n);
        let mut cc = Vec::with_capacity(k_n);
        let mut ss = Vec::with_capacity(k_n);
        let mut annuli: Vec<(f64, f64, f64)> = Vec::new();
        for (k, &i) in pr.screen.iter().enumerate() {
            let h = pr.hi2[i] * ctx.den[k] * sig2 * (1.0 + REL) + ABS;
            let l = pr.lo2[i] * ctx.den[k] * sig2 * (1.0 - REL) - ABS;
            hh.push(h);
            ll.push(l);
            rh.push(h.sqrt());
            cc.push(pr.c1[i]);
            ss.push(pr.sin2[i]);
            if pr.sin2[i] == 0.0 {
                annuli.push((pr.c1[i], l.max(0.0).sqrt(), h.sqrt()));
            }
        }
        let sbc = self.p.options.use_sbc;
        // Under SBC the window runs one code past the top of the range; such
        // candidates are replaced by a representable orbit member, so filters
        // whose Σ₁ image needs the code 2^(w-1) are not lost.
        let top = if sbc { half } else { half - 1 };
        let s_cap = (2 * top) as f64;
        let s_hi = (ctx.s_max * sig * (1.0 + REL) + ABS).floor().min(s_cap);
        let s_lo = if self.p.options.use_sbc { 0.0 } else { (-s_hi).max(-(2 * half) as f64) };
        if s_hi < s_lo {
            return;
        }
        // With both ω = 0 and ω = 1 on the grid, s = ((s + b1) - (b1 - s)) / 2
        // lies in a union of at most four intervals.
        let mut ranges: Vec<(i64, i64)> = Vec::new();
        let p0 = annuli.iter().find(|a| a.0 == 1.0);
        let p1 = annuli.iter().find(|a| a.0 == -1.0);
        if let (Some(&(_, l0, h0)), Some(&(_, l1, h1))) = (p0, p1) {
            for su in [1.0, -1.0] {
                for sv in [1.0, -1.0] {
                    let (u_lo, u_hi) = if su > 0.0 { (l0, h0) } else { (-h0, -l0) };
                    let (v_lo, v_hi) = if sv > 0.0 { (l1, h1) } else { (-h1, -l1) };
                    let lo = ((u_lo - v_hi) / 2.0 - ABS).ceil().max(s_lo);
                    let hi = ((u_hi - v_lo) / 2.0 + ABS).floor().min(s_hi);
                    if lo <= hi {
                        ranges.push((lo as i64, hi as i64));
                    }
                }
            }
            ranges.sort_unstable();
            let mut merged: Vec<(i64, i64)> = Vec::new();
            for r in ranges {
                match merged.last_mut() {
                    Some(last) if r.0 <= last.1 + 1 => last.1 = last.1.max(r.1),
                    _ => merged.push(r),
                }
            }
            ranges = merged;
        } else {
            ranges.push((s_lo as i64, s_hi as i64));
        }
        let dedup = g_b < ctx.g_hi;
        for (r_lo, r_hi) in ranges {
            for s in r_lo..=r_hi {
                if self.out_of_time() {
                    return;
                }
                let sf = s as f64;
                let mut lo = -(half as f64);
                let mut hi = top as f64;
                for k in 0..k_n {
                    let center = -sf * cc[k];
                    lo = lo.max(center - rh[k]);
                    hi = hi.min(center + rh[k]);
                    if lo > hi {
                        break;
                    }
                }
                if lo > hi {
                    continue;
                }
                let (b1_lo, b1_hi) = (lo.ceil() as i64, hi.floor() as i64);
                for b1 in b1_lo..=b1_hi {
                    let r = budget();
                    if let Some(r) = r {
                        if self.scm(b1) > r {
                            self.stats.pruned.fetch_add(1, Ordering::Relaxed);
                            continue;
                        }
                    }
                    let b1f = b1 as f64;
                    let mut dlo2 = 0.0f64;
                    let mut dhi2 = f64::INFINITY;
                    let mut ok = true;
                    for k in 0..k_n {
                        let t = sf * cc[k] + b1f;
                        let t2 = t * t;
                        if ss[k] == 0.0 {
                            if t2 > hh[k] || t2 < ll[k] {
                                ok = false;
                                break;
                            }
                        } else {
                            dhi2 = dhi2.min((hh[k] - t2) / ss[k]);
                            if ll[k] > 0.0 {
                                dlo2 = dlo2.max((ll[k] - t2) / ss[k]);
                            }
                            if dhi2 < dlo2 || dhi2 < 0.0 {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let d_hi = dhi2.sqrt().floor().min((4 * half) as f64) as i64;
                    let d_lo = ((dlo2.sqrt() - 1e-6).ceil().max(0.0)) as i64;
                    // Code ranges: b0 = (s + d) / 2 and b2 = (s - d) / 2.
                    let d_max_codes = (2 * top - s).min(s + 2 * half);
                    let d_min_codes = (-2 * half - s).max(s - 2 * top);
                    let mut emit = |d: i64| {
                        if d < d_min_codes || d > d_max_codes || (d - s).rem_euclid(2) != 0 {
                            return;
                        }
                        let mut b = [(s + d) / 2, b1, (s - d) / 2];
                        if b == [0, 0, 0] {
                            return;
                        }
                        if b.contains(&half) {
                            let Some(m) = [[-b[0], -b[1], -b[2]], [-b[2], -b[1], -b[0]]]
                                .into_iter()
                                .find(|t| t.iter().all(|v| (-half..half).contains(v)))
                            else {
                                return;
                            };
                            b = m;
                        }
                        if dedup && b.iter().all(|v| v % 2 == 0) {
                            return;
                        }
                        visit(b);
                    };
                    let start = d_lo + (d_lo - s).rem_euclid(2);
                    let mut d = start;
                    while d <= d_hi {
                        emit(d);
                        if !sbc && d != 0 {
                            emit(-d);
                        }
                        d += 2;
                    }
                }
            }
        }
    }

    /// Exact test of `b` against every grid point.
    fn grid_ok(&self, ctx: &ACtx, g_b: i32, b: [i64; 3], den_full: &[f64], den_abs: &[f64], last_fail: &mut usize) -> bool {
        self.stats.checked.fetch_add(1, Ordering::Relaxed);
        let pr = &self.prep;
        let bq = Quad::from_taps(b);
        let scale_exp = 2 * (self.fmt(ctx.g_a).lsb() - self.fmt(g_b).lsb());
        let s = 2f64.powi(scale_exp);
        let n = pr.c1.len();
        let check = |i: usize| -> bool {
            let (c1, c2) = (pr.c1[i], pr.c2[i]);
            let bv = bq.eval(c1, c2);
            let babs = bq.abs_sum(c1, c2);
            let av = den_full[i] * s;
            let aabs = den_abs[i] * s;
            let r = pr.hi2[i] * av;
            let err = EXACT_MARGIN * (babs + pr.hi2[i] * aabs) + f64::MIN_POSITIVE;
            if bv - r > err {
                return false;
            }
            if r - bv <= err && compare_forms(&bq, &ctx.aq, pr.hi2[i], scale_exp, c1, c2) == Cmp::Greater {
                return false;
            }
            if pr.lo2[i] > 0.0 {
                let r = pr.lo2[i] * av;
                let err = EXACT_MARGIN * (babs + pr.lo2[i] * aabs) + f64::MIN_POSITIVE;
                if r - bv > err {
                    return false;
                }
                if bv - r <= err && compare_forms(&bq, &ctx.aq, pr.lo2[i], scale_exp, c1, c2) == Cmp::Less {
                    return false;
                }
            }
            true
        };
        if *last_fail < n && !check(*last_fail) {
            return false;
        }
        for i in 0..n {
            if !check(i) {
                *last_fail = i;
                return false;
            }
        }
        true
    }

    fn den_full(&self, ctx: &ACtx) -> (Vec<f64>, Vec<f64>) {
        let pr = &self.prep;
        let v = (0..pr.c1.len()).map(|i| ctx.aq.eval(pr.c1[i], pr.c2[i])).collect();
        let a = (0..pr.c1.len()).map(|i| ctx.aq.abs_sum(pr.c1[i], pr.c2[i])).collect();
        (v, a)
    }

    fn filter(&self, g_a: i32, a: [i64; 2], g_b: i32, b: [i64; 3]) -> QuantizedFilter {
        QuantizedFilter { a1: a[0], a2: a[1], b0: b[0], b1: b[1], b2: b[2], fmt_a: self.fmt(g_a), fmt_b: self.fmt(g_b) }
    }

    /// Brings a known filter into the canonical representation used by the enumeration.
    fn canonical_seed(&self, q: &QuantizedFilter) -> Option<QuantizedFilter> {
        if q.w() != self.p.w {
            return None;
        }
        let (ga_lo, ga_hi) = self.p.options.g_a_range;
        let (mut g_a, mut a) = (q.fmt_a.g, q.a_int());
        while g_a < ga_hi && a.iter().all(|v| v % 2 == 0) {
            a = a.map(|v| v / 2);
            g_a += 1;
        }
        if g_a < ga_lo || g_a > ga_hi || !is_stable_codes(a[0], a[1], self.fmt(g_a)) {
            return None;
        }
        let ctx = self.a_ctx(g_a, a)?;
        let (mut g_b, mut b) = (q.fmt_b.g, q.b_int());
        while g_b > ctx.g_hi {
            b = b.map(|v| v * 2);
            g_b -= 1;
        }
        while g_b < ctx.g_hi && b.iter().all(|v| v % 2 == 0) && b != [0, 0, 0] {
            b = b.map(|v| v / 2);
            g_b += 1;
        }
        let (lo, hi) = integer_range(self.fmt(g_b));
        if b.iter().any(|v| *v < lo || *v > hi) || g_b < ctx.g_lo {
            return None;
        }
        if self.p.options.use_sbc && !super::sbc_region(b[0], b[1], b[2]) {
            let orbit = super::symmetric_orbit(b[0], b[1], b[2]);
            if let Some(t) = orbit.iter().find(|t| super::sbc_region(t[0], t[1], t[2]) && t.iter().all(|v| (lo..=hi).contains(v))) {
                b = *t;
            }
        }
        let f = self.filter(g_a, a, g_b, b);
        satisfies_grid(&f, &self.p.grid).ok()?.is_ok().then_some(f)
    }

    fn total_cost(&self, q: &QuantizedFilter, budget: u32) -> Option<u32> {
        let a = q.a_int();
        let b = q.b_int();
        let a_s = super::structural_adders(q);
        let ma = self.cache.cost_within(fundamentals_of(&a), budget.checked_sub(a_s)?)?;
        let mb = self.cache.cost_within(fundamentals_of(&b), budget.checked_sub(a_s + ma)?)?;
        Some(a_s + ma + mb)
    }

    fn run(&self) -> Result<DesignResult> {
        let start = Instant::now();
        let incumbent = AtomicU32::new(u32::MAX);
        let best: Mutex<Option<Best>> = Mutex::new(None);
        let offer = |q: QuantizedFilter, total: u32| {
            let key = key_of(&q, total);
            let mut guard = best.lock();
            if guard.is_none_or(|b| key < b.key) {
                *guard = Some(Best { key, filter: q });
            }
            incumbent.fetch_min(total, Ordering::Relaxed);
        };
        if !self.prep.has_lower {
            // Without lower bounds the zero filter is feasible and free.
            let q = self.filter(self.p.options.g_a_range.1, [0, 0], self.p.g_b_range.1, [0, 0, 0]);
            if satisfies_grid(&q, &self.p.grid)?.is_ok() {
                return self.finish(Status::Optimal, Some(q), start);
            }
        }
        if let Some(seed) = self.p.seed.as_ref().and_then(|s| self.canonical_seed(s)) {
            if let Some(total) = self.total_cost(&seed, u32::MAX) {
                offer(seed, total);
            }
        }
        let pairs = self.a_pairs();
        self.stats.a_pairs.store(pairs.len() as u64, Ordering::Relaxed);
        let process = |&(lb, g_a, a): &(u32, i32, [i64; 2])| {
            if self.out_of_time() || lb > incumbent.load(Ordering::Relaxed) {
                return;
            }
            let na = nnz(&a);
            let c = incumbent.load(Ordering::Relaxed);
            let Some(ma) = self.cache.cost_within(fundamentals_of(&a), c.saturating_sub(na)) else {
                self.stats.pruned.fetch_add(1, Ordering::Relaxed);
                return;
            };
            let cost_a = ma + na;
            self.stats.a_visited.fetch_add(1, Ordering::Relaxed);
            let Some(ctx) = self.a_ctx(g_a, a) else { return };
            let mut den: Option<(Vec<f64>, Vec<f64>)> = None;
            let mut last_fail = 0usize;
            let budget = || {
                let c = incumbent.load(Ordering::Relaxed);
                (c != u32::MAX).then(|| c.saturating_sub(cost_a))
            };
            for g_b in (ctx.g_lo..=ctx.g_hi).rev() {
                self.windows(&ctx, g_b, &budget, |b| {
                    let r = budget();
                    let nb = nnz(&b);
                    if let Some(r) = r {
                        let lb = nb.saturating_sub(1) + self.mcm_lb(&b);
                        if lb > r {
                            self.stats.pruned.fetch_add(1, Ordering::Relaxed);
                            return;
                        }
                    }
                    let (df, da) = den.get_or_insert_with(|| self.den_full(&ctx));
                    if !self.grid_ok(&ctx, g_b, b, df, da, &mut last_fail) {
                        return;
                    }
                    self.stats.feasible.fetch_add(1, Ordering::Relaxed);
                    let cap_b = r.map_or(u32::MAX, |r| r - nb.saturating_sub(1));
                    let Some(mb) = self.cache.cost_within(fundamentals_of(&b), cap_b) else {
                        self.stats.pruned.fetch_add(1, Ordering::Relaxed);
                        return;
                    };
                    let total = cost_a + nb.saturating_sub(1) + mb;
                    offer(self.filter(g_a, a, g_b, b), total);
                });
            }
        };
        let run_all = || {
            for chunk in pairs.chunks(BATCH) {
                if self.out_of_time() || chunk[0].0 > incumbent.load(Ordering::Relaxed) {
                    break;
                }
                chunk.par_iter().for_each(process);
            }
        };
        match self.p.options.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Model(e.to_string()))?
                .install(run_all),
            None => run_all(),
        }
        let found = best.lock().map(|b| b.filter);
        let status = if self.timed_out.load(Ordering::Relaxed) {
            Status::TimedOut
        } else if found.is_some() {
            Status::Optimal
        } else {
            Status::Infeasible
        };
        self.finish(status, found, start)
    }

    fn finish(&self, status: Status, filter: Option<QuantizedFilter>, start: Instant) -> Result<DesignResult> {
        let stats = self.stats.snapshot();
        let grid_points = self.p.grid.len();
        let elapsed_s = start.elapsed().as_secs_f64();
        let Some(q) = filter else {
            return Ok(DesignResult {
                status,
                filter: None,
                graph_a: AdderGraph::default(),
                graph_b: AdderGraph::default(),
                a_m: 0,
                a_s: 0,
                a_total: 0,
                zeros: [false; 5],
                stats,
                elapsed_s,
                grid_points,
            });
        };
        let cap = self.p.options.mcm_cap;
        let slack = self.p.options.max_bits_slack;
        let graph_a = solve_mcm_with(&q.a_int(), cap, slack)?.ok_or_else(|| Error::Model("a-block exceeds the adder cap".into()))?;
        let graph_b = solve_mcm_with(&q.b_int(), cap, slack)?.ok_or_else(|| Error::Model("b-block exceeds the adder cap".into()))?;
        let a_m = graph_a.adder_count() + graph_b.adder_count();
        let a_s = super::structural_adders(&q);
        let codes = [q.a1, q.a2, q.b0, q.b1, q.b2];
        Ok(DesignResult {
            status,
            filter: Some(q),
            graph_a,
            graph_b,
            a_m,
            a_s,
            a_total: a_m + a_s,
            zeros: codes.map(|v| v == 0),
            stats,
            elapsed_s,
            grid_points,
        })
    }

    fn enumerate<F: FnMut(FeasibleFilter)>(&self, mut visit: F) {
        let no_budget = || None;
        for (_, g_a, a) in self.a_pairs() {
            let Some(ctx) = self.a_ctx(g_a, a) else { continue };
            let (df, da) = self.den_full(&ctx);
            let mut last_fail = 0;
            for g_b in (ctx.g_lo..=ctx.g_hi).rev() {
                let mut found = Vec::new();
                self.windows(&ctx, g_b, &no_budget, |b| {
                    if self.grid_ok(&ctx, g_b, b, &df, &da, &mut last_fail) {
                        found.push(b);
                    }
                });
                for b in found {
                    visit(FeasibleFilter { filter: self.filter(g_a, a, g_b, b) });
                }
            }
        }
    }
}

pub(super) fn solve(p: &DesignProblem) -> Result<DesignResult> {
    validate(p)?;
    Engine::new(p).run()
}

fn validate(p: &DesignProblem) -> Result<()> {
    if p.grid.is_empty() {
        return Err(Error::InvalidSpec("empty frequency grid".into()));
    }
    if !(2..=24).contains(&p.w) {
        return Err(Error::InvalidFormat(format!("word length {} outside the supported range [2, 24]", p.w)));
    }
    let (lo, hi) = p.options.g_a_range;
    if lo > hi || hi > p.w as i32 - 1 {
        return Err(Error::InvalidFormat(format!("g_a range [{lo}, {hi}] is empty or cannot represent a0 = 1")));
    }
    if p.g_b_range.0 > p.g_b_range.1 {
        return Err(Error::InvalidFormat(format!("empty g_b range {:?}", p.g_b_range)));
    }
    Ok(())
}

/// Calls `visit` for every grid-feasible nonzero-numerator filter of `p`
/// (one representative per real filter; SBC applied if enabled).
pub fn enumerate_feasible<F: FnMut(FeasibleFilter)>(p: &DesignProblem, visit: F) -> Result<()> {
    validate(p)?;
    let mut problem = p.clone();
    problem.options.time_limit = None;
    Engine::new(&problem).enumerate(visit);
    Ok(())
}
