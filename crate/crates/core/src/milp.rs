//! Linearized integer model of the filter-design problem and LP-format export.
//!
//! The model covers the frequency constraints, stability, symmetry breaking
//! and zero-coefficient glue. Multiplier-block constraints are not part of it.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::bounds::{a_code_ranges, b_bounds, b_code_box};
use crate::error::{Error, Result};
use crate::fixedpoint::{dyadic, CoefficientFormat, QuantizedFilter};
use crate::response::exact_f64;
use crate::search::DesignProblem;

/// Largest big-M value accepted for export.
pub const MAX_BIG_M: u64 = 1 << 24;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, BigRational)>,
    pub relation: Relation,
    pub rhs: BigRational,
    approx: Vec<f64>,
    rhs_approx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A big-M constant and the bound product it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BigM {
    pub name: String,
    pub value: u64,
    pub derivation: String,
}

/// How an auxiliary variable follows from earlier ones.
#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Abs(VarId),
    Negative(VarId),
    Bit(VarId, u32),
    BitProduct { bit: VarId, y: VarId },
    Xor(VarId, VarId),
    Sum(Vec<(VarId, i64)>),
    Signed { magnitude: VarId, negative: VarId },
    IsZero(VarId),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<(Sense, Vec<(VarId, BigRational)>)>,
    pub big_m: Vec<BigM>,
    /// Header comment lines written into the export.
    pub comments: Vec<String>,
    derived: Vec<(VarId, Rule)>,
    names: HashMap<String, VarId>,
    abs_cache: HashMap<VarId, (VarId, VarId)>,
    bits_cache: HashMap<VarId, Vec<VarId>>,
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind, lower: Option<i64>, upper: Option<i64>) -> Result<VarId> {
        if name.is_empty() || name.len() > 255 || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Model(format!("invalid variable name {name:?}")));
        }
        if self.names.contains_key(name) {
            return Err(Error::Model(format!("duplicate variable {name}")));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (Some(0), Some(1)),
            _ => (lower, upper),
        };
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                return Err(Error::Model(format!("empty bounds [{l}, {u}] for {name}")));
            }
        }
        let id = self.variables.len();
        self.variables.push(Variable { name: name.to_string(), kind, lower, upper });
        self.names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn add_constraint(
        &mut self,
        name: &str,
        terms: Vec<(VarId, BigRational)>,
        relation: Relation,
        rhs: BigRational,
    ) -> Result<()> {
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(Error::Model(format!("constraint {name} references undeclared variable {v}")));
        }
        let approx = terms.iter().map(|(_, c)| c.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>();
        let rhs_approx = rhs.to_f64().unwrap_or(f64::NAN);
        if approx.iter().any(|c| !c.is_finite()) || !rhs_approx.is_finite() {
            return Err(Error::Model(format!("constraint {name} has a non-finite coefficient")));
        }
        self.constraints.push(Constraint { name: name.to_string(), terms, relation, rhs, approx, rhs_approx });
        Ok(())
    }

    fn add_int_constraint(&mut self, name: &str, terms: &[(VarId, i64)], relation: Relation, rhs: i64) -> Result<()> {
        self.add_constraint(name, terms.iter().map(|&(v, c)| (v, int(c))).collect(), relation, int(rhs))
    }

    fn bounds_of(&self, x: VarId) -> Result<(i64, i64)> {
        let v = &self.variables[x];
        match (v.lower, v.upper) {
            (Some(l), Some(u)) => Ok((l, u)),
            _ => Err(Error::Model(format!("variable {} needs finite bounds", v.name))),
        }
    }

    fn record_m(&mut self, name: String, value: u64, derivation: String) {
        self.big_m.push(BigM { name, value, derivation });
    }

    pub fn max_big_m(&self) -> u64 {
        self.big_m.iter().map(|m| m.value).max().unwrap_or(0)
    }
}

/// Adds binaries `t_i` with `x = Σ 2^i t_i`, one per bit of the upper bound.
pub fn binary_expansion(model: &mut LinearModel, x: VarId) -> Result<Vec<VarId>> {
    let (lo, hi) = model.bounds_of(x)?;
    if lo < 0 {
        return Err(Error::Model(format!("binary expansion of {} needs a nonnegative lower bound", model.variables[x].name)));
    }
    let bits = (64 - hi.leading_zeros()).max(1);
    let base = model.variables[x].name.clone();
    let mut out = Vec::with_capacity(bits as usize);
    for i in 0..bits {
        let t = model.add_var(&format!("t_{base}_{i}"), VarKind::Binary, None, None)?;
        model.derived.push((t, Rule::Bit(x, i)));
        out.push(t);
    }
    let mut terms: Vec<(VarId, i64)> = vec![(x, 1)];
    terms.extend(out.iter().enumerate().map(|(i, &t)| (t, -(1i64 << i))));
    model.add_int_constraint(&format!("bin_{base}"), &terms, Relation::Eq, 0)?;
    Ok(out)
}

/// `(|x|, [x < 0])`, created once per variable.
pub fn abs_value(model: &mut LinearModel, x: VarId) -> Result<(VarId, VarId)> {
    if let Some(&r) = model.abs_cache.get(&x) {
        return Ok(r);
    }
    let (lo, hi) = model.bounds_of(x)?;
    let m = lo.unsigned_abs().max(hi.unsigned_abs()) as i64;
    let name = model.variables[x].name.clone();
    let abs = model.add_var(&format!("abs_{name}"), VarKind::Integer, Some(0), Some(m))?;
    model.derived.push((abs, Rule::Abs(x)));
    let sg = model.add_var(&format!("sg_{name}"), VarKind::Binary, None, None)?;
    model.derived.push((sg, Rule::Negative(x)));
    let m2 = 2 * m.max(1);
    model.record_m(format!("abs_{name}"), m2 as u64, format!("2·max(|{lo}|, |{hi}|)"));
    // sg = 0 ⇒ x ≥ 0; sg = 1 ⇒ x ≤ -1.
    model.add_int_constraint(&format!("sgl_{name}"), &[(x, 1), (sg, m.max(1))], Relation::Ge, 0)?;
    model.add_int_constraint(&format!("sgu_{name}"), &[(x, 1), (sg, m.max(1) + 1)], Relation::Le, m.max(1))?;
    model.add_int_constraint(&format!("absp_{name}"), &[(abs, 1), (x, -1)], Relation::Ge, 0)?;
    model.add_int_constraint(&format!("absn_{name}"), &[(abs, 1), (x, 1)], Relation::Ge, 0)?;
    model.add_int_constraint(&format!("absu_{name}"), &[(abs, 1), (x, -1), (sg, -m2)], Relation::Le, 0)?;
    model.add_int_constraint(&format!("absv_{name}"), &[(abs, 1), (x, 1), (sg, m2)], Relation::Le, m2)?;
    model.abs_cache.insert(x, (abs, sg));
    Ok((abs, sg))
}

/// Returns `z = x·y` through absolute values, sign binaries and a bitwise
/// product of `|x|` with `|y|`.
pub fn signed_product(model: &mut LinearModel, x: VarId, y: VarId) -> Result<VarId> {
    let (ax, sx) = abs_value(model, x)?;
    let (ay, sy) = abs_value(model, y)?;
    let (_, xm) = model.bounds_of(ax)?;
    let (_, ym) = model.bounds_of(ay)?;
    let (nx, ny) = (model.variables[x].name.clone(), model.variables[y].name.clone());
    let tag = format!("{nx}_{ny}");
    let bits = match model.bits_cache.get(&ax) {
        Some(b) => b.clone(),
        None => {
            let b = binary_expansion(model, ax)?;
            model.bits_cache.insert(ax, b.clone());
            b
        }
    };
    let zm = xm * ym;
    let zpos = model.add_var(&format!("zp_{tag}"), VarKind::Integer, Some(0), Some(zm))?;
    let mut sum: Vec<(VarId, i64)> = Vec::new();
    for (i, &t) in bits.iter().enumerate() {
        let w = model.add_var(&format!("w_{tag}_{i}"), VarKind::Integer, Some(0), Some(ym))?;
        model.derived.push((w, Rule::BitProduct { bit: t, y: ay }));
        model.record_m(format!("w_{tag}_{i}"), ym as u64, format!("max |{ny}| = {ym}"));
        model.add_int_constraint(&format!("wt_{tag}_{i}"), &[(w, 1), (t, -ym)], Relation::Le, 0)?;
        model.add_int_constraint(&format!("wy_{tag}_{i}"), &[(w, 1), (ay, -1)], Relation::Le, 0)?;
        model.add_int_constraint(&format!("wl_{tag}_{i}"), &[(w, 1), (ay, -1), (t, -ym)], Relation::Ge, -ym)?;
        sum.push((w, 1i64 << i));
    }
    model.derived.push((zpos, Rule::Sum(sum.clone())));
    let mut terms = vec![(zpos, 1)];
    terms.extend(sum.iter().map(|&(w, c)| (w, -c)));
    model.add_int_constraint(&format!("zp_{tag}"), &terms, Relation::Eq, 0)?;
    let s = if x == y {
        None
    } else {
        let s = model.add_var(&format!("s_{tag}"), VarKind::Binary, None, None)?;
        model.derived.push((s, Rule::Xor(sx, sy)));
        model.add_int_constraint(&format!("xa_{tag}"), &[(s, 1), (sx, -1), (sy, 1)], Relation::Ge, 0)?;
        model.add_int_constraint(&format!("xb_{tag}"), &[(s, 1), (sx, 1), (sy, -1)], Relation::Ge, 0)?;
        model.add_int_constraint(&format!("xc_{tag}"), &[(s, 1), (sx, -1), (sy, -1)], Relation::Le, 0)?;
        model.add_int_constraint(&format!("xd_{tag}"), &[(s, 1), (sx, 1), (sy, 1)], Relation::Le, 2)?;
        Some(s)
    };
    let z = model.add_var(&format!("p_{tag}"), VarKind::Integer, Some(if s.is_some() { -zm } else { 0 }), Some(zm))?;
    match s {
        None => {
            model.derived.push((z, Rule::Sum(vec![(zpos, 1)])));
            model.add_int_constraint(&format!("sq_{tag}"), &[(z, 1), (zpos, -1)], Relation::Eq, 0)?;
        }
        Some(s) => {
            model.derived.push((z, Rule::Signed { magnitude: zpos, negative: s }));
            let m2 = 2 * zm.max(1);
            model.record_m(format!("p_{tag}"), m2 as u64, format!("2·{xm}·{ym}"));
            model.add_int_constraint(&format!("pa_{tag}"), &[(z, 1), (zpos, -1), (s, -m2)], Relation::Le, 0)?;
            model.add_int_constraint(&format!("pb_{tag}"), &[(z, 1), (zpos, -1), (s, m2)], Relation::Ge, 0)?;
            model.add_int_constraint(&format!("pc_{tag}"), &[(z, 1), (zpos, 1), (s, m2)], Relation::Le, m2)?;
            model.add_int_constraint(&format!("pd_{tag}"), &[(z, 1), (zpos, 1), (s, -m2)], Relation::Ge, -m2)?;
        }
    }
    Ok(z)
}

/// Objective of a design model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Feasibility,
    MinB(usize),
    MaxB(usize),
    MaxZeros,
}

/// Coefficient formats of one design model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFormats {
    pub g_a: i32,
    pub g_b: i32,
}

pub const COEFFICIENT_NAMES: [&str; 5] = ["a1", "a2", "b0", "b1", "b2"];

/// Builds the linearized design model at fixed MSBs.
///
/// `b_box` defaults to the pairwise box from [`b_bounds`] in `g_b` codes.
pub fn build_design_model(
    p: &DesignProblem,
    fmts: ModelFormats,
    b_box: Option<[(i64, i64); 3]>,
    mode: ModelMode,
) -> Result<LinearModel> {
    if p.grid.is_empty() {
        return Err(Error::InvalidSpec("empty frequency grid".into()));
    }
    let fa = CoefficientFormat::new(p.w, fmts.g_a)?;
    let fb = CoefficientFormat::new(p.w, fmts.g_b)?;
    let e = -fa.lsb();
    if !(0..=30).contains(&e) {
        return Err(Error::InvalidFormat(format!("g_a = {} leaves no integer code for a0 = 1", fmts.g_a)));
    }
    let u = 1i64 << e;
    let b_box = match b_box {
        Some(b) => b,
        None => b_code_box(&b_bounds(&p.grid)?, fb),
    };
    let mut m = LinearModel::new();
    m.comments = vec![
        format!("spec {}", p.spec.name),
        format!("w {} g_a {} g_b {}", p.w, fmts.g_a, fmts.g_b),
        format!("grid points {}", p.grid.len()),
        "multiplier-block (MCM) constraints are not included".to_string(),
        "coefficients are decimal renderings of exact dyadic rationals".to_string(),
    ];
    let ((l1, h1), (l2, h2)) = a_code_ranges(fa);
    let a1 = m.add_var("a1", VarKind::Integer, Some(l1), Some(h1))?;
    let a2 = m.add_var("a2", VarKind::Integer, Some(l2), Some(h2))?;
    let b: Vec<VarId> = (0..3)
        .map(|k| m.add_var(&format!("b{k}"), VarKind::Integer, Some(b_box[k].0), Some(b_box[k].1)))
        .collect::<Result<_>>()?;
    let q11 = signed_product(&mut m, a1, a1)?;
    let q22 = signed_product(&mut m, a2, a2)?;
    let q12 = signed_product(&mut m, a1, a2)?;
    let mut pb = [[0usize; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            pb[i][j] = signed_product(&mut m, b[i], b[j])?;
        }
    }
    // Linearization blocks go after the design constraints so that
    // infeasible assignments are rejected early by check_values.
    let lin = std::mem::take(&mut m.constraints);

    m.add_int_constraint("stab_pos", &[(a1, 1), (a2, -1)], Relation::Le, u - 1)?;
    m.add_int_constraint("stab_neg", &[(a1, -1), (a2, -1)], Relation::Le, u - 1)?;
    m.add_int_constraint("stab_a2", &[(a2, 1)], Relation::Le, u - 1)?;
    m.add_int_constraint("stab_a2n", &[(a2, 1)], Relation::Ge, -(u - 1))?;
    if p.options.use_sbc {
        m.add_int_constraint("sbc_p", &[(b[0], 1), (b[2], -1)], Relation::Ge, 0)?;
        m.add_int_constraint("sbc_n", &[(b[0], 1), (b[2], 1)], Relation::Ge, 0)?;
    }

    let scale = dyadic(1, 2 * (fa.lsb() - fb.lsb()));
    let two = int(2);
    let ur = int(u);
    for (idx, pt) in p.grid.points.iter().enumerate() {
        let (c1, c2) = pt.cosines();
        let (c1, c2) = (exact_f64(c1), exact_f64(c2));
        let k1 = &two * &c1;
        let k2 = &two * &c2;
        // |B|² terms.
        let bterms: Vec<(VarId, BigRational)> = vec![
            (pb[0][0], int(1)),
            (pb[1][1], int(1)),
            (pb[2][2], int(1)),
            (pb[0][1], k1.clone()),
            (pb[1][2], k1.clone()),
            (pb[0][2], k2.clone()),
        ];
        // |A|² = U² + q11 + q22 + 2c1 (U a1 + q12) + 2c2 U a2.
        let aterms: Vec<(VarId, BigRational)> = vec![
            (q11, int(1)),
            (q22, int(1)),
            (q12, k1.clone()),
            (a1, &k1 * &ur),
            (a2, &k2 * &ur),
        ];
        let aconst = &ur * &ur;
        for (beta_sq, upper) in [(pt.beta_hi_sq, true), (pt.beta_lo_sq, false)] {
            if !upper && beta_sq <= 0.0 {
                continue;
            }
            let f = exact_f64(beta_sq) * &scale;
            let mut terms: Vec<(VarId, BigRational)> = bterms.clone();
            terms.extend(aterms.iter().map(|(v, c)| (*v, -(c * &f))));
            let rhs = &f * &aconst;
            let (name, rel) = if upper { (format!("hi_{idx}"), Relation::Le) } else { (format!("lo_{idx}"), Relation::Ge) };
            m.add_constraint(&name, terms.into_iter().filter(|(_, c)| !c.is_zero()).collect(), rel, rhs)?;
        }
    }

    let coeffs = [a1, a2, b[0], b[1], b[2]];
    let mut zetas = Vec::new();
    for (k, &x) in coeffs.iter().enumerate() {
        let (ax, _) = m.abs_cache[&x];
        let (_, hi) = m.bounds_of(ax)?;
        let z = m.add_var(&format!("zeta_{}", COEFFICIENT_NAMES[k]), VarKind::Binary, None, None)?;
        m.derived.push((z, Rule::IsZero(x)));
        m.record_m(format!("zeta_{}", COEFFICIENT_NAMES[k]), hi.max(1) as u64, format!("max |{}|", COEFFICIENT_NAMES[k]));
        m.add_int_constraint(&format!("zu_{}", COEFFICIENT_NAMES[k]), &[(ax, 1), (z, hi.max(1))], Relation::Le, hi.max(1))?;
        m.add_int_constraint(&format!("zl_{}", COEFFICIENT_NAMES[k]), &[(ax, 1), (z, 1)], Relation::Ge, 1)?;
        zetas.push(z);
    }
    m.constraints.extend(lin);
    m.objective = match mode {
        ModelMode::Feasibility => None,
        ModelMode::MinB(k) | ModelMode::MaxB(k) if k > 2 => {
            return Err(Error::Model(format!("b index {k} out of range")));
        }
        ModelMode::MinB(k) => Some((Sense::Minimize, vec![(b[k], int(1))])),
        ModelMode::MaxB(k) => Some((Sense::Maximize, vec![(b[k], int(1))])),
        ModelMode::MaxZeros => Some((Sense::Maximize, zetas.iter().map(|&z| (z, int(1))).collect())),
    };
    Ok(m)
}

/// Extends coefficient codes to a full assignment using the recorded
/// derivation of every auxiliary variable.
pub fn complete_assignment(model: &LinearModel, base: &[(VarId, i64)]) -> Result<Vec<i64>> {
    let mut v = vec![0i64; model.variables.len()];
    let mut known = vec![false; model.variables.len()];
    for &(id, x) in base {
        v[id] = x;
        known[id] = true;
    }
    let missing = |id: VarId| Error::Model(format!("value of {} is not determined", model.variables[id].name));
    for (id, rule) in &model.derived {
        let deps: &[VarId] = match rule {
            Rule::Abs(x) | Rule::Negative(x) | Rule::Bit(x, _) | Rule::IsZero(x) => std::slice::from_ref(x),
            Rule::BitProduct { bit, y } => &[*bit, *y],
            Rule::Xor(a, b) => &[*a, *b],
            Rule::Signed { magnitude, negative } => &[*magnitude, *negative],
            Rule::Sum(terms) => {
                if let Some(&(t, _)) = terms.iter().find(|(t, _)| !known[*t]) {
                    return Err(missing(t));
                }
                &[]
            }
        };
        if let Some(&d) = deps.iter().find(|&&d| !known[d]) {
            return Err(missing(d));
        }
        v[*id] = match rule {
            Rule::Abs(x) => v[*x].abs(),
            Rule::Negative(x) => (v[*x] < 0) as i64,
            Rule::Bit(x, i) => (v[*x] >> i) & 1,
            Rule::BitProduct { bit, y } => v[*bit] * v[*y],
            Rule::Xor(a, b) => v[*a] ^ v[*b],
            Rule::Sum(terms) => terms.iter().map(|&(t, c)| v[t] * c).sum(),
            Rule::Signed { magnitude, negative } => {
                if v[*negative] == 1 {
                    -v[*magnitude]
                } else {
                    v[*magnitude]
                }
            }
            Rule::IsZero(x) => (v[*x] == 0) as i64,
        };
        known[*id] = true;
    }
    if let Some(i) = known.iter().position(|k| !k) {
        return Err(missing(i));
    }
    Ok(v)
}

/// Full assignment of a design model for the codes of `q`.
pub fn assignment_for_filter(model: &LinearModel, q: &QuantizedFilter) -> Result<Vec<i64>> {
    let codes = [q.a1, q.a2, q.b0, q.b1, q.b2];
    let base = COEFFICIENT_NAMES
        .iter()
        .zip(codes)
        .map(|(n, c)| model.var(n).map(|id| (id, c)).ok_or_else(|| Error::Model(format!("model has no variable {n}"))))
        .collect::<Result<Vec<_>>>()?;
    complete_assignment(model, &base)
}

/// Outcome of [`check_solution`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolutionCheck {
    pub feasible: bool,
    /// First violated constraint or bound.
    pub violated: Option<String>,
}

/// Exact check of an assignment given by variable name.
pub fn check_solution(model: &LinearModel, assignment: &BTreeMap<String, i64>) -> Result<SolutionCheck> {
    let values = model
        .variables
        .iter()
        .map(|v| assignment.get(&v.name).copied().ok_or_else(|| Error::Model(format!("no value for variable {}", v.name))))
        .collect::<Result<Vec<_>>>()?;
    Ok(check_values(model, &values))
}

/// Exact check of an assignment indexed like `model.variables`.
pub fn check_values(model: &LinearModel, values: &[i64]) -> SolutionCheck {
    let fail = |name: &str| SolutionCheck { feasible: false, violated: Some(name.to_string()) };
    for (v, &x) in model.variables.iter().zip(values) {
        if v.lower.is_some_and(|l| x < l) || v.upper.is_some_and(|u| x > u) {
            return fail(&format!("bounds of {}", v.name));
        }
    }
    for c in &model.constraints {
        if !constraint_holds(c, values) {
            return fail(&c.name);
        }
    }
    SolutionCheck { feasible: true, violated: None }
}

fn constraint_holds(c: &Constraint, values: &[i64]) -> bool {
    let mut sum = 0.0f64;
    let mut mag = c.rhs_approx.abs();
    for ((v, _), a) in c.terms.iter().zip(&c.approx) {
        let t = a * values[*v] as f64;
        sum += t;
        mag += t.abs();
    }
    let diff = sum - c.rhs_approx;
    let err = 1e-12 * mag + f64::MIN_POSITIVE;
    let sign = if diff > err {
        std::cmp::Ordering::Greater
    } else if diff < -err {
        std::cmp::Ordering::Less
    } else {
        let exact: BigRational = c.terms.iter().map(|(v, a)| a * int(values[*v])).sum::<BigRational>() - &c.rhs;
        exact.cmp(&BigRational::zero())
    };
    match c.relation {
        Relation::Le => sign != std::cmp::Ordering::Greater,
        Relation::Ge => sign != std::cmp::Ordering::Less,
        Relation::Eq => sign == std::cmp::Ordering::Equal,
    }
}

fn fmt_num(x: &BigRational) -> String {
    if x.is_integer() {
        return x.to_integer().to_string();
    }
    let f = x.to_f64().unwrap_or(0.0);
    format!("{f}")
}

fn write_terms(out: &mut String, model: &LinearModel, terms: &[(VarId, BigRational)]) {
    if terms.is_empty() {
        return;
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        if i > 0 && i % 6 == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_negative() { "-" } else { "+" };
        let mag = fmt_num(&c.abs());
        if i == 0 && sign == "+" {
            let _ = write!(out, " {mag} {}", model.variables[*v].name);
        } else {
            let _ = write!(out, " {sign} {mag} {}", model.variables[*v].name);
        }
    }
}

/// Renders the model in LP format.
pub fn to_lp_string(model: &LinearModel) -> Result<String> {
    if let Some(m) = model.big_m.iter().find(|m| m.value > MAX_BIG_M) {
        return Err(Error::BigMTooLarge { name: m.name.clone(), value: m.value });
    }
    let mut out = String::new();
    for c in &model.comments {
        let _ = writeln!(out, "\\ {c}");
    }
    let (sense, obj) = match &model.objective {
        Some((s, t)) => (*s, t.clone()),
        None => (Sense::Minimize, Vec::new()),
    };
    out.push_str(match sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    if obj.is_empty() && !model.variables.is_empty() {
        let _ = write!(out, " 0 {}", model.variables[0].name);
    }
    write_terms(&mut out, model, &obj);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        if c.terms.is_empty() {
            let _ = write!(out, " 0 {}", model.variables.first().map_or("x", |v| v.name.as_str()));
        }
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.relation.symbol(), fmt_num(&c.rhs));
    }
    let bounded: Vec<&Variable> = model
        .variables
        .iter()
        .filter(|v| v.kind != VarKind::Binary && !(v.lower == Some(0) && v.upper.is_none()))
        .collect();
    if !bounded.is_empty() {
        out.push_str("Bounds\n");
        for v in bounded {
            match (v.lower, v.upper) {
                (Some(l), Some(u)) => {
                    let _ = writeln!(out, " {l} <= {} <= {u}", v.name);
                }
                (Some(l), None) => {
                    let _ = writeln!(out, " {} >= {l}", v.name);
                }
                (None, Some(u)) => {
                    let _ = writeln!(out, " -inf <= {} <= {u}", v.name);
                }
                (None, None) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
            }
        }
    }
    for (kind, header) in [(VarKind::Integer, "Generals"), (VarKind::Binary, "Binaries")] {
        let names: Vec<&str> = model.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{header}");
            for chunk in names.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes the LP rendering of `model` to `dest`.
pub fn export_lp<W: Write>(model: &LinearModel, dest: &mut W) -> Result<()> {
    dest.write_all(to_lp_string(model)?.as_bytes())?;
    Ok(())
}

/// An LP file read back into named rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLp {
    pub sense: Option<Sense>,
    pub objective: Vec<(String, f64)>,
    pub constraints: Vec<ParsedRow>,
    pub bounds: BTreeMap<String, (Option<f64>, Option<f64>)>,
    pub generals: Vec<String>,
    pub binaries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

fn parse_terms(tokens: &[&str]) -> Result<Vec<(String, f64)>> {
    let bad = |t: &str| Error::Parse(format!("unexpected LP token `{t}`"));
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &t in tokens {
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = t.parse::<f64>() {
                    if coef.is_some() {
                        return Err(bad(t));
                    }
                    coef = Some(v);
                } else {
                    out.push((t.to_string(), sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(Error::Parse("dangling LP coefficient".into()));
    }
    Ok(out)
}

fn parse_num(t: &str) -> Result<f64> {
    match t {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => t.parse().map_err(|_| Error::Parse(format!("bad LP number `{t}`"))),
    }
}

/// Reads back the subset of the LP format written by [`to_lp_string`].
pub fn parse_lp(text: &str) -> Result<ParsedLp> {
    #[derive(PartialEq)]
    enum Section {
        Head,
        Objective,
        Rows,
        Bounds,
        Generals,
        Binaries,
        End,
    }
    let mut lp = ParsedLp::default();
    let mut section = Section::Head;
    let mut pending: Vec<String> = Vec::new();
    let flush_row = |pending: &mut Vec<String>, lp: &mut ParsedLp| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let joined = pending.join(" ");
        pending.clear();
        let (name, rest) = joined.split_once(':').ok_or_else(|| Error::Parse(format!("unnamed row `{joined}`")))?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let pos = tokens
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "="))
            .ok_or_else(|| Error::Parse(format!("row `{}` has no relation", name.trim())))?;
        let relation = match tokens[pos] {
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            _ => Relation::Eq,
        };
        if pos + 2 != tokens.len() {
            return Err(Error::Parse(format!("row `{}` has a malformed right-hand side", name.trim())));
        }
        lp.constraints.push(ParsedRow {
            name: name.trim().to_string(),
            terms: parse_terms(&tokens[..pos])?,
            relation,
            rhs: parse_num(tokens[pos + 1])?,
        });
        Ok(())
    };
    for line in text.lines() {
        if line.starts_with('\\') || line.trim().is_empty() {
            continue;
        }
        let header = match line.trim() {
            "Minimize" => Some((Section::Objective, Some(Sense::Minimize))),
            "Maximize" => Some((Section::Objective, Some(Sense::Maximize))),
            "Subject To" => Some((Section::Rows, None)),
            "Bounds" => Some((Section::Bounds, None)),
            "Generals" => Some((Section::Generals, None)),
            "Binaries" => Some((Section::Binaries, None)),
            "End" => Some((Section::End, None)),
            _ => None,
        };
        if let Some((next, sense)) = header {
            flush_row(&mut pending, &mut lp)?;
            if sense.is_some() {
                lp.sense = sense;
            }
            section = next;
            continue;
        }
        match section {
            Section::Head | Section::End => return Err(Error::Parse(format!("text outside sections: `{line}`"))),
            Section::Objective => {
                let rest = line.split_once(':').map_or(line, |(_, r)| r);
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                lp.objective.extend(parse_terms(&tokens)?.into_iter().filter(|(_, c)| *c != 0.0));
            }
            Section::Rows => {
                if line.contains(':') {
                    flush_row(&mut pending, &mut lp)?;
                }
                pending.push(line.to_string());
            }
            Section::Bounds => {
                let t: Vec<&str> = line.split_whitespace().collect();
                let (name, b) = match t.as_slice() {
                    [l, "<=", n, "<=", u] => (*n, (Some(parse_num(l)?), Some(parse_num(u)?))),
                    [n, ">=", l] => (*n, (Some(parse_num(l)?), None)),
                    [n, "free"] => (*n, (None, None)),
                    _ => return Err(Error::Parse(format!("bad bound `{line}`"))),
                };
                let b = (b.0.filter(|v| v.is_finite()), b.1.filter(|v| v.is_finite()));
                lp.bounds.insert(name.to_string(), b);
            }
            Section::Generals => lp.generals.extend(line.split_whitespace().map(str::to_string)),
            Section::Binaries => lp.binaries.extend(line.split_whitespace().map(str::to_string)),
        }
    }
    if section != Section::End {
        return Err(Error::Parse("missing End".into()));
    }
    Ok(lp)
}

impl ParsedLp {
    /// First difference from `model` beyond a relative coefficient tolerance.
    pub fn mismatch(&self, model: &LinearModel, rel_tol: f64) -> Option<String> {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0);
        let same_terms = |parsed: &[(String, f64)], terms: &[(VarId, BigRational)]| {
            let want: Vec<(&str, f64)> = terms
                .iter()
                .map(|(v, c)| (model.variables[*v].name.as_str(), c.to_f64().unwrap_or(f64::NAN)))
                .filter(|(_, c)| *c != 0.0)
                .collect();
            let got: Vec<(&str, f64)> = parsed.iter().filter(|(_, c)| *c != 0.0).map(|(n, c)| (n.as_str(), *c)).collect();
            want.len() == got.len() && want.iter().zip(&got).all(|(w, g)| w.0 == g.0 && close(w.1, g.1))
        };
        if self.constraints.len() != model.constraints.len() {
            return Some(format!("{} rows read, {} expected", self.constraints.len(), model.constraints.len()));
        }
        for (r, c) in self.constraints.iter().zip(&model.constraints) {
            if r.name != c.name || r.relation != c.relation || !close(r.rhs, c.rhs.to_f64().unwrap_or(f64::NAN)) {
                return Some(format!("row {} differs", c.name));
            }
            if !same_terms(&r.terms, &c.terms) {
                return Some(format!("terms of row {} differ", c.name));
            }
        }
        if let Some((s, t)) = &model.objective {
            if self.sense != Some(*s) || !same_terms(&self.objective, t) {
                return Some("objective differs".into());
            }
        }
        for v in &model.variables {
            let listed = match v.kind {
                VarKind::Integer => self.generals.contains(&v.name),
                VarKind::Binary => self.binaries.contains(&v.name),
                VarKind::Continuous => !self.generals.contains(&v.name) && !self.binaries.contains(&v.name),
            };
            if !listed {
                return Some(format!("kind of {} differs", v.name));
            }
            if v.kind != VarKind::Binary {
                let want = (v.lower.map(|x| x as f64), v.upper.map(|x| x as f64));
                let got = self.bounds.get(&v.name).copied().unwrap_or((Some(0.0), None));
                if want != got {
                    return Some(format!("bounds of {} differ", v.name));
                }
            }
        }
        None
    }
}
