//! Exact multiple-constant multiplication over shift-and-add adder graphs.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported constant magnitude.
pub const MAX_CONSTANT: u64 = 1 << 24;

/// Default adder budget per block.
pub const DEFAULT_CAP: u32 = 8;

/// Default extra bits allowed above the widest target.
pub const DEFAULT_MAX_BITS_SLACK: u32 = 1;

/// `c = sign · odd · 2^shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OddFundamental {
    pub odd: u64,
    pub shift: u32,
    pub negative: bool,
}

/// Odd part of `c`, or `None` for zero.
pub fn odd_fundamental(c: i64) -> Option<OddFundamental> {
    if c == 0 {
        return None;
    }
    let m = c.unsigned_abs();
    let shift = m.trailing_zeros();
    Some(OddFundamental { odd: m >> shift, shift, negative: c < 0 })
}

/// Nonzero digits in the canonical signed-digit form of `t`.
pub fn csd_weight(t: u64) -> u32 {
    // Nonzero digits of the NAF are the set bits of (3t XOR t) at odd positions
    // after the standard shift; equivalently popcount((t ^ 3t) >> 1).
    let t = t as u128;
    (((t * 3) ^ t) >> 1).count_ones()
}

fn ceil_log2(x: u32) -> u32 {
    if x <= 1 { 0 } else { 32 - (x - 1).leading_zeros() }
}

/// Sound lower bound on the adders needed for a set of odd fundamentals.
pub fn adder_lower_bound(fundamentals: &[u64]) -> u32 {
    let mut distinct: Vec<u64> = fundamentals.iter().copied().filter(|&f| f > 1).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let digits = distinct.iter().map(|&t| ceil_log2(csd_weight(t))).max().unwrap_or(0);
    (distinct.len() as u32).max(digits)
}

/// Operand of an adder: the filter input or an earlier node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Input,
    Node(usize),
}

/// `value = |(left << left_shift) + right_sign · (right << right_shift)| >> k`
/// where `k` strips trailing zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderNode {
    pub value: u64,
    pub left: Operand,
    pub right: Operand,
    pub left_shift: u32,
    pub right_shift: u32,
    pub right_sign: i8,
}

/// How a requested constant is tapped off the graph: `sign · source · 2^output_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetTap {
    pub constant: i64,
    pub source: Operand,
    pub output_shift: u32,
    pub sign: i8,
}

/// Shift-and-add network realizing a set of constant multiplications.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderGraph {
    pub nodes: Vec<AdderNode>,
    /// One entry per requested nonzero constant.
    pub targets: Vec<TargetTap>,
}

impl AdderGraph {
    pub fn adder_count(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn operand_value(&self, op: Operand) -> Option<u64> {
        match op {
            Operand::Input => Some(1),
            Operand::Node(i) => self.nodes.get(i).map(|n| n.value),
        }
    }

    /// Recomputes every node and tap from its parents.
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            for op in [n.left, n.right] {
                if let Operand::Node(j) = op {
                    if j >= i {
                        return Err(Error::InvalidGraph(format!("node {i} references later node {j}")));
                    }
                }
            }
            if n.left_shift.min(n.right_shift) != 0 {
                return Err(Error::InvalidGraph(format!("node {i} shifts both operands")));
            }
            if n.right_sign.abs() != 1 {
                return Err(Error::InvalidGraph(format!("node {i} has sign {}", n.right_sign)));
            }
            let l = (self.operand_value(n.left).unwrap() as i128) << n.left_shift;
            let r = (self.operand_value(n.right).unwrap() as i128) << n.right_shift;
            let raw = (l + n.right_sign as i128 * r).unsigned_abs();
            if raw == 0 || raw >> raw.trailing_zeros() != n.value as u128 || n.value % 2 == 0 {
                return Err(Error::InvalidGraph(format!("node {i} does not evaluate to {}", n.value)));
            }
        }
        for t in &self.targets {
            let v = self
                .operand_value(t.source)
                .ok_or_else(|| Error::InvalidGraph(format!("tap for {} has no source", t.constant)))?;
            if t.sign.abs() != 1 || (t.sign as i128) * ((v as i128) << t.output_shift) != t.constant as i128 {
                return Err(Error::InvalidGraph(format!("tap for {} evaluates wrongly", t.constant)));
            }
        }
        Ok(())
    }

    /// Evaluates the tap for `constant` on input `x`, following the graph.
    pub fn multiply(&self, constant: i64, x: i128) -> Option<i128> {
        if constant == 0 {
            return Some(0);
        }
        let mut vals = Vec::with_capacity(self.nodes.len());
        let get = |vals: &Vec<i128>, op: Operand| match op {
            Operand::Input => x,
            Operand::Node(i) => vals[i],
        };
        for n in &self.nodes {
            let l = get(&vals, n.left) << n.left_shift;
            let r = get(&vals, n.right) << n.right_shift;
            let raw = l + n.right_sign as i128 * r;
            // `raw` equals ±value · 2^k · x; undo the normalization.
            let full = ((self.operand_value(n.left)? as i128) << n.left_shift)
                + n.right_sign as i128 * ((self.operand_value(n.right)? as i128) << n.right_shift);
            let sh = full.unsigned_abs().trailing_zeros();
            let v = if full < 0 { -(raw >> sh) } else { raw >> sh };
            vals.push(v);
        }
        let t = self.targets.iter().find(|t| t.constant == constant)?;
        Some(t.sign as i128 * (get(&vals, t.source) << t.output_shift))
    }
}

/// Derivation of a value from two earlier entries of the working set.
#[derive(Debug, Clone, Copy)]
struct Step {
    value: u64,
    left: usize,
    right: usize,
    left_shift: u32,
    right_shift: u32,
    sign: i8,
}

fn normalize(x: u64) -> u64 {
    if x == 0 { 0 } else { x >> x.trailing_zeros() }
}

/// All odd values one adder away from `set`, bounded by `limit`.
fn successors(set: &[u64], limit: u64, max_shift: u32) -> Vec<Step> {
    let mut out: Vec<Step> = Vec::new();
    let mut seen: HashSet<u64> = set.iter().copied().collect();
    let mut push = |v: u64, s: Step, out: &mut Vec<Step>| {
        if v != 0 && v < limit && seen.insert(v) {
            out.push(Step { value: v, ..s });
        }
    };
    for (i, &x) in set.iter().enumerate() {
        for (j, &y) in set.iter().enumerate().skip(i) {
            for s in 0..=max_shift {
                let xs = (x as u128) << s;
                let ys = (y as u128) << s;
                // x·2^s ± y
                {
                    let sum = xs + y as u128;
                    let v = normalize(sum as u64);
                    push(v, Step { value: v, left: i, right: j, left_shift: s, right_shift: 0, sign: 1 }, &mut out);
                    if xs >= y as u128 {
                        let v = normalize((xs - y as u128) as u64);
                        push(v, Step { value: v, left: i, right: j, left_shift: s, right_shift: 0, sign: -1 }, &mut out);
                    } else {
                        let v = normalize((y as u128 - xs) as u64);
                        push(v, Step { value: v, left: j, right: i, left_shift: 0, right_shift: s, sign: -1 }, &mut out);
                    }
                }
                if s > 0 && i != j {
                    // y·2^s ± x
                    let sum = ys + x as u128;
                    let v = normalize(sum as u64);
                    push(v, Step { value: v, left: j, right: i, left_shift: s, right_shift: 0, sign: 1 }, &mut out);
                    if ys >= x as u128 {
                        let v = normalize((ys - x as u128) as u64);
                        push(v, Step { value: v, left: j, right: i, left_shift: s, right_shift: 0, sign: -1 }, &mut out);
                    } else {
                        let v = normalize((x as u128 - ys) as u64);
                        push(v, Step { value: v, left: i, right: j, left_shift: 0, right_shift: s, sign: -1 }, &mut out);
                    }
                }
            }
        }
    }
    out
}

struct Search<'a> {
    targets: &'a [u64],
    limit: u64,
    max_shift: u32,
    failed: HashMap<Vec<u64>, u32>,
}

impl Search<'_> {
    /// Extends `set`/`steps` with at most `budget` adders so every target is present.
    fn dfs(&mut self, set: &mut Vec<u64>, steps: &mut Vec<Step>, budget: u32) -> bool {
        let start_len = set.len();
        let start_steps = steps.len();
        let mut budget = budget;
        // Targets reachable in one step are added right away.
        loop {
            let missing: Vec<u64> = self.targets.iter().copied().filter(|t| !set.contains(t)).collect();
            if missing.is_empty() {
                return true;
            }
            if missing.len() as u32 > budget {
                set.truncate(start_len);
                steps.truncate(start_steps);
                return false;
            }
            let succ = successors(set, self.limit, self.max_shift);
            let found: Vec<Step> = succ.into_iter().filter(|s| missing.contains(&s.value)).collect();
            if found.is_empty() {
                break;
            }
            for s in found {
                if budget == 0 {
                    break;
                }
                if !set.contains(&s.value) {
                    set.push(s.value);
                    steps.push(s);
                    budget -= 1;
                }
            }
        }
        let missing = self.targets.iter().filter(|t| !set.contains(t)).count() as u32;
        if missing + 1 > budget {
            set.truncate(start_len);
            steps.truncate(start_steps);
            return false;
        }
        let mut key = set.clone();
        key.sort_unstable();
        if self.failed.get(&key).is_some_and(|&b| b >= budget) {
            set.truncate(start_len);
            steps.truncate(start_steps);
            return false;
        }
        for s in successors(set, self.limit, self.max_shift) {
            set.push(s.value);
            steps.push(s);
            if self.dfs(set, steps, budget - 1) {
                return true;
            }
            set.pop();
            steps.pop();
        }
        let e = self.failed.entry(key).or_insert(0);
        *e = (*e).max(budget);
        set.truncate(start_len);
        steps.truncate(start_steps);
        false
    }
}

fn target_fundamentals(targets: &[i64]) -> Result<Vec<u64>> {
    let mut f = Vec::new();
    for &t in targets {
        if t.unsigned_abs() > MAX_CONSTANT {
            return Err(Error::ConstantTooLarge(t));
        }
        if let Some(o) = odd_fundamental(t) {
            if o.odd > 1 {
                f.push(o.odd);
            }
        }
    }
    f.sort_unstable();
    f.dedup();
    Ok(f)
}

fn bit_length(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// Minimal adder graph for `targets`, or `None` if more than `cap` adders are needed.
pub fn solve_mcm(targets: &[i64], cap: u32) -> Result<Option<AdderGraph>> {
    solve_mcm_with(targets, cap, DEFAULT_MAX_BITS_SLACK)
}

/// As [`solve_mcm`] with an explicit intermediate bit-width slack.
pub fn solve_mcm_with(targets: &[i64], cap: u32, max_bits_slack: u32) -> Result<Option<AdderGraph>> {
    let fund = target_fundamentals(targets)?;
    let Some(steps) = search_steps(&fund, cap, max_bits_slack) else {
        return Ok(None);
    };
    Ok(Some(build_graph(targets, &steps)))
}

fn search_steps(fund: &[u64], cap: u32, max_bits_slack: u32) -> Option<Vec<Step>> {
    search_steps_from(fund, 0, cap, max_bits_slack)
}

fn search_steps_from(fund: &[u64], start: u32, cap: u32, max_bits_slack: u32) -> Option<Vec<Step>> {
    if fund.is_empty() {
        return Some(Vec::new());
    }
    let bits = fund.iter().map(|&t| bit_length(t)).max().unwrap() + max_bits_slack;
    let limit = 1u64 << bits;
    let mut search = Search { targets: fund, limit, max_shift: bits, failed: HashMap::new() };
    for depth in adder_lower_bound(fund).max(start)..=cap {
        search.failed.clear();
        let mut set = vec![1u64];
        let mut steps = Vec::new();
        if search.dfs(&mut set, &mut steps, depth) {
            return Some(steps);
        }
    }
    None
}

fn build_graph(targets: &[i64], steps: &[Step]) -> AdderGraph {
    // Set index 0 is the input; set index k > 0 is node k - 1.
    let op = |i: usize| if i == 0 { Operand::Input } else { Operand::Node(i - 1) };
    let nodes: Vec<AdderNode> = steps
        .iter()
        .map(|s| AdderNode {
            value: s.value,
            left: op(s.left),
            right: op(s.right),
            left_shift: s.left_shift,
            right_shift: s.right_shift,
            right_sign: s.sign,
        })
        .collect();
    let mut taps = Vec::new();
    let mut seen = HashSet::new();
    for &t in targets {
        let Some(o) = odd_fundamental(t) else { continue };
        if !seen.insert(t) {
            continue;
        }
        let source = if o.odd == 1 {
            Operand::Input
        } else {
            Operand::Node(nodes.iter().position(|n| n.value == o.odd).expect("target realized"))
        };
        taps.push(TargetTap { constant: t, source, output_shift: o.shift, sign: if o.negative { -1 } else { 1 } });
    }
    AdderGraph { nodes, targets: taps }
}

#[derive(Debug, Clone, Copy)]
enum Known {
    Exact(u32),
    AtLeast(u32),
}

/// Adder counts memoized by odd-fundamental set; safe to share between threads.
#[derive(Debug, Default)]
pub struct McmCache {
    cap: u32,
    slack: u32,
    table: Mutex<HashMap<Vec<u64>, Known>>,
}

impl McmCache {
    pub fn new(cap: u32, max_bits_slack: u32) -> Self {
        McmCache { cap, slack: max_bits_slack, table: Mutex::new(HashMap::new()) }
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Minimal adder count, `None` above the cap.
    pub fn cost(&self, targets: &[i64]) -> Result<Option<u32>> {
        let fund = target_fundamentals(targets)?;
        Ok(self.cost_within(fund, self.cap))
    }

    /// Minimal adder count if it is at most `budget` (clamped to the cap).
    pub(crate) fn cost_within(&self, fund: Vec<u64>, budget: u32) -> Option<u32> {
        if fund.is_empty() {
            return Some(0);
        }
        let budget = budget.min(self.cap);
        let start = match self.table.lock().get(&fund) {
            Some(Known::Exact(n)) => return (*n <= budget).then_some(*n),
            Some(Known::AtLeast(n)) if *n > budget => return None,
            Some(Known::AtLeast(n)) => *n,
            None => 0,
        };
        let found = search_steps_from(&fund, start, budget, self.slack).map(|s| s.len() as u32);
        let entry = match found {
            Some(n) => Known::Exact(n),
            None => Known::AtLeast(budget + 1),
        };
        self.table.lock().insert(fund, entry);
        found
    }

    pub fn len(&self) -> usize {
        self.table.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sorted distinct odd fundamentals above one.
pub(crate) fn fundamentals_of(values: &[i64]) -> Vec<u64> {
    let mut f: Vec<u64> = values.iter().filter_map(|&v| odd_fundamental(v)).map(|o| o.odd).filter(|&o| o > 1).collect();
    f.sort_unstable();
    f.dedup();
    f
}

/// Graphviz rendering of one or more labelled adder graphs.
pub fn emit_dot(graphs: &[(&str, &AdderGraph)]) -> String {
    let mut out = String::from("digraph adders {\n  rankdir=LR;\n");
    for (gi, (name, g)) in graphs.iter().enumerate() {
        let id = |op: Operand| match op {
            Operand::Input => format!("g{gi}_in"),
            Operand::Node(i) => format!("g{gi}_n{i}"),
        };
        let _ = writeln!(out, "  subgraph cluster_{gi} {{\n    label=\"{name}\";");
        let _ = writeln!(out, "    g{gi}_in [label=\"x\", shape=box];");
        for (i, n) in g.nodes.iter().enumerate() {
            let _ = writeln!(out, "    g{gi}_n{i} [label=\"{}x\", shape=circle];", n.value);
            let _ = writeln!(out, "    {} -> g{gi}_n{i} [label=\"<<{}\"];", id(n.left), n.left_shift);
            let sign = if n.right_sign < 0 { "-" } else { "+" };
            let _ = writeln!(out, "    {} -> g{gi}_n{i} [label=\"{sign}<<{}\"];", id(n.right), n.right_shift);
        }
        for (ti, t) in g.targets.iter().enumerate() {
            let _ = writeln!(out, "    g{gi}_t{ti} [label=\"{}x\", shape=plaintext];", t.constant);
            let sign = if t.sign < 0 { "-" } else { "" };
            let _ = writeln!(out, "    {} -> g{gi}_t{ti} [label=\"{sign}<<{}\", style=dashed];", id(t.source), t.output_shift);
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
