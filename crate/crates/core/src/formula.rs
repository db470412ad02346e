//! Solver-neutral invariant formulas.
//!
//! Every domain in this crate exports its states as a [`Formula`]: a
//! conjunction of [`Constraint`]s, where a constraint is either a
//! unit-coefficient difference atom `p - n <= c` (either side optional) or a
//! per-variable disjunction of integer ranges. This is the representation the
//! minimization functions, the entailment backends and the SMT-LIB emitter all
//! share.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::var::{Var, VarSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("cannot parse constraint `{text}`: {reason}")]
    Syntax { text: String, reason: String },
    #[error("constraint `{0}` is not a unit-coefficient difference constraint")]
    NotDifference(String),
    #[error("integer overflow while normalizing `{0}`")]
    Overflow(String),
}

/// `pos - neg <= bound`. A missing side stands for the constant zero, so
/// `pos = Some(x), neg = None` is the unary bound `x <= bound`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pos: Option<Var>,
    pub neg: Option<Var>,
    pub bound: i64,
}

impl Atom {
    /// `a - b <= c`.
    pub fn diff(a: impl Into<Var>, b: impl Into<Var>, c: i64) -> Self {
        let (a, b) = (a.into(), b.into());
        assert_ne!(a, b, "difference atom over a single variable");
        Atom { pos: Some(a), neg: Some(b), bound: c }
    }

    /// `v <= c`.
    pub fn upper(v: impl Into<Var>, c: i64) -> Self {
        Atom { pos: Some(v.into()), neg: None, bound: c }
    }

    /// `v >= c`, stored as `-v <= -c`.
    pub fn lower(v: impl Into<Var>, c: i64) -> Self {
        Atom { pos: None, neg: Some(v.into()), bound: -c }
    }

    /// The complementary atom over the integers: `not (p - n <= c)` is
    /// `n - p <= -c - 1`.
    pub fn negate(&self) -> Atom {
        Atom {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
            bound: -self.bound - 1,
        }
    }

    /// Same variables in the same roles, ignoring the constant.
    pub fn same_shape(&self, other: &Atom) -> bool {
        self.pos == other.pos && self.neg == other.neg
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.pos.iter().chain(self.neg.iter())
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.pos.as_ref() == Some(v) || self.neg.as_ref() == Some(v)
    }

    pub fn holds<F: Fn(&Var) -> i64>(&self, value: F) -> bool {
        let p = self.pos.as_ref().map_or(0i128, |v| value(v) as i128);
        let n = self.neg.as_ref().map_or(0i128, |v| value(v) as i128);
        p - n <= self.bound as i128
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.pos, &self.neg) {
            (Some(p), Some(n)) => write!(f, "{p} - {n} <= {}", self.bound),
            (Some(p), None) => write!(f, "{p} <= {}", self.bound),
            (None, Some(n)) => write!(f, "-{n} <= {}", self.bound),
            (None, None) => write!(f, "0 <= {}", self.bound),
        }
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Inclusive integer range; `None` ends are unbounded.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Range {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl Range {
    pub const FULL: Range = Range { lo: None, hi: None };

    pub fn new(lo: Option<i64>, hi: Option<i64>) -> Self {
        Range { lo, hi }
    }

    pub fn point(c: i64) -> Self {
        Range { lo: Some(c), hi: Some(c) }
    }

    pub fn contains(&self, c: i64) -> bool {
        self.lo.map_or(true, |lo| lo <= c) && self.hi.map_or(true, |hi| c <= hi)
    }

    pub fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(lo), Some(hi)) if lo > hi)
    }

    pub fn intersect(&self, other: &Range) -> Range {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        Range { lo, hi }
    }

    /// `{x + c | x in self}`.
    pub fn shift(&self, c: i64) -> Range {
        let add = |b: i64| b.checked_add(c).expect("range bound overflow");
        Range { lo: self.lo.map(add), hi: self.hi.map(add) }
    }

    /// `{-x | x in self}`.
    pub fn negate(&self) -> Range {
        Range { lo: self.hi.map(|h| -h), hi: self.lo.map(|l| -l) }
    }

    /// Minkowski sum.
    pub fn add(&self, other: &Range) -> Range {
        let sum = |a: Option<i64>, b: Option<i64>| match (a, b) {
            (Some(a), Some(b)) => Some(a.checked_add(b).expect("range bound overflow")),
            _ => None,
        };
        Range { lo: sum(self.lo, other.lo), hi: sum(self.hi, other.hi) }
    }

    /// Smallest range containing both.
    pub fn hull(&self, other: &Range) -> Range {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Range { lo, hi }
    }

    /// The atoms `lo <= v` and `v <= hi` for the finite ends.
    pub fn atoms(&self, v: &Var) -> Vec<Atom> {
        let mut out = Vec::with_capacity(2);
        if let Some(lo) = self.lo {
            out.push(Atom::lower(v.clone(), lo));
        }
        if let Some(hi) = self.hi {
            out.push(Atom::upper(v.clone(), hi));
        }
        out
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) if lo == hi => write!(f, "{lo}"),
            (Some(lo), Some(hi)) => write!(f, "{lo}..={hi}"),
            (Some(lo), None) => write!(f, "{lo}.."),
            (None, Some(hi)) => write!(f, "..={hi}"),
            (None, None) => write!(f, ".."),
        }
    }
}

/// One conjunct of a [`Formula`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    Atom(Atom),
    /// `var` lies in at least one of `ranges`.
    InRanges { var: Var, ranges: Vec<Range> },
}

impl Constraint {
    pub fn vars(&self) -> Vec<&Var> {
        match self {
            Constraint::Atom(a) => a.vars().collect(),
            Constraint::InRanges { var, .. } => vec![var],
        }
    }

    pub fn mentions(&self, v: &Var) -> bool {
        match self {
            Constraint::Atom(a) => a.mentions(v),
            Constraint::InRanges { var, .. } => var == v,
        }
    }

    pub fn holds<F: Fn(&Var) -> i64>(&self, value: F) -> bool {
        match self {
            Constraint::Atom(a) => a.holds(value),
            Constraint::InRanges { var, ranges } => {
                let x = value(var);
                ranges.iter().any(|r| r.contains(x))
            }
        }
    }
}

impl From<Atom> for Constraint {
    fn from(a: Atom) -> Self {
        Constraint::Atom(a)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Atom(a) => write!(f, "{a}"),
            Constraint::InRanges { var, ranges } => {
                let parts: Vec<String> = ranges.iter().map(Range::to_string).collect();
                write!(f, "{var} in {{{}}}", parts.join(", "))
            }
        }
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A conjunction of constraints, or `false`. The empty conjunction is `true`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    False,
    Conj(Vec<Constraint>),
}

impl Formula {
    pub fn truth() -> Self {
        Formula::Conj(Vec::new())
    }

    pub fn from_constraints<I: IntoIterator<Item = Constraint>>(cs: I) -> Self {
        Formula::Conj(cs.into_iter().collect())
    }

    pub fn from_atoms<I: IntoIterator<Item = Atom>>(atoms: I) -> Self {
        Formula::Conj(atoms.into_iter().map(Constraint::Atom).collect())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::False)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::Conj(cs) if cs.is_empty())
    }

    pub fn constraints(&self) -> &[Constraint] {
        match self {
            Formula::False => &[],
            Formula::Conj(cs) => cs,
        }
    }

    /// Variables occurring syntactically. Unconstrained variables are absent.
    pub fn vars(&self) -> VarSet {
        self.constraints()
            .iter()
            .flat_map(|c| c.vars().into_iter().cloned())
            .collect()
    }

    pub fn holds<F: Fn(&Var) -> i64>(&self, value: F) -> bool {
        match self {
            Formula::False => false,
            Formula::Conj(cs) => cs.iter().all(|c| c.holds(&value)),
        }
    }

    /// Keeps the constraints whose variables all lie in `s`.
    pub fn restrict(&self, s: &VarSet) -> Formula {
        match self {
            Formula::False => Formula::False,
            Formula::Conj(cs) => Formula::Conj(
                cs.iter()
                    .filter(|c| c.vars().into_iter().all(|v| s.contains(v)))
                    .cloned()
                    .collect(),
            ),
        }
    }

    /// Sorted, duplicate-free rendering; two formulas with the same
    /// constraint set have the same canonical text.
    pub fn canonical(&self) -> String {
        match self {
            Formula::False => "false".to_string(),
            Formula::Conj(cs) if cs.is_empty() => "true".to_string(),
            Formula::Conj(cs) => {
                let set: BTreeSet<String> = cs.iter().map(Constraint::to_string).collect();
                set.into_iter().collect::<Vec<_>>().join(" && ")
            }
        }
    }

    /// Parses `true`, `false`, or `c1 && c2 && ...` where each conjunct is
    /// accepted by [`parse_constraints`].
    pub fn parse(text: &str) -> Result<Formula, FormulaError> {
        let t = text.trim();
        match t {
            "true" | "" => return Ok(Formula::truth()),
            "false" => return Ok(Formula::False),
            _ => {}
        }
        let mut out = Vec::new();
        for part in t.split("&&") {
            match parse_constraints(part)? {
                Parsed::Constraints(cs) => out.extend(cs),
                Parsed::False => return Ok(Formula::False),
                Parsed::Top(_) => {}
            }
        }
        Ok(Formula::Conj(out))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::False => f.write_str("false"),
            Formula::Conj(cs) if cs.is_empty() => f.write_str("true"),
            Formula::Conj(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" && ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Result of normalizing `sum(coeff * var) + constant <= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normalized {
    True,
    False,
    Atom(Atom),
}

/// Normalizes `sum(coeffs) + constant <= 0` into a difference atom. Zero
/// coefficients are dropped; the remainder must be at most one `+1` and one
/// `-1` variable.
pub fn normalize_le(coeffs: &BTreeMap<Var, i64>, constant: i64) -> Result<Normalized, FormulaError> {
    let mut pos = None;
    let mut neg = None;
    for (v, &c) in coeffs {
        match c {
            0 => {}
            1 if pos.is_none() => pos = Some(v.clone()),
            -1 if neg.is_none() => neg = Some(v.clone()),
            _ => return Err(FormulaError::NotDifference(render_linear(coeffs, constant))),
        }
    }
    let bound = constant
        .checked_neg()
        .ok_or_else(|| FormulaError::Overflow(render_linear(coeffs, constant)))?;
    Ok(match (pos, neg) {
        (None, None) if bound >= 0 => Normalized::True,
        (None, None) => Normalized::False,
        (pos, neg) => Normalized::Atom(Atom { pos, neg, bound }),
    })
}

fn render_linear(coeffs: &BTreeMap<Var, i64>, constant: i64) -> String {
    let mut s = String::new();
    for (v, c) in coeffs {
        s.push_str(&format!("{c:+}*{v} "));
    }
    format!("{s}{constant:+} <= 0")
}

/// What a single textual conjunct parses to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Constraints(Vec<Constraint>),
    False,
    /// `v -> top`: the variable is explicitly unconstrained.
    Top(Var),
}

/// Parses one conjunct:
///
/// * a linear comparison `lhs op rhs` with `op` one of `<= < >= > ==` and
///   sides built from `+`/`-` separated variables and integers
///   (`y <= x`, `x <= y - 1`, `-x <= -5`, `z - x <= 0`);
/// * a range membership `x in {..=-5, -4..=-2, 0, 5..}`;
/// * a top marker `w -> top`.
pub fn parse_constraints(text: &str) -> Result<Parsed, FormulaError> {
    let t = text.trim();
    let err = |reason: &str| FormulaError::Syntax { text: t.to_string(), reason: reason.to_string() };
    if let Some(v) = t.strip_suffix("-> top") {
        let v = v.trim();
        if !is_ident(v) {
            return Err(err("expected a variable before `-> top`"));
        }
        return Ok(Parsed::Top(Var::new(v)));
    }
    if let Some((lhs, rhs)) = t.split_once(" in ") {
        let var = lhs.trim();
        if !is_ident(var) {
            return Err(err("expected a variable before `in`"));
        }
        let body = rhs
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| err("expected `{...}` after `in`"))?;
        let mut ranges = Vec::new();
        for piece in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            ranges.push(parse_range(piece).ok_or_else(|| err("bad range"))?);
        }
        return Ok(Parsed::Constraints(vec![Constraint::InRanges { var: Var::new(var), ranges }]));
    }
    let ops = ["<=", ">=", "==", "<", ">"];
    let (op, idx) = ops
        .iter()
        .filter_map(|op| t.find(op).map(|i| (*op, i)))
        .min_by_key(|&(op, i)| (i, std::cmp::Reverse(op.len())))
        .ok_or_else(|| err("expected a comparison operator"))?;
    let lhs = parse_sum(&t[..idx]).ok_or_else(|| err("bad left-hand side"))?;
    let rhs = parse_sum(&t[idx + op.len()..]).ok_or_else(|| err("bad right-hand side"))?;
    // lhs - rhs (op) 0
    let mut coeffs = lhs.0;
    for (v, c) in rhs.0 {
        *coeffs.entry(v).or_insert(0) -= c;
    }
    let constant = lhs.1 - rhs.1;
    let negated: BTreeMap<Var, i64> = coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect();
    let le = |co: &BTreeMap<Var, i64>, k: i64| normalize_le(co, k);
    let results = match op {
        "<=" => vec![le(&coeffs, constant)?],
        "<" => vec![le(&coeffs, constant + 1)?],
        ">=" => vec![le(&negated, -constant)?],
        ">" => vec![le(&negated, -constant + 1)?],
        _ => vec![le(&coeffs, constant)?, le(&negated, -constant)?],
    };
    let mut out = Vec::new();
    for r in results {
        match r {
            Normalized::True => {}
            Normalized::False => return Ok(Parsed::False),
            Normalized::Atom(a) => out.push(Constraint::Atom(a)),
        }
    }
    Ok(Parsed::Constraints(out))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_range(p: &str) -> Option<Range> {
    if p == ".." {
        return Some(Range::FULL);
    }
    if let Some(hi) = p.strip_prefix("..=") {
        return Some(Range::new(None, Some(hi.trim().parse().ok()?)));
    }
    if let Some((lo, hi)) = p.split_once("..=") {
        return Some(Range::new(Some(lo.trim().parse().ok()?), Some(hi.trim().parse().ok()?)));
    }
    if let Some(lo) = p.strip_suffix("..") {
        return Some(Range::new(Some(lo.trim().parse().ok()?), None));
    }
    p.parse().ok().map(Range::point)
}

/// `a - b + 3` → ({a: 1, b: -1}, 3).
fn parse_sum(s: &str) -> Option<(BTreeMap<Var, i64>, i64)> {
    let mut coeffs = BTreeMap::new();
    let mut constant = 0i64;
    let mut sign = 1i64;
    let mut expect_term = true;
    let mut rest = s.trim();
    if rest.is_empty() {
        return None;
    }
    while !rest.is_empty() {
        let c = rest.chars().next()?;
        if c == '+' || c == '-' {
            if c == '-' {
                sign = -sign;
            }
            rest = rest[1..].trim_start();
            expect_term = true;
            continue;
        }
        if !expect_term {
            return None;
        }
        let end = rest
            .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
            .unwrap_or(rest.len());
        let tok = &rest[..end];
        if tok.is_empty() {
            return None;
        }
        if let Ok(n) = tok.parse::<i64>() {
            constant = constant.checked_add(sign.checked_mul(n)?)?;
        } else if is_ident(tok) {
            *coeffs.entry(Var::new(tok)).or_insert(0) += sign;
        } else {
            return None;
        }
        sign = 1;
        expect_term = false;
        rest = rest[end..].trim_start();
    }
    if expect_term {
        return None;
    }
    Some((coeffs, constant))
}
