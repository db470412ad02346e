//! The Zones domain: difference-bound matrices.
//!
//! Entry `m[i][j]` bounds `v_i - v_j <= m[i][j]`; index 0 is the constant
//! zero, so `m[i][0]` is an upper bound on `v_i` and `-m[0][i]` a lower bound.

use std::fmt;

use thiserror::Error;

use crate::formula::{Atom, Formula, Range};
use crate::ir::{CondAtoms, Expr, StmtKind};
use crate::var::{Var, VarSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZoneError {
    #[error("zones range over different variables")]
    VarMismatch,
    #[error("variable {0} is not tracked by this zone")]
    UnknownVariable(Var),
}

/// An element of `Z ∪ {+∞}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(i64),
    Inf,
}

impl Bound {
    pub fn finite(self) -> Option<i64> {
        match self {
            Bound::Finite(c) => Some(c),
            Bound::Inf => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    fn plus(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => {
                Bound::Finite(a.checked_add(b).expect("difference bound overflow"))
            }
            _ => Bound::Inf,
        }
    }
}

impl fmt::Debug for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(c) => write!(f, "{c}"),
            Bound::Inf => f.write_str("inf"),
        }
    }
}

/// How unstable bounds are extrapolated at widening points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WideningPolicy {
    /// Join for the first two visits, then drop unstable bounds.
    Standard,
    /// Join for the first `k` visits, then drop unstable bounds.
    Delayed(u32),
    /// Join for the first two visits, then lift unstable bounds to the next
    /// threshold (sorted, duplicate-free), or drop them past the last one.
    Threshold(Vec<i64>),
}

/// Thresholds built from powers of ten.
pub const DEFAULT_THRESHOLDS: [i64; 5] = [0, 1, 10, 100, 1000];

/// Visits joined before [`WideningPolicy::Standard`] starts extrapolating.
pub const STANDARD_DELAY: u32 = 2;

impl WideningPolicy {
    pub fn threshold<I: IntoIterator<Item = i64>>(values: I) -> Self {
        let mut t: Vec<i64> = values.into_iter().collect();
        t.sort_unstable();
        t.dedup();
        WideningPolicy::Threshold(t)
    }

    pub fn delayed(k: u32) -> Option<Self> {
        (k >= 1).then_some(WideningPolicy::Delayed(k))
    }

    pub fn delay(&self) -> u32 {
        match self {
            WideningPolicy::Standard | WideningPolicy::Threshold(_) => STANDARD_DELAY,
            WideningPolicy::Delayed(k) => *k,
        }
    }

    /// Parses `standard`, `delayed:K` and `threshold[:t1,t2,...]`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "standard" => Some(WideningPolicy::Standard),
            None if s == "threshold" => Some(WideningPolicy::threshold(DEFAULT_THRESHOLDS)),
            Some(("delayed", k)) => k.trim().parse().ok().and_then(WideningPolicy::delayed),
            Some(("threshold", list)) => {
                let vals: Result<Vec<i64>, _> = list.split(',').map(|t| t.trim().parse()).collect();
                vals.ok().filter(|v| !v.is_empty()).map(WideningPolicy::threshold)
            }
            _ => None,
        }
    }
}

impl fmt::Display for WideningPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WideningPolicy::Standard => f.write_str("standard"),
            WideningPolicy::Delayed(k) => write!(f, "delayed:{k}"),
            WideningPolicy::Threshold(t) => {
                let parts: Vec<String> = t.iter().map(i64::to_string).collect();
                write!(f, "threshold:{}", parts.join(","))
            }
        }
    }
}

/// A zone over an ordered variable list.
#[derive(Clone)]
pub struct ZoneState {
    vars: Vec<Var>,
    m: Vec<Bound>,
    closed: bool,
    bottom: bool,
}

impl PartialEq for ZoneState {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
            && self.bottom == other.bottom
            && (self.bottom || self.m == other.m)
    }
}

impl Eq for ZoneState {}

impl fmt::Debug for ZoneState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bottom {
            return f.write_str("Zone(bottom)");
        }
        write!(f, "Zone[")?;
        let mut first = true;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i != j {
                    if let Bound::Finite(c) = self.get(i, j) {
                        if !first {
                            f.write_str(", ")?;
                        }
                        first = false;
                        write!(f, "{}", self.atom(i, j, c))?;
                    }
                }
            }
        }
        write!(f, "]")
    }
}

impl ZoneState {
    /// The unconstrained zone.
    pub fn top<I: IntoIterator<Item = Var>>(vars: I) -> Self {
        let vars: Vec<Var> = vars.into_iter().collect();
        let d = vars.len() + 1;
        let mut m = vec![Bound::Inf; d * d];
        for i in 0..d {
            m[i * d + i] = Bound::Finite(0);
        }
        ZoneState { vars, m, closed: true, bottom: false }
    }

    pub fn bottom<I: IntoIterator<Item = Var>>(vars: I) -> Self {
        let mut z = Self::top(vars);
        z.bottom = true;
        z
    }

    /// Unclosed zone from a list of atoms.
    pub fn from_atoms<I: IntoIterator<Item = Var>>(vars: I, atoms: &[Atom]) -> Result<Self, ZoneError> {
        let mut z = Self::top(vars);
        for a in atoms {
            z.meet_atom(a)?;
        }
        Ok(z)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len() + 1
    }

    pub fn is_bottom(&self) -> bool {
        self.bottom
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn get(&self, i: usize, j: usize) -> Bound {
        self.m[i * self.dim() + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Bound) {
        let d = self.dim();
        self.m[i * d + j] = b;
    }

    /// Matrix index of `v` (1-based; 0 is the zero variable).
    pub fn index(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|x| x == v).map(|i| i + 1)
    }

    fn var_at(&self, i: usize) -> Option<&Var> {
        (i > 0).then(|| &self.vars[i - 1])
    }

    fn atom(&self, i: usize, j: usize, c: i64) -> Atom {
        Atom { pos: self.var_at(i).cloned(), neg: self.var_at(j).cloned(), bound: c }
    }

    fn tighten(&mut self, i: usize, j: usize, c: i64) {
        if Bound::Finite(c) < self.get(i, j) {
            self.set(i, j, Bound::Finite(c));
            self.closed = false;
        }
    }

    /// Intersects with one atom. The result is not closed.
    pub fn meet_atom(&mut self, a: &Atom) -> Result<(), ZoneError> {
        let idx = |v: &Option<Var>| match v {
            None => Ok(0),
            Some(v) => self.index(v).ok_or_else(|| ZoneError::UnknownVariable(v.clone())),
        };
        let (i, j) = (idx(&a.pos)?, idx(&a.neg)?);
        if self.bottom {
            return Ok(());
        }
        if i == j {
            if a.bound < 0 {
                self.bottom = true;
            }
            return Ok(());
        }
        self.tighten(i, j, a.bound);
        Ok(())
    }

    /// Shortest-path closure; flags bottom on a negative cycle.
    pub fn closure(&self) -> ZoneState {
        let mut z = self.clone();
        z.close();
        z
    }

    pub fn close(&mut self) {
        if self.bottom || self.closed {
            return;
        }
        let d = self.dim();
        for k in 0..d {
            for i in 0..d {
                let ik = self.m[i * d + k];
                if !ik.is_finite() {
                    continue;
                }
                for j in 0..d {
                    let via = ik.plus(self.m[k * d + j]);
                    if via < self.m[i * d + j] {
                        self.m[i * d + j] = via;
                    }
                }
            }
        }
        if (0..d).any(|i| self.m[i * d + i] < Bound::Finite(0)) {
            self.bottom = true;
            return;
        }
        self.closed = true;
    }

    /// Interval of `v` implied by the (closed) matrix.
    pub fn interval(&self, v: &Var) -> Range {
        let i = self.index(v).expect("tracked variable");
        Range::new(self.get(0, i).finite().map(|c| -c), self.get(i, 0).finite())
    }

    fn forget_index(&mut self, t: usize) {
        for k in 0..self.dim() {
            if k != t {
                self.set(t, k, Bound::Inf);
                self.set(k, t, Bound::Inf);
            }
        }
    }

    /// Drops every constraint on `v`.
    pub fn forget(&self, v: &Var) -> ZoneState {
        let mut z = self.closure();
        if z.bottom {
            return z;
        }
        let t = z.index(v).expect("tracked variable");
        z.forget_index(t);
        z
    }

    /// Abstract effect of one statement. Bottom is absorbing; the result is
    /// closed.
    pub fn transfer(&self, stmt: &StmtKind) -> ZoneState {
        let mut z = self.closure();
        if z.bottom {
            return z;
        }
        match stmt {
            StmtKind::Skip => {}
            StmtKind::Guard { cond, polarity } => match cond.atoms(*polarity) {
                CondAtoms::False => z.bottom = true,
                // Zones cannot represent disequalities.
                CondAtoms::NotEqual { .. } => {}
                CondAtoms::Conj(atoms) => {
                    for a in &atoms {
                        z.meet_atom(a).expect("guard over program variables");
                    }
                }
            },
            StmtKind::Assign { target, rhs } => z.assign(target, rhs),
        }
        z.close();
        z
    }

    fn assign(&mut self, target: &Var, rhs: &Expr) {
        let t = self.index(target).expect("tracked variable");
        match rhs {
            Expr::Const(c) => {
                self.forget_index(t);
                self.tighten(t, 0, *c);
                self.tighten(0, t, -*c);
            }
            Expr::Unit { negated: false, var, offset } if var == target => {
                // t' = t + offset: shift row and column, stays closed
                for k in 0..self.dim() {
                    if k != t {
                        let row = self.get(t, k).plus(Bound::Finite(*offset));
                        let col = self.get(k, t).plus(Bound::Finite(-*offset));
                        self.set(t, k, row);
                        self.set(k, t, col);
                    }
                }
            }
            Expr::Unit { negated: false, var, offset } => {
                let v = self.index(var).expect("tracked variable");
                self.forget_index(t);
                self.tighten(t, v, *offset);
                self.tighten(v, t, -*offset);
            }
            Expr::Unit { negated: true, var, offset } => {
                let range = self.interval(var).negate().shift(*offset);
                self.forget_index(t);
                self.bound_by(t, range);
            }
            Expr::Sum { lhs_negated, lhs, rhs_negated, rhs, offset } => {
                let side = |neg: bool, v: &Var| {
                    let r = self.interval(v);
                    if neg {
                        r.negate()
                    } else {
                        r
                    }
                };
                let range = side(*lhs_negated, lhs).add(&side(*rhs_negated, rhs)).shift(*offset);
                self.forget_index(t);
                self.bound_by(t, range);
            }
            Expr::Nondet => self.forget_index(t),
        }
    }

    fn bound_by(&mut self, t: usize, r: Range) {
        if let Some(hi) = r.hi {
            self.tighten(t, 0, hi);
        }
        if let Some(lo) = r.lo {
            self.tighten(0, t, -lo);
        }
    }

    fn check_vars(&self, other: &ZoneState) -> Result<(), ZoneError> {
        if self.vars == other.vars {
            Ok(())
        } else {
            Err(ZoneError::VarMismatch)
        }
    }

    /// Least upper bound: pointwise max of the closed matrices.
    pub fn join(&self, other: &ZoneState) -> Result<ZoneState, ZoneError> {
        self.check_vars(other)?;
        let (a, b) = (self.closure(), other.closure());
        if a.bottom {
            return Ok(b);
        }
        if b.bottom {
            return Ok(a);
        }
        let m = a.m.iter().zip(&b.m).map(|(x, y)| *x.max(y)).collect();
        Ok(ZoneState { vars: a.vars, m, closed: true, bottom: false })
    }

    /// Widening of `self` (the previous iterate, possibly unclosed) by
    /// `next`. Joins while `visit_count` has not exceeded the policy's
    /// delay. The extrapolated result is deliberately left unclosed.
    pub fn widen(
        &self,
        next: &ZoneState,
        policy: &WideningPolicy,
        visit_count: u32,
    ) -> Result<ZoneState, ZoneError> {
        self.check_vars(next)?;
        if visit_count <= policy.delay() || self.bottom {
            return self.join(next);
        }
        let b = next.closure();
        if b.bottom {
            return Ok(self.clone());
        }
        let m = self
            .m
            .iter()
            .zip(&b.m)
            .map(|(&old, &new)| {
                if new <= old {
                    return old;
                }
                match (policy, new) {
                    (WideningPolicy::Threshold(ts), Bound::Finite(c)) => ts
                        .iter()
                        .find(|&&t| t >= c)
                        .map_or(Bound::Inf, |&t| Bound::Finite(t)),
                    _ => Bound::Inf,
                }
            })
            .collect();
        Ok(ZoneState { vars: self.vars.clone(), m, closed: false, bottom: false })
    }

    /// Inclusion restricted to `s`: every bound of `self` among `s ∪ {0}` is
    /// at most the corresponding bound of `other`. Both operands are closed
    /// first, so projection is entry selection.
    pub fn includes(&self, other: &ZoneState, s: &VarSet) -> Result<bool, ZoneError> {
        self.check_vars(other)?;
        let (a, b) = (self.closure(), other.closure());
        if a.bottom {
            return Ok(true);
        }
        if b.bottom {
            return Ok(false);
        }
        let mut idx = vec![0];
        for v in s {
            idx.push(a.index(v).ok_or_else(|| ZoneError::UnknownVariable(v.clone()))?);
        }
        Ok(idx.iter().all(|&i| idx.iter().all(|&j| a.get(i, j) <= b.get(i, j))))
    }

    /// Full inclusion.
    pub fn leq(&self, other: &ZoneState) -> bool {
        let all: VarSet = self.vars.iter().cloned().collect();
        self.includes(other, &all).unwrap_or(false)
    }

    /// A minimal list of finite constraints whose closure is this zone.
    ///
    /// Variables tied by zero-weight cycles form equivalence classes. The
    /// class of the zero variable is emitted as unary bounds (the constants),
    /// other classes as a cycle through their members, and between class
    /// representatives an edge is dropped whenever a two-step path through a
    /// third representative is at least as tight.
    pub fn reduce_redundant(&self) -> Vec<Atom> {
        let z = self.closure();
        if z.bottom {
            return Vec::new();
        }
        let d = z.dim();
        let zero_cycle = |i: usize, j: usize| match (z.get(i, j), z.get(j, i)) {
            (Bound::Finite(a), Bound::Finite(b)) => a + b == 0,
            _ => false,
        };
        let rep: Vec<usize> = (0..d).map(|i| (0..=i).find(|&j| zero_cycle(i, j) || j == i).unwrap()).collect();
        let mut out = Vec::new();
        for r in 0..d {
            if rep[r] != r {
                continue;
            }
            let members: Vec<usize> = (0..d).filter(|&i| rep[i] == r).collect();
            if r == 0 {
                for &v in &members[1..] {
                    out.push(z.atom(v, 0, z.get(v, 0).finite().unwrap()));
                    out.push(z.atom(0, v, z.get(0, v).finite().unwrap()));
                }
            } else if members.len() == 2 {
                let (a, b) = (members[0], members[1]);
                out.push(z.atom(a, b, z.get(a, b).finite().unwrap()));
                out.push(z.atom(b, a, z.get(b, a).finite().unwrap()));
            } else if members.len() > 2 {
                for (k, &a) in members.iter().enumerate() {
                    let b = members[(k + 1) % members.len()];
                    out.push(z.atom(a, b, z.get(a, b).finite().unwrap()));
                }
            }
        }
        let reps: Vec<usize> = (0..d).filter(|&i| rep[i] == i).collect();
        for &i in &reps {
            for &j in &reps {
                if i == j {
                    continue;
                }
                let Bound::Finite(c) = z.get(i, j) else { continue };
                let redundant = reps
                    .iter()
                    .any(|&k| k != i && k != j && z.get(i, k).plus(z.get(k, j)) <= Bound::Finite(c));
                if !redundant {
                    out.push(z.atom(i, j, c));
                }
            }
        }
        out.sort_by(|a, b| atom_order(a).cmp(&atom_order(b)));
        out
    }

    /// The reduced constraints whose variables all lie in `s`. Unbounded
    /// variables contribute nothing.
    pub fn to_formula(&self, s: &VarSet) -> Formula {
        let z = self.closure();
        if z.bottom {
            return Formula::False;
        }
        Formula::from_atoms(
            z.reduce_redundant()
                .into_iter()
                .filter(|a| a.vars().all(|v| s.contains(v))),
        )
    }
}

/// Orders atoms by the variables they mention, then by role.
fn atom_order(a: &Atom) -> (Vec<&Var>, bool, i64) {
    let mut vs: Vec<&Var> = a.vars().collect();
    vs.sort();
    (vs, a.pos.is_none(), a.bound)
}
