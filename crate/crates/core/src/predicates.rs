//! Relational Predicates: each variable is abstracted by the set of partition
//! blocks it may fall into, and a store of difference atoms collected from
//! guards relates variables to each other.
//!
//! The relational store only ever holds atoms seen syntactically in guards
//! (or copies introduced by `t := v + c`); nothing is derived from them, which
//! keeps this domain incomparable with Zones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{Atom, Constraint, Formula, Range};
use crate::ir::{CondAtoms, Expr, StmtKind};
use crate::var::{Var, VarSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredError {
    #[error("predicate states range over different variables")]
    VarMismatch,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// A tiling of the integers into disjoint, sorted ranges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Range>,
}

impl Default for Partition {
    /// `(-inf,-5], (-5,-2], {-1}, {0}, {1}, [2,5), [5,+inf)`.
    fn default() -> Self {
        Partition::from_starts(&[-4, -1, 0, 1, 2, 5]).expect("valid default partition")
    }
}

impl Partition {
    /// Builds the partition whose blocks begin at each of `starts` (strictly
    /// ascending), preceded by a block unbounded below.
    pub fn from_starts(starts: &[i64]) -> Result<Self, PredError> {
        if starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PredError::InvalidPartition("block starts must be strictly ascending".into()));
        }
        let mut blocks = Vec::with_capacity(starts.len() + 1);
        let mut lo = None;
        for &s in starts {
            blocks.push(Range::new(lo, Some(s - 1)));
            lo = Some(s);
        }
        blocks.push(Range::new(lo, None));
        Ok(Partition { blocks })
    }

    /// Parses a comma-separated list of block starts, e.g. `-4,-1,0,1,2,5`.
    pub fn parse(s: &str) -> Result<Self, PredError> {
        let starts: Result<Vec<i64>, _> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect();
        let starts = starts.map_err(|e| PredError::InvalidPartition(e.to_string()))?;
        Self::from_starts(&starts)
    }

    pub fn starts(&self) -> Vec<i64> {
        self.blocks[1..].iter().map(|b| b.lo.unwrap()).collect()
    }

    pub fn blocks(&self) -> &[Range] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index of the unique block containing `c`.
    pub fn block_of(&self, c: i64) -> usize {
        self.blocks.iter().position(|b| b.contains(c)).expect("partition covers the integers")
    }

    /// Singleton blockset of `c`.
    pub fn abstract_const(&self, c: i64) -> BlockSet {
        std::iter::once(self.block_of(c)).collect()
    }

    /// Blocks intersecting `r`.
    pub fn cover(&self, r: &Range) -> BlockSet {
        if r.is_empty() {
            return BlockSet::new();
        }
        (0..self.blocks.len())
            .filter(|&i| !self.blocks[i].intersect(r).is_empty())
            .collect()
    }

    pub fn full(&self) -> BlockSet {
        (0..self.blocks.len()).collect()
    }

    /// Smallest range containing every block of `bs`.
    pub fn hull(&self, bs: &BlockSet) -> Option<Range> {
        bs.iter().map(|&i| self.blocks[i]).reduce(|a, b| a.hull(&b))
    }
}

/// Indices into a [`Partition`].
pub type BlockSet = BTreeSet<usize>;

/// `(pos, neg)` of a difference atom.
type Shape = (Option<Var>, Option<Var>);

#[derive(Clone, PartialEq, Eq)]
pub struct PredState {
    partition: Partition,
    vars: Vec<Var>,
    blocksets: BTreeMap<Var, BlockSet>,
    /// Tightest constant per atom shape.
    rel: BTreeMap<Shape, i64>,
    bottom: bool,
}

impl fmt::Debug for PredState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bottom {
            return f.write_str("Pred(bottom)");
        }
        let all: VarSet = self.vars.iter().cloned().collect();
        write!(f, "Pred[{}]", self.to_formula(&all))
    }
}

impl PredState {
    pub fn top<I: IntoIterator<Item = Var>>(partition: Partition, vars: I) -> Self {
        let vars: Vec<Var> = vars.into_iter().collect();
        let full = partition.full();
        let blocksets = vars.iter().map(|v| (v.clone(), full.clone())).collect();
        PredState { partition, vars, blocksets, rel: BTreeMap::new(), bottom: false }
    }

    pub fn bottom<I: IntoIterator<Item = Var>>(partition: Partition, vars: I) -> Self {
        let mut p = Self::top(partition, vars);
        p.bottom = true;
        p
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn is_bottom(&self) -> bool {
        self.bottom
    }

    pub fn blockset(&self, v: &Var) -> &BlockSet {
        &self.blocksets[v]
    }

    pub fn rel_atoms(&self) -> Vec<Atom> {
        self.rel
            .iter()
            .map(|((p, n), c)| Atom { pos: p.clone(), neg: n.clone(), bound: *c })
            .collect()
    }

    fn hull(&self, v: &Var) -> Range {
        self.partition.hull(&self.blocksets[v]).unwrap_or(Range::new(Some(1), Some(0)))
    }

    fn drop_rel_on(&mut self, v: &Var) {
        self.rel.retain(|(p, n), _| p.as_ref() != Some(v) && n.as_ref() != Some(v));
    }

    fn add_rel(&mut self, a: Atom) {
        let e = self.rel.entry((a.pos, a.neg)).or_insert(a.bound);
        *e = (*e).min(a.bound);
    }

    fn filter(&mut self, v: &Var, r: Range) {
        let keep = self.partition.cover(&r);
        let bs = self.blocksets.get_mut(v).expect("tracked variable");
        bs.retain(|b| keep.contains(b));
    }

    /// Abstract effect of one statement. Bottom is absorbing.
    pub fn transfer(&self, stmt: &StmtKind) -> PredState {
        if self.bottom {
            return self.clone();
        }
        let mut p = self.clone();
        match stmt {
            StmtKind::Skip => {}
            StmtKind::Assign { target, rhs } => p.assign(target, rhs),
            StmtKind::Guard { cond, polarity } => match cond.atoms(*polarity) {
                CondAtoms::False => p.bottom = true,
                CondAtoms::Conj(atoms) => {
                    for a in atoms {
                        p.guard_atom(&a);
                        p.add_rel(a);
                    }
                }
                CondAtoms::NotEqual { lhs, rhs: None, offset } => {
                    let b = p.partition.block_of(offset);
                    if p.partition.blocks[b] == Range::point(offset) {
                        p.blocksets.get_mut(&lhs).expect("tracked variable").remove(&b);
                    }
                }
                CondAtoms::NotEqual { .. } => {}
            },
        }
        p.check_emptiness();
        p
    }

    fn guard_atom(&mut self, a: &Atom) {
        match (&a.pos, &a.neg) {
            (Some(p), None) => self.filter(p, Range::new(None, Some(a.bound))),
            (None, Some(n)) => self.filter(n, Range::new(Some(-a.bound), None)),
            (Some(p), Some(n)) => {
                let (hp, hn) = (self.hull(p), self.hull(n));
                if let Some(hi) = hn.hi {
                    self.filter(p, Range::new(None, Some(hi + a.bound)));
                }
                if let Some(lo) = hp.lo {
                    self.filter(n, Range::new(Some(lo - a.bound), None));
                }
            }
            (None, None) => {}
        }
    }

    fn image(&self, v: &Var, negated: bool, offset: i64) -> BlockSet {
        let mut out = BlockSet::new();
        for &b in &self.blocksets[v] {
            let r = self.partition.blocks[b];
            let r = if negated { r.negate() } else { r };
            out.extend(self.partition.cover(&r.shift(offset)));
        }
        out
    }

    fn assign(&mut self, target: &Var, rhs: &Expr) {
        let bs = match rhs {
            Expr::Const(c) => self.partition.abstract_const(*c),
            Expr::Unit { negated, var, offset } => self.image(var, *negated, *offset),
            Expr::Sum { lhs_negated, lhs, rhs_negated, rhs, offset } => {
                let side = |neg: bool, v: &Var| {
                    let h = self.hull(v);
                    if neg {
                        h.negate()
                    } else {
                        h
                    }
                };
                let r = side(*lhs_negated, lhs).add(&side(*rhs_negated, rhs)).shift(*offset);
                self.partition.cover(&r)
            }
            Expr::Nondet => self.partition.full(),
        };
        self.blocksets.insert(target.clone(), bs);
        self.drop_rel_on(target);
        if let Expr::Unit { negated: false, var, offset } = rhs {
            if var != target {
                self.add_rel(Atom::diff(target.clone(), var.clone(), *offset));
                self.add_rel(Atom::diff(var.clone(), target.clone(), -*offset));
            }
        }
    }

    /// Marks the state bottom when some blockset is empty or the relational
    /// atoms contradict the blockset hulls (negative cycle).
    fn check_emptiness(&mut self) {
        if self.blocksets.values().any(BTreeSet::is_empty) {
            self.bottom = true;
            return;
        }
        // Bellman-Ford over x_pos - x_neg <= c with node 0 as the constant.
        let idx = |v: &Option<Var>| v.as_ref().map_or(0, |v| 1 + self.vars.iter().position(|x| x == v).unwrap());
        let mut edges: Vec<(usize, usize, i128)> = Vec::new();
        for ((p, n), c) in &self.rel {
            edges.push((idx(n), idx(p), *c as i128));
        }
        for (i, v) in self.vars.iter().enumerate() {
            let h = self.hull(v);
            if let Some(hi) = h.hi {
                edges.push((0, i + 1, hi as i128));
            }
            if let Some(lo) = h.lo {
                edges.push((i + 1, 0, -(lo as i128)));
            }
        }
        let n = self.vars.len() + 1;
        let mut dist = vec![0i128; n];
        for round in 0..=n {
            let mut changed = false;
            for &(from, to, w) in &edges {
                if dist[from] + w < dist[to] {
                    dist[to] = dist[from] + w;
                    changed = true;
                }
            }
            if !changed {
                return;
            }
            if round == n {
                self.bottom = true;
            }
        }
    }

    fn check_vars(&self, other: &PredState) -> Result<(), PredError> {
        if self.vars == other.vars && self.partition == other.partition {
            Ok(())
        } else {
            Err(PredError::VarMismatch)
        }
    }

    /// Blockset union; relational atoms common to both sides, at the larger
    /// constant.
    pub fn join(&self, other: &PredState) -> Result<PredState, PredError> {
        self.check_vars(other)?;
        if self.bottom {
            return Ok(other.clone());
        }
        if other.bottom {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for (v, bs) in &other.blocksets {
            out.blocksets.get_mut(v).unwrap().extend(bs.iter().copied());
        }
        out.rel = self
            .rel
            .iter()
            .filter_map(|(shape, c)| other.rel.get(shape).map(|d| (shape.clone(), (*c).max(*d))))
            .collect();
        Ok(out)
    }

    /// Blockset union (the blockset lattice is finite); relational atoms of
    /// `self` survive only if `next` keeps them at the same or a smaller
    /// constant.
    pub fn widen(&self, next: &PredState) -> Result<PredState, PredError> {
        self.check_vars(next)?;
        if self.bottom {
            return Ok(next.clone());
        }
        if next.bottom {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for (v, bs) in &next.blocksets {
            out.blocksets.get_mut(v).unwrap().extend(bs.iter().copied());
        }
        out.rel.retain(|shape, c| next.rel.get(shape).is_some_and(|d| d <= c));
        Ok(out)
    }

    /// Componentwise order: smaller blocksets and at least the atoms of
    /// `other` at constants no larger.
    pub fn leq(&self, other: &PredState) -> bool {
        if self.bottom {
            return true;
        }
        if other.bottom {
            return false;
        }
        self.blocksets.iter().all(|(v, bs)| bs.is_subset(&other.blocksets[v]))
            && other.rel.iter().all(|(shape, c)| self.rel.get(shape).is_some_and(|d| d <= c))
    }

    /// Block disjunctions for every non-top variable of `s`, then the
    /// relational atoms over `s`.
    pub fn to_formula(&self, s: &VarSet) -> Formula {
        if self.bottom {
            return Formula::False;
        }
        let full = self.partition.len();
        let mut cs = Vec::new();
        for v in &self.vars {
            let bs = &self.blocksets[v];
            if s.contains(v) && bs.len() < full {
                let ranges = bs.iter().map(|&b| self.partition.blocks[b]).collect();
                cs.push(Constraint::InRanges { var: v.clone(), ranges });
            }
        }
        for a in self.rel_atoms() {
            if a.vars().all(|v| s.contains(v)) {
                cs.push(Constraint::Atom(a));
            }
        }
        Formula::Conj(cs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Cond, RelOp};
    use crate::var::var_set;

    fn top(names: &[&str]) -> PredState {
        PredState::top(Partition::default(), names.iter().map(|n| Var::new(*n)))
    }

    fn guard(lhs: &str, op: RelOp, rhs: Option<&str>, offset: i64) -> StmtKind {
        StmtKind::Guard {
            cond: Cond { lhs: Var::new(lhs), op, rhs: rhs.map(Var::new), offset },
            polarity: true,
        }
    }

    fn assign(t: &str, rhs: Expr) -> StmtKind {
        StmtKind::Assign { target: Var::new(t), rhs }
    }

    #[test]
    fn default_partition_blocks() {
        let p = Partition::default();
        assert_eq!(p.len(), 7);
        assert_eq!(p.blocks()[0], Range::new(None, Some(-5)));
        assert_eq!(p.blocks()[1], Range::new(Some(-4), Some(-2)));
        assert_eq!(p.blocks()[5], Range::new(Some(2), Some(4)));
        assert_eq!(p.blocks()[6], Range::new(Some(5), None));
        assert_eq!(p.abstract_const(0), BlockSet::from([3]));
        assert_eq!(p.abstract_const(3), BlockSet::from([5]));
        assert_eq!(p.abstract_const(-7), BlockSet::from([0]));
        assert_eq!(Partition::parse("-4,-1,0,1,2,5").unwrap(), p);
        assert!(Partition::parse("1,1").is_err());
    }

    #[test]
    fn constant_assignment() {
        let p = top(&["x"]).transfer(&assign("x", Expr::Const(0)));
        assert_eq!(p.blockset(&Var::new("x")), &BlockSet::from([3]));
    }

    #[test]
    fn lower_bound_guard_filters_blocks() {
        let p = top(&["x"]).transfer(&guard("x", RelOp::Ge, None, 5));
        assert_eq!(p.blockset(&Var::new("x")), &BlockSet::from([6]));
        assert_eq!(p.rel_atoms(), vec![Atom::lower("x", 5)]);
    }

    #[test]
    fn relational_guard_on_top() {
        let p = top(&["x", "y"]).transfer(&guard("y", RelOp::Le, Some("x"), 0));
        assert_eq!(p.rel_atoms(), vec![Atom::diff("y", "x", 0)]);
        assert_eq!(p.blockset(&Var::new("x")).len(), 7);
        assert_eq!(p.blockset(&Var::new("y")).len(), 7);
    }

    #[test]
    fn shifted_copy() {
        let p = top(&["x", "y"])
            .transfer(&assign("x", Expr::Const(1)))
            .transfer(&assign("y", Expr::Unit { negated: false, var: Var::new("x"), offset: 2 }));
        assert_eq!(p.blockset(&Var::new("y")), &BlockSet::from([5]));
        assert!(p.rel_atoms().contains(&Atom::diff("y", "x", 2)));
        assert!(p.rel_atoms().contains(&Atom::diff("x", "y", -2)));
    }

    #[test]
    fn contradictions_are_bottom() {
        let p = top(&["x"])
            .transfer(&guard("x", RelOp::Ge, None, 5))
            .transfer(&guard("x", RelOp::Le, None, 3));
        assert!(p.is_bottom());
        let p = top(&["x", "y"])
            .transfer(&guard("y", RelOp::Le, Some("x"), 0))
            .transfer(&guard("x", RelOp::Lt, Some("y"), 0));
        assert!(p.is_bottom());
    }

    #[test]
    fn disequality_removes_singleton_block() {
        let p = top(&["x"])
            .transfer(&assign("x", Expr::Unit { negated: false, var: Var::new("x"), offset: 0 }))
            .transfer(&StmtKind::Guard {
                cond: Cond { lhs: Var::new("x"), op: RelOp::Ne, rhs: None, offset: 0 },
                polarity: true,
            });
        assert!(!p.blockset(&Var::new("x")).contains(&3));
    }

    #[test]
    fn join_and_widen() {
        let a = top(&["x"]).transfer(&assign("x", Expr::Const(0)));
        let b = top(&["x"]).transfer(&assign("x", Expr::Const(1)));
        assert_eq!(a.join(&b).unwrap().blockset(&Var::new("x")), &BlockSet::from([3, 4]));

        let vars = ["w", "x", "y"];
        let mut l = top(&vars);
        l.add_rel(Atom::diff("y", "x", 0));
        l.add_rel(Atom::upper("w", 3));
        let mut r = top(&vars);
        r.add_rel(Atom::diff("y", "x", 2));
        assert_eq!(l.join(&r).unwrap().rel_atoms(), vec![Atom::diff("y", "x", 2)]);

        assert_eq!(l.widen(&l).unwrap(), l);
        let w = l.widen(&l.join(&r).unwrap()).unwrap();
        assert!(w.rel_atoms().is_empty());
    }

    #[test]
    fn formula_encoding() {
        let a = top(&["x"]).transfer(&assign("x", Expr::Const(0)));
        let b = top(&["x"]).transfer(&assign("x", Expr::Const(1)));
        let j = a.join(&b).unwrap();
        assert_eq!(j.to_formula(&var_set(["x"])).to_string(), "x in {0, 1}");
        let p = top(&["x", "y"]).transfer(&guard("y", RelOp::Le, Some("x"), 0));
        assert_eq!(p.to_formula(&var_set(["x", "y"])).to_string(), "y - x <= 0");
        assert!(j.to_formula(&VarSet::new()).is_true());
        assert!(PredState::bottom(Partition::default(), [Var::new("x")]).to_formula(&var_set(["x"])).is_false());
    }
}
