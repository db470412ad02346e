//! Bounded decision procedure for entailment between formulas.
//!
//! Every variable ranges over `[-box_bound, box_bound]`. A query is a
//! conjunction of difference atoms and disjunctions; the search branches on
//! disjunctions and propagates bounds through the atoms. Bounds propagation
//! is complete for difference constraints over a box: at its fixpoint the
//! vector of lower bounds is a model, or some variable's range is empty.
//!
//! [`enumerate_entails`] walks the box point by point instead and serves as
//! an independent cross-check.

use std::collections::BTreeMap;

use crate::formula::{Atom, Constraint, Formula, Range};
use crate::var::{Var, VarSet};

use super::{CompareError, Entailment3, Model};

pub const DEFAULT_BOX: i64 = 64;
pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Oracle {
    pub box_bound: i64,
    /// Search nodes (or enumerated points) allowed per query.
    pub cap: u64,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { box_bound: DEFAULT_BOX, cap: DEFAULT_CAP }
    }
}

#[derive(Clone, Debug)]
enum Prop {
    Atom(Atom),
    And(Vec<Prop>),
    Or(Vec<Prop>),
}

fn range_prop(v: &Var, r: &Range) -> Prop {
    Prop::And(r.atoms(v).into_iter().map(Prop::Atom).collect())
}

fn constraint_prop(c: &Constraint) -> Prop {
    match c {
        Constraint::Atom(a) => Prop::Atom(a.clone()),
        Constraint::InRanges { var, ranges } => Prop::Or(ranges.iter().map(|r| range_prop(var, r)).collect()),
    }
}

fn negated_constraint(c: &Constraint) -> Prop {
    match c {
        Constraint::Atom(a) => Prop::Atom(a.negate()),
        Constraint::InRanges { var, ranges } => Prop::And(
            ranges
                .iter()
                .map(|r| Prop::Or(r.atoms(var).iter().map(|a| Prop::Atom(a.negate())).collect()))
                .collect(),
        ),
    }
}

fn formula_prop(f: &Formula) -> Prop {
    match f {
        Formula::False => Prop::Or(vec![]),
        Formula::Conj(cs) => Prop::And(cs.iter().map(constraint_prop).collect()),
    }
}

fn negated_formula(f: &Formula) -> Prop {
    match f {
        Formula::False => Prop::And(vec![]),
        Formula::Conj(cs) => Prop::Or(cs.iter().map(negated_constraint).collect()),
    }
}

/// Difference atom over variable indices.
#[derive(Clone, Copy, Debug)]
struct Edge {
    pos: Option<usize>,
    neg: Option<usize>,
    bound: i64,
}

#[derive(Clone)]
struct Search<'a> {
    lb: Vec<i64>,
    ub: Vec<i64>,
    edges: Vec<Edge>,
    index: &'a BTreeMap<Var, usize>,
}

impl Search<'_> {
    fn edge(&self, a: &Atom) -> Edge {
        Edge { pos: a.pos.as_ref().map(|v| self.index[v]), neg: a.neg.as_ref().map(|v| self.index[v]), bound: a.bound }
    }

    /// Tightens bounds to a fixpoint; false when some range empties.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for e in &self.edges {
                match (e.pos, e.neg) {
                    (None, None) if e.bound < 0 => return false,
                    (None, None) => {}
                    (Some(p), None) => {
                        if e.bound < self.ub[p] {
                            self.ub[p] = e.bound;
                            changed = true;
                        }
                    }
                    (None, Some(n)) => {
                        if -e.bound > self.lb[n] {
                            self.lb[n] = -e.bound;
                            changed = true;
                        }
                    }
                    (Some(p), Some(n)) => {
                        let up = self.ub[n].saturating_add(e.bound);
                        if up < self.ub[p] {
                            self.ub[p] = up;
                            changed = true;
                        }
                        let low = self.lb[p].saturating_sub(e.bound);
                        if low > self.lb[n] {
                            self.lb[n] = low;
                            changed = true;
                        }
                    }
                }
            }
            if self.lb.iter().zip(&self.ub).any(|(l, u)| l > u) {
                return false;
            }
            if !changed {
                return true;
            }
        }
    }

    /// Whether the atom holds for every point of the current box.
    fn entailed(&self, a: &Atom) -> bool {
        let e = self.edge(a);
        let hi = e.pos.map_or(0, |p| self.ub[p]);
        let lo = e.neg.map_or(0, |n| self.lb[n]);
        hi - lo <= e.bound
    }
}

impl Oracle {
    pub fn new(box_bound: i64) -> Self {
        Oracle { box_bound, ..Oracle::default() }
    }

    /// A model of `a ∧ ¬b` inside the box, if one exists.
    fn countermodel(&self, a: &Formula, b: &Formula) -> Result<Option<Model>, CompareError> {
        let mut vars = a.vars();
        vars.extend(b.vars());
        let index: BTreeMap<Var, usize> = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let n = index.len();
        let root = Search { lb: vec![-self.box_bound; n], ub: vec![self.box_bound; n], edges: Vec::new(), index: &index };
        let mut nodes = 0u64;
        let found = self.solve(root, vec![formula_prop(a), negated_formula(b)], &mut nodes)?;
        Ok(found.map(|lb| index.keys().cloned().zip(lb).collect()))
    }

    fn solve(&self, mut s: Search, mut pending: Vec<Prop>, nodes: &mut u64) -> Result<Option<Vec<i64>>, CompareError> {
        *nodes += 1;
        if *nodes > self.cap {
            return Err(CompareError::OracleCap { cap: self.cap });
        }
        let mut ors = Vec::new();
        while let Some(p) = pending.pop() {
            match p {
                Prop::Atom(a) => {
                    let e = s.edge(&a);
                    s.edges.push(e);
                }
                Prop::And(ps) => pending.extend(ps),
                Prop::Or(mut ps) if ps.len() == 1 => pending.push(ps.pop().unwrap()),
                Prop::Or(ps) if ps.is_empty() => return Ok(None),
                Prop::Or(ps) => ors.push(ps),
            }
        }
        if !s.propagate() {
            return Ok(None);
        }
        // disjunctions already satisfied by every point of the box
        ors.retain(|alts| !alts.iter().any(|p| matches!(p, Prop::Atom(a) if s.entailed(a))));
        let Some(alts) = ors.pop() else {
            return Ok(Some(s.lb));
        };
        for alt in alts {
            let mut rest: Vec<Prop> = ors.iter().cloned().map(Prop::Or).collect();
            rest.push(alt);
            if let Some(m) = self.solve(s.clone(), rest, nodes)? {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }

    pub fn entails(&self, a: &Formula, b: &Formula) -> Result<Entailment3, CompareError> {
        if b.is_true() || a.is_false() {
            return Ok(Entailment3::Yes);
        }
        Ok(match self.countermodel(a, b)? {
            None => Entailment3::Yes,
            Some(m) => Entailment3::No(Some(m)),
        })
    }
}

/// Entailment by visiting every point of the box over `universe ∪ vars`.
pub fn enumerate_entails(a: &Formula, b: &Formula, universe: &VarSet, oracle: &Oracle) -> Result<Entailment3, CompareError> {
    let mut vars = universe.clone();
    vars.extend(a.vars());
    vars.extend(b.vars());
    let vars: Vec<Var> = vars.into_iter().collect();
    let width = (2 * oracle.box_bound + 1) as u64;
    let total = (0..vars.len()).try_fold(1u64, |acc, _| acc.checked_mul(width));
    if total.map_or(true, |t| t > oracle.cap) {
        return Err(CompareError::OracleCap { cap: oracle.cap });
    }
    let mut point = vec![-oracle.box_bound; vars.len()];
    loop {
        let value = |v: &Var| point[vars.binary_search(v).unwrap()];
        if a.holds(value) && !b.holds(value) {
            return Ok(Entailment3::No(Some(vars.iter().cloned().zip(point.iter().copied()).collect())));
        }
        let mut i = 0;
        loop {
            if i == point.len() {
                return Ok(Entailment3::Yes);
            }
            if point[i] < oracle.box_bound {
                point[i] += 1;
                break;
            }
            point[i] = -oracle.box_bound;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::var_set;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    #[test]
    fn interval_containment() {
        let o = Oracle::default();
        assert_eq!(o.entails(&f("x <= 5"), &f("x <= 10")).unwrap(), Entailment3::Yes);
        assert_eq!(o.entails(&f("x in {0, 1}"), &f("0 <= x && x <= 4")).unwrap(), Entailment3::Yes);
        match o.entails(&f("x <= 10"), &f("x <= 5")).unwrap() {
            Entailment3::No(Some(m)) => assert!((6..=10).contains(&m[&Var::new("x")])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transitivity_and_cycles() {
        let o = Oracle::default();
        assert_eq!(o.entails(&f("x <= y && y <= z"), &f("x <= z")).unwrap(), Entailment3::Yes);
        assert_eq!(o.entails(&f("x <= y - 1 && y <= x"), &f("false")).unwrap(), Entailment3::Yes);
        assert!(matches!(o.entails(&f("x <= z"), &f("x <= y")).unwrap(), Entailment3::No(Some(_))));
    }

    #[test]
    fn search_agrees_with_enumeration() {
        let o = Oracle::new(6);
        let cases = [
            ("x <= y && y in {0, 2..=3}", "x <= 3"),
            ("x <= y && y in {0, 2..=3}", "x <= 2"),
            ("x - y <= 1 && y - x <= 1", "x in {..=-1, 0..}"),
            ("x in {1}", "x in {0..=4} && y <= 6"),
            ("true", "x <= 6"),
            ("x <= y", "y <= x"),
        ];
        for (a, b) in cases {
            let u = var_set(["x", "y"]);
            let fast = o.entails(&f(a), &f(b)).unwrap();
            let slow = enumerate_entails(&f(a), &f(b), &u, &o).unwrap();
            assert_eq!(matches!(fast, Entailment3::Yes), matches!(slow, Entailment3::Yes), "{a} => {b}");
        }
    }

    #[test]
    fn enumeration_cap_is_a_configuration_error() {
        let o = Oracle { box_bound: 64, cap: 1000 };
        assert!(enumerate_entails(&f("x <= y"), &f("x <= z"), &VarSet::new(), &o).is_err());
    }
}
