//! Invariant minimization functions.
//!
//! A [`DeltaFn`] maps an invariant and a set of updated variables `dv` to the
//! part of the invariant those variables affect. All variants here work on
//! the reduced constraint list of the invariant.
//!
//! Variables of `dv` that the invariant leaves unconstrained are carried in
//! [`SubInvariant::top`]: the sub-invariant is conjoined with `v -> top` for
//! each of them. They count towards [`SubInvariant::vars`] but constrain
//! nothing.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{parse_constraints, Constraint, Formula, FormulaError, Parsed};
use crate::var::{fmt_var_set, Var, VarSet};

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error("no scripted result for invariant `{invariant}` with dv {dv}")]
    MissingScript { invariant: String, dv: String },
    #[error("cannot read replay file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed replay file {path}: {reason}")]
    Replay { path: PathBuf, reason: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("unknown minimization function `{0}` (expected fs, nn, cc or scripted:<path>)")]
    UnknownKind(String),
}

/// An invariant together with the variable universe it ranges over.
///
/// `universe` plays the role of `V(I)` in the common-variable-set algorithm:
/// unconstrained variables belong to it even though they do not occur in
/// `formula`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invariant {
    pub universe: VarSet,
    pub formula: Formula,
}

impl Invariant {
    pub fn new(universe: VarSet, formula: Formula) -> Self {
        Invariant { universe, formula }
    }

    /// Parses the formula with [`Formula::parse`].
    pub fn parse(universe: &[&str], formula: &str) -> Result<Self, FormulaError> {
        Ok(Invariant {
            universe: universe.iter().map(|v| Var::new(*v)).collect(),
            formula: Formula::parse(formula)?,
        })
    }

    pub fn is_bottom(&self) -> bool {
        self.formula.is_false()
    }
}

/// The part of an invariant a [`DeltaFn`] selected.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct SubInvariant {
    pub constraints: Vec<Constraint>,
    /// Variables conjoined as `v -> top`.
    pub top: VarSet,
    /// Selected from an unsatisfiable invariant.
    pub bottom: bool,
}

impl SubInvariant {
    /// Variable projection: constrained variables plus top-extended ones.
    pub fn vars(&self) -> VarSet {
        let mut s = self.top.clone();
        for c in &self.constraints {
            s.extend(c.vars().into_iter().cloned());
        }
        s
    }

    pub fn to_formula(&self) -> Formula {
        if self.bottom {
            Formula::False
        } else {
            Formula::Conj(self.constraints.clone())
        }
    }

    /// Parses result strings as accepted by [`parse_constraints`]
    /// (`w -> top` marks a top-extended variable).
    pub fn parse(parts: &[&str]) -> Result<Self, FormulaError> {
        let mut out = SubInvariant::default();
        for p in parts {
            match parse_constraints(p)? {
                Parsed::Constraints(cs) => out.constraints.extend(cs),
                Parsed::Top(v) => {
                    out.top.insert(v);
                }
                Parsed::False => out.bottom = true,
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for SubInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())?;
        for v in &self.top {
            write!(f, " && {v} -> top")?;
        }
        Ok(())
    }
}

/// Variable projection of a formula. Unconstrained variables do not occur.
pub fn vars_of(f: &Formula) -> VarSet {
    f.vars()
}

/// A minimization function. Implementations must be pure and must not
/// introduce variables outside `inv.universe`.
pub trait DeltaFn {
    fn name(&self) -> String;
    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError>;
}

impl<D: DeltaFn + ?Sized> DeltaFn for Box<D> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        (**self).apply(inv, dv)
    }
}

impl<D: DeltaFn + ?Sized> DeltaFn for &D {
    fn name(&self) -> String {
        (**self).name()
    }
    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        (**self).apply(inv, dv)
    }
}

fn top_extension(inv: &Invariant, dv: &VarSet) -> VarSet {
    dv.intersection(&inv.universe).cloned().collect()
}

fn select(inv: &Invariant, dv: &VarSet, keep: impl Fn(&Constraint) -> bool) -> SubInvariant {
    SubInvariant {
        constraints: inv.formula.constraints().iter().filter(|c| keep(c)).cloned().collect(),
        top: top_extension(inv, dv),
        bottom: inv.is_bottom(),
    }
}

/// Full State: the whole invariant, whatever `dv` is.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullState;

impl DeltaFn for FullState {
    fn name(&self) -> String {
        "fs".into()
    }

    fn apply(&self, inv: &Invariant, _dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        Ok(SubInvariant {
            constraints: inv.formula.constraints().to_vec(),
            top: inv.universe.clone(),
            bottom: inv.is_bottom(),
        })
    }
}

/// Node Neighbors: constraints mentioning at least one updated variable.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeNeighbors;

impl DeltaFn for NodeNeighbors {
    fn name(&self) -> String {
        "nn".into()
    }

    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        Ok(select(inv, dv, |c| c.vars().into_iter().any(|v| dv.contains(v))))
    }
}

/// Connected Components: every constraint reachable from `dv` in the graph
/// where constraints link the variables they share.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConnectedComponents;

impl ConnectedComponents {
    /// Variables reachable from `seeds`.
    pub fn reach(constraints: &[Constraint], seeds: &VarSet) -> VarSet {
        let mut reached = seeds.clone();
        let mut used = vec![false; constraints.len()];
        loop {
            let mut grew = false;
            for (i, c) in constraints.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let vs = c.vars();
                if vs.iter().any(|v| reached.contains(*v)) {
                    used[i] = true;
                    for v in vs {
                        grew |= reached.insert(v.clone());
                    }
                }
            }
            if !grew {
                return reached;
            }
        }
    }
}

impl DeltaFn for ConnectedComponents {
    fn name(&self) -> String {
        "cc".into()
    }

    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        let reached = Self::reach(inv.formula.constraints(), dv);
        Ok(select(inv, dv, |c| c.vars().into_iter().any(|v| reached.contains(v))))
    }
}

/// Wraps a closure as a [`DeltaFn`].
pub struct FnDelta<F> {
    name: String,
    f: F,
}

impl<F> FnDelta<F>
where
    F: Fn(&Invariant, &VarSet) -> SubInvariant,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnDelta { name: name.into(), f }
    }
}

impl<F> DeltaFn for FnDelta<F>
where
    F: Fn(&Invariant, &VarSet) -> SubInvariant,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        Ok((self.f)(inv, dv))
    }
}

fn dv_key(dv: &VarSet) -> Vec<Var> {
    dv.iter().cloned().collect()
}

/// Replays recorded results keyed by (canonical invariant, dv).
#[derive(Clone, Debug, Default)]
pub struct Scripted {
    entries: HashMap<(String, Vec<Var>), SubInvariant>,
}

#[derive(Serialize, Deserialize)]
struct ReplayEntry {
    invariant: String,
    dv: Vec<String>,
    result: Vec<String>,
}

impl Scripted {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, inv: &Formula, dv: &VarSet, result: SubInvariant) {
        self.entries.insert((inv.canonical(), dv_key(dv)), result);
    }

    /// Builder form taking textual constraints.
    pub fn with(mut self, inv: &str, dv: &[&str], result: &[&str]) -> Result<Self, FormulaError> {
        let f = Formula::parse(inv)?;
        let dv: VarSet = dv.iter().map(|v| Var::new(*v)).collect();
        self.insert(&f, &dv, SubInvariant::parse(result)?);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a JSON replay file: a list of
    /// `{"invariant": "...", "dv": [...], "result": [...]}` objects.
    pub fn from_file(path: &Path) -> Result<Self, DeltaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DeltaError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|reason| DeltaError::Replay { path: path.to_path_buf(), reason })
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let raw: Vec<ReplayEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut out = Scripted::new();
        for e in raw {
            let dv: Vec<&str> = e.dv.iter().map(String::as_str).collect();
            let res: Vec<&str> = e.result.iter().map(String::as_str).collect();
            out = out.with(&e.invariant, &dv, &res).map_err(|err| err.to_string())?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let mut raw: Vec<ReplayEntry> = self
            .entries
            .iter()
            .map(|((inv, dv), sub)| {
                let mut result: Vec<String> = sub.constraints.iter().map(Constraint::to_string).collect();
                result.extend(sub.top.iter().map(|v| format!("{v} -> top")));
                if sub.bottom {
                    result.push("0 <= -1".into());
                }
                ReplayEntry {
                    invariant: inv.clone(),
                    dv: dv.iter().map(|v| v.to_string()).collect(),
                    result,
                }
            })
            .collect();
        raw.sort_by(|a, b| (&a.invariant, &a.dv).cmp(&(&b.invariant, &b.dv)));
        serde_json::to_string_pretty(&raw).expect("serializable")
    }
}

impl DeltaFn for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn apply(&self, inv: &Invariant, dv: &VarSet) -> Result<SubInvariant, DeltaError> {
        let key = (inv.formula.canonical(), dv_key(dv));
        self.entries.get(&key).cloned().ok_or_else(|| DeltaError::MissingScript {
            invariant: key.0,
            dv: fmt_var_set(dv),
        })
    }
}

/// Minimization function selected by name in configuration files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeltaKind {
    Fs,
    Nn,
    Cc,
    Scripted(PathBuf),
}

impl DeltaKind {
    /// `fs`, `nn`, `cc` or `scripted:<path>`.
    pub fn parse(s: &str) -> Result<Self, DeltaError> {
        match s.trim() {
            "fs" => Ok(DeltaKind::Fs),
            "nn" => Ok(DeltaKind::Nn),
            "cc" => Ok(DeltaKind::Cc),
            other => other
                .strip_prefix("scripted:")
                .map(|p| DeltaKind::Scripted(PathBuf::from(p.trim())))
                .ok_or_else(|| DeltaError::UnknownKind(other.to_string())),
        }
    }

    pub fn build(&self) -> Result<Box<dyn DeltaFn + Send + Sync>, DeltaError> {
        Ok(match self {
            DeltaKind::Fs => Box::new(FullState),
            DeltaKind::Nn => Box::new(NodeNeighbors),
            DeltaKind::Cc => Box::new(ConnectedComponents),
            DeltaKind::Scripted(p) => Box::new(Scripted::from_file(p)?),
        })
    }
}

impl fmt::Display for DeltaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaKind::Fs => f.write_str("fs"),
            DeltaKind::Nn => f.write_str("nn"),
            DeltaKind::Cc => f.write_str("cc"),
            DeltaKind::Scripted(p) => write!(f, "scripted:{}", p.display()),
        }
    }
}

/// Groups constraints by connected component; used in tests and reports.
pub fn components(constraints: &[Constraint]) -> Vec<VarSet> {
    let mut owner: BTreeMap<Var, usize> = BTreeMap::new();
    let mut comps: Vec<VarSet> = Vec::new();
    for c in constraints {
        let vs: VarSet = c.vars().into_iter().cloned().collect();
        let mut hit: Vec<usize> = vs.iter().filter_map(|v| owner.get(v).copied()).collect();
        hit.sort_unstable();
        hit.dedup();
        let mut merged = vs;
        for &i in hit.iter().rev() {
            merged.extend(std::mem::take(&mut comps[i]));
        }
        comps.push(merged.clone());
        let id = comps.len() - 1;
        for v in merged {
            owner.insert(v, id);
        }
    }
    comps.retain(|c| !c.is_empty());
    comps.sort();
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::var_set;

    fn inv(universe: &[&str], f: &str) -> Invariant {
        Invariant::parse(universe, f).unwrap()
    }

    const WXYZ: [&str; 4] = ["w", "x", "y", "z"];

    #[test]
    fn full_state_keeps_everything() {
        let it = inv(&WXYZ, "z <= x && y <= x");
        let d = FullState.apply(&it, &var_set(["x", "y"])).unwrap();
        assert_eq!(d.to_formula(), it.formula);
        assert_eq!(d.vars(), var_set(WXYZ));
        let t = inv(&["x"], "true");
        assert!(FullState.apply(&t, &var_set(["x"])).unwrap().to_formula().is_true());
        assert_eq!(FullState.apply(&it, &VarSet::new()).unwrap().to_formula(), it.formula);
    }

    #[test]
    fn node_neighbors_examples() {
        let it = inv(&WXYZ, "z <= x && y <= x");
        let d = NodeNeighbors.apply(&it, &var_set(["y"])).unwrap();
        assert_eq!(d.to_formula(), Formula::parse("y <= x").unwrap());
        let d = NodeNeighbors.apply(&it, &var_set(["x"])).unwrap();
        assert_eq!(d.constraints.len(), 2);
        let it = inv(&WXYZ, "z <= x && y <= x && w <= y");
        let d = NodeNeighbors.apply(&it, &var_set(["x", "y"])).unwrap();
        assert_eq!(d.constraints.len(), 3);
        assert_eq!(d.vars(), var_set(WXYZ));
    }

    #[test]
    fn connected_components_examples() {
        let it = inv(&["a", "b", "x", "y", "z"], "z <= x && y <= x && a <= b");
        let d = ConnectedComponents.apply(&it, &var_set(["y"])).unwrap();
        assert_eq!(d.to_formula(), Formula::parse("z <= x && y <= x").unwrap());
        assert!(ConnectedComponents.apply(&it, &VarSet::new()).unwrap().vars().is_empty());
        let conn = inv(&["x", "y", "z"], "z <= x && y <= x");
        let cc = ConnectedComponents.apply(&conn, &var_set(["z"])).unwrap();
        let fs = FullState.apply(&conn, &var_set(["z"])).unwrap();
        assert_eq!(cc.to_formula(), fs.to_formula());
    }

    #[test]
    fn unconstrained_updates_are_top_extended() {
        let it = inv(&WXYZ, "z <= x && y <= x");
        let d = ConnectedComponents.apply(&it, &var_set(["w"])).unwrap();
        assert!(d.constraints.is_empty());
        assert_eq!(d.vars(), var_set(["w"]));
    }

    #[test]
    fn scripted_replay() {
        let s = Scripted::new()
            .with("z <= x && y <= x", &["x", "y"], &["y <= x"])
            .unwrap()
            .with("z <= x && x <= y - 1 && w <= y", &["x", "y"], &["z <= x", "x <= y - 1"])
            .unwrap()
            .with("z <= x && y <= x && w <= y", &["w"], &["w <= y"])
            .unwrap();
        let it = inv(&WXYZ, "y <= x && z <= x");
        let d = s.apply(&it, &var_set(["x", "y"])).unwrap();
        assert_eq!(d.to_formula(), Formula::parse("y <= x").unwrap());
        let f = inv(&WXYZ, "z <= x && x <= y - 1 && w <= y");
        assert_eq!(
            s.apply(&f, &var_set(["x", "y"])).unwrap().to_formula(),
            Formula::parse("z <= x && x <= y - 1").unwrap()
        );
        let i2 = inv(&WXYZ, "z <= x && y <= x && w <= y");
        assert_eq!(s.apply(&i2, &var_set(["w"])).unwrap().vars(), var_set(["w", "y"]));
        assert!(matches!(
            s.apply(&it, &var_set(["w"])),
            Err(DeltaError::MissingScript { .. })
        ));
        let back = Scripted::from_json(&s.to_json()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.apply(&it, &var_set(["x", "y"])).unwrap(), d);
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(DeltaKind::parse("cc").unwrap(), DeltaKind::Cc);
        assert_eq!(
            DeltaKind::parse("scripted:a.json").unwrap(),
            DeltaKind::Scripted(PathBuf::from("a.json"))
        );
        assert!(DeltaKind::parse("mn").is_err());
    }

    #[test]
    fn component_grouping() {
        let f = Formula::parse("z <= x && a <= b && y <= x").unwrap();
        assert_eq!(components(f.constraints()), vec![var_set(["a", "b"]), var_set(["x", "y", "z"])]);
    }
}
