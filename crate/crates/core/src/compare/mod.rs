//! Entailment and precision classification of invariants.

pub mod external;
pub mod oracle;
pub mod smtlib;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::commonvarset::{common_var_set, CvsError, CvsResult};
use crate::delta::{DeltaError, DeltaFn};
use crate::engine::PointRecord;
use crate::formula::Formula;
use crate::var::{Var, VarSet};

pub use external::ExternalSolver;
pub use oracle::Oracle;
pub use smtlib::export_smtlib;

/// Variable assignment witnessing a failed entailment.
pub type Model = BTreeMap<Var, i64>;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("oracle query exceeds the cap of {cap} points")]
    OracleCap { cap: u64 },
    #[error(transparent)]
    Cvs(#[from] CvsError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entailment3 {
    Yes,
    /// With a countermodel when the backend produced one.
    No(Option<Model>),
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Outcome {
    Equivalent,
    LeftMorePrecise,
    RightMorePrecise,
    Incomparable,
    Unknown,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Equivalent,
        Outcome::LeftMorePrecise,
        Outcome::RightMorePrecise,
        Outcome::Incomparable,
        Outcome::Unknown,
    ];

    /// The outcome with the two sides exchanged.
    pub fn swap(self) -> Outcome {
        match self {
            Outcome::LeftMorePrecise => Outcome::RightMorePrecise,
            Outcome::RightMorePrecise => Outcome::LeftMorePrecise,
            o => o,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Outcome::LeftMorePrecise | Outcome::RightMorePrecise)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Backend {
    Oracle(Oracle),
    External(ExternalSolver),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Oracle(_) => "oracle",
            Backend::External(_) => "extern",
        }
    }
}

/// Whether every model of `a` satisfies `b`. `universe` lists variables to
/// declare beyond those occurring in the formulas.
pub fn entails(a: &Formula, b: &Formula, universe: &VarSet, backend: &Backend) -> Result<Entailment3, CompareError> {
    match backend {
        Backend::Oracle(o) => o.entails(a, b),
        Backend::External(s) => Ok(s.entails(a, b, universe)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub outcome: Outcome,
    /// Model of the left side violating the right one.
    pub left_not_right: Option<Model>,
    pub right_not_left: Option<Model>,
}

pub fn classify_detailed(
    a: &Formula,
    b: &Formula,
    universe: &VarSet,
    backend: &Backend,
) -> Result<Classification, CompareError> {
    if a.canonical() == b.canonical() {
        return Ok(Classification { outcome: Outcome::Equivalent, left_not_right: None, right_not_left: None });
    }
    let ab = entails(a, b, universe, backend)?;
    let ba = entails(b, a, universe, backend)?;
    let outcome = match (&ab, &ba) {
        (Entailment3::Unknown(_), _) | (_, Entailment3::Unknown(_)) => Outcome::Unknown,
        (Entailment3::Yes, Entailment3::Yes) => Outcome::Equivalent,
        (Entailment3::Yes, Entailment3::No(_)) => Outcome::LeftMorePrecise,
        (Entailment3::No(_), Entailment3::Yes) => Outcome::RightMorePrecise,
        (Entailment3::No(_), Entailment3::No(_)) => Outcome::Incomparable,
    };
    let model = |e: Entailment3| match e {
        Entailment3::No(m) => m,
        _ => None,
    };
    Ok(Classification { outcome, left_not_right: model(ab), right_not_left: model(ba) })
}

pub fn classify(a: &Formula, b: &Formula, universe: &VarSet, backend: &Backend) -> Result<Outcome, CompareError> {
    classify_detailed(a, b, universe, backend).map(|c| c.outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Minimal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Minimal => "minimal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComparisonRecord {
    pub point: String,
    pub mode: Mode,
    pub outcome: Outcome,
    pub left: String,
    pub right: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cvs: Option<CvsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_not_right: Option<Model>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right_not_left: Option<Model>,
}

impl ComparisonRecord {
    fn new(point: &str, mode: Mode, left: &Formula, right: &Formula, c: Classification) -> Self {
        ComparisonRecord {
            point: point.to_string(),
            mode,
            outcome: c.outcome,
            left: left.to_string(),
            right: right.to_string(),
            cvs: None,
            left_not_right: c.left_not_right,
            right_not_left: c.right_not_left,
        }
    }
}

/// Compares the two sides restricted to their common minimal variable set.
pub fn compare_minimal<D1, D2>(
    point: &str,
    left: &PointRecord,
    right: &PointRecord,
    delta_left: &D1,
    delta_right: &D2,
    backend: &Backend,
) -> Result<ComparisonRecord, CompareError>
where
    D1: DeltaFn + ?Sized,
    D2: DeltaFn + ?Sized,
{
    let cvs = common_var_set(&left.dv, &right.dv, &left.invariant, &right.invariant, delta_left, delta_right)?;
    let l = delta_left.apply(&left.invariant, &cvs.s)?.to_formula();
    let r = delta_right.apply(&right.invariant, &cvs.s)?.to_formula();
    let c = classify_detailed(&l, &r, &cvs.s, backend)?;
    let mut rec = ComparisonRecord::new(point, Mode::Minimal, &l, &r, c);
    rec.cvs = Some(cvs);
    Ok(rec)
}

/// Compares the complete invariants.
pub fn compare_full(
    point: &str,
    left: &PointRecord,
    right: &PointRecord,
    backend: &Backend,
) -> Result<ComparisonRecord, CompareError> {
    let (l, r) = (&left.invariant.formula, &right.invariant.formula);
    let c = classify_detailed(l, r, &left.invariant.universe, backend)?;
    Ok(ComparisonRecord::new(point, Mode::Full, l, r, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn oracle() -> Backend {
        Backend::Oracle(Oracle::default())
    }

    #[test]
    fn classification_examples() {
        let u = VarSet::new();
        assert_eq!(classify(&f("x <= 1"), &f("x <= 1"), &u, &oracle()).unwrap(), Outcome::Equivalent);
        assert_eq!(classify(&f("z <= x && w <= y"), &f("z <= x"), &u, &oracle()).unwrap(), Outcome::LeftMorePrecise);
        assert_eq!(classify(&f("x <= 5"), &f("y <= 5"), &u, &oracle()).unwrap(), Outcome::Incomparable);
        assert_eq!(classify(&f("false"), &f("false"), &u, &oracle()).unwrap(), Outcome::Equivalent);
        assert_eq!(classify(&f("x <= 1 && 0 <= x"), &f("x in {0, 1}"), &u, &oracle()).unwrap(), Outcome::Equivalent);
    }

    #[test]
    fn swap_is_symmetric() {
        for o in Outcome::ALL {
            assert_eq!(o.swap().swap(), o);
        }
        let u = VarSet::new();
        let (a, b) = (f("z <= x"), f("z <= x && w <= y"));
        assert_eq!(classify(&a, &b, &u, &oracle()).unwrap(), classify(&b, &a, &u, &oracle()).unwrap().swap());
    }
}
