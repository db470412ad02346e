//! Common minimal changed-variable set.
//!
//! Given two invariants over the same variables, their updated-variable sets
//! and one minimization function per side, computes the smallest `S` with
//!
//! ```text
//! S = V(Δ1(I1, S)) = V(Δ2(I2, S))
//! ```
//!
//! by growing the two candidate sets from `V(Δi(Ii, dvi))` until they meet.
//! Each round feeds a minimization function only the variables its side is
//! missing, and only ever unions the result in, so the sets never shrink.

use serde::Serialize;
use thiserror::Error;

use crate::delta::{DeltaError, DeltaFn, Invariant};
use crate::var::{fmt_var_set, VarSet};

#[derive(Debug, Error)]
pub enum CvsError {
    #[error("invariants range over different variables: {left} vs {right}")]
    UniverseMismatch { left: String, right: String },
    #[error("updated variables {dv} are not all in the universe {universe}")]
    DvOutsideUniverse { dv: String, universe: String },
    #[error("minimization function `{name}` returned variables {vars} outside the universe")]
    DeltaEscapes { name: String, vars: String },
    #[error("no progress after {iterations} iterations: S1 = {s1}, S2 = {s2}")]
    NoProgress { iterations: usize, s1: String, s2: String },
    #[error(transparent)]
    Delta(#[from] DeltaError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CvsResult {
    pub s: VarSet,
    /// Loop-body executions.
    pub iterations: usize,
    /// Minimization-function evaluations.
    pub delta_calls: usize,
    /// `|s|`.
    pub numerator: usize,
    /// `|V(I1)|`.
    pub denominator: usize,
}

impl CvsResult {
    /// `|s| / |V(I1)|`, zero for an empty universe.
    pub fn proportion(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    /// Histogram bin in `0..=10`: bin 0 holds `s = ∅`, bin `k` holds
    /// proportions in `((k-1)/10, k/10]`.
    pub fn bin(&self) -> usize {
        if self.denominator == 0 || self.numerator == 0 {
            0
        } else {
            (10 * self.numerator).div_ceil(self.denominator)
        }
    }
}

struct Side<'a, D: ?Sized> {
    inv: &'a Invariant,
    delta: &'a D,
}

impl<D: DeltaFn + ?Sized> Side<'_, D> {
    fn vars(&self, dv: &VarSet, calls: &mut usize) -> Result<VarSet, CvsError> {
        *calls += 1;
        let v = self.delta.apply(self.inv, dv)?.vars();
        let outside: VarSet = v.difference(&self.inv.universe).cloned().collect();
        if !outside.is_empty() {
            return Err(CvsError::DeltaEscapes { name: self.delta.name(), vars: fmt_var_set(&outside) });
        }
        Ok(v)
    }
}

/// Computes the common changed-variable set of `i1` and `i2`.
pub fn common_var_set<D1, D2>(
    dv1: &VarSet,
    dv2: &VarSet,
    i1: &Invariant,
    i2: &Invariant,
    delta1: &D1,
    delta2: &D2,
) -> Result<CvsResult, CvsError>
where
    D1: DeltaFn + ?Sized,
    D2: DeltaFn + ?Sized,
{
    if i1.universe != i2.universe {
        return Err(CvsError::UniverseMismatch {
            left: fmt_var_set(&i1.universe),
            right: fmt_var_set(&i2.universe),
        });
    }
    for dv in [dv1, dv2] {
        if !dv.is_subset(&i1.universe) {
            return Err(CvsError::DvOutsideUniverse {
                dv: fmt_var_set(dv),
                universe: fmt_var_set(&i1.universe),
            });
        }
    }
    let first = Side { inv: i1, delta: delta1 };
    let second = Side { inv: i2, delta: delta2 };
    let mut calls = 0;
    let mut s1 = first.vars(dv1, &mut calls)?;
    let mut s2 = second.vars(dv2, &mut calls)?;
    let mut iterations = 0;
    while s1 != s2 {
        iterations += 1;
        let before = (s1.len(), s2.len());
        if s1.is_superset(&s2) {
            let dv2: VarSet = s1.difference(&s2).cloned().collect();
            s2.extend(second.vars(&dv2, &mut calls)?);
        } else if s2.is_superset(&s1) {
            let dv1: VarSet = s2.difference(&s1).cloned().collect();
            s1.extend(first.vars(&dv1, &mut calls)?);
        } else {
            let dv1: VarSet = s2.difference(&s1).cloned().collect();
            let dv2: VarSet = s1.difference(&s2).cloned().collect();
            s1.extend(first.vars(&dv1, &mut calls)?);
            s2.extend(second.vars(&dv2, &mut calls)?);
        }
        // A minimization function that drops its own seeds can stall the
        // loop; report it rather than spin.
        if before == (s1.len(), s2.len()) {
            return Err(CvsError::NoProgress {
                iterations,
                s1: fmt_var_set(&s1),
                s2: fmt_var_set(&s2),
            });
        }
    }
    Ok(CvsResult {
        numerator: s1.len(),
        denominator: i1.universe.len(),
        s: s1,
        iterations,
        delta_calls: calls,
    })
}
