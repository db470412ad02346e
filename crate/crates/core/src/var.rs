use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A program variable, identified by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var(s.to_string())
    }
}

impl From<String> for Var {
    fn from(s: String) -> Self {
        Var(s)
    }
}

/// Ordered variable set. Ordering is by name, which keeps every derived
/// artifact (SMT-LIB text, reports) deterministic.
pub type VarSet = BTreeSet<Var>;

/// Builds a [`VarSet`] from anything yielding names.
pub fn var_set<I, S>(names: I) -> VarSet
where
    I: IntoIterator<Item = S>,
    S: Into<Var>,
{
    names.into_iter().map(Into::into).collect()
}

/// Renders a set as `{a, b, c}`.
pub fn fmt_var_set(set: &VarSet) -> String {
    let names: Vec<&str> = set.iter().map(Var::as_str).collect();
    format!("{{{}}}", names.join(", "))
}
