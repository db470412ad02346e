//! Relational invariant analysis over Zones and Relational Predicates, with
//! comparison of invariants restricted to a common minimal variable set.

pub mod commonvarset;
pub mod compare;
pub mod config;
pub mod delta;
pub mod engine;
pub mod experiment;
pub mod formula;
pub mod ir;
pub mod predicates;
pub mod var;
pub mod zones;

pub use var::{Var, VarSet};
