//! SMT-LIB v2 text for formulas and entailment queries.

use std::fmt::Write;

use crate::formula::{Atom, Constraint, Formula, Range};
use crate::var::{Var, VarSet};

fn int(c: i64) -> String {
    if c < 0 {
        format!("(- {})", (c as i128).unsigned_abs())
    } else {
        c.to_string()
    }
}

fn symbol(v: &Var) -> String {
    let plain = v.as_str().chars().all(|c| c.is_ascii_alphanumeric() || "_.$".contains(c))
        && !v.as_str().starts_with(|c: char| c.is_ascii_digit());
    if plain {
        v.as_str().to_string()
    } else {
        format!("|{}|", v.as_str())
    }
}

fn and_or(op: &str, unit: &str, mut parts: Vec<String>) -> String {
    match parts.len() {
        0 => unit.to_string(),
        1 => parts.pop().unwrap(),
        _ => format!("({op} {})", parts.join(" ")),
    }
}

pub fn atom(a: &Atom) -> String {
    let c = int(a.bound);
    match (&a.pos, &a.neg) {
        (Some(p), Some(n)) => format!("(<= (- {} {}) {c})", symbol(p), symbol(n)),
        (Some(p), None) => format!("(<= {} {c})", symbol(p)),
        (None, Some(n)) => format!("(>= {} {})", symbol(n), int(-a.bound)),
        (None, None) => (if a.bound >= 0 { "true" } else { "false" }).to_string(),
    }
}

fn range(v: &Var, r: &Range) -> String {
    let x = symbol(v);
    match (r.lo, r.hi) {
        (Some(lo), Some(hi)) if lo == hi => format!("(= {x} {})", int(lo)),
        (Some(lo), Some(hi)) => format!("(and (<= {} {x}) (<= {x} {}))", int(lo), int(hi)),
        (Some(lo), None) => format!("(<= {} {x})", int(lo)),
        (None, Some(hi)) => format!("(<= {x} {})", int(hi)),
        (None, None) => "true".to_string(),
    }
}

pub fn constraint(c: &Constraint) -> String {
    match c {
        Constraint::Atom(a) => atom(a),
        Constraint::InRanges { var, ranges } => and_or("or", "false", ranges.iter().map(|r| range(var, r)).collect()),
    }
}

/// The formula as a single Boolean term.
pub fn term(f: &Formula) -> String {
    match f {
        Formula::False => "false".to_string(),
        Formula::Conj(cs) => and_or("and", "true", cs.iter().map(constraint).collect()),
    }
}

fn declared(f: &[&Formula], universe: &VarSet) -> VarSet {
    let mut vars = universe.clone();
    for g in f {
        vars.extend(g.vars());
    }
    vars
}

fn declarations(out: &mut String, vars: &VarSet) {
    for v in vars {
        writeln!(out, "(declare-const {} Int)", symbol(v)).unwrap();
    }
}

/// Declarations for `universe` (plus any variable of `f`) and one assertion.
pub fn export_smtlib(f: &Formula, universe: &VarSet) -> String {
    let mut out = String::from("(set-logic QF_LIA)\n");
    declarations(&mut out, &declared(&[f], universe));
    writeln!(out, "(assert {})", term(f)).unwrap();
    out
}

/// `left ∧ ¬right`: unsatisfiable iff `left` entails `right`. Asks for the
/// values of every declared constant when satisfiable.
pub fn entailment_query(left: &Formula, right: &Formula, universe: &VarSet) -> String {
    let vars = declared(&[left, right], universe);
    let mut out = String::from("(set-logic QF_LIA)\n");
    declarations(&mut out, &vars);
    writeln!(out, "(assert {})", term(left)).unwrap();
    writeln!(out, "(assert (not {}))", term(right)).unwrap();
    out.push_str("(check-sat)\n");
    if !vars.is_empty() {
        let names: Vec<String> = vars.iter().map(symbol).collect();
        writeln!(out, "(get-value ({}))", names.join(" ")).unwrap();
    }
    out.push_str("(exit)\n");
    out
}
