//! Relational Predicates: blocksets over a fixed partition plus relational
//! atoms, driven by guards and assignments.

use invcmp::formula::Atom;
use invcmp::ir::{Cond, Expr, StmtKind};
use invcmp::predicates::{Partition, PredState};
use invcmp::var::{var_set, Var};

fn main() {
    let part = Partition::default();
    for (i, b) in part.blocks().iter().enumerate() {
        println!("block {i}: {b}");
    }
    let vars = var_set(["x", "y"]);
    let guard = |a: Atom| StmtKind::Guard { cond: Cond::from_atom(&a).unwrap(), polarity: true };
    let s = PredState::top(part, vars.clone())
        .transfer(&StmtKind::Assign { target: Var::new("x"), rhs: Expr::Const(3) })
        .transfer(&guard(Atom::diff("y", "x", 0)));
    println!("after x := 3; assume (y <= x): {}", s.to_formula(&vars));
    let t = s.transfer(&StmtKind::Assign { target: Var::new("x"), rhs: Expr::Unit { negated: false, var: Var::new("x"), offset: 1 } });
    println!("after x := x + 1: {}", t.to_formula(&vars));
    println!("join: {}", s.join(&t).unwrap().to_formula(&vars));
}
