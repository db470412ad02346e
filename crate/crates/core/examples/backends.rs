//! Entailment with the bounded oracle and, when `z3` is on the path or
//! given as the first argument, an external SMT-LIB solver.

use invcmp::compare::{entails, export_smtlib, smtlib, Backend, ExternalSolver, Oracle};
use invcmp::formula::Formula;
use invcmp::var::var_set;

fn main() {
    let solver = std::env::args().nth(1).unwrap_or_else(|| "z3".into());
    let a = Formula::parse("x <= 10").unwrap();
    let b = Formula::parse("x <= 5").unwrap();
    let u = var_set(["x"]);
    print!("{}", export_smtlib(&a, &u));
    print!("{}", smtlib::entailment_query(&a, &b, &u));
    let oracle = Backend::Oracle(Oracle::default());
    println!("oracle: {:?}", entails(&a, &b, &u, &oracle).unwrap());
    let ext = Backend::External(ExternalSolver::new(solver));
    println!("extern: {:?}", entails(&a, &b, &u, &ext).unwrap());
    let blocks = Formula::parse("x in {0, 1}").unwrap();
    let range = Formula::parse("0 <= x && x <= 4").unwrap();
    println!("blocks => range: {:?}", entails(&blocks, &range, &u, &oracle).unwrap());
}
