//! Difference-bound matrices: closure, join, the three widening policies
//! and redundancy reduction.

use invcmp::formula::Atom;
use invcmp::var::var_set;
use invcmp::zones::{WideningPolicy, ZoneState};

fn main() {
    let vars = var_set(["x", "y", "z"]);
    let z = ZoneState::from_atoms(vars.clone(), &[Atom::diff("x", "y", 1), Atom::diff("y", "z", 2), Atom::upper("z", 0)])
        .unwrap();
    println!("closed:  {:?}", z.closure());
    println!("reduced: {}", z.to_formula(&vars));

    let a = ZoneState::from_atoms(vars.clone(), &[Atom::upper("x", 1), Atom::lower("x", 0)]).unwrap();
    let b = ZoneState::from_atoms(vars.clone(), &[Atom::upper("x", 2), Atom::lower("x", 0)]).unwrap();
    println!("join:    {}", a.join(&b).unwrap().to_formula(&vars));
    for policy in [WideningPolicy::Standard, WideningPolicy::Delayed(5), WideningPolicy::threshold([0, 1, 10, 100])] {
        let w = a.widen(&b, &policy, 3).unwrap();
        println!("widen {policy} (3rd visit): {}", w.to_formula(&vars));
    }
    let bottom = ZoneState::from_atoms(vars.clone(), &[Atom::diff("x", "y", -1), Atom::diff("y", "x", 0)]).unwrap();
    println!("negative cycle is bottom: {}", bottom.closure().is_bottom());
    println!("a included in b: {}", a.includes(&b, &var_set(["x"])).unwrap());
}
