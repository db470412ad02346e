//! The common variable set of two invariants with a scripted minimization
//! function: the true-branch walkthrough grows {x, y} to {w, x, y}.

use std::path::Path;

use invcmp::commonvarset::common_var_set;
use invcmp::delta::{DeltaFn, Invariant, Scripted};
use invcmp::var::var_set;

fn main() {
    let script = Scripted::from_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/walkthrough/delta.json")).unwrap();
    let vars = ["w", "x", "y", "z"];
    let i1 = Invariant::parse(&vars, "z <= x && y <= x").unwrap();
    let i2 = Invariant::parse(&vars, "z <= x && y <= x && w <= y").unwrap();
    let dv = var_set(["x", "y"]);
    let r = common_var_set(&dv, &dv, &i1, &i2, &script, &script).unwrap();
    println!("S = {:?} after {} iteration(s), {} minimization calls", r.s, r.iterations, r.delta_calls);
    println!("left  restricted: {:?}", script.apply(&i1, &r.s).unwrap());
    println!("right restricted: {:?}", script.apply(&i2, &r.s).unwrap());
    println!("proportion {:.2}, bin {}", r.proportion(), r.bin());
}
