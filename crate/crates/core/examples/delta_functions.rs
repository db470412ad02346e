//! The built-in minimization functions on one invariant.

use invcmp::delta::{ConnectedComponents, DeltaFn, FullState, Invariant, NodeNeighbors};
use invcmp::var::var_set;

fn main() {
    let inv = Invariant::parse(&["a", "b", "c", "d", "e"], "a <= b && b <= c && d <= 4").unwrap();
    let dv = var_set(["a"]);
    for d in [&FullState as &dyn DeltaFn, &NodeNeighbors, &ConnectedComponents] {
        let sub = d.apply(&inv, &dv).unwrap();
        println!("{:<3} {:?}  V = {:?}", d.name(), sub, sub.vars());
    }
}
