//! Full versus minimal comparison on the two-analysis walkthrough: the
//! false branch only looks more precise because of what was assumed at
//! entry, and minimal comparison says so.

use std::path::Path;

use invcmp::compare::{Backend, Oracle};
use invcmp::engine::AnalysisConfig;
use invcmp::experiment::{run_experiment, Experiment};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/walkthrough");
    let left = AnalysisConfig::from_file(&dir.join("left.cfg")).unwrap();
    let right = AnalysisConfig::from_file(&dir.join("right.cfg")).unwrap();
    let e = Experiment::new(vec![dir.join("fig.ir")], Backend::Oracle(Oracle::default())).pair(left, right);
    let r = run_experiment(&e);
    for p in &r.pairs[0].points {
        let (full, min) = (p.full.as_ref().unwrap(), p.minimal.as_ref().unwrap());
        println!("{:<9} full {:<17} minimal {:<17} S = {:?}", p.point, full.outcome, min.outcome, min.cvs.as_ref().unwrap().s);
        println!("          {}  vs  {}", min.left, min.right);
    }
}
