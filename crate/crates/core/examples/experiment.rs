//! Runs the three paper-style pairs over the desk corpus and writes the
//! report files into the directory given as the first argument (a
//! temporary directory otherwise).

use std::path::{Path, PathBuf};

use invcmp::compare::{Backend, Oracle};
use invcmp::engine::AnalysisConfig;
use invcmp::experiment::{corpus_files, emit_report, render_report, run_experiment, Experiment};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let cfg = |n: &str| AnalysisConfig::from_file(&root.join("configs").join(format!("{n}.cfg"))).unwrap();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("invcmp-report"));
    let e = Experiment::new(corpus_files(&root.join("desk")).unwrap(), Backend::Oracle(Oracle::new(2048)))
        .pair(cfg("z"), cfg("z_k5"))
        .pair(cfg("z"), cfg("z_ths"))
        .pair(cfg("z_ths"), cfg("p"));
    let report = run_experiment(&e);
    for f in emit_report(&report, &e.modes, &out).unwrap() {
        println!("wrote {}", f.display());
    }
    print!("{}", render_report(&out).unwrap());
}
