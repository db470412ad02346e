#![allow(dead_code)]

use std::path::PathBuf;

use invcmp::engine::AnalysisConfig;
use invcmp::experiment::corpus_files;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn desk() -> Vec<PathBuf> {
    corpus_files(&root().join("desk")).unwrap()
}

pub fn config(name: &str) -> AnalysisConfig {
    AnalysisConfig::from_file(&root().join("configs").join(format!("{name}.cfg"))).unwrap()
}

/// Corpus constants reach 1000; the box must contain the countermodels
/// that separate a widened bound from a threshold.
pub const CORPUS_BOX: i64 = 2048;

pub fn z3() -> Option<PathBuf> {
    let candidates = [PathBuf::from("/usr/local/bin/z3"), PathBuf::from("/usr/bin/z3")];
    std::env::var_os("INVCMP_SOLVER")
        .map(PathBuf::from)
        .into_iter()
        .chain(candidates)
        .find(|p| p.is_file())
}
