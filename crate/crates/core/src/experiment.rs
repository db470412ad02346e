//! Batch comparison of analysis configurations over a corpus, and the CSV
//! and JSON reports derived from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::compare::{compare_full, compare_minimal, Backend, ComparisonRecord, Mode, Outcome};
use crate::delta::DeltaFn;
use crate::engine::{analyze, AnalysisConfig};
use crate::ir::{parse_program, Program};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub corpus: Vec<PathBuf>,
    pub pairs: Vec<(AnalysisConfig, AnalysisConfig)>,
    pub backend: Backend,
    pub modes: Vec<Mode>,
}

impl Experiment {
    pub fn new(corpus: Vec<PathBuf>, backend: Backend) -> Self {
        Experiment { corpus, pairs: Vec::new(), backend, modes: vec![Mode::Full, Mode::Minimal] }
    }

    pub fn pair(mut self, left: AnalysisConfig, right: AnalysisConfig) -> Self {
        self.pairs.push((left, right));
        self
    }
}

/// `.ir` files of a directory in name order, or the path itself for a file.
pub fn corpus_files(path: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path).map_err(io_err(path))? {
        let p = entry.map_err(io_err(path))?.path();
        if p.extension().is_some_and(|e| e == "ir") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointComparison {
    pub program: String,
    pub point: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<ComparisonRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimal: Option<ComparisonRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub program: String,
    pub pair: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairReport {
    pub pair: String,
    pub left: String,
    pub right: String,
    pub points: Vec<PointComparison>,
}

impl PairReport {
    fn records(&self, mode: Mode) -> impl Iterator<Item = &ComparisonRecord> {
        self.points.iter().filter_map(move |p| match mode {
            Mode::Full => p.full.as_ref(),
            Mode::Minimal => p.minimal.as_ref(),
        })
    }

    /// Outcome counts for one mode; every category is present.
    pub fn counts(&self, mode: Mode) -> BTreeMap<Outcome, usize> {
        let mut m: BTreeMap<Outcome, usize> = Outcome::ALL.iter().map(|&o| (o, 0)).collect();
        for r in self.records(mode) {
            *m.get_mut(&r.outcome).unwrap() += 1;
        }
        m
    }

    pub fn count(&self, mode: Mode, outcome: Outcome) -> usize {
        self.counts(mode)[&outcome]
    }

    pub fn strict_count(&self, mode: Mode) -> usize {
        self.records(mode).filter(|r| r.outcome.is_strict()).count()
    }

    /// Minimal comparisons per proportion bin `0..=10`.
    pub fn proportions(&self) -> [usize; 11] {
        let mut bins = [0; 11];
        for r in self.records(Mode::Minimal) {
            if let Some(c) = &r.cvs {
                bins[c.bin()] += 1;
            }
        }
        bins
    }

    /// Minimal comparisons per iteration depth, from 0 to the largest seen.
    pub fn iterations(&self) -> Vec<usize> {
        let mut freq = Vec::new();
        for r in self.records(Mode::Minimal) {
            if let Some(c) = &r.cvs {
                if freq.len() <= c.iterations {
                    freq.resize(c.iterations + 1, 0);
                }
                freq[c.iterations] += 1;
            }
        }
        freq
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub pairs: Vec<PairReport>,
    pub failures: Vec<Failure>,
}

impl Report {
    pub fn pair(&self, name: &str) -> Option<&PairReport> {
        self.pairs.iter().find(|p| p.pair == name)
    }
}

pub fn pair_name(left: &AnalysisConfig, right: &AnalysisConfig) -> String {
    format!("{} vs {}", left.label, right.label)
}

fn compare_program(
    p: &Program,
    left: &AnalysisConfig,
    right: &AnalysisConfig,
    deltas: (&dyn DeltaFn, &dyn DeltaFn),
    e: &Experiment,
) -> Result<Vec<PointComparison>, String> {
    let l = analyze(p, left).map_err(|err| format!("{}: {err}", left.label))?;
    let r = analyze(p, right).map_err(|err| format!("{}: {err}", right.label))?;
    let mut out = Vec::new();
    for (pt, lrec) in &l.points {
        let Some(rrec) = r.points.get(pt) else { continue };
        let name = pt.display(p);
        let mut row = PointComparison { program: p.name.clone(), point: name.clone(), full: None, minimal: None };
        for mode in &e.modes {
            let rec = match mode {
                Mode::Full => compare_full(&name, lrec, rrec, &e.backend),
                Mode::Minimal => compare_minimal(&name, lrec, rrec, deltas.0, deltas.1, &e.backend),
            }
            .map_err(|err| format!("{name}: {err}"))?;
            match mode {
                Mode::Full => row.full = Some(rec),
                Mode::Minimal => row.minimal = Some(rec),
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Runs every pair over every program. Programs that fail to parse,
/// analyze or compare are listed in [`Report::failures`] and skipped.
pub fn run_experiment(e: &Experiment) -> Report {
    let mut report = Report::default();
    let mut programs = Vec::new();
    for path in &e.corpus {
        let parsed = fs::read_to_string(path)
            .map_err(|err| err.to_string())
            .and_then(|text| parse_program(&text).map_err(|err| err.to_string()));
        match parsed {
            Ok(p) => programs.push((path.display().to_string(), p)),
            Err(error) => report.failures.push(Failure {
                program: path.display().to_string(),
                pair: String::new(),
                error,
            }),
        }
    }
    for (left, right) in &e.pairs {
        let name = pair_name(left, right);
        let mut pr = PairReport { pair: name.clone(), left: left.label.clone(), right: right.label.clone(), points: vec![] };
        let deltas = left.delta.build().and_then(|l| right.delta.build().map(|r| (l, r)));
        let (dl, dr) = match deltas {
            Ok(d) => d,
            Err(err) => {
                report.failures.push(Failure { program: String::new(), pair: name, error: err.to_string() });
                report.pairs.push(pr);
                continue;
            }
        };
        for (path, p) in &programs {
            match compare_program(p, left, right, (dl.as_ref(), dr.as_ref()), e) {
                Ok(points) => pr.points.extend(points),
                Err(error) => {
                    log::warn!("{path} under {name}: {error}");
                    report.failures.push(Failure { program: path.clone(), pair: name.clone(), error });
                }
            }
        }
        report.pairs.push(pr);
    }
    report
}

pub fn summary_csv(r: &Report, modes: &[Mode]) -> String {
    let mut s = String::from("pair,mode,category,count\n");
    for p in r.pairs.iter().filter(|p| !p.points.is_empty()) {
        for &mode in modes {
            for (o, n) in p.counts(mode) {
                writeln!(s, "{},{mode},{o},{n}", p.pair).unwrap();
            }
        }
    }
    s
}

pub fn proportions_csv(r: &Report) -> String {
    let mut s = String::from("pair,bin,frequency\n");
    for p in r.pairs.iter().filter(|p| p.points.iter().any(|c| c.minimal.is_some())) {
        for (k, n) in p.proportions().iter().enumerate() {
            writeln!(s, "{},{:.1},{n}", p.pair, k as f64 / 10.0).unwrap();
        }
    }
    s
}

pub fn iterations_csv(r: &Report) -> String {
    let mut s = String::from("pair,depth,frequency\n");
    for p in &r.pairs {
        for (d, n) in p.iterations().iter().enumerate() {
            writeln!(s, "{},{d},{n}", p.pair).unwrap();
        }
    }
    s
}

/// Writes `summary.csv`, `proportions.csv`, `iterations.csv` and
/// `points.json` into `dir`.
pub fn emit_report(r: &Report, modes: &[Mode], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(r).expect("report serializes") + "\n";
    let files = [
        ("summary.csv", summary_csv(r, modes)),
        ("proportions.csv", proportions_csv(r)),
        ("iterations.csv", iterations_csv(r)),
        ("points.json", json),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Renders the CSV files of a report directory as text tables.
pub fn render_report(dir: &Path) -> Result<String, ReportError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(io_err(&path))
    };
    let mut out = String::new();
    let mut table: BTreeMap<(String, String), Vec<(String, String)>> = BTreeMap::new();
    for line in read("summary.csv")?.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let [pair, mode, cat, n] = f[..] {
            table.entry((pair.into(), mode.into())).or_default().push((cat.into(), n.into()));
        }
    }
    for ((pair, mode), cats) in &table {
        let row: Vec<String> = cats.iter().map(|(c, n)| format!("{c}={n}")).collect();
        writeln!(out, "{pair:<24} {mode:<8} {}", row.join(" ")).unwrap();
    }
    for (file, key) in [("proportions.csv", "proportion"), ("iterations.csv", "depth")] {
        let mut by_pair: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for line in read(file)?.lines().skip(1) {
            if let [pair, k, n] = line.split(',').collect::<Vec<_>>()[..] {
                by_pair.entry(pair.into()).or_default().push(format!("{k}:{n}"));
            }
        }
        for (pair, cells) in by_pair {
            writeln!(out, "{pair:<24} {key:<10} {}", cells.join(" ")).unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::Oracle;
    use crate::engine::DomainKind;

    #[test]
    fn empty_corpus_gives_header_only_files() {
        let e = Experiment::new(vec![], Backend::Oracle(Oracle::default()))
            .pair(AnalysisConfig::new("Z", DomainKind::Zones), AnalysisConfig::new("P", DomainKind::Predicates));
        let r = run_experiment(&e);
        assert_eq!(summary_csv(&r, &e.modes), "pair,mode,category,count\n");
        assert_eq!(proportions_csv(&r), "pair,bin,frequency\n");
        assert_eq!(iterations_csv(&r), "pair,depth,frequency\n");
    }

    #[test]
    fn unparsable_programs_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.ir");
        fs::write(&bad, "proc broken(").unwrap();
        let good = dir.path().join("good.ir");
        fs::write(&good, "proc g(x) { entry: x := 1; return; }").unwrap();
        let z = AnalysisConfig::new("Z", DomainKind::Zones);
        let e = Experiment::new(corpus_files(dir.path()).unwrap(), Backend::Oracle(Oracle::default()))
            .pair(z.clone(), z);
        let r = run_experiment(&e);
        assert_eq!(r.failures.len(), 1);
        let pr = &r.pairs[0];
        assert_eq!(pr.count(Mode::Minimal, Outcome::Equivalent), pr.points.len());
        assert!(summary_csv(&r, &e.modes).contains("Z vs Z,minimal,Equivalent,2\n"));
        assert_eq!(pr.proportions()[0], 1);
        assert_eq!(pr.proportions()[10], 1);
    }
}
