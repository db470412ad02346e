use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use invcmp::compare::{Backend, ExternalSolver, Mode, Oracle};
use invcmp::engine::{analyze, AnalysisConfig, DomainKind};
use invcmp::experiment::{corpus_files, emit_report, render_report, run_experiment, Experiment};
use invcmp::ir::parse_program;
use invcmp::zones::WideningPolicy;

const USAGE: u8 = 1;
const PARSE: u8 = 2;
const BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "invcmp", version, about = "Run relational analyses and compare their invariants")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Minimal,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Extern,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze one program and write its per-point invariants as JSON.
    Analyze {
        program: PathBuf,
        #[arg(long, default_value = "zones")]
        domain: DomainKind,
        /// standard, delayed:K or threshold[:v1,v2,...]
        #[arg(long, default_value = "standard")]
        widening: String,
        /// Configuration file; overrides --domain and --widening.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two configurations over a corpus and write a report.
    Compare {
        #[arg(long)]
        left_cfg: PathBuf,
        #[arg(long)]
        right_cfg: PathBuf,
        /// A `.ir` file or a directory of them.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = invcmp::compare::oracle::DEFAULT_BOX)]
        oracle_box: i64,
        #[arg(long, default_value = "z3")]
        solver: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        timeout_ms: u64,
    },
    /// Print the tables of a report directory.
    Report { dir: PathBuf },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("invcmp: {msg}");
    ExitCode::from(code)
}

fn load_config(path: &Path) -> Result<AnalysisConfig, ExitCode> {
    AnalysisConfig::from_file(path).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn run(cmd: Cmd) -> Result<(), ExitCode> {
    match cmd {
        Cmd::Analyze { program, domain, widening, config, out } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => {
                    let w = WideningPolicy::parse(&widening)
                        .ok_or_else(|| fail(USAGE, format!("bad widening `{widening}`")))?;
                    AnalysisConfig::new(domain.to_string(), domain).with_widening(w)
                }
            };
            let text = std::fs::read_to_string(&program).map_err(|e| fail(PARSE, format!("{}: {e}", program.display())))?;
            let p = parse_program(&text).map_err(|e| fail(PARSE, format!("{}: {e}", program.display())))?;
            let rec = analyze(&p, &cfg).map_err(|e| fail(PARSE, e))?;
            let json = serde_json::to_string_pretty(&rec.to_json(&p)).expect("serializable") + "\n";
            match out {
                Some(path) => std::fs::write(&path, json).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?,
                None => print!("{json}"),
            }
        }
        Cmd::Compare { left_cfg, right_cfg, corpus, mode, backend, out, oracle_box, solver, timeout_ms } => {
            let (left, right) = (load_config(&left_cfg)?, load_config(&right_cfg)?);
            if oracle_box < 0 {
                return Err(fail(USAGE, "--oracle-box must be non-negative"));
            }
            let backend = match backend {
                BackendArg::Oracle => Backend::Oracle(Oracle::new(oracle_box)),
                BackendArg::Extern => {
                    let s = ExternalSolver::new(solver).with_timeout(Duration::from_millis(timeout_ms));
                    s.run("(exit)\n").map_err(|e| fail(BACKEND, e))?;
                    Backend::External(s)
                }
            };
            let files = corpus_files(&corpus).map_err(|e| fail(PARSE, e))?;
            let mut e = Experiment::new(files, backend).pair(left, right);
            e.modes = match mode {
                ModeArg::Full => vec![Mode::Full],
                ModeArg::Minimal => vec![Mode::Minimal],
                ModeArg::Both => vec![Mode::Full, Mode::Minimal],
            };
            let report = run_experiment(&e);
            emit_report(&report, &e.modes, &out).map_err(|err| fail(USAGE, err))?;
            for f in &report.failures {
                eprintln!("invcmp: {} {}: {}", f.program, f.pair, f.error);
            }
            if report.failures.iter().any(|f| f.error.contains("oracle query exceeds")) {
                return Err(ExitCode::from(BACKEND));
            }
            if !report.failures.is_empty() {
                return Err(ExitCode::from(PARSE));
            }
        }
        Cmd::Report { dir } => print!("{}", render_report(&dir).map_err(|e| fail(USAGE, e))?),
    }
    Ok(())
}
