//! Entailment through an SMT-LIB solver run as a child process.
//!
//! Each query starts a fresh process, writes the script to its standard
//! input and reads the reply. Failures of any kind become
//! [`Entailment3::Unknown`] with a logged reason.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use crate::formula::Formula;
use crate::var::{Var, VarSet};

use super::smtlib::entailment_query;
use super::{Entailment3, Model};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalSolver {
    pub path: PathBuf,
    /// Arguments that make the solver read a script from standard input.
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl ExternalSolver {
    /// A z3-compatible solver (`-in`) with a 10 s timeout.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ExternalSolver { path: path.into(), args: vec!["-in".into()], timeout: Duration::from_secs(10) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Runs a script and returns the solver's standard output.
    pub fn run(&self, script: &str) -> Result<String, String> {
        let mut child = Command::new(&self.path)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", self.path.display()))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut out = String::new();
            let read = stdout.read_to_string(&mut out).map(|_| out);
            let _ = tx.send(read);
        });
        if let Err(e) = stdin.write_all(script.as_bytes()) {
            let _ = child.kill();
            let _ = child.wait();
            return Err(format!("writing query: {e}"));
        }
        drop(stdin);
        match rx.recv_timeout(self.timeout) {
            Ok(Ok(out)) => {
                let _ = child.wait();
                Ok(out)
            }
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(format!("reading reply: {e}"))
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(format!("timed out after {} ms", self.timeout.as_millis()))
            }
        }
    }

    pub fn entails(&self, a: &Formula, b: &Formula, universe: &VarSet) -> Entailment3 {
        let script = entailment_query(a, b, universe);
        let reply = match self.run(&script) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("solver failure: {e}");
                return Entailment3::Unknown(e);
            }
        };
        match interpret(&reply) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("malformed solver reply ({e}): {}", reply.trim());
                Entailment3::Unknown(e)
            }
        }
    }
}

/// Reads `sat`/`unsat`/`unknown` and, after `sat`, the `get-value` model.
pub fn interpret(reply: &str) -> Result<Entailment3, String> {
    let mut lines = reply.lines().map(str::trim).filter(|l| !l.is_empty());
    let verdict = lines.next().ok_or("empty reply")?;
    match verdict {
        "unsat" => Ok(Entailment3::Yes),
        "unknown" => Ok(Entailment3::Unknown("solver returned unknown".into())),
        "sat" => {
            let rest: Vec<&str> = lines.collect();
            let rest = rest.join(" ");
            if rest.trim().is_empty() {
                return Ok(Entailment3::No(Some(Model::new())));
            }
            parse_model(&rest).map(|m| Entailment3::No(Some(m)))
        }
        other => Err(format!("unexpected verdict `{other}`")),
    }
}

#[derive(Debug)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexp(tokens: &[String], pos: &mut usize) -> Result<Sexp, String> {
    let t = tokens.get(*pos).ok_or("unexpected end of model")?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err("unbalanced parentheses".into());
                }
                items.push(parse_sexp(tokens, pos)?);
            }
            *pos += 1;
            Ok(Sexp::List(items))
        }
        ")" => Err("unexpected `)`".into()),
        a => Ok(Sexp::Atom(a.to_string())),
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in text.chars() {
        match c {
            '|' => {
                quoted = !quoted;
                cur.push(c);
            }
            _ if quoted => cur.push(c),
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn int_value(s: &Sexp) -> Result<i64, String> {
    match s {
        Sexp::Atom(a) => a.parse().map_err(|_| format!("not an integer: {a}")),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => int_value(inner).map(|v| -v),
            _ => Err("unsupported value term".into()),
        },
    }
}

fn parse_model(text: &str) -> Result<Model, String> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let Sexp::List(pairs) = parse_sexp(&tokens, &mut pos)? else {
        return Err("model is not a list".into());
    };
    let mut model = Model::new();
    for p in pairs {
        match p {
            Sexp::List(kv) if kv.len() == 2 => {
                let Sexp::Atom(name) = &kv[0] else {
                    return Err("model key is not a symbol".into());
                };
                let name = name.trim_matches('|');
                model.insert(Var::new(name), int_value(&kv[1])?);
            }
            _ => return Err("model entry is not a pair".into()),
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replies() {
        assert_eq!(interpret("unsat\n").unwrap(), Entailment3::Yes);
        assert!(matches!(interpret("unknown\n").unwrap(), Entailment3::Unknown(_)));
        let Entailment3::No(Some(m)) = interpret("sat\n((x 6)\n (y (- 3)))\n").unwrap() else {
            panic!()
        };
        assert_eq!(m[&Var::new("x")], 6);
        assert_eq!(m[&Var::new("y")], -3);
        assert!(interpret("(error \"line 1\")").is_err());
        assert!(interpret("").is_err());
    }

    #[test]
    fn missing_binary_is_unknown() {
        let s = ExternalSolver::new("/nonexistent/solver");
        let f = Formula::parse("x <= 1").unwrap();
        assert!(matches!(s.entails(&f, &f, &VarSet::new()), Entailment3::Unknown(_)));
    }
}
