//! A small three-address imperative language and its control-flow graph.
//!
//! ```text
//! proc fig1(w, x, y, z) {
//! entry:
//!   assume (z <= x);
//!   if (y <= x) t else f;
//! t: return;
//! f: return;
//! }
//! ```
//!
//! Every variable is an integer parameter of the procedure. Blocks are
//! numbered densely in order of appearance; the first block is the entry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{normalize_le, Atom, FormulaError, Normalized};
use crate::var::{Var, VarSet};

/// Largest magnitude accepted for integer literals. Keeps every bound the
/// domains compute comfortably inside `i64`.
pub const MAX_LITERAL: i64 = 1 << 31;

pub type BlockId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared variable {name}")]
    UndeclaredVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: duplicate block label {label}")]
    DuplicateLabel { line: usize, col: usize, label: String },
    #[error("{line}:{col}: unknown block label {label}")]
    UnknownLabel { line: usize, col: usize, label: String },
    #[error("{line}:{col}: duplicate parameter {name}")]
    DuplicateParameter { line: usize, col: usize, name: String },
    #[error("{line}:{col}: integer literal out of range")]
    LiteralOutOfRange { line: usize, col: usize },
    #[error("block {label} is unreachable from the entry block")]
    UnreachableBlock { label: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Ne,
}

impl RelOp {
    pub fn negate(self) -> RelOp {
        match self {
            RelOp::Le => RelOp::Gt,
            RelOp::Lt => RelOp::Ge,
            RelOp::Ge => RelOp::Lt,
            RelOp::Gt => RelOp::Le,
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            RelOp::Le => "<=",
            RelOp::Lt => "<",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
        }
    }
}

/// `lhs op rhs + offset`, or `lhs op offset` when `rhs` is absent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cond {
    pub lhs: Var,
    pub op: RelOp,
    pub rhs: Option<Var>,
    pub offset: i64,
}

/// A condition (or its negation) as difference atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CondAtoms {
    /// Conjunction of atoms; empty means the condition always holds.
    Conj(Vec<Atom>),
    /// Never holds.
    False,
    /// `lhs != rhs + offset`: a disjunction no difference atom captures.
    NotEqual { lhs: Var, rhs: Option<Var>, offset: i64 },
}

impl Cond {
    pub fn vars(&self) -> VarSet {
        let mut s = VarSet::new();
        s.insert(self.lhs.clone());
        if let Some(r) = &self.rhs {
            s.insert(r.clone());
        }
        s
    }

    /// The condition expressing a difference atom.
    pub fn from_atom(a: &Atom) -> Option<Cond> {
        match (&a.pos, &a.neg) {
            (Some(p), n) => Some(Cond { lhs: p.clone(), op: RelOp::Le, rhs: n.clone(), offset: a.bound }),
            (None, Some(n)) => Some(Cond { lhs: n.clone(), op: RelOp::Ge, rhs: None, offset: -a.bound }),
            (None, None) => None,
        }
    }

    /// Normalizes the condition taken with the given branch polarity.
    /// Strict comparisons become non-strict over the integers.
    pub fn atoms(&self, polarity: bool) -> CondAtoms {
        let op = if polarity { self.op } else { self.op.negate() };
        if op == RelOp::Ne {
            return CondAtoms::NotEqual {
                lhs: self.lhs.clone(),
                rhs: self.rhs.clone(),
                offset: self.offset,
            };
        }
        // lhs - rhs - offset (op) 0
        let mut coeffs: BTreeMap<Var, i64> = BTreeMap::new();
        *coeffs.entry(self.lhs.clone()).or_insert(0) += 1;
        if let Some(r) = &self.rhs {
            *coeffs.entry(r.clone()).or_insert(0) -= 1;
        }
        let k = -self.offset;
        let neg: BTreeMap<Var, i64> = coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect();
        let parts: Vec<Result<Normalized, FormulaError>> = match op {
            RelOp::Le => vec![normalize_le(&coeffs, k)],
            RelOp::Lt => vec![normalize_le(&coeffs, k + 1)],
            RelOp::Ge => vec![normalize_le(&neg, -k)],
            RelOp::Gt => vec![normalize_le(&neg, -k + 1)],
            RelOp::Eq => vec![normalize_le(&coeffs, k), normalize_le(&neg, -k)],
            RelOp::Ne => unreachable!(),
        };
        let mut atoms = Vec::new();
        for p in parts {
            // literals are bounded by MAX_LITERAL, so neither error can occur
            match p.expect("unit-coefficient condition") {
                Normalized::True => {}
                Normalized::False => return CondAtoms::False,
                Normalized::Atom(a) => atoms.push(a),
            }
        }
        CondAtoms::Conj(atoms)
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.lhs, self.op.symbol())?;
        match &self.rhs {
            Some(r) if self.offset > 0 => write!(f, "{r} + {}", self.offset),
            Some(r) if self.offset < 0 => write!(f, "{r} - {}", -self.offset),
            Some(r) => write!(f, "{r}"),
            None => write!(f, "{}", self.offset),
        }
    }
}

/// Right-hand side of an assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i64),
    /// `±var + offset`
    Unit { negated: bool, var: Var, offset: i64 },
    /// `±lhs ± rhs + offset`
    Sum {
        lhs_negated: bool,
        lhs: Var,
        rhs_negated: bool,
        rhs: Var,
        offset: i64,
    },
    /// `?`: any integer.
    Nondet,
}

impl Expr {
    pub fn vars(&self) -> VarSet {
        match self {
            Expr::Const(_) | Expr::Nondet => VarSet::new(),
            Expr::Unit { var, .. } => std::iter::once(var.clone()).collect(),
            Expr::Sum { lhs, rhs, .. } => [lhs.clone(), rhs.clone()].into_iter().collect(),
        }
    }
}

fn write_offset(f: &mut fmt::Formatter<'_>, offset: i64) -> fmt::Result {
    match offset {
        0 => Ok(()),
        o if o > 0 => write!(f, " + {o}"),
        o => write!(f, " - {}", -(o as i128)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Nondet => f.write_str("?"),
            Expr::Unit { negated, var, offset } => {
                write!(f, "{}{var}", if *negated { "-" } else { "" })?;
                write_offset(f, *offset)
            }
            Expr::Sum { lhs_negated, lhs, rhs_negated, rhs, offset } => {
                write!(
                    f,
                    "{}{lhs} {} {rhs}",
                    if *lhs_negated { "-" } else { "" },
                    if *rhs_negated { "-" } else { "+" }
                )?;
                write_offset(f, *offset)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign { target: Var, rhs: Expr },
    /// Restricts execution to states satisfying `cond` (or its negation when
    /// `polarity` is false). Branch edges and `assume` both produce guards.
    Guard { cond: Cond, polarity: bool },
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub block: BlockId,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Statement {
    pub kind: StmtKind,
    pub location: Location,
}

/// Variables whose value or constraints the statement may change: the target
/// of an assignment, every variable of a guard, nothing for `skip`.
pub fn updated_vars(stmt: &Statement) -> VarSet {
    match &stmt.kind {
        StmtKind::Assign { target, .. } => std::iter::once(target.clone()).collect(),
        StmtKind::Guard { cond, .. } => cond.vars(),
        StmtKind::Skip => VarSet::new(),
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StmtKind::Assign { target, rhs } => write!(f, "{target} := {rhs};"),
            StmtKind::Guard { cond, polarity: true } => write!(f, "assume ({cond});"),
            StmtKind::Guard { cond, polarity: false } => {
                let negated = Cond { op: cond.op.negate(), ..cond.clone() };
                write!(f, "assume ({negated});")
            }
            StmtKind::Skip => f.write_str("skip;"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Goto(BlockId),
    Branch { cond: Cond, then_block: BlockId, else_block: BlockId },
    Return,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub label: String,
    pub stmts: Vec<Statement>,
    pub term: Terminator,
}

impl Block {
    pub fn successors(&self) -> Vec<BlockId> {
        match &self.term {
            Terminator::Goto(t) => vec![*t],
            Terminator::Branch { then_block, else_block, .. } => vec![*then_block, *else_block],
            Terminator::Return => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    /// Declared variables, in declaration order.
    pub params: Vec<Var>,
    pub blocks: Vec<Block>,
    pub entry: BlockId,
}

impl Program {
    pub fn vars(&self) -> VarSet {
        self.params.iter().cloned().collect()
    }

    pub fn block_by_label(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    /// Predecessor lists, each in ascending block order.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in &self.blocks {
            for s in b.successors() {
                if !preds[s].contains(&b.id) {
                    preds[s].push(b.id);
                }
            }
        }
        for p in &mut preds {
            p.sort_unstable();
        }
        preds
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.blocks.iter().flat_map(|b| b.stmts.iter())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<&str> = self.params.iter().map(Var::as_str).collect();
        writeln!(f, "proc {}({}) {{", self.name, params.join(", "))?;
        for b in &self.blocks {
            writeln!(f, "{}:", b.label)?;
            for s in &b.stmts {
                writeln!(f, "  {s}")?;
            }
            match &b.term {
                Terminator::Goto(t) => writeln!(f, "  goto {};", self.blocks[*t].label)?,
                Terminator::Branch { cond, then_block, else_block } => writeln!(
                    f,
                    "  if ({cond}) {} else {};",
                    self.blocks[*then_block].label, self.blocks[*else_block].label
                )?,
                Terminator::Return => writeln!(f, "  return;")?,
            }
        }
        writeln!(f, "}}")
    }
}

/// Where an invariant is recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PointKind {
    /// Start of a block with zero or several predecessors (entry and join
    /// points). Single-predecessor blocks are covered by the edge or the last
    /// statement that reaches them.
    BlockEntry,
    /// After the statement at this index.
    AfterStmt(usize),
    /// On the outgoing branch edge with this polarity.
    Edge(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProgramPoint {
    pub block: BlockId,
    pub kind: PointKind,
}

impl ProgramPoint {
    pub fn display(&self, p: &Program) -> String {
        let label = &p.blocks[self.block].label;
        match self.kind {
            PointKind::BlockEntry => format!("{label}.in"),
            PointKind::AfterStmt(i) => format!("{label}.{i}"),
            PointKind::Edge(true) => format!("{label}.t"),
            PointKind::Edge(false) => format!("{label}.f"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 17] = [
    ":=", "<=", ">=", "==", "!=", "<", ">", "(", ")", "{", "}", ",", ";", ":", "+", "-", "?",
];

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let s: String = chars[start..i].iter().collect();
            let n = s
                .parse::<i64>()
                .ok()
                .filter(|n| *n <= MAX_LITERAL)
                .ok_or(ParseError::LiteralOutOfRange { line: l0, col: c0 })?;
            out.push(Token { tok: Tok::Int(n), line: l0, col: c0 });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&sc)
        });
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line: l0, col: c0 });
            }
            None => {
                return Err(ParseError::Syntax {
                    line: l0,
                    col: c0,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

const KEYWORDS: [&str; 7] = ["proc", "skip", "goto", "if", "else", "return", "assume"];

struct RawBlock {
    label: String,
    line: usize,
    col: usize,
    stmts: Vec<StmtKind>,
    term: RawTerm,
}

enum RawTerm {
    Goto(String, usize, usize),
    Branch(Cond, (String, usize, usize), (String, usize, usize)),
    Return,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    declared: BTreeSet<Var>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                match t.tok {
                    Tok::Ident(s) => Ok((s, t.line, t.col)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let (name, line, col) = self.ident()?;
        let v = Var::new(name.clone());
        if !self.declared.contains(&v) {
            return Err(ParseError::UndeclaredVariable { line, col, name });
        }
        Ok(v)
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        match self.peek().tok {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.error("expected integer")),
        }
    }

    /// Optional `+ int` / `- int` suffix.
    fn offset(&mut self) -> Result<i64, ParseError> {
        if self.is_sym("+") && matches!(self.peek_at(1), Tok::Int(_)) {
            self.bump();
            return self.int();
        }
        if self.is_sym("-") && matches!(self.peek_at(1), Tok::Int(_)) {
            self.bump();
            return Ok(-self.int()?);
        }
        Ok(0)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym("?") {
            self.bump();
            return Ok(Expr::Nondet);
        }
        if let Tok::Int(_) = self.peek().tok {
            return Ok(Expr::Const(self.int()?));
        }
        let negated = if self.is_sym("-") {
            self.bump();
            if let Tok::Int(_) = self.peek().tok {
                return Ok(Expr::Const(-self.int()?));
            }
            true
        } else {
            false
        };
        let var = self.var()?;
        let second_var = (self.is_sym("+") || self.is_sym("-"))
            && matches!(self.peek_at(1), Tok::Ident(_));
        if second_var {
            let rhs_negated = self.is_sym("-");
            self.bump();
            let rhs = self.var()?;
            let offset = self.offset()?;
            return Ok(Expr::Sum { lhs_negated: negated, lhs: var, rhs_negated, rhs, offset });
        }
        let offset = self.offset()?;
        Ok(Expr::Unit { negated, var, offset })
    }

    fn relop(&mut self) -> Result<RelOp, ParseError> {
        let op = match &self.peek().tok {
            Tok::Sym("<=") => RelOp::Le,
            Tok::Sym("<") => RelOp::Lt,
            Tok::Sym(">=") => RelOp::Ge,
            Tok::Sym(">") => RelOp::Gt,
            Tok::Sym("==") => RelOp::Eq,
            Tok::Sym("!=") => RelOp::Ne,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.bump();
        Ok(op)
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let lhs = self.var()?;
        let op = self.relop()?;
        if matches!(self.peek().tok, Tok::Int(_)) || (self.is_sym("-") && matches!(self.peek_at(1), Tok::Int(_))) {
            let neg = if self.is_sym("-") {
                self.bump();
                true
            } else {
                false
            };
            let c = self.int()?;
            return Ok(Cond { lhs, op, rhs: None, offset: if neg { -c } else { c } });
        }
        let rhs = self.var()?;
        let offset = self.offset()?;
        Ok(Cond { lhs, op, rhs: Some(rhs), offset })
    }

    fn block(&mut self) -> Result<RawBlock, ParseError> {
        let (label, line, col) = self.ident()?;
        self.expect_sym(":")?;
        let mut stmts = Vec::new();
        loop {
            if self.is_kw("skip") {
                self.bump();
                self.expect_sym(";")?;
                stmts.push(StmtKind::Skip);
            } else if self.is_kw("assume") {
                self.bump();
                self.expect_sym("(")?;
                let cond = self.cond()?;
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                stmts.push(StmtKind::Guard { cond, polarity: true });
            } else if self.is_kw("goto") {
                self.bump();
                let target = self.ident()?;
                self.expect_sym(";")?;
                return Ok(RawBlock { label, line, col, stmts, term: RawTerm::Goto(target.0, target.1, target.2) });
            } else if self.is_kw("return") {
                self.bump();
                self.expect_sym(";")?;
                return Ok(RawBlock { label, line, col, stmts, term: RawTerm::Return });
            } else if self.is_kw("if") {
                self.bump();
                self.expect_sym("(")?;
                let cond = self.cond()?;
                self.expect_sym(")")?;
                let t = self.ident()?;
                self.expect_kw("else")?;
                let e = self.ident()?;
                self.expect_sym(";")?;
                return Ok(RawBlock { label, line, col, stmts, term: RawTerm::Branch(cond, t, e) });
            } else if matches!(self.peek_at(1), Tok::Sym(":=")) {
                let (name, tl, tc) = self.ident()?;
                self.bump(); // :=
                let rhs = self.expr()?;
                let target = Var::new(name.clone());
                if !self.declared.contains(&target) {
                    return Err(ParseError::UndeclaredVariable { line: tl, col: tc, name });
                }
                self.expect_sym(";")?;
                stmts.push(StmtKind::Assign { target, rhs });
            } else {
                return Err(self.error("expected statement or terminator"));
            }
        }
    }
}

/// Parses program text into a validated [`Program`].
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, declared: BTreeSet::new() };
    p.expect_kw("proc")?;
    let (name, _, _) = p.ident()?;
    p.expect_sym("(")?;
    let mut params = Vec::new();
    if !p.is_sym(")") {
        loop {
            let (n, line, col) = p.ident()?;
            let v = Var::new(n.clone());
            if !p.declared.insert(v.clone()) {
                return Err(ParseError::DuplicateParameter { line, col, name: n });
            }
            params.push(v);
            if p.is_sym(",") {
                p.bump();
            } else {
                break;
            }
        }
    }
    p.expect_sym(")")?;
    p.expect_sym("{")?;
    let mut raw = Vec::new();
    while !p.is_sym("}") {
        if p.peek().tok == Tok::Eof {
            return Err(p.error("unexpected end of input"));
        }
        raw.push(p.block()?);
    }
    p.expect_sym("}")?;
    if p.peek().tok != Tok::Eof {
        return Err(p.error("trailing input after procedure"));
    }
    if raw.is_empty() {
        return Err(p.error("procedure has no blocks"));
    }

    let mut ids: BTreeMap<String, BlockId> = BTreeMap::new();
    for (i, b) in raw.iter().enumerate() {
        if ids.insert(b.label.clone(), i).is_some() {
            return Err(ParseError::DuplicateLabel { line: b.line, col: b.col, label: b.label.clone() });
        }
    }
    let resolve = |(label, line, col): &(String, usize, usize)| {
        ids.get(label)
            .copied()
            .ok_or_else(|| ParseError::UnknownLabel { line: *line, col: *col, label: label.clone() })
    };
    let mut blocks = Vec::with_capacity(raw.len());
    for (id, b) in raw.into_iter().enumerate() {
        let term = match b.term {
            RawTerm::Goto(l, line, col) => Terminator::Goto(resolve(&(l, line, col))?),
            RawTerm::Branch(cond, t, e) => Terminator::Branch {
                cond,
                then_block: resolve(&t)?,
                else_block: resolve(&e)?,
            },
            RawTerm::Return => Terminator::Return,
        };
        let stmts = b
            .stmts
            .into_iter()
            .enumerate()
            .map(|(index, kind)| Statement { kind, location: Location { block: id, index } })
            .collect();
        blocks.push(Block { id, label: b.label, stmts, term });
    }
    let program = Program { name, params, blocks, entry: 0 };

    let mut seen = vec![false; program.blocks.len()];
    let mut stack = vec![program.entry];
    while let Some(b) = stack.pop() {
        if std::mem::replace(&mut seen[b], true) {
            continue;
        }
        stack.extend(program.blocks[b].successors());
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(ParseError::UnreachableBlock { label: program.blocks[b].label.clone() });
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::var_set;

    const FIG1: &str = "proc fig1(w, x, y, z) {
        entry:
          assume (z <= x);
          if (y <= x) t else f;
        t: return;
        f: return;
    }";

    #[test]
    fn parses_branching_walkthrough() {
        let p = parse_program(FIG1).unwrap();
        assert_eq!(p.blocks.len(), 3);
        assert_eq!(p.vars(), var_set(["w", "x", "y", "z"]));
        assert_eq!(p.blocks[0].successors(), vec![1, 2]);
    }

    #[test]
    fn minimal_program() {
        let p = parse_program("proc p(x) { entry: skip; return; }").unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.blocks[0].stmts.len(), 1);
    }

    #[test]
    fn undeclared_variable_is_reported() {
        let err = parse_program("proc p(q) { entry: q := r; return; }").unwrap_err();
        assert_eq!(err.to_string(), "1:25: undeclared variable r");
        assert!(matches!(
            parse_program("proc p(x) { entry: q := 1; return; }"),
            Err(ParseError::UndeclaredVariable { .. })
        ));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            parse_program("proc p(x) { a: goto a; a: return; }"),
            Err(ParseError::DuplicateLabel { .. })
        ));
        assert!(matches!(
            parse_program("proc p(x) { a: goto b; }"),
            Err(ParseError::UnknownLabel { .. })
        ));
        assert!(matches!(
            parse_program("proc p(x) { a: return; b: return; }"),
            Err(ParseError::UnreachableBlock { .. })
        ));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("proc p(x) {\n entry: x := ;\n return; }").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, col: 14, .. }), "{err:?}");
    }

    #[test]
    fn updated_vars_follow_def_use_convention() {
        let p = parse_program(
            "proc p(x, y) { a: assume (y <= x); x := x + 1; skip; return; }",
        )
        .unwrap();
        let s = &p.blocks[0].stmts;
        assert_eq!(updated_vars(&s[0]), var_set(["x", "y"]));
        assert_eq!(updated_vars(&s[1]), var_set(["x"]));
        assert!(updated_vars(&s[2]).is_empty());
    }

    #[test]
    fn expression_forms() {
        let p = parse_program(
            "proc p(a, b) { e: a := -b + 3; a := a - b; a := ?; a := -4; b := -a - b - 1; return; }",
        )
        .unwrap();
        let kinds: Vec<String> = p.blocks[0].stmts.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            kinds,
            ["a := -b + 3;", "a := a - b;", "a := ?;", "a := -4;", "b := -a - b - 1;"]
        );
    }

    #[test]
    fn strict_conditions_normalize() {
        let c = Cond { lhs: Var::new("x"), op: RelOp::Lt, rhs: None, offset: 100 };
        assert_eq!(c.atoms(true), CondAtoms::Conj(vec![Atom::upper("x", 99)]));
        assert_eq!(c.atoms(false), CondAtoms::Conj(vec![Atom::lower("x", 100)]));
        let c = Cond { lhs: Var::new("y"), op: RelOp::Le, rhs: Some(Var::new("x")), offset: 0 };
        assert_eq!(c.atoms(false), CondAtoms::Conj(vec![Atom::diff("x", "y", -1)]));
    }

    #[test]
    fn pretty_print_reparses() {
        let p = parse_program(FIG1).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
