//! Worklist fixpoint over a program's control-flow graph.
//!
//! Blocks are processed in ascending id order. Loop heads (targets of DFS
//! back edges) widen once their visit count exceeds the policy's delay;
//! every other merge is a plain join. After the fixpoint a recording pass
//! replays each block once and stores the invariant at every program point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::compare::smtlib;
use crate::config::{parse_kv, ConfigError};
use crate::delta::{DeltaKind, Invariant};
use crate::formula::{Constraint, Formula};
use crate::ir::{updated_vars, BlockId, Cond, PointKind, Program, ProgramPoint, StmtKind, Terminator};
use crate::predicates::{Partition, PredState};
use crate::var::{Var, VarSet};
use crate::zones::{WideningPolicy, ZoneState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no fixpoint after {0} block visits")]
    IterationCap(usize),
    #[error("seed mentions undeclared variable {0}")]
    SeedVariable(Var),
    #[error("seed must be a conjunction of difference constraints: {0}")]
    SeedShape(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Zones,
    Predicates,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Zones => "zones",
            DomainKind::Predicates => "predicates",
        })
    }
}

impl std::str::FromStr for DomainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "zones" | "z" => Ok(DomainKind::Zones),
            "predicates" | "p" => Ok(DomainKind::Predicates),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub label: String,
    pub domain: DomainKind,
    /// Ignored by the predicates domain.
    pub widening: WideningPolicy,
    pub delta: DeltaKind,
    pub partition: Partition,
    /// Difference constraints assumed at entry, on top of any `assume`
    /// statements in the program.
    pub seed: Formula,
}

impl AnalysisConfig {
    pub fn new(label: impl Into<String>, domain: DomainKind) -> Self {
        AnalysisConfig {
            label: label.into(),
            domain,
            widening: WideningPolicy::Standard,
            delta: DeltaKind::Cc,
            partition: Partition::default(),
            seed: Formula::truth(),
        }
    }

    pub fn with_widening(mut self, w: WideningPolicy) -> Self {
        self.widening = w;
        self
    }

    pub fn with_delta(mut self, d: DeltaKind) -> Self {
        self.delta = d;
        self
    }

    pub fn with_seed(mut self, seed: Formula) -> Self {
        self.seed = seed;
        self
    }

    /// Reads a flat `key = value` file. Keys: `label`, `domain`
    /// (required), `widening`, `delta`, `partition`, `seed`. A relative
    /// `scripted:` path is resolved against `base`.
    pub fn parse(text: &str, base: Option<&std::path::Path>) -> Result<Self, ConfigError> {
        let invalid = |key: &str, reason: String| ConfigError::Invalid { key: key.into(), reason };
        let mut label = None;
        let mut domain = None;
        let mut cfg = AnalysisConfig::new("", DomainKind::Zones);
        for (k, v) in parse_kv(text)? {
            match k.as_str() {
                "label" => label = Some(v),
                "domain" => domain = Some(v.parse::<DomainKind>().map_err(|e| invalid("domain", e))?),
                "widening" => {
                    cfg.widening = WideningPolicy::parse(&v)
                        .ok_or_else(|| invalid("widening", format!("cannot parse `{v}`")))?
                }
                "delta" => {
                    cfg.delta = match DeltaKind::parse(&v).map_err(|e| invalid("delta", e.to_string()))? {
                        DeltaKind::Scripted(p) if p.is_relative() => {
                            DeltaKind::Scripted(base.map_or(p.clone(), |b| b.join(&p)))
                        }
                        d => d,
                    }
                }
                "partition" => {
                    cfg.partition = Partition::parse(&v).map_err(|e| invalid("partition", e.to_string()))?
                }
                "seed" => cfg.seed = Formula::parse(&v).map_err(|e| invalid("seed", e.to_string()))?,
                _ => return Err(ConfigError::Unknown(k)),
            }
        }
        cfg.label = label.ok_or_else(|| ConfigError::Missing("label".into()))?;
        cfg.domain = domain.ok_or_else(|| ConfigError::Missing("domain".into()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid { key: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text, path.parent())
    }

    /// Where a scripted minimization function is read from, if any.
    pub fn script_path(&self) -> Option<&PathBuf> {
        match &self.delta {
            DeltaKind::Scripted(p) => Some(p),
            _ => None,
        }
    }
}

/// Lattice operations the fixpoint needs.
pub trait AbstractDomain: Clone + PartialEq + fmt::Debug {
    fn transfer(&self, stmt: &StmtKind) -> Self;
    fn join(&self, other: &Self) -> Self;
    fn widen(&self, next: &Self, policy: &WideningPolicy, visit: u32) -> Self;
    fn leq(&self, other: &Self) -> bool;
    fn is_bottom(&self) -> bool;
    /// Canonical form used before transfer and comparison.
    fn normalize(&self) -> Self;
    fn to_formula(&self, s: &VarSet) -> Formula;
}

impl AbstractDomain for ZoneState {
    fn transfer(&self, stmt: &StmtKind) -> Self {
        ZoneState::transfer(self, stmt)
    }
    fn join(&self, other: &Self) -> Self {
        ZoneState::join(self, other).expect("zones over one program share variables")
    }
    fn widen(&self, next: &Self, policy: &WideningPolicy, visit: u32) -> Self {
        ZoneState::widen(self, next, policy, visit).expect("zones over one program share variables")
    }
    fn leq(&self, other: &Self) -> bool {
        ZoneState::leq(self, other)
    }
    fn is_bottom(&self) -> bool {
        self.closure().is_bottom()
    }
    fn normalize(&self) -> Self {
        self.closure()
    }
    fn to_formula(&self, s: &VarSet) -> Formula {
        ZoneState::to_formula(self, s)
    }
}

impl AbstractDomain for PredState {
    fn transfer(&self, stmt: &StmtKind) -> Self {
        PredState::transfer(self, stmt)
    }
    fn join(&self, other: &Self) -> Self {
        PredState::join(self, other).expect("states over one program share variables")
    }
    fn widen(&self, next: &Self, _: &WideningPolicy, _: u32) -> Self {
        PredState::widen(self, next).expect("states over one program share variables")
    }
    fn leq(&self, other: &Self) -> bool {
        PredState::leq(self, other)
    }
    fn is_bottom(&self) -> bool {
        PredState::is_bottom(self)
    }
    fn normalize(&self) -> Self {
        self.clone()
    }
    fn to_formula(&self, s: &VarSet) -> Formula {
        PredState::to_formula(self, s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainState {
    Zone(ZoneState),
    Pred(PredState),
}

impl DomainState {
    pub fn leq(&self, other: &DomainState) -> bool {
        match (self, other) {
            (DomainState::Zone(a), DomainState::Zone(b)) => a.leq(b),
            (DomainState::Pred(a), DomainState::Pred(b)) => a.leq(b),
            _ => false,
        }
    }

    pub fn is_bottom(&self) -> bool {
        match self {
            DomainState::Zone(z) => AbstractDomain::is_bottom(z),
            DomainState::Pred(s) => s.is_bottom(),
        }
    }
}

/// The states block `b` passes to its successors when entered in `state`.
pub fn successor_states(p: &Program, b: BlockId, state: &DomainState) -> Vec<(BlockId, DomainState)> {
    fn go<D: AbstractDomain>(p: &Program, b: BlockId, s: &D, wrap: fn(D) -> DomainState) -> Vec<(BlockId, DomainState)> {
        let mut s = s.normalize();
        for st in &p.blocks[b].stmts {
            s = s.transfer(&st.kind);
        }
        outgoing(p, b, &s).into_iter().map(|(t, d)| (t, wrap(d))).collect()
    }
    match state {
        DomainState::Zone(z) => go(p, b, z, DomainState::Zone),
        DomainState::Pred(s) => go(p, b, s, DomainState::Pred),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointRecord {
    pub invariant: Invariant,
    pub dv: VarSet,
    pub state: DomainState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisRecord {
    pub program: String,
    pub label: String,
    pub domain: DomainKind,
    pub points: BTreeMap<ProgramPoint, PointRecord>,
    /// Merges performed at each widening point.
    pub visits: BTreeMap<BlockId, u32>,
    /// Block visits until the fixpoint.
    pub iterations: usize,
    /// Fixpoint state at the start of each block.
    pub inputs: Vec<DomainState>,
}

#[derive(Serialize)]
struct PointJson<'a> {
    point: String,
    label: &'a str,
    formula: String,
    dv: &'a VarSet,
    domain: DomainKind,
}

impl AnalysisRecord {
    /// One object per point: `{point, label, formula, dv, domain}`, with the
    /// formula as an SMT-LIB term.
    pub fn to_json(&self, p: &Program) -> serde_json::Value {
        let rows: Vec<PointJson> = self
            .points
            .iter()
            .map(|(pt, r)| PointJson {
                point: pt.display(p),
                label: &self.label,
                formula: smtlib::term(&r.invariant.formula),
                dv: &r.dv,
                domain: self.domain,
            })
            .collect();
        serde_json::to_value(rows).expect("plain data serializes")
    }
}

/// Targets of back edges in a depth-first traversal from the entry that
/// visits successors in terminator order.
pub fn widening_points(p: &Program) -> BTreeSet<BlockId> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color = vec![Color::White; p.blocks.len()];
    let mut heads = BTreeSet::new();
    let mut stack: Vec<(BlockId, usize)> = vec![(p.entry, 0)];
    color[p.entry] = Color::Grey;
    while let Some(&mut (b, ref mut next)) = stack.last_mut() {
        let succs = p.blocks[b].successors();
        if *next < succs.len() {
            let s = succs[*next];
            *next += 1;
            match color[s] {
                Color::White => {
                    color[s] = Color::Grey;
                    stack.push((s, 0));
                }
                Color::Grey => {
                    heads.insert(s);
                }
                Color::Black => {}
            }
        } else {
            color[b] = Color::Black;
            stack.pop();
        }
    }
    heads
}

pub fn analyze(p: &Program, cfg: &AnalysisConfig) -> Result<AnalysisRecord, EngineError> {
    let seed = seed_guards(p, &cfg.seed)?;
    let vars = p.params.clone();
    match cfg.domain {
        DomainKind::Zones => {
            let top = ZoneState::top(vars.clone());
            let bottom = ZoneState::bottom(vars);
            run(p, cfg, top, bottom, &seed, DomainState::Zone)
        }
        DomainKind::Predicates => {
            let top = PredState::top(cfg.partition.clone(), vars.clone());
            let bottom = PredState::bottom(cfg.partition.clone(), vars);
            run(p, cfg, top, bottom, &seed, DomainState::Pred)
        }
    }
}

fn seed_guards(p: &Program, seed: &Formula) -> Result<Vec<StmtKind>, EngineError> {
    let declared = p.vars();
    if let Some(v) = seed.vars().into_iter().find(|v| !declared.contains(v)) {
        return Err(EngineError::SeedVariable(v));
    }
    if seed.is_false() {
        return Err(EngineError::SeedShape(seed.to_string()));
    }
    seed.constraints()
        .iter()
        .filter_map(|c| match c {
            Constraint::Atom(a) => Cond::from_atom(a).map(|cond| Ok(StmtKind::Guard { cond, polarity: true })),
            other => Some(Err(EngineError::SeedShape(other.to_string()))),
        })
        .collect()
}

fn outgoing<D: AbstractDomain>(p: &Program, b: BlockId, state: &D) -> Vec<(BlockId, D)> {
    match &p.blocks[b].term {
        Terminator::Goto(t) => vec![(*t, state.clone())],
        Terminator::Branch { cond, then_block, else_block } => vec![
            (*then_block, state.transfer(&StmtKind::Guard { cond: cond.clone(), polarity: true })),
            (*else_block, state.transfer(&StmtKind::Guard { cond: cond.clone(), polarity: false })),
        ],
        Terminator::Return => vec![],
    }
}

fn run<D: AbstractDomain>(
    p: &Program,
    cfg: &AnalysisConfig,
    top: D,
    bottom: D,
    seed: &[StmtKind],
    wrap: fn(D) -> DomainState,
) -> Result<AnalysisRecord, EngineError> {
    let n = p.blocks.len();
    let heads = widening_points(p);
    let mut input = vec![bottom.clone(); n];
    input[p.entry] = seed.iter().fold(top, |s, g| s.transfer(g));
    let mut visits: BTreeMap<BlockId, u32> = heads.iter().map(|&h| (h, 0)).collect();
    let mut worklist: BTreeSet<BlockId> = BTreeSet::from([p.entry]);
    let cap = 1000 * n.max(1);
    let mut iterations = 0;

    while let Some(b) = worklist.pop_first() {
        iterations += 1;
        if iterations > cap {
            return Err(EngineError::IterationCap(cap));
        }
        let mut state = input[b].normalize();
        for s in &p.blocks[b].stmts {
            state = state.transfer(&s.kind);
        }
        for (t, out) in outgoing(p, b, &state) {
            if out.is_bottom() || out.leq(&input[t].normalize()) {
                continue;
            }
            let joined = input[t].join(&out);
            let next = match visits.get_mut(&t) {
                Some(count) => {
                    *count += 1;
                    input[t].widen(&joined, &cfg.widening, *count)
                }
                None => joined,
            };
            if next != input[t] {
                input[t] = next;
                worklist.insert(t);
            }
        }
    }
    log::debug!("{} under {}: fixpoint after {iterations} block visits", p.name, cfg.label);

    let universe = p.vars();
    let entry_dv = entry_dvs(p);
    let preds = p.predecessors();
    let mut points = BTreeMap::new();
    let mut record = |pt: ProgramPoint, state: &D, dv: VarSet| {
        let state = state.normalize();
        let invariant = Invariant::new(universe.clone(), state.to_formula(&universe));
        points.insert(pt, PointRecord { invariant, dv, state: wrap(state) });
    };
    for block in &p.blocks {
        let b = block.id;
        let mut state = input[b].normalize();
        if b == p.entry || preds[b].len() != 1 {
            record(ProgramPoint { block: b, kind: PointKind::BlockEntry }, &state, entry_dv[b].clone());
        }
        for (i, s) in block.stmts.iter().enumerate() {
            state = state.transfer(&s.kind);
            record(ProgramPoint { block: b, kind: PointKind::AfterStmt(i) }, &state, updated_vars(s));
        }
        if let Terminator::Branch { cond, .. } = &block.term {
            for polarity in [true, false] {
                let edge = state.transfer(&StmtKind::Guard { cond: cond.clone(), polarity });
                record(ProgramPoint { block: b, kind: PointKind::Edge(polarity) }, &edge, cond.vars());
            }
        }
    }
    Ok(AnalysisRecord {
        program: p.name.clone(),
        label: cfg.label.clone(),
        domain: match wrap(bottom) {
            DomainState::Zone(_) => DomainKind::Zones,
            DomainState::Pred(_) => DomainKind::Predicates,
        },
        points,
        visits,
        iterations,
        inputs: input.into_iter().map(wrap).collect(),
    })
}

/// dv at each block's start: the union over incoming edges of the dv of the
/// point that produced the edge (the branch condition, or the last
/// statement of a `goto` block, or that block's own start when it is empty).
fn entry_dvs(p: &Program) -> Vec<VarSet> {
    let preds = p.predecessors();
    let mut dv = vec![VarSet::new(); p.blocks.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..p.blocks.len() {
            let mut acc = VarSet::new();
            for &q in &preds[b] {
                let src = &p.blocks[q];
                match &src.term {
                    Terminator::Branch { cond, .. } => acc.extend(cond.vars()),
                    _ => match src.stmts.last() {
                        Some(s) => acc.extend(updated_vars(s)),
                        None => acc.extend(dv[q].iter().cloned()),
                    },
                }
            }
            if acc != dv[b] {
                dv[b] = acc;
                changed = true;
            }
        }
    }
    dv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Atom;
    use crate::ir::parse_program;

    fn point(p: &Program, label: &str, kind: PointKind) -> ProgramPoint {
        ProgramPoint { block: p.block_by_label(label).unwrap().id, kind }
    }

    #[test]
    fn branch_invariants_of_walkthrough() {
        let p = parse_program(
            "proc fig1(w, x, y, z) { entry: assume (z <= x); if (y <= x) t else f; t: return; f: return; }",
        )
        .unwrap();
        let r = analyze(&p, &AnalysisConfig::new("Z", DomainKind::Zones)).unwrap();
        let t = &r.points[&point(&p, "entry", PointKind::Edge(true))];
        let f = &r.points[&point(&p, "entry", PointKind::Edge(false))];
        assert_eq!(t.invariant.formula.canonical(), Formula::parse("z <= x && y <= x").unwrap().canonical());
        assert_eq!(f.invariant.formula.canonical(), Formula::parse("z <= x && x <= y - 1").unwrap().canonical());
        assert_eq!(t.dv, crate::var::var_set(["x", "y"]));
    }

    #[test]
    fn straight_line_constants() {
        let p = parse_program("proc s(x) { entry: x := 0; x := x + 1; return; }").unwrap();
        let r = analyze(&p, &AnalysisConfig::new("Z", DomainKind::Zones)).unwrap();
        let last = &r.points[&point(&p, "entry", PointKind::AfterStmt(1))];
        assert_eq!(last.invariant.formula.canonical(), Formula::from_atoms([Atom::upper("x", 1), Atom::lower("x", 1)]).canonical());
    }

    const COUNTER: &str = "proc c(x) {
        entry: x := 0; goto head;
        head: if (x < 100) body else exit;
        body: x := x + 1; goto head;
        exit: return;
    }";

    #[test]
    fn standard_widening_loses_upper_bound() {
        let p = parse_program(COUNTER).unwrap();
        let r = analyze(&p, &AnalysisConfig::new("Z", DomainKind::Zones)).unwrap();
        let head = &r.points[&point(&p, "head", PointKind::BlockEntry)];
        assert_eq!(head.invariant.formula.canonical(), Formula::from_atoms([Atom::lower("x", 0)]).canonical());
        let exit = &r.points[&point(&p, "head", PointKind::Edge(false))];
        assert_eq!(exit.invariant.formula.canonical(), Formula::from_atoms([Atom::lower("x", 100)]).canonical());
        assert_eq!(head.dv, crate::var::var_set(["x"]));
    }

    #[test]
    fn threshold_widening_keeps_bound() {
        let p = parse_program(COUNTER).unwrap();
        let cfg = AnalysisConfig::new("Z_ths", DomainKind::Zones)
            .with_widening(WideningPolicy::threshold(crate::zones::DEFAULT_THRESHOLDS));
        let r = analyze(&p, &cfg).unwrap();
        let exit = &r.points[&point(&p, "head", PointKind::Edge(false))];
        assert_eq!(exit.invariant.formula.canonical(), Formula::from_atoms([Atom::upper("x", 100), Atom::lower("x", 100)]).canonical());
    }

    #[test]
    fn widening_points_of_loops() {
        let flat = parse_program("proc f(x) { entry: x := 1; return; }").unwrap();
        assert!(widening_points(&flat).is_empty());
        let p = parse_program(COUNTER).unwrap();
        assert_eq!(widening_points(&p), BTreeSet::from([p.block_by_label("head").unwrap().id]));
        let nested = parse_program(
            "proc n(i, j) {
              entry: i := 0; goto outer;
              outer: if (i < 10) init else done;
              init: j := 0; goto inner;
              inner: if (j < i) step else next;
              step: j := j + 1; goto inner;
              next: i := i + 1; goto outer;
              done: return;
            }",
        )
        .unwrap();
        let heads: BTreeSet<_> = ["outer", "inner"].iter().map(|l| nested.block_by_label(l).unwrap().id).collect();
        assert_eq!(widening_points(&nested), heads);
        let r = analyze(&nested, &AnalysisConfig::new("P", DomainKind::Predicates)).unwrap();
        assert!(r.iterations < 1000 * nested.blocks.len());
    }

    #[test]
    fn unreachable_points_are_bottom() {
        let p = parse_program("proc u(x) { entry: x := 1; if (x > 5) dead else live; dead: x := 2; return; live: return; }")
            .unwrap();
        let r = analyze(&p, &AnalysisConfig::new("Z", DomainKind::Zones)).unwrap();
        assert!(r.points[&point(&p, "dead", PointKind::AfterStmt(0))].invariant.is_bottom());
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = AnalysisConfig::parse(
            "label = Z_k5\ndomain = zones\nwidening = delayed:5\ndelta = nn\nseed = z <= x\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.widening, WideningPolicy::Delayed(5));
        assert_eq!(cfg.delta, DeltaKind::Nn);
        assert!(matches!(AnalysisConfig::parse("domain = zones", None), Err(ConfigError::Missing(_))));
        assert!(matches!(AnalysisConfig::parse("label=a\ndomain=zones\ncolor=red", None), Err(ConfigError::Unknown(_))));
    }

    #[test]
    fn analysis_is_deterministic() {
        let p = parse_program(COUNTER).unwrap();
        let cfg = AnalysisConfig::new("P", DomainKind::Predicates);
        assert_eq!(analyze(&p, &cfg).unwrap(), analyze(&p, &cfg).unwrap());
    }
}
