mod common;

use proptest::prelude::*;

use invcmp::compare::oracle::{enumerate_entails, Oracle};
use invcmp::compare::{classify, Backend, Entailment3};
use invcmp::delta::{ConnectedComponents, DeltaFn, Invariant, NodeNeighbors};
use invcmp::engine::{analyze, successor_states, AnalysisConfig, DomainKind};
use invcmp::formula::{Atom, Constraint, Formula, Range};
use invcmp::ir::{parse_program, Cond, RelOp, StmtKind};
use invcmp::predicates::{Partition, PredState};
use invcmp::var::{Var, VarSet};
use invcmp::zones::{WideningPolicy, ZoneState};

const VARS: [&str; 3] = ["x", "y", "z"];

fn universe() -> VarSet {
    VARS.iter().map(|v| Var::new(*v)).collect()
}

fn atom() -> impl Strategy<Value = Atom> {
    (0..=3usize, 0..=3usize, -6i64..=6).prop_map(|(i, j, c)| match (i.checked_sub(1), j.checked_sub(1)) {
        (Some(a), Some(b)) if a != b => Atom::diff(VARS[a], VARS[b], c),
        (Some(a), _) => Atom::upper(VARS[a], c),
        (None, Some(b)) => Atom::lower(VARS[b], c),
        (None, None) => Atom::lower(VARS[0], c),
    })
}

fn zone() -> impl Strategy<Value = ZoneState> {
    prop::collection::vec(atom(), 0..5).prop_map(|atoms| ZoneState::from_atoms(universe(), &atoms).unwrap())
}

fn range() -> impl Strategy<Value = Range> {
    (-4i64..=4, 0i64..=3, any::<bool>()).prop_map(|(lo, w, open)| {
        if open {
            Range::new(Some(lo), None)
        } else {
            Range::new(Some(lo), Some(lo + w))
        }
    })
}

fn constraint() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        3 => atom().prop_map(Constraint::Atom),
        1 => (0..3usize, prop::collection::vec(range(), 1..3))
            .prop_map(|(v, ranges)| Constraint::InRanges { var: Var::new(VARS[v]), ranges }),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    prop::collection::vec(constraint(), 0..4).prop_map(Formula::from_constraints)
}

fn guard(a: &Atom) -> StmtKind {
    StmtKind::Guard { cond: Cond::from_atom(a).unwrap(), polarity: true }
}

fn pred_state() -> impl Strategy<Value = PredState> {
    prop::collection::vec(atom(), 0..4).prop_map(|atoms| {
        atoms.iter().fold(PredState::top(Partition::default(), universe()), |s, a| s.transfer(&guard(a)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closure_is_idempotent(z in zone()) {
        let c = z.closure();
        prop_assert_eq!(c.closure(), c);
    }

    #[test]
    fn reduction_round_trips(z in zone()) {
        let c = z.closure();
        prop_assume!(!c.is_bottom());
        let back = ZoneState::from_atoms(universe(), &c.reduce_redundant()).unwrap();
        prop_assert_eq!(back.closure(), c);
    }

    #[test]
    fn join_and_widen_are_upper_bounds(a in zone(), b in zone(), k in 1u32..4) {
        let j = a.join(&b).unwrap();
        prop_assert!(a.leq(&j) && b.leq(&j));
        for policy in [WideningPolicy::Standard, WideningPolicy::threshold([0, 1, 10])] {
            let w = a.widen(&j, &policy, k).unwrap();
            prop_assert!(a.leq(&w) && j.leq(&w));
        }
    }

    #[test]
    fn includes_matches_enumeration(a in zone(), b in zone()) {
        let u = universe();
        let o = Oracle { box_bound: 32, cap: 10_000_000 };
        let slow = enumerate_entails(&a.to_formula(&u), &b.to_formula(&u), &u, &o).unwrap();
        prop_assert_eq!(a.includes(&b, &u).unwrap(), slow == Entailment3::Yes);
    }

    #[test]
    fn oracle_search_matches_enumeration(a in formula(), b in formula()) {
        let o = Oracle { box_bound: 8, cap: 10_000_000 };
        let fast = o.entails(&a, &b).unwrap();
        let slow = enumerate_entails(&a, &b, &universe(), &o).unwrap();
        prop_assert_eq!(fast == Entailment3::Yes, slow == Entailment3::Yes);
        if let Entailment3::No(Some(m)) = fast {
            let value = |v: &Var| m.get(v).copied().unwrap_or(0);
            prop_assert!(a.holds(value) && !b.holds(value));
        }
    }

    #[test]
    fn classify_is_antisymmetric(a in formula(), b in formula()) {
        let backend = Backend::Oracle(Oracle::new(16));
        let u = universe();
        prop_assert_eq!(classify(&a, &b, &u, &backend).unwrap(), classify(&b, &a, &u, &backend).unwrap().swap());
    }

    #[test]
    fn predicate_join_is_upper_bound(a in pred_state(), b in pred_state()) {
        let j = a.join(&b).unwrap();
        prop_assert!(a.leq(&j) && b.leq(&j));
        let w = a.widen(&j).unwrap();
        prop_assert!(a.leq(&w) && j.leq(&w));
    }

    #[test]
    fn predicate_formula_overapproximates_guards(atoms in prop::collection::vec(atom(), 0..4)) {
        let s = atoms.iter().fold(PredState::top(Partition::default(), universe()), |s, a| s.transfer(&guard(a)));
        let f = s.to_formula(&universe());
        let exact = Formula::from_atoms(atoms.clone());
        let o = Oracle::new(16);
        prop_assert_eq!(o.entails(&exact, &f).unwrap(), Entailment3::Yes);
    }

    #[test]
    fn deltas_are_monotone_and_nested(f in formula(), small in prop::collection::btree_set(0..3usize, 0..3), extra in 0..3usize) {
        let inv = Invariant::new(universe(), f);
        let dv1: VarSet = small.iter().map(|&i| Var::new(VARS[i])).collect();
        let mut dv2 = dv1.clone();
        dv2.insert(Var::new(VARS[extra]));
        for d in [&NodeNeighbors as &dyn DeltaFn, &ConnectedComponents] {
            let (v1, v2) = (d.apply(&inv, &dv1).unwrap().vars(), d.apply(&inv, &dv2).unwrap().vars());
            prop_assert!(v1.is_subset(&v2));
            prop_assert!(v2.is_subset(&inv.universe));
        }
        let nn = NodeNeighbors.apply(&inv, &dv2).unwrap().vars();
        let cc = ConnectedComponents.apply(&inv, &dv2).unwrap().vars();
        prop_assert!(nn.is_subset(&cc));
    }
}

#[test]
fn fixpoints_are_post_fixpoints_on_the_corpus() {
    let configs = [
        AnalysisConfig::new("Z", DomainKind::Zones),
        AnalysisConfig::new("Z_k5", DomainKind::Zones).with_widening(WideningPolicy::Delayed(5)),
        AnalysisConfig::new("Z_ths", DomainKind::Zones).with_widening(WideningPolicy::threshold([0, 1, 10, 100, 1000])),
        AnalysisConfig::new("P", DomainKind::Predicates),
    ];
    for path in common::desk() {
        let p = parse_program(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for cfg in &configs {
            let r = analyze(&p, cfg).unwrap();
            assert!(r.iterations <= 1000 * p.blocks.len());
            for b in &p.blocks {
                for (t, out) in successor_states(&p, b.id, &r.inputs[b.id]) {
                    assert!(out.leq(&r.inputs[t]), "{} {}: edge {} -> {}", p.name, cfg.label, b.label, p.blocks[t].label);
                }
            }
        }
    }
}

#[test]
fn corpus_programs_print_and_reparse() {
    for path in common::desk().into_iter().chain([common::root().join("walkthrough/fig.ir")]) {
        let p = parse_program(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parse_program(&p.to_string()).unwrap(), p, "{}", path.display());
    }
}

#[test]
fn not_equal_guard_splits_nothing_but_is_sound() {
    let s = PredState::top(Partition::default(), universe()).transfer(&StmtKind::Guard {
        cond: Cond { lhs: Var::new("x"), op: RelOp::Ne, rhs: None, offset: 0 },
        polarity: true,
    });
    let f = s.to_formula(&universe());
    let o = Oracle::new(16);
    assert_eq!(o.entails(&Formula::parse("x in {1..}").unwrap(), &f).unwrap(), Entailment3::Yes);
    assert_eq!(o.entails(&Formula::parse("x in {..=-1}").unwrap(), &f).unwrap(), Entailment3::Yes);
}
