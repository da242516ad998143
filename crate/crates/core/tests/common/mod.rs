//! Random formulas and states for property tests.
//!
//! Bound variables occur only as leaves and array indices, and ground
//! arithmetic stays below [`WIDTH`], so the bounded evaluator and the
//! unbounded semantics agree on every generated formula.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;

use accmc_core::logic::{Formula, Rel, Term};
use accmc_core::oracle::State;

/// Quantifier range and array length used by the evaluator.
pub const WIDTH: i64 = 10;
pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn rel() -> impl Strategy<Value = Rel> {
    prop_oneof![Just(Rel::Eq), Just(Rel::Ne), Just(Rel::Lt), Just(Rel::Le)]
}

/// Variable-free terms with values in `-4..=8`.
pub fn ground_term() -> BoxedStrategy<Term> {
    let leaf = prop_oneof![
        (0i64..=2).prop_map(Term::num),
        prop_oneof![Just("c"), Just("d")].prop_map(Term::cst)
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            inner.clone().prop_map(|a| Term::app("a", a)),
            inner.prop_map(|a| Term::div(a, 2)),
        ]
    })
    .boxed()
}

pub fn var() -> impl Strategy<Value = Term> {
    prop::sample::select(VARS.to_vec()).prop_map(Term::var)
}

pub fn term() -> BoxedStrategy<Term> {
    prop_oneof![
        2 => var(),
        3 => ground_term(),
        1 => var().prop_map(|v| Term::app("a", v)),
    ]
    .boxed()
}

fn names(n: usize) -> impl Strategy<Value = Vec<String>> {
    prop::sample::subsequence(VARS.to_vec(), 1..=n).prop_map(|v| v.into_iter().map(String::from).collect())
}

/// Formulas with free variables among [`VARS`].
pub fn open_formula() -> BoxedStrategy<Formula> {
    let atom = (rel(), term(), term()).prop_map(|(r, a, b)| Formula::atom(r, a, b));
    atom.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Or),
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            (names(1), inner.clone()).prop_map(|(v, f)| Formula::Exists(v, Box::new(f))),
            (names(1), inner).prop_map(|(v, f)| Formula::Forall(v, Box::new(f))),
        ]
    })
    .boxed()
}

pub fn close(f: Formula) -> Formula {
    let free: Vec<String> = f.free_vars().into_iter().collect();
    if free.is_empty() {
        f
    } else {
        Formula::Exists(free, Box::new(f))
    }
}

pub fn sentence() -> BoxedStrategy<Formula> {
    open_formula().prop_map(close).boxed()
}

/// Quantifier-free formulas over `c`, `d` and reads of `a` at `c`, `d` or a
/// numeral below four.
pub fn qf_formula() -> BoxedStrategy<Formula> {
    let index = prop_oneof![
        (0i64..4).prop_map(Term::num),
        prop_oneof![Just("c"), Just("d")].prop_map(Term::cst)
    ];
    let leaf = prop_oneof![
        (0i64..=2).prop_map(Term::num),
        prop_oneof![Just("c"), Just("d")].prop_map(Term::cst),
        index.prop_map(|i| Term::app("a", i)),
    ];
    let t = leaf.prop_recursive(1, 3, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner).prop_map(|(a, b)| a - b),
        ]
    });
    let atom = (rel(), t.clone(), t).prop_map(|(r, a, b)| Formula::atom(r, a, b));
    atom.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Or),
            inner.prop_map(|f| Formula::Not(Box::new(f))),
        ]
    })
    .boxed()
}

pub fn state(len: usize) -> impl Strategy<Value = State> {
    (0i64..=2, 0i64..=2, prop::collection::vec(0i64..=1, len)).prop_map(|(c, d, a)| State {
        pc: "l1".into(),
        consts: BTreeMap::from([("c".into(), c), ("d".into(), d)]),
        arrays: BTreeMap::from([("a".into(), a)]),
    })
}

/// Every state over `c, d ∈ 0..=2` and `a` of length `len` with 0/1 entries.
pub fn all_states(len: usize) -> Vec<State> {
    let mut out = Vec::new();
    for c in 0..=2 {
        for d in 0..=2 {
            for bits in 0..(1u32 << len) {
                let a = (0..len).map(|i| ((bits >> i) & 1) as i64).collect();
                out.push(State {
                    pc: "l1".into(),
                    consts: BTreeMap::from([("c".into(), c), ("d".into(), d)]),
                    arrays: BTreeMap::from([("a".into(), a)]),
                });
            }
        }
    }
    out
}
