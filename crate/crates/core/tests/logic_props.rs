//! Syntactic transformations must not change the meaning of a formula on
//! any state.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use accmc_core::abstraction::{abstract_label, InstMode, DEFAULT_CAP};
use accmc_core::logic::{canonical, classify, nnf, prenex, refresh_bound, simplify, substitute, SentenceClass};
use accmc_core::oracle::{eval_formula, eval_term};

use common::*;

fn eval(f: &accmc_core::logic::Formula, s: &accmc_core::oracle::State) -> Option<bool> {
    eval_formula(f, s, &BTreeMap::new(), WIDTH)
}

/// Both sides agree wherever both are defined.
fn agree(a: Option<bool>, b: Option<bool>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nnf_preserves_meaning(f in sentence(), s in state(WIDTH as usize)) {
        prop_assert_eq!(eval(&f, &s), eval(&nnf(&f), &s));
    }

    #[test]
    fn prenex_preserves_meaning(f in sentence(), s in state(WIDTH as usize)) {
        if let Some(p) = prenex(&f) {
            prop_assert!(p.matrix.is_quantifier_free());
            prop_assert!(agree(eval(&f, &s), eval(&p.to_formula(), &s)), "{} vs {}", f, p.to_formula());
        } else {
            prop_assert_eq!(classify(&f), SentenceClass::Other);
        }
    }

    #[test]
    fn simplify_preserves_meaning(f in sentence(), s in state(WIDTH as usize)) {
        let g = simplify(&f);
        prop_assert!(agree(eval(&f, &s), eval(&g, &s)), "{} became {}", f, g);
    }

    #[test]
    fn simplify_does_not_raise_the_class(f in sentence()) {
        prop_assert!(classify(&simplify(&f)) <= classify(&f));
    }

    #[test]
    fn canonical_is_idempotent_and_forgets_names(f in sentence(), s in state(WIDTH as usize)) {
        let c = canonical(&f);
        prop_assert_eq!(canonical(&c), c.clone());
        prop_assert_eq!(canonical(&refresh_bound(&f)), c.clone());
        prop_assert_eq!(eval(&f, &s), eval(&c, &s));
    }

    #[test]
    fn substitution_is_evaluation_at_the_value(
        f in open_formula(),
        t in ground_term(),
        s in state(WIDTH as usize),
    ) {
        let free = f.free_vars();
        prop_assume!(free.contains("x"));
        let Some(val) = eval_term(&t, &s, &BTreeMap::new()) else { return Ok(()) };
        let rest: Vec<String> = free.iter().filter(|v| *v != "x").cloned().collect();
        let body = substitute(&f, &BTreeMap::from([("x".to_string(), t)])).unwrap();
        let lhs = eval_formula(&accmc_core::logic::Formula::exists(rest.clone(), body), &s, &BTreeMap::new(), WIDTH);
        let env = BTreeMap::from([("x".to_string(), val)]);
        let rhs = eval_formula(&accmc_core::logic::Formula::exists(rest, f), &s, &env, WIDTH);
        prop_assert!(agree(lhs, rhs));
    }

    #[test]
    fn approximation_is_implied(
        f in sentence().prop_filter("at most two alternations", |f| classify(f) <= SentenceClass::Sigma02),
        s in state(WIDTH as usize),
        mode in prop_oneof![Just(InstMode::EVars), Just(InstMode::Terms), Just(InstMode::Index)],
    ) {
        let Ok(approx) = abstract_label(&f, mode, DEFAULT_CAP) else { return Ok(()) };
        prop_assert!(classify(&approx) <= SentenceClass::Sigma01, "{}", approx);
        if eval(&f, &s) == Some(true) {
            prop_assert_ne!(eval(&approx, &s), Some(false), "{} abstracted to {}", f, approx);
        }
    }
}
