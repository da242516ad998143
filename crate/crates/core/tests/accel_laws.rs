use accmc_core::accel::{
    verify_iterator, verify_selector, IteratorSpec, Repository, SelectorSpec, INDEX_VAR, ITER_VAR,
};
use accmc_core::logic::{simplify, Formula, Subst, Term};
use accmc_core::smt::{Solver, SolverConfig};

fn solver() -> Solver {
    Solver::new(SolverConfig::default()).expect("z3 on PATH")
}

#[test]
fn step_two_with_floor_inverse() {
    let mut s = solver();
    let it = IteratorSpec::shift(2);
    assert!(verify_iterator(&it, 5, &mut s).unwrap());
    let sel = SelectorSpec::affine(1, Term::num(0), 2);
    assert_eq!(sel.kappa, Term::var("x"));
    assert_eq!(sel.iota, Term::div(Term::var(INDEX_VAR) - Term::var("x"), 2));
    assert!(verify_selector(&it, &sel, &mut s).unwrap());
}

#[test]
fn perturbed_inverse_is_rejected() {
    let mut s = solver();
    let it = IteratorSpec::shift(2);
    let bad = SelectorSpec {
        name: "x".into(),
        kappa: Term::var("x"),
        iota: Term::var(INDEX_VAR) - Term::var("x"),
    };
    assert!(!verify_selector(&it, &bad, &mut s).unwrap());
}

#[test]
fn wrong_closed_form_is_rejected() {
    let mut s = solver();
    let mut it = IteratorSpec::shift(2);
    it.closed = vec![Term::var("x") + Term::var(ITER_VAR)];
    assert!(!verify_iterator(&it, 5, &mut s).unwrap());
}

#[test]
fn standard_repository_holds() {
    let mut s = solver();
    let results = Repository::standard().verify(&mut s).unwrap();
    assert_eq!(results.len(), 6 * 4);
    for (name, ok) in results {
        assert!(ok, "{name}");
    }
}

#[test]
fn unfolding_matches_the_closed_form_pointwise() {
    for k in [-3, -1, 1, 2, 3] {
        let it = IteratorSpec::shift(k);
        for n in 0..6 {
            let closed = it.closed_at(&[Term::cst("x")], &Term::num(n));
            let unfolded = it.unfold(n as usize);
            let at_x = Subst::vars([("x".to_string(), Term::cst("x"))].into_iter().collect());
            let f = Formula::eq(closed[0].clone(), at_x.term(&unfolded[0]));
            assert_eq!(simplify(&f), Formula::True, "k={k} n={n}");
        }
    }
}
