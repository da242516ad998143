use accmc_core::logic::{Formula, Term};
use accmc_core::smt::{encode, SatResult, Solver, SolverConfig};

fn solver() -> Solver {
    Solver::new(SolverConfig::default()).expect("z3 on PATH")
}

fn locs() -> Vec<String> {
    ["l1", "l2", "l3", "l4"].iter().map(|s| s.to_string()).collect()
}

#[test]
fn distinct_locations_are_exclusive() {
    let mut s = solver();
    let f = Formula::and(vec![Formula::pc("l4"), Formula::pc("l1")]);
    assert_eq!(s.check_sat(&f, &locs()).unwrap(), SatResult::Unsat);
    assert_eq!(s.check_sat(&Formula::pc("l4"), &locs()).unwrap(), SatResult::Sat);
}

#[test]
fn existential_is_skolemized() {
    let mut s = solver();
    let z = Term::var("z");
    let f = Formula::exists(
        vec!["z".into()],
        Formula::and(vec![
            Formula::le(Term::num(0), z.clone()),
            Formula::lt(z, Term::cst("N")),
        ]),
    );
    assert_eq!(s.check_sat(&f, &[]).unwrap(), SatResult::Sat);
    assert_eq!(s.check_sat(&Formula::True, &[]).unwrap(), SatResult::Sat);
    assert_eq!(s.check_sat(&Formula::False, &[]).unwrap(), SatResult::Unsat);
}

#[test]
fn naturals_semantics() {
    let mut s = solver();
    // N < 0 has no model over the naturals
    let f = Formula::lt(Term::cst("N"), Term::num(0));
    assert_eq!(s.check_sat(&f, &[]).unwrap(), SatResult::Unsat);
    // neither does a negative array entry
    let f = Formula::lt(Term::app("a", Term::num(3)), Term::num(0));
    assert_eq!(s.check_sat(&f, &[]).unwrap(), SatResult::Unsat);
}

#[test]
fn floor_division() {
    let mut s = solver();
    // (z - x) // 2 = 1 with z - x = 3
    let f = Formula::and(vec![
        Formula::eq(Term::div(Term::cst("z") - Term::cst("x"), 2), Term::num(1)),
        Formula::eq(Term::cst("z"), Term::cst("x") + Term::num(3)),
    ]);
    assert_eq!(s.check_sat(&f, &[]).unwrap(), SatResult::Sat);
    let g = Formula::and(vec![
        Formula::eq(Term::div(Term::cst("z") - Term::cst("x"), 2), Term::num(1)),
        Formula::eq(Term::cst("z"), Term::cst("x") + Term::num(4)),
    ]);
    assert_eq!(s.check_sat(&g, &[]).unwrap(), SatResult::Unsat);
    // negative dividend rounds down
    let h = Formula::and(vec![
        Formula::eq(
            Term::div(Term::cst("x") - Term::cst("z"), 2),
            Term::num(0) - Term::num(2),
        ),
        Formula::eq(Term::cst("z"), Term::cst("x") + Term::num(3)),
    ]);
    assert_eq!(s.check_sat(&h, &[]).unwrap(), SatResult::Sat);
}

#[test]
fn sigma02_reflexivity() {
    // ∃i ∀j a(j) > a(i)
    let mut s = solver();
    let f = Formula::exists(
        vec!["i".into()],
        Formula::forall(
            vec!["j".into()],
            Formula::lt(Term::app("a", Term::var("i")), Term::app("a", Term::var("j"))),
        ),
    );
    assert_eq!(s.check_sat_sigma02(&f, &[]).unwrap(), SatResult::Unsat);
}

#[test]
fn sigma02_never_sat() {
    // ∃i ∀j a(j) ≤ a(i) is satisfiable, so it can only come back Unknown
    let mut s = solver();
    let f = Formula::exists(
        vec!["i".into()],
        Formula::forall(
            vec!["j".into()],
            Formula::le(Term::app("a", Term::var("j")), Term::app("a", Term::var("i"))),
        ),
    );
    assert_eq!(s.check_sat_sigma02(&f, &[]).unwrap(), SatResult::Unknown);
}

#[test]
fn emitted_scripts_parse() {
    let f = Formula::and(vec![
        Formula::ne(Term::app("I", Term::var("z1")), Term::app("O", Term::var("z2"))),
        Formula::eq(
            Term::div(Term::var("z1"), 3),
            Term::ite(Formula::pc("l2"), Term::num(1), Term::cst("c")),
        ),
    ]);
    let script = encode(&f, &locs()).unwrap();
    let out = std::process::Command::new("z3")
        .args(["-in", "-smt2"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(script.as_bytes())?;
            c.wait_with_output()
        })
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.trim(), "sat", "{script}\n{text}");
}

#[test]
fn model_values() {
    let mut s = solver();
    let f = Formula::and(vec![
        Formula::eq(Term::cst("N"), Term::num(2)),
        Formula::eq(Term::app("a", Term::num(1)), Term::num(3)),
        Formula::pc("l2"),
    ]);
    let (r, m) = s
        .check_sat_model(&f, &locs(), &["N".into(), "c".into()], &["a".into(), "b".into()], |c| {
            c["N"] as usize + 1
        })
        .unwrap();
    assert_eq!(r, SatResult::Sat);
    let m = m.unwrap();
    assert_eq!(m.consts["N"], 2);
    assert_eq!(m.arrays["a"].len(), 3);
    assert_eq!(m.arrays["a"][1], 3);
    assert_eq!(m.arrays["b"], vec![0, 0, 0]);
    assert_eq!(m.pc, Some(1));
}

#[test]
fn quantified_validity() {
    let mut s = solver();
    // ∀j (0 ≤ j < 0 → false) is valid
    let j = Term::var("j");
    let f = Formula::forall(
        vec!["j".into()],
        Formula::implies(
            Formula::and(vec![
                Formula::le(Term::num(0), j.clone()),
                Formula::lt(j.clone(), Term::num(0)),
            ]),
            Formula::False,
        ),
    );
    assert_eq!(s.is_valid(&f, &[]).unwrap(), Some(true));
    assert_eq!(
        s.is_valid(&Formula::lt(Term::cst("x"), Term::num(5)), &[]).unwrap(),
        Some(false)
    );
    assert!(s.stats.calls >= 2);
}

#[test]
fn missing_solver_is_a_spawn_error() {
    let r = Solver::new(SolverConfig::default().with_command("definitely-not-a-solver -in"));
    assert!(matches!(r, Err(accmc_core::error::SmtError::Spawn { .. })));
}
