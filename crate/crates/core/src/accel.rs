//! Acceleration of local ground self-loops into Σ⁰₂-assignments.
//!
//! A loop whose counters move by constant steps and whose array accesses go
//! through injective affine selectors of one counter touches every cell at
//! most once, so its `n`-fold iterate has a closed form with a fresh
//! existential iteration count.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;

use crate::error::{AccelError, SmtError};
use crate::logic::{fresh_name, simplify, simplify_term, Formula, Lambda, Linear, Rel, Subst, Term};
use crate::smt::Solver;
use crate::system::{compose, Origin, Program, Transition, TransitionKind};

// ---------------------------------------------------------------------------
// Iterators and selectors

/// Template variable for the iteration count in closed forms.
pub const ITER_VAR: &str = "y";
/// Prefix of the iteration-count variables of accelerated transitions.
pub const ITER_PREFIX: &str = "#acc";

pub fn is_iteration_var(name: &str) -> bool {
    name.starts_with(ITER_PREFIX)
}
/// Template variable for the selected index in inverses.
pub const INDEX_VAR: &str = "z";

/// `u(x̃)` together with its closed form `u*(x̃, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IteratorSpec {
    pub name: String,
    pub vars: Vec<String>,
    pub step: Vec<Term>,
    pub closed: Vec<Term>,
}

impl IteratorSpec {
    /// `x ↦ x + k`, with closed form `x + k·y`.
    pub fn shift(k: i64) -> IteratorSpec {
        let x = Term::var("x");
        IteratorSpec {
            name: if k >= 0 { format!("x+{k}") } else { format!("x-{}", -k) },
            vars: vec!["x".into()],
            step: vec![simplify_term(&(x.clone() + Term::num(k)))],
            closed: vec![simplify_term(&(x + Term::mul(k, Term::var(ITER_VAR))))],
        }
    }

    /// `uⁿ(x̃)` by syntactic unfolding.
    pub fn unfold(&self, n: usize) -> Vec<Term> {
        let mut cur: Vec<Term> = self.vars.iter().map(|v| Term::var(v)).collect();
        for _ in 0..n {
            let s = Subst::vars(self.vars.iter().cloned().zip(cur.iter().cloned()).collect());
            cur = self.step.iter().map(|u| simplify_term(&s.term(u))).collect();
        }
        cur
    }

    /// `u*(args, y)`.
    pub fn closed_at(&self, args: &[Term], y: &Term) -> Vec<Term> {
        let mut map: BTreeMap<String, Term> = self.vars.iter().cloned().zip(args.iter().cloned()).collect();
        map.insert(ITER_VAR.into(), y.clone());
        let s = Subst::vars(map);
        self.closed.iter().map(|u| simplify_term(&s.term(u))).collect()
    }
}

/// A selector `κ(x̃)` with inverse `ι(x̃, z)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorSpec {
    pub name: String,
    pub kappa: Term,
    pub iota: Term,
}

impl SelectorSpec {
    /// `κ = sign·x + offset` for the iterator `x ↦ x + step`. The inverse
    /// uses floor division when `|sign·step| > 1`; exactness is left to the
    /// caller's `j = κ(u*(x, ι))` check.
    pub fn affine(sign: i64, offset: Term, step: i64) -> SelectorSpec {
        let x = Term::var("x");
        let z = Term::var(INDEX_VAR);
        let kappa = simplify_term(&(Term::mul(sign, x.clone()) + offset.clone()));
        let d = sign * step;
        let num = if d > 0 {
            z - offset - Term::mul(sign, x)
        } else {
            Term::mul(sign, x) + offset - z
        };
        let num = simplify_term(&num);
        let iota = if d.abs() == 1 { num } else { Term::div(num, d.abs()) };
        SelectorSpec {
            name: format!("{kappa}"),
            kappa,
            iota,
        }
    }

    pub fn iota_at(&self, x: &Term, z: &Term) -> Term {
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), x.clone());
        map.insert(INDEX_VAR.to_string(), z.clone());
        Subst::vars(map).term(&self.iota)
    }
}

/// The iterator law: `u*(x̃, n̄) = uⁿ(x̃)` for `n ≤ max_n`.
pub fn verify_iterator(it: &IteratorSpec, max_n: usize, solver: &mut Solver) -> Result<bool, SmtError> {
    let args: Vec<Term> = it.vars.iter().map(|v| Term::var(v)).collect();
    for n in 0..=max_n {
        let closed = it.closed_at(&args, &Term::num(n as i64));
        let unfolded = it.unfold(n);
        let eq = Formula::and(
            closed
                .into_iter()
                .zip(unfolded)
                .map(|(a, b)| Formula::eq(a, b))
                .collect(),
        );
        if solver.is_valid(&eq, &[])? != Some(true) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The selector law: `z = κ(u*(x̃, y)) → y = ι(x̃, z)` over the naturals.
pub fn verify_selector(it: &IteratorSpec, sel: &SelectorSpec, solver: &mut Solver) -> Result<bool, SmtError> {
    let args: Vec<Term> = it.vars.iter().map(|v| Term::var(v)).collect();
    let moved = it.closed_at(&args, &Term::var(ITER_VAR));
    let s = Subst::vars(it.vars.iter().cloned().zip(moved).collect());
    let law = Formula::implies(
        Formula::eq(Term::var(INDEX_VAR), s.term(&sel.kappa)),
        Formula::eq(Term::var(ITER_VAR), sel.iota.clone()),
    );
    Ok(solver.is_valid(&law, &[])? == Some(true))
}

/// Registered iterator/selector pairs. The offset `b` of affine selectors is
/// a free constant, so one check covers every offset.
#[derive(Clone, Debug)]
pub struct Repository {
    pub entries: Vec<(IteratorSpec, Vec<SelectorSpec>)>,
}

impl Repository {
    pub fn standard() -> Repository {
        let mut entries = Vec::new();
        for k in [1, -1, 2, -2, 3, -3] {
            let b = Term::cst("b");
            let sels = vec![
                SelectorSpec::affine(1, Term::num(0), k),
                SelectorSpec::affine(-1, b.clone(), k),
                SelectorSpec::affine(1, b, k),
            ];
            entries.push((IteratorSpec::shift(k), sels));
        }
        Repository { entries }
    }

    /// Checks both laws for every entry; returns `(description, holds)`.
    pub fn verify(&self, solver: &mut Solver) -> Result<Vec<(String, bool)>, SmtError> {
        let mut out = Vec::new();
        for (it, sels) in &self.entries {
            out.push((format!("iterator {}", it.name), verify_iterator(it, 5, solver)?));
            for s in sels {
                out.push((
                    format!("selector {} for {}", s.name, it.name),
                    verify_selector(it, s, solver)?,
                ));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Recognition

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Simple,
    SimplePlus,
    GeneralLocal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counter {
    pub name: String,
    pub step: i64,
}

/// `κ_h = sign·counter + offset`, with `offset` over unchanged constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selector {
    pub counter: String,
    pub sign: i64,
    pub offset: Term,
}

impl Selector {
    pub fn kappa(&self) -> Term {
        simplify_term(&(Term::mul(self.sign, Term::cst(&self.counter)) + self.offset.clone()))
    }

    fn spec(&self, step: i64) -> SelectorSpec {
        SelectorSpec::affine(self.sign, self.offset.clone(), step)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalGroundShape {
    pub transition: String,
    pub location: String,
    pub counters: Vec<Counter>,
    /// Unchanged constants used directly as array indices.
    pub idle: Vec<String>,
    pub selectors: BTreeMap<String, Selector>,
    /// Value written at `κ_h` for every written array.
    pub writes: BTreeMap<String, Term>,
    pub flavor: Flavor,
}

impl LocalGroundShape {
    fn step_of(&self, c: &str) -> i64 {
        self.counters.iter().find(|k| k.name == c).map(|k| k.step).unwrap_or(0)
    }
}

/// `ite(j = idx, val, a(j))` with `j` the lambda variable.
fn match_write(array: &str, l: &Lambda) -> Option<(Term, Term)> {
    let j = Term::var(&l.var);
    let Term::Ite(c, val, rest) = &l.body else {
        return None;
    };
    if **rest != Term::app(array, j.clone()) {
        return None;
    }
    let Formula::Atom(Rel::Eq, lhs, rhs) = c.as_ref() else {
        return None;
    };
    let idx = if *lhs == j {
        rhs
    } else if *rhs == j {
        lhs
    } else {
        return None;
    };
    if idx.free_vars().contains(&l.var) || val.free_vars().contains(&l.var) {
        return None;
    }
    Some((idx.clone(), (**val).clone()))
}

fn collect_apps(t: &Term, out: &mut Vec<(String, Term)>) {
    t.visit(&mut |s| {
        if let Term::App(a, i) = s {
            out.push((a.clone(), (**i).clone()));
        }
    });
}

/// `sign·c + offset` when `idx` is affine in exactly one counter with a unit
/// coefficient and otherwise mentions only unchanged constants.
fn affine_index(idx: &Term, counters: &BTreeSet<String>) -> Option<Selector> {
    let lin = Linear::of(&simplify_term(idx));
    let mut counter = None;
    let mut rest = Linear {
        coeffs: BTreeMap::new(),
        constant: lin.constant,
    };
    for (atom, k) in &lin.coeffs {
        match atom {
            Term::Const(c) if counters.contains(c) => {
                if counter.is_some() || k.abs() != 1 {
                    return None;
                }
                counter = Some((c.clone(), *k));
            }
            Term::Const(_) => {
                rest.coeffs.insert(atom.clone(), *k);
            }
            _ => return None,
        }
    }
    let (c, sign) = counter?;
    Some(Selector {
        counter: c,
        sign,
        offset: rest.to_term(),
    })
}

fn same_linear(a: &Term, b: &Term) -> bool {
    Linear::of(&simplify_term(a)) == Linear::of(&simplify_term(b))
}

/// Recognition result before the separation-literal requirement: the shape
/// and the `κ_h ≠ d` literals the guard still lacks.
fn analyze(t: &Transition) -> Option<(LocalGroundShape, Vec<Formula>)> {
    if t.kind() != TransitionKind::GroundAsg || !t.is_self_loop() {
        return None;
    }
    let mut counters = Vec::new();
    for (c, u) in t.changed_consts() {
        let d = Linear::of(&simplify_term(&(u.clone() - Term::cst(c))));
        if !d.is_constant() || d.constant == 0 {
            return None;
        }
        counters.push(Counter {
            name: c.to_string(),
            step: d.constant,
        });
    }
    if counters.is_empty() {
        return None;
    }
    let names: BTreeSet<String> = counters.iter().map(|c| c.name.clone()).collect();

    let mut writes = BTreeMap::new();
    let mut accesses: Vec<(String, Term)> = Vec::new();
    for (a, l) in t.changed_arrays() {
        let (idx, val) = match_write(a, l)?;
        if idx.mentions_array() {
            return None;
        }
        collect_apps(&val, &mut accesses);
        accesses.push((a.to_string(), idx));
        writes.insert(a.to_string(), val);
    }
    t.guard.visit_terms(&mut |s| collect_apps(s, &mut accesses));

    let mut idle = BTreeSet::new();
    let mut selectors: BTreeMap<String, Selector> = BTreeMap::new();
    for (a, idx) in accesses {
        if idx.mentions_array() {
            return None;
        }
        match &idx {
            Term::Const(d) if !names.contains(d) => {
                idle.insert(d.clone());
            }
            _ => {
                let sel = affine_index(&idx, &names)?;
                match selectors.get(&a) {
                    Some(prev) if !same_linear(&prev.kappa(), &sel.kappa()) => return None,
                    Some(_) => {}
                    None => {
                        selectors.insert(a, sel);
                    }
                }
            }
        }
    }
    for a in writes.keys() {
        if !selectors.contains_key(a) {
            return None;
        }
    }

    let guard = simplify(&t.guard);
    let literals: Vec<&Formula> = guard.conjuncts();
    let mut missing = Vec::new();
    for sel in selectors.values() {
        for d in &idle {
            let want = Linear::of(&simplify_term(&(sel.kappa() - Term::cst(d))));
            let present = literals.iter().any(|f| match f {
                Formula::Atom(Rel::Ne, x, y) => {
                    let have = Linear::of(&simplify_term(&(x.clone() - y.clone())));
                    have == want || have == Linear::default().minus(&want)
                }
                _ => false,
            });
            let lit = Formula::ne(sel.kappa(), Term::cst(d));
            if !present && !missing.contains(&lit) {
                missing.push(lit);
            }
        }
    }

    let unit_selectors = selectors.values().all(|s| s.sign == 1 && s.offset == Term::Num(0));
    let flavor = if counters.len() == 1 && unit_selectors {
        match (counters[0].step, idle.is_empty()) {
            (1, true) => Flavor::Simple,
            (1, false) | (-1, _) => Flavor::SimplePlus,
            _ => Flavor::GeneralLocal,
        }
    } else {
        Flavor::GeneralLocal
    };
    let shape = LocalGroundShape {
        transition: t.name.clone(),
        location: t.from.clone(),
        counters,
        idle: idle.into_iter().collect(),
        selectors,
        writes,
        flavor,
    };
    Some((shape, missing))
}

/// The local ground shape of `t`, if it has one.
pub fn recognize(t: &Transition) -> Option<LocalGroundShape> {
    match analyze(t) {
        Some((shape, missing)) if missing.is_empty() => Some(shape),
        _ => None,
    }
}

/// The copy of `t` strengthened with the `κ ≠ d` literals recognition
/// requires, when those literals are the only obstacle and the copy is
/// satisfiable.
pub fn separated_copy(t: &Transition) -> Option<Transition> {
    let (_, missing) = analyze(t)?;
    if missing.is_empty() {
        return None;
    }
    let mut parts = vec![t.guard.clone()];
    parts.extend(missing);
    let guard = simplify(&Formula::and(parts));
    if guard == Formula::False {
        return None;
    }
    let mut copy = t.clone();
    copy.name = format!("{}~ne", t.name);
    copy.guard = guard;
    Some(copy)
}

// ---------------------------------------------------------------------------
// Acceleration

/// Builds `t⁺`: an existential iteration count `y > 0`, a universal guard
/// over the `y` visited counter values, counters moved by `u*(c̃, y)`, and each
/// written array redefined through the selector inverse.
pub fn accelerate(t: &Transition, shape: &LocalGroundShape) -> Result<Transition, AccelError> {
    let fresh = recognize(t);
    if shape.transition != t.name
        || fresh.as_ref().map(|s| (&s.counters, &s.selectors)) != Some((&shape.counters, &shape.selectors))
    {
        return Err(AccelError::ShapeMismatch(t.name.clone()));
    }
    let y_name = fresh_name(ITER_PREFIX);
    let y = Term::var(&y_name);
    let z_name = fresh_name("#z");
    let z = Term::var(&z_name);

    // counters moved by `w` iterations
    let moved = |w: &Term| -> Subst {
        let mut s = Subst::default();
        for c in &shape.counters {
            s.consts.insert(
                c.name.clone(),
                simplify_term(&(Term::cst(&c.name) + Term::mul(c.step, w.clone()))),
            );
        }
        s
    };
    let unit = match shape.counters.as_slice() {
        [c] if c.step.abs() == 1 => Some(c.clone()),
        _ => None,
    };
    // half-open range of counter values visited by the first `y` iterations
    let visited = |c: &Counter, j: &Term| -> Formula {
        let x = Term::cst(&c.name);
        if c.step > 0 {
            Formula::and(vec![
                Formula::le(x.clone(), j.clone()),
                Formula::lt(j.clone(), x + y.clone()),
            ])
        } else {
            Formula::and(vec![
                Formula::lt(x.clone() - y.clone(), j.clone()),
                Formula::le(j.clone(), x),
            ])
        }
    };

    let uguard_body = match &unit {
        Some(c) => {
            let mut s = Subst::default();
            s.consts.insert(c.name.clone(), z.clone());
            Formula::implies(visited(c, &z), s.formula(&t.guard))
        }
        None => Formula::implies(
            Formula::and(vec![
                Formula::le(Term::num(0), z.clone()),
                Formula::lt(z.clone(), y.clone()),
            ]),
            moved(&z).formula(&t.guard),
        ),
    };

    let mut const_updates = t.const_updates.clone();
    for c in &shape.counters {
        const_updates.insert(
            c.name.clone(),
            simplify_term(&(Term::cst(&c.name) + Term::mul(c.step, y.clone()))),
        );
    }

    let mut array_updates = t.array_updates.clone();
    for (a, val) in &shape.writes {
        let sel = &shape.selectors[a];
        let j_name = fresh_name("j");
        let j = Term::var(&j_name);
        let body = match &unit {
            Some(c) if sel.sign == 1 && sel.offset == Term::Num(0) => {
                let mut s = Subst::default();
                s.consts.insert(c.name.clone(), j.clone());
                Term::ite(visited(c, &j), s.term(val), Term::app(a, j.clone()))
            }
            _ => {
                let step = shape.step_of(&sel.counter);
                let iota = sel.spec(step).iota_at(&Term::cst(&sel.counter), &j);
                let at = moved(&iota);
                let cond = Formula::and(vec![
                    Formula::le(Term::num(0), iota.clone()),
                    Formula::lt(iota.clone(), y.clone()),
                    Formula::eq(j.clone(), at.term(&sel.kappa())),
                ]);
                Term::ite(cond, at.term(val), Term::app(a, j.clone()))
            }
        };
        array_updates.insert(
            a.clone(),
            Lambda {
                var: j_name,
                body: simplify_term(&body),
            },
        );
    }

    let out = Transition {
        name: format!("{}+", t.name),
        from: t.from.clone(),
        to: t.to.clone(),
        exist_vars: vec![y_name],
        guard: Formula::lt(Term::num(0), y.clone()),
        uguard: Some(crate::system::UGuard {
            vars: vec![z_name],
            body: simplify(&uguard_body),
        }),
        array_updates,
        const_updates,
        origin: Origin::Accelerated(t.name.clone()),
    };
    debug!("accelerated {} ({:?})", t.name, shape.flavor);
    Ok(out)
}

/// The loop candidates of `p`: every ground self-loop, plus the composition
/// of every pair of distinct ground transitions forming a cycle through one
/// location.
pub fn candidates(p: &Program) -> Vec<Transition> {
    let ground: Vec<&Transition> = p
        .transitions
        .iter()
        .filter(|t| t.kind() == TransitionKind::GroundAsg && !t.is_accelerated())
        .collect();
    let mut out: Vec<Transition> = ground
        .iter()
        .filter(|t| t.is_self_loop())
        .map(|t| (*t).clone())
        .collect();
    for t1 in &ground {
        for t2 in &ground {
            if t1.name == t2.name || t1.to != t2.from || t2.to != t1.from {
                continue;
            }
            if let Some(c) = compose(t1, t2) {
                if c.guard != Formula::False {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// The accelerations [`preprocess`] would add, each paired with the loop it
/// accelerates.
pub fn accelerations(p: &Program) -> Vec<(Transition, Transition)> {
    let mut out = Vec::new();
    for c in candidates(p) {
        let target = if recognize(&c).is_some() {
            Some(c)
        } else {
            separated_copy(&c)
        };
        let Some(target) = target else {
            continue;
        };
        if let Some(shape) = recognize(&target) {
            match accelerate(&target, &shape) {
                Ok(t) => out.push((target, t)),
                Err(e) => debug!("{e}"),
            }
        }
    }
    out
}

/// `p` extended with the accelerations of its loop candidates.
pub fn preprocess(p: &Program) -> Program {
    let mut out = p.clone();
    out.transitions.extend(accelerations(p).into_iter().map(|(_, t)| t));
    out
}
