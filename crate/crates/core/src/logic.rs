//! Terms and formulas over Presburger arithmetic extended with free constants,
//! free unary functions (arrays), `ite`, array writes and division by a
//! constant.
//!
//! Everything is interpreted over the naturals. Index variables are the only
//! bindable symbols; free constants and array symbols are never quantified.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::LogicError;

thread_local! {
    static FRESH: Cell<u64> = const { Cell::new(0) };
}

/// Returns a name not handed out before on this thread since the last
/// [`reseed_fresh`].
///
/// Fresh names carry a `!` separator; hand-written programs are expected not
/// to use it.
pub fn fresh_name(base: &str) -> String {
    let stem = base.split('!').next().unwrap_or(base);
    let stem = if stem.is_empty() { "v" } else { stem };
    let n = FRESH.with(|c| {
        let n = c.get();
        c.set(n + 1);
        n
    });
    format!("{stem}!{n}")
}

/// Restarts fresh numbering on this thread just above every `!n` suffix
/// occurring in `text`, so that repeated runs over the same input pick the
/// same names.
pub fn reseed_fresh(text: &str) {
    let floor = text
        .split('!')
        .skip(1)
        .filter_map(|rest| {
            let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
            digits.parse::<u64>().ok()
        })
        .max()
        .map_or(0, |m| m + 1);
    FRESH.with(|c| c.set(floor));
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Num(i64),
    Const(String),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    /// Multiplication by a numeral.
    Mul(i64, Box<Term>),
    /// Application of a declared array symbol.
    App(String, Box<Term>),
    Ite(Box<Formula>, Box<Term>, Box<Term>),
    /// Floor division by a positive numeral.
    Div(Box<Term>, i64),
    /// Read of a written-array expression; removed by [`Term::expand_writes`].
    Read(Box<ArrayTerm>, Box<Term>),
}

/// Array-valued expressions: a symbol, or a write on top of another array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArrayTerm {
    Sym(String),
    Store(Box<ArrayTerm>, Term, Term),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Rel, Term, Term),
    /// `pc = l`
    Pc(String),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SentenceClass {
    Ground,
    Sigma01,
    Sigma02,
    Other,
}

/// An array-valued lambda `λvar. body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lambda {
    pub var: String,
    pub body: Term,
}

impl Lambda {
    pub fn identity(array: &str) -> Lambda {
        let var = crate::spec_format::LAMBDA_VAR.to_string();
        Lambda {
            body: Term::app(array, Term::var(&var)),
            var,
        }
    }

    pub fn apply(&self, arg: &Term) -> Term {
        let mut s = Subst::default();
        s.vars.insert(self.var.clone(), arg.clone());
        s.term(&self.body)
    }

    pub fn is_identity_for(&self, array: &str) -> bool {
        self.body == Term::app(array, Term::var(&self.var))
    }
}

// ---------------------------------------------------------------------------
// Constructors

impl Term {
    pub fn var(n: &str) -> Term {
        Term::Var(n.to_string())
    }
    pub fn cst(n: &str) -> Term {
        Term::Const(n.to_string())
    }
    pub fn num(n: i64) -> Term {
        Term::Num(n)
    }
    pub fn app(a: &str, t: Term) -> Term {
        Term::App(a.to_string(), Box::new(t))
    }
    pub fn ite(c: Formula, t: Term, e: Term) -> Term {
        Term::Ite(Box::new(c), Box::new(t), Box::new(e))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn div(t: Term, k: i64) -> Term {
        assert!(k > 0, "division by a non-positive constant");
        Term::Div(Box::new(t), k)
    }
    pub fn mul(k: i64, t: Term) -> Term {
        Term::Mul(k, Box::new(t))
    }
    pub fn read(a: ArrayTerm, idx: Term) -> Term {
        Term::Read(Box::new(a), Box::new(idx))
    }
}

impl std::ops::Add for Term {
    type Output = Term;
    fn add(self, rhs: Term) -> Term {
        Term::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Term {
    type Output = Term;
    fn sub(self, rhs: Term) -> Term {
        Term::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ArrayTerm {
    pub fn sym(a: &str) -> ArrayTerm {
        ArrayTerm::Sym(a.to_string())
    }
    pub fn store(self, i: Term, x: Term) -> ArrayTerm {
        ArrayTerm::Store(Box::new(self), i, x)
    }
}

impl Formula {
    pub fn atom(r: Rel, a: Term, b: Term) -> Formula {
        Formula::Atom(r, a, b)
    }
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Atom(Rel::Eq, a, b)
    }
    pub fn ne(a: Term, b: Term) -> Formula {
        Formula::Atom(Rel::Ne, a, b)
    }
    pub fn lt(a: Term, b: Term) -> Formula {
        Formula::Atom(Rel::Lt, a, b)
    }
    pub fn le(a: Term, b: Term) -> Formula {
        Formula::Atom(Rel::Le, a, b)
    }
    pub fn pc(l: &str) -> Formula {
        Formula::Pc(l.to_string())
    }
    pub fn and(v: Vec<Formula>) -> Formula {
        Formula::And(v)
    }
    pub fn or(v: Vec<Formula>) -> Formula {
        Formula::Or(v)
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![Formula::not(a), b])
    }
    pub fn exists(vars: Vec<String>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }
    pub fn forall(vars: Vec<String>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    /// Conjuncts at the top level (a non-conjunction is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(v) => v.iter().flat_map(|f| f.conjuncts()).collect(),
            Formula::True => vec![],
            f => vec![f],
        }
    }

    /// The location fixed by a top-level `pc = l` conjunct, if any.
    pub fn pc_literal(&self) -> Option<&str> {
        self.conjuncts().into_iter().find_map(|c| match c {
            Formula::Pc(l) => Some(l.as_str()),
            _ => None,
        })
    }

    pub fn is_quantifier_free(&self) -> bool {
        let mut qf = true;
        self.visit(&mut |f| {
            if matches!(f, Formula::Exists(..) | Formula::Forall(..)) {
                qf = false;
            }
        });
        qf
    }

    fn visit(&self, f: &mut dyn FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Atom(_, a, b) => {
                a.visit_formulas(f);
                b.visit_formulas(f);
            }
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| g.visit(f)),
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => g.visit(f),
            _ => {}
        }
    }
}

impl Term {
    fn visit_formulas(&self, f: &mut dyn FnMut(&Formula)) {
        match self {
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.visit_formulas(f);
                b.visit_formulas(f);
            }
            Term::Mul(_, a) | Term::App(_, a) | Term::Div(a, _) => a.visit_formulas(f),
            Term::Ite(c, a, b) => {
                c.visit(f);
                a.visit_formulas(f);
                b.visit_formulas(f);
            }
            Term::Read(arr, i) => {
                arr.visit_terms(&mut |t| t.visit_formulas(f));
                i.visit_formulas(f);
            }
            _ => {}
        }
    }

    /// Calls `f` on every subterm, outermost first.
    pub fn visit(&self, f: &mut dyn FnMut(&Term)) {
        f(self);
        match self {
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Term::Mul(_, a) | Term::App(_, a) | Term::Div(a, _) => a.visit(f),
            Term::Ite(c, a, b) => {
                c.visit_terms(f);
                a.visit(f);
                b.visit(f);
            }
            Term::Read(arr, i) => {
                arr.visit_terms(f);
                i.visit(f);
            }
            _ => {}
        }
    }
}

impl ArrayTerm {
    fn visit_terms(&self, f: &mut dyn FnMut(&Term)) {
        if let ArrayTerm::Store(inner, i, x) = self {
            inner.visit_terms(f);
            i.visit(f);
            x.visit(f);
        }
    }

    pub fn base(&self) -> &str {
        match self {
            ArrayTerm::Sym(a) => a,
            ArrayTerm::Store(inner, _, _) => inner.base(),
        }
    }
}

impl Formula {
    /// Calls `f` on every term occurring in the formula (including subterms).
    pub fn visit_terms(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Formula::Atom(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| g.visit_terms(f)),
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => g.visit_terms(f),
            _ => {}
        }
    }

    /// Free index variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out, &mut Vec::new());
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>, bound: &mut Vec<String>) {
        match self {
            Formula::Atom(_, a, b) => {
                a.collect_free(out, bound);
                b.collect_free(out, bound);
            }
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| g.collect_free(out, bound)),
            Formula::Not(g) => g.collect_free(out, bound),
            Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                g.collect_free(out, bound);
                bound.truncate(n);
            }
            _ => {}
        }
    }

    /// Free constants occurring anywhere.
    pub fn consts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            if let Term::Const(c) = t {
                out.insert(c.clone());
            }
        });
        out
    }

    /// Array symbols occurring anywhere.
    pub fn arrays(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| match t {
            Term::App(a, _) => {
                out.insert(a.clone());
            }
            Term::Read(arr, _) => {
                out.insert(arr.base().to_string());
            }
            _ => {}
        });
        out
    }
}

impl Term {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out, &mut Vec::new());
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>, bound: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.collect_free(out, bound);
                b.collect_free(out, bound);
            }
            Term::Mul(_, a) | Term::App(_, a) | Term::Div(a, _) => a.collect_free(out, bound),
            Term::Ite(c, a, b) => {
                c.collect_free(out, bound);
                a.collect_free(out, bound);
                b.collect_free(out, bound);
            }
            Term::Read(..) => self.expand_writes().collect_free(out, bound),
            Term::Num(_) | Term::Const(_) => {}
        }
    }

    pub fn consts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Const(c) = t {
                out.insert(c.clone());
            }
        });
        out
    }

    pub fn mentions_array(&self) -> bool {
        let mut found = false;
        self.visit(&mut |t| {
            if matches!(t, Term::App(..) | Term::Read(..)) {
                found = true;
            }
        });
        found
    }

    /// Rewrites every read of a written array into nested `ite`s so that only
    /// plain array applications remain: `store(a,i,x)(j)` becomes
    /// `ite(j = i, x, a(j))`, outermost write first.
    pub fn expand_writes(&self) -> Term {
        match self {
            Term::Read(arr, idx) => expand_read(arr, &idx.expand_writes()),
            Term::Add(a, b) => a.expand_writes() + b.expand_writes(),
            Term::Sub(a, b) => a.expand_writes() - b.expand_writes(),
            Term::Mul(k, a) => Term::mul(*k, a.expand_writes()),
            Term::App(f, a) => Term::app(f, a.expand_writes()),
            Term::Div(a, k) => Term::div(a.expand_writes(), *k),
            Term::Ite(c, a, b) => Term::ite(c.expand_writes(), a.expand_writes(), b.expand_writes()),
            t => t.clone(),
        }
    }
}

fn expand_read(arr: &ArrayTerm, idx: &Term) -> Term {
    match arr {
        ArrayTerm::Sym(a) => Term::app(a, idx.clone()),
        ArrayTerm::Store(inner, i, x) => Term::ite(
            Formula::eq(idx.clone(), i.expand_writes()),
            x.expand_writes(),
            expand_read(inner, idx),
        ),
    }
}

impl Formula {
    pub fn expand_writes(&self) -> Formula {
        self.map_terms(&|t| t.expand_writes())
    }

    fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::Atom(r, a, b) => Formula::Atom(*r, f(a), f(b)),
            Formula::And(v) => Formula::And(v.iter().map(|g| g.map_terms(f)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| g.map_terms(f)).collect()),
            Formula::Not(g) => Formula::not(g.map_terms(f)),
            Formula::Exists(vs, g) => Formula::Exists(vs.clone(), Box::new(g.map_terms(f))),
            Formula::Forall(vs, g) => Formula::Forall(vs.clone(), Box::new(g.map_terms(f))),
            g => g.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution

/// A simultaneous substitution over index variables, free constants, array
/// symbols (by lambdas) and, optionally, the program counter.
///
/// Applying it expands array writes, so results never contain [`Term::Read`].
#[derive(Clone, Debug, Default)]
pub struct Subst {
    pub vars: BTreeMap<String, Term>,
    pub consts: BTreeMap<String, Term>,
    pub arrays: BTreeMap<String, Lambda>,
    /// When set, `pc = l` literals are decided against this location.
    pub pc: Option<String>,
}

impl Subst {
    pub fn vars(map: BTreeMap<String, Term>) -> Subst {
        Subst {
            vars: map,
            ..Subst::default()
        }
    }

    fn range_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.vars.values().chain(self.consts.values()) {
            out.extend(t.free_vars());
        }
        for l in self.arrays.values() {
            let mut fv = l.body.free_vars();
            fv.remove(&l.var);
            out.extend(fv);
        }
        out
    }

    pub fn term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.vars.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(c) => self.consts.get(c).cloned().unwrap_or_else(|| t.clone()),
            Term::Num(_) => t.clone(),
            Term::Add(a, b) => self.term(a) + self.term(b),
            Term::Sub(a, b) => self.term(a) - self.term(b),
            Term::Mul(k, a) => Term::mul(*k, self.term(a)),
            Term::Div(a, k) => Term::div(self.term(a), *k),
            Term::Ite(c, a, b) => Term::ite(self.formula(c), self.term(a), self.term(b)),
            Term::App(f, a) => {
                let arg = self.term(a);
                match self.arrays.get(f) {
                    Some(l) => l.apply(&arg),
                    None => Term::App(f.clone(), Box::new(arg)),
                }
            }
            Term::Read(..) => self.term(&t.expand_writes()),
        }
    }

    pub fn formula(&self, f: &Formula) -> Formula {
        match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Pc(l) => match &self.pc {
                Some(p) if p == l => Formula::True,
                Some(_) => Formula::False,
                None => f.clone(),
            },
            Formula::Atom(r, a, b) => Formula::Atom(*r, self.term(a), self.term(b)),
            Formula::And(v) => Formula::And(v.iter().map(|g| self.formula(g)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| self.formula(g)).collect()),
            Formula::Not(g) => Formula::not(self.formula(g)),
            Formula::Exists(vs, g) => {
                let (vs, inner) = self.under_binder(vs, g);
                Formula::Exists(vs, Box::new(inner))
            }
            Formula::Forall(vs, g) => {
                let (vs, inner) = self.under_binder(vs, g);
                Formula::Forall(vs, Box::new(inner))
            }
        }
    }

    fn under_binder(&self, vs: &[String], body: &Formula) -> (Vec<String>, Formula) {
        let captured = self.range_vars();
        let mut inner = self.clone();
        let mut new_vs = Vec::with_capacity(vs.len());
        for v in vs {
            inner.vars.remove(v);
            if captured.contains(v) {
                let nv = fresh_name(v);
                inner.vars.insert(v.clone(), Term::Var(nv.clone()));
                new_vs.push(nv);
            } else {
                new_vs.push(v.clone());
            }
        }
        (new_vs, inner.formula(body))
    }
}

/// Simultaneous, capture-avoiding substitution of index variables.
///
/// Every key of `binding` must be a free variable of `f`.
pub fn substitute(f: &Formula, binding: &BTreeMap<String, Term>) -> Result<Formula, LogicError> {
    let free = f.free_vars();
    if let Some(bad) = binding.keys().find(|k| !free.contains(*k)) {
        return Err(LogicError::UnknownVariable(bad.clone()));
    }
    Ok(Subst::vars(binding.clone()).formula(f))
}

/// Renames every bound variable to a fresh name.
pub fn refresh_bound(f: &Formula) -> Formula {
    match f {
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let mut s = Subst::default();
            let nvs: Vec<String> = vs
                .iter()
                .map(|v| {
                    let n = fresh_name(v);
                    s.vars.insert(v.clone(), Term::Var(n.clone()));
                    n
                })
                .collect();
            let body = refresh_bound(&s.formula(g));
            if matches!(f, Formula::Exists(..)) {
                Formula::Exists(nvs, Box::new(body))
            } else {
                Formula::Forall(nvs, Box::new(body))
            }
        }
        Formula::And(v) => Formula::And(v.iter().map(refresh_bound).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(refresh_bound).collect()),
        Formula::Not(g) => Formula::not(refresh_bound(g)),
        g => g.clone(),
    }
}

// ---------------------------------------------------------------------------
// Negation normal form, classification and prenexing

fn negate_atom(r: Rel, a: &Term, b: &Term) -> Formula {
    match r {
        Rel::Eq => Formula::ne(a.clone(), b.clone()),
        Rel::Ne => Formula::eq(a.clone(), b.clone()),
        Rel::Lt => Formula::le(b.clone(), a.clone()),
        Rel::Le => Formula::lt(b.clone(), a.clone()),
    }
}

/// Negation normal form: negations only in front of `pc` literals.
pub fn nnf(f: &Formula) -> Formula {
    to_nnf(f, true)
}

fn to_nnf(f: &Formula, pos: bool) -> Formula {
    match (f, pos) {
        (Formula::True, true) | (Formula::False, false) => Formula::True,
        (Formula::True, false) | (Formula::False, true) => Formula::False,
        (Formula::Atom(..), true) | (Formula::Pc(_), true) => f.clone(),
        (Formula::Atom(r, a, b), false) => negate_atom(*r, a, b),
        (Formula::Pc(_), false) => Formula::not(f.clone()),
        (Formula::Not(g), p) => to_nnf(g, !p),
        (Formula::And(v), true) | (Formula::Or(v), false) => Formula::And(v.iter().map(|g| to_nnf(g, pos)).collect()),
        (Formula::Or(v), true) | (Formula::And(v), false) => Formula::Or(v.iter().map(|g| to_nnf(g, pos)).collect()),
        (Formula::Exists(vs, g), true) | (Formula::Forall(vs, g), false) => {
            Formula::Exists(vs.clone(), Box::new(to_nnf(g, pos)))
        }
        (Formula::Forall(vs, g), true) | (Formula::Exists(vs, g), false) => {
            Formula::Forall(vs.clone(), Box::new(to_nnf(g, pos)))
        }
    }
}

fn ite_conditions_quantified(f: &Formula) -> bool {
    let mut bad = false;
    f.visit_terms(&mut |t| {
        if let Term::Ite(c, _, _) = t {
            if !c.is_quantifier_free() {
                bad = true;
            }
        }
    });
    bad
}

/// Classifies a formula by its quantifier prefix, looking through negation
/// by polarity and pulling quantifiers out of conjunctions and disjunctions.
pub fn classify(f: &Formula) -> SentenceClass {
    if ite_conditions_quantified(f) {
        return SentenceClass::Other;
    }
    let n = nnf(f);
    let mut has_e = false;
    let mut has_a = false;
    let mut e_under_a = false;
    walk_prefix(&n, false, &mut has_e, &mut has_a, &mut e_under_a);
    if e_under_a {
        SentenceClass::Other
    } else if has_a {
        SentenceClass::Sigma02
    } else if has_e {
        SentenceClass::Sigma01
    } else {
        SentenceClass::Ground
    }
}

fn walk_prefix(f: &Formula, under_a: bool, e: &mut bool, a: &mut bool, bad: &mut bool) {
    match f {
        Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| walk_prefix(g, under_a, e, a, bad)),
        Formula::Exists(_, g) => {
            *e = true;
            if under_a {
                *bad = true;
            }
            walk_prefix(g, under_a, e, a, bad);
        }
        Formula::Forall(_, g) => {
            *a = true;
            walk_prefix(g, true, e, a, bad);
        }
        _ => {}
    }
}

/// An `∃ exists ∀ forall. matrix` decomposition with a quantifier-free matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prenex {
    pub exists: Vec<String>,
    pub forall: Vec<String>,
    pub matrix: Formula,
}

impl Prenex {
    pub fn to_formula(&self) -> Formula {
        Formula::exists(
            self.exists.clone(),
            Formula::forall(self.forall.clone(), self.matrix.clone()),
        )
    }
}

/// Prenexes a formula of class at most Σ⁰₂. Binders keep their names unless
/// that would clash, in which case a deterministic `name_k` variant is used.
/// Returns `None` for class `Other`.
pub fn prenex(f: &Formula) -> Option<Prenex> {
    if classify(f) == SentenceClass::Other {
        return None;
    }
    let mut all = f.free_vars();
    collect_binders(f, &mut all);
    let mut names = Names {
        claimed: f.free_vars(),
        all,
    };
    let mut exists = Vec::new();
    let mut forall = Vec::new();
    let matrix = pull(&nnf(f), &mut exists, &mut forall, &mut names);
    Some(Prenex { exists, forall, matrix })
}

fn collect_binders(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| collect_binders(g, out)),
        Formula::Not(g) => collect_binders(g, out),
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            out.extend(vs.iter().cloned());
            collect_binders(g, out);
        }
        _ => {}
    }
}

struct Names {
    all: BTreeSet<String>,
    claimed: BTreeSet<String>,
}

impl Names {
    fn claim(&mut self, v: &str) -> String {
        if self.claimed.insert(v.to_string()) {
            return v.to_string();
        }
        let mut k = 1;
        loop {
            let n = format!("{v}_{k}");
            if !self.all.contains(&n) && !self.claimed.contains(&n) {
                self.claimed.insert(n.clone());
                return n;
            }
            k += 1;
        }
    }
}

fn pull(f: &Formula, ex: &mut Vec<String>, fa: &mut Vec<String>, names: &mut Names) -> Formula {
    match f {
        Formula::And(v) => Formula::And(v.iter().map(|g| pull(g, ex, fa, names)).collect()),
        Formula::Or(v) => Formula::Or(v.iter().map(|g| pull(g, ex, fa, names)).collect()),
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let mut s = Subst::default();
            for v in vs {
                let n = names.claim(v);
                if n != *v {
                    s.vars.insert(v.clone(), Term::Var(n.clone()));
                }
                if matches!(f, Formula::Exists(..)) {
                    ex.push(n);
                } else {
                    fa.push(n);
                }
            }
            let body = if s.vars.is_empty() { (**g).clone() } else { s.formula(g) };
            pull(&body, ex, fa, names)
        }
        g => g.clone(),
    }
}

// ---------------------------------------------------------------------------
// Linear normal form

/// `Σ coeff·atom + constant`, where atoms are non-arithmetic terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Linear {
    pub coeffs: BTreeMap<Term, i64>,
    pub constant: i64,
}

impl Linear {
    pub fn of(t: &Term) -> Linear {
        let mut l = Linear::default();
        l.accumulate(t, 1);
        l.coeffs.retain(|_, c| *c != 0);
        l
    }

    fn accumulate(&mut self, t: &Term, k: i64) {
        match t {
            Term::Num(n) => self.constant += k * n,
            Term::Add(a, b) => {
                self.accumulate(a, k);
                self.accumulate(b, k);
            }
            Term::Sub(a, b) => {
                self.accumulate(a, k);
                self.accumulate(b, -k);
            }
            Term::Mul(m, a) => self.accumulate(a, k * m),
            other => *self.coeffs.entry(other.clone()).or_insert(0) += k,
        }
    }

    pub fn minus(mut self, other: &Linear) -> Linear {
        for (t, c) in &other.coeffs {
            *self.coeffs.entry(t.clone()).or_insert(0) -= c;
        }
        self.constant -= other.constant;
        self.coeffs.retain(|_, c| *c != 0);
        self
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, t: &Term) -> i64 {
        self.coeffs.get(t).copied().unwrap_or(0)
    }

    /// Splits into (positive part, negated negative part), both with
    /// non-negative coefficients, so that `self = pos - neg`.
    fn split(&self) -> (Linear, Linear) {
        let mut pos = Linear::default();
        let mut neg = Linear::default();
        for (t, c) in &self.coeffs {
            if *c > 0 {
                pos.coeffs.insert(t.clone(), *c);
            } else {
                neg.coeffs.insert(t.clone(), -c);
            }
        }
        if self.constant > 0 {
            pos.constant = self.constant;
        } else {
            neg.constant = -self.constant;
        }
        (pos, neg)
    }

    pub fn to_term(&self) -> Term {
        let piece = |t: &Term, c: i64| if c == 1 { t.clone() } else { Term::mul(c, t.clone()) };
        let mut acc: Option<Term> = None;
        for (t, c) in self.coeffs.iter().filter(|(_, c)| **c > 0) {
            let p = piece(t, *c);
            acc = Some(match acc {
                None => p,
                Some(a) => a + p,
            });
        }
        if self.constant > 0 {
            let k = Term::Num(self.constant);
            acc = Some(match acc {
                None => k,
                Some(a) => a + k,
            });
        }
        let negs: Vec<(&Term, &i64)> = self.coeffs.iter().filter(|(_, c)| **c < 0).collect();
        if acc.is_none() && negs.is_empty() {
            return Term::Num(self.constant);
        }
        let mut acc = acc.unwrap_or(Term::Num(0));
        for (t, c) in negs {
            acc = acc - piece(t, -c);
        }
        if self.constant < 0 {
            acc = acc - Term::Num(-self.constant);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Simplification

pub fn simplify_term(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Const(_) | Term::Num(_) => t.clone(),
        Term::Add(..) | Term::Sub(..) | Term::Mul(..) => {
            let mut l = Linear::default();
            l.accumulate(t, 1);
            let coeffs = std::mem::take(&mut l.coeffs);
            for (a, c) in coeffs {
                let sa = simplify_term(&a);
                let inner = Linear::of(&sa);
                for (ia, ic) in inner.coeffs {
                    *l.coeffs.entry(ia).or_insert(0) += c * ic;
                }
                l.constant += c * inner.constant;
            }
            l.coeffs.retain(|_, c| *c != 0);
            l.to_term()
        }
        Term::App(f, a) => Term::app(f, simplify_term(a)),
        Term::Div(a, k) => {
            let a = simplify_term(a);
            match a {
                Term::Num(n) => Term::Num(n.div_euclid(*k)),
                a if *k == 1 => a,
                a => Term::div(a, *k),
            }
        }
        Term::Ite(c, a, b) => {
            let c = simplify(c);
            match c {
                Formula::True => simplify_term(a),
                Formula::False => simplify_term(b),
                c => {
                    let a = simplify_term(a);
                    let b = simplify_term(b);
                    if a == b {
                        a
                    } else {
                        Term::ite(c, a, b)
                    }
                }
            }
        }
        Term::Read(..) => simplify_term(&t.expand_writes()),
    }
}

fn simplify_atom(r: Rel, a: &Term, b: &Term) -> Formula {
    let a = simplify_term(a);
    let b = simplify_term(b);
    let diff = Linear::of(&a).minus(&Linear::of(&b));
    if diff.is_constant() {
        let k = diff.constant;
        let holds = match r {
            Rel::Eq => k == 0,
            Rel::Ne => k != 0,
            Rel::Lt => k < 0,
            Rel::Le => k <= 0,
        };
        return if holds { Formula::True } else { Formula::False };
    }
    let (pos, neg) = diff.split();
    let (mut l, mut rr) = (pos.to_term(), neg.to_term());
    if matches!(r, Rel::Eq | Rel::Ne) && l > rr {
        std::mem::swap(&mut l, &mut rr);
    }
    Formula::Atom(r, l, rr)
}

fn complementary(a: &Formula, b: &Formula) -> bool {
    match (a, b) {
        (Formula::Not(x), y) | (y, Formula::Not(x)) => **x == *y,
        (Formula::Atom(r1, a1, b1), Formula::Atom(r2, a2, b2)) => {
            let same = (a1 == a2 && b1 == b2) || (a1 == b2 && b1 == a2);
            let dual_eq = matches!((r1, r2), (Rel::Eq, Rel::Ne) | (Rel::Ne, Rel::Eq)) && same;
            let dual_ord = a1 == b2
                && b1 == a2
                && matches!((r1, r2), (Rel::Lt, Rel::Le) | (Rel::Le, Rel::Lt) | (Rel::Lt, Rel::Lt));
            dual_eq || dual_ord
        }
        _ => false,
    }
}

/// Sound local simplification: constant folding, linear normalization of
/// terms and atoms, decided `ite`s, flattening, duplicate removal, clash
/// detection between literals, `pc` exclusivity, and elimination of
/// existential variables fixed by a unit-coefficient linear equation.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Pc(_) => f.clone(),
        Formula::Atom(r, a, b) => simplify_atom(*r, a, b),
        Formula::Not(g) => {
            let g = simplify(g);
            match g {
                Formula::Atom(r, a, b) => simplify_atom_neg(r, &a, &b),
                Formula::Pc(_) => Formula::not(g),
                other => simplify(&to_nnf(&other, false)),
            }
        }
        Formula::And(v) => simplify_and(v.iter().map(simplify).collect()),
        Formula::Or(v) => simplify_or(v.iter().map(simplify).collect()),
        Formula::Exists(vs, g) => simplify_exists(vs, simplify(g)),
        Formula::Forall(vs, g) => simplify_forall(vs, simplify(g)),
    }
}

fn simplify_atom_neg(r: Rel, a: &Term, b: &Term) -> Formula {
    match negate_atom(r, a, b) {
        Formula::Atom(r, a, b) => simplify_atom(r, &a, &b),
        other => other,
    }
}

fn simplify_and(items: Vec<Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    let mut pc: Option<String> = None;
    for f in items {
        let parts = match f {
            Formula::And(v) => v,
            g => vec![g],
        };
        for g in parts {
            match g {
                Formula::True => {}
                Formula::False => return Formula::False,
                g => {
                    if let Formula::Pc(l) = &g {
                        match &pc {
                            Some(p) if p != l => return Formula::False,
                            _ => pc = Some(l.clone()),
                        }
                    }
                    if out.iter().any(|h| complementary(h, &g)) {
                        return Formula::False;
                    }
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
        }
    }
    if let Some(p) = &pc {
        // pc = p makes any other pc literal decided
        let mut changed = false;
        for g in out.iter_mut() {
            if let Formula::Not(inner) = g {
                if let Formula::Pc(l) = inner.as_ref() {
                    if l == p {
                        return Formula::False;
                    }
                    *g = Formula::True;
                    changed = true;
                }
            }
        }
        if changed {
            out.retain(|g| *g != Formula::True);
        }
    }
    match out.len() {
        0 => Formula::True,
        1 => out.pop().unwrap(),
        _ => Formula::And(out),
    }
}

fn simplify_or(items: Vec<Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    for f in items {
        let parts = match f {
            Formula::Or(v) => v,
            g => vec![g],
        };
        for g in parts {
            match g {
                Formula::False => {}
                Formula::True => return Formula::True,
                g => {
                    if out.iter().any(|h| complementary(h, &g)) {
                        return Formula::True;
                    }
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
        }
    }
    match out.len() {
        0 => Formula::False,
        1 => out.pop().unwrap(),
        _ => Formula::Or(out),
    }
}

fn only_plain_symbols(t: &Term) -> bool {
    let mut ok = true;
    t.visit(&mut |s| {
        if !matches!(
            s,
            Term::Var(_) | Term::Const(_) | Term::Num(_) | Term::Add(..) | Term::Sub(..) | Term::Mul(..)
        ) {
            ok = false;
        }
    });
    ok
}

/// Finds a conjunct `v = t` with `t` linear over plain symbols and not
/// containing `v`; returns (conjunct index, t).
fn solve_for(v: &str, conj: &[Formula]) -> Option<(usize, Term)> {
    let var = Term::var(v);
    for (i, c) in conj.iter().enumerate() {
        if let Formula::Atom(Rel::Eq, a, b) = c {
            let diff = Linear::of(a).minus(&Linear::of(b));
            let k = diff.coeff(&var);
            if k != 1 && k != -1 {
                continue;
            }
            let mut rest = diff.clone();
            rest.coeffs.remove(&var);
            let rest_term = rest.to_term();
            if rest_term.free_vars().contains(v) || !only_plain_symbols(&rest_term) {
                continue;
            }
            // k·v + rest = 0
            let mut sol = Linear::default().minus(&rest);
            if k == -1 {
                sol = rest;
            }
            return Some((i, sol.to_term()));
        }
    }
    None
}

fn simplify_exists(vs: &[String], body: Formula) -> Formula {
    if matches!(body, Formula::False | Formula::True) {
        return body;
    }
    let (mut vars, body) = match body {
        Formula::Exists(inner, b) => {
            let mut all = vs.to_vec();
            all.extend(inner);
            (all, *b)
        }
        b => (vs.to_vec(), b),
    };
    let free = body.free_vars();
    vars.retain(|v| free.contains(v));
    if vars.is_empty() {
        return body;
    }
    let mut conj: Vec<Formula> = match body {
        Formula::And(v) => v,
        b => vec![b],
    };
    // one-point rule: ∃v ≥ 0 (v = t ∧ φ) ⇔ 0 ≤ t ∧ φ[t/v]
    let mut eliminated = false;
    loop {
        let mut progress = false;
        for v in vars.clone() {
            if let Some((i, sol)) = solve_for(&v, &conj) {
                conj.remove(i);
                let mut s = Subst::default();
                s.vars.insert(v.clone(), sol.clone());
                conj = conj.iter().map(|c| s.formula(c)).collect();
                conj.push(Formula::le(Term::Num(0), sol));
                vars.retain(|x| *x != v);
                progress = true;
                eliminated = true;
                break;
            }
        }
        if !progress {
            break;
        }
    }
    if eliminated {
        return simplify_exists(&vars, simplify(&Formula::And(conj)));
    }
    let (inside, outside): (Vec<Formula>, Vec<Formula>) = conj
        .into_iter()
        .partition(|c| c.free_vars().iter().any(|x| vars.contains(x)));
    let quantified = Formula::Exists(vars, Box::new(rebuild_and(inside)));
    if outside.is_empty() {
        quantified
    } else {
        let mut all = outside;
        all.push(quantified);
        simplify_and(all)
    }
}

fn simplify_forall(vs: &[String], body: Formula) -> Formula {
    if matches!(body, Formula::False | Formula::True) {
        return body;
    }
    let (mut vars, body) = match body {
        Formula::Forall(inner, b) => {
            let mut all = vs.to_vec();
            all.extend(inner);
            (all, *b)
        }
        b => (vs.to_vec(), b),
    };
    let free = body.free_vars();
    vars.retain(|v| free.contains(v));
    if vars.is_empty() {
        return body;
    }
    let conj: Vec<Formula> = match body {
        Formula::And(v) => v,
        b => vec![b],
    };
    let (inside, outside): (Vec<Formula>, Vec<Formula>) = conj
        .into_iter()
        .partition(|c| c.free_vars().iter().any(|x| vars.contains(x)));
    let quantified = Formula::Forall(vars, Box::new(rebuild_and(inside)));
    if outside.is_empty() {
        quantified
    } else {
        let mut all = outside;
        all.push(quantified);
        simplify_and(all)
    }
}

fn rebuild_and(mut v: Vec<Formula>) -> Formula {
    match v.len() {
        0 => Formula::True,
        1 => v.pop().unwrap(),
        _ => Formula::And(v),
    }
}

// ---------------------------------------------------------------------------
// Display (infix, for logs and diagnostics)

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => write!(f, "{v}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::Add(a, b) => write!(f, "({a} + {b})"),
            Term::Sub(a, b) => write!(f, "({a} - {b})"),
            Term::Mul(k, a) => write!(f, "{k}*{a}"),
            Term::App(a, i) => write!(f, "{a}[{i}]"),
            Term::Ite(c, a, b) => write!(f, "(if {c} then {a} else {b})"),
            Term::Div(a, k) => write!(f, "({a} // {k})"),
            Term::Read(arr, i) => write!(f, "{arr}[{i}]"),
        }
    }
}

impl fmt::Display for ArrayTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArrayTerm::Sym(a) => write!(f, "{a}"),
            ArrayTerm::Store(a, i, x) => write!(f, "wr({a}, {i}, {x})"),
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, v: &[Formula], op: &str) -> fmt::Result {
            write!(f, "(")?;
            for (i, g) in v.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, ")")
        }
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(r, a, b) => write!(f, "{a} {r} {b}"),
            Formula::Pc(l) => write!(f, "pc = {l}"),
            Formula::And(v) if v.is_empty() => write!(f, "true"),
            Formula::Or(v) if v.is_empty() => write!(f, "false"),
            Formula::And(v) => join(f, v, "&"),
            Formula::Or(v) => join(f, v, "|"),
            Formula::Not(g) => write!(f, "!{g}"),
            Formula::Exists(vs, g) => write!(f, "(exists {}. {g})", vs.join(" ")),
            Formula::Forall(vs, g) => write!(f, "(forall {}. {g})", vs.join(" ")),
        }
    }
}

/// Renames bound variables to `_0, _1, …` in order of appearance so that
/// alpha-equivalent formulas compare equal.
pub fn canonical(f: &Formula) -> Formula {
    fn go(f: &Formula, next: &mut usize) -> Formula {
        match f {
            Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                let mut s = Subst::default();
                let nvs: Vec<String> = vs
                    .iter()
                    .map(|v| {
                        let n = format!("_{next}");
                        *next += 1;
                        s.vars.insert(v.clone(), Term::Var(n.clone()));
                        n
                    })
                    .collect();
                let body = go(&s.formula(g), next);
                if matches!(f, Formula::Exists(..)) {
                    Formula::Exists(nvs, Box::new(body))
                } else {
                    Formula::Forall(nvs, Box::new(body))
                }
            }
            Formula::And(v) => Formula::And(v.iter().map(|g| go(g, next)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| go(g, next)).collect()),
            Formula::Not(g) => Formula::not(go(g, next)),
            g => g.clone(),
        }
    }
    go(f, &mut 0)
}
