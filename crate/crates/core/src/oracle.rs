//! Explicit-state evaluation over small finite models.
//!
//! Arrays are tabulated on `0..len`. A read outside that range has no value,
//! and evaluation is three-valued: a formula whose truth depends on such a
//! read evaluates to `None` and the state is skipped as not representable.
//! Quantified and existential variables range over the widened table
//! `0..len + max_const`.

use std::collections::{BTreeMap, BTreeSet};

use crate::logic::{Formula, Rel, Subst, Term};
use crate::system::{Program, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundedModel {
    /// Array length ℓ.
    pub len: usize,
    /// Array entries range over `0..=max_value`.
    pub max_value: i64,
    /// Constants range over `0..=max_const`.
    pub max_const: i64,
}

impl Default for BoundedModel {
    fn default() -> Self {
        BoundedModel {
            len: 3,
            max_value: 1,
            max_const: 4,
        }
    }
}

impl BoundedModel {
    pub fn width(&self) -> i64 {
        self.len as i64 + self.max_const
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub pc: String,
    pub consts: BTreeMap<String, i64>,
    pub arrays: BTreeMap<String, Vec<i64>>,
}

type Env = BTreeMap<String, i64>;

pub fn eval_term(t: &Term, s: &State, env: &Env) -> Option<i64> {
    match t {
        Term::Var(v) => env.get(v).copied(),
        Term::Const(c) => s.consts.get(c).copied(),
        Term::Num(n) => Some(*n),
        Term::Add(a, b) => Some(eval_term(a, s, env)? + eval_term(b, s, env)?),
        Term::Sub(a, b) => Some(eval_term(a, s, env)? - eval_term(b, s, env)?),
        Term::Mul(k, a) => Some(k * eval_term(a, s, env)?),
        Term::App(a, i) => {
            let i = eval_term(i, s, env)?;
            let arr = s.arrays.get(a)?;
            usize::try_from(i).ok().and_then(|i| arr.get(i).copied())
        }
        Term::Ite(c, a, b) => {
            if eval_formula(c, s, env, 0)? {
                eval_term(a, s, env)
            } else {
                eval_term(b, s, env)
            }
        }
        Term::Div(a, k) => Some(eval_term(a, s, env)?.div_euclid(*k)),
        Term::Read(..) => eval_term(&t.expand_writes(), s, env),
    }
}

/// Kleene evaluation; `width` bounds quantified variables.
pub fn eval_formula(f: &Formula, s: &State, env: &Env, width: i64) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Pc(l) => Some(s.pc == *l),
        Formula::Atom(r, a, b) => {
            let (a, b) = (eval_term(a, s, env)?, eval_term(b, s, env)?);
            Some(match r {
                Rel::Eq => a == b,
                Rel::Ne => a != b,
                Rel::Lt => a < b,
                Rel::Le => a <= b,
            })
        }
        Formula::Not(g) => eval_formula(g, s, env, width).map(|b| !b),
        Formula::And(v) => kleene(v.iter().map(|g| eval_formula(g, s, env, width)), false),
        Formula::Or(v) => kleene(v.iter().map(|g| eval_formula(g, s, env, width)), true),
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let exists = matches!(f, Formula::Exists(..));
            let mut env = env.clone();
            let mut undefined = false;
            for point in grid(vs.len(), width) {
                for (v, x) in vs.iter().zip(&point) {
                    env.insert(v.clone(), *x);
                }
                match eval_formula(g, s, &env, width) {
                    Some(b) if b == exists => return Some(exists),
                    Some(_) => {}
                    None => undefined = true,
                }
            }
            if undefined {
                None
            } else {
                Some(!exists)
            }
        }
    }
}

/// `absorbing` decides the connective: `false` for conjunction.
fn kleene(vals: impl Iterator<Item = Option<bool>>, absorbing: bool) -> Option<bool> {
    let mut undefined = false;
    for v in vals {
        match v {
            Some(b) if b == absorbing => return Some(absorbing),
            Some(_) => {}
            None => undefined = true,
        }
    }
    if undefined {
        None
    } else {
        Some(!absorbing)
    }
}

/// All points of `{0..width-1}^dims` in lexicographic order.
pub fn grid(dims: usize, width: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..width.max(0)).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every state of `p` at location `pc` within the model bounds.
pub fn states(p: &Program, model: &BoundedModel, pc: &str) -> Vec<State> {
    let consts = grid(p.consts.len(), model.max_const + 1);
    let cells = grid(p.arrays.len() * model.len, model.max_value + 1);
    let mut out = Vec::with_capacity(consts.len() * cells.len());
    for cv in &consts {
        for av in &cells {
            out.push(State {
                pc: pc.to_string(),
                consts: p.consts.iter().cloned().zip(cv.iter().copied()).collect(),
                arrays: p
                    .arrays
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (a.clone(), av[k * model.len..(k + 1) * model.len].to_vec()))
                    .collect(),
            });
        }
    }
    out
}

/// Successors of `s` under `t`; `None` when some needed value lies outside
/// the tabulated arrays. Existential variables range over `0..width`.
/// Successors with a negative constant or entry are not natural states and
/// are dropped.
pub fn successors(t: &Transition, s: &State, width: i64) -> Option<Vec<State>> {
    if s.pc != t.from {
        return Some(Vec::new());
    }
    let mut out = BTreeSet::new();
    let mut env = Env::new();
    for point in grid(t.exist_vars.len(), width) {
        for (v, x) in t.exist_vars.iter().zip(&point) {
            env.insert(v.clone(), *x);
        }
        if !eval_formula(&t.guard, s, &env, width)? {
            continue;
        }
        if let Some(u) = &t.uguard {
            if !eval_formula(&Formula::forall(u.vars.clone(), u.body.clone()), s, &env, width)? {
                continue;
            }
        }
        let mut next = State {
            pc: t.to.clone(),
            consts: BTreeMap::new(),
            arrays: BTreeMap::new(),
        };
        let mut natural = true;
        for (c, v) in &s.consts {
            let nv = match t.const_updates.get(c) {
                Some(u) => eval_term(u, s, &env)?,
                None => *v,
            };
            natural &= nv >= 0;
            next.consts.insert(c.clone(), nv);
        }
        for (a, cells) in &s.arrays {
            let vals = match t.array_updates.get(a) {
                Some(l) if !l.is_identity_for(a) => {
                    let mut vals = Vec::with_capacity(cells.len());
                    for i in 0..cells.len() {
                        let x = eval_term(&l.apply(&Term::Num(i as i64)), s, &env)?;
                        natural &= x >= 0;
                        vals.push(x);
                    }
                    vals
                }
                _ => cells.clone(),
            };
            next.arrays.insert(a.clone(), vals);
        }
        if natural {
            out.insert(next);
        }
    }
    Some(out.into_iter().collect())
}

/// Pairs `(s, s')` of the bounded relation of `t`, skipping states where the
/// step is not representable.
pub fn step_relation(t: &Transition, p: &Program, model: &BoundedModel) -> BTreeSet<(State, State)> {
    let mut rel = BTreeSet::new();
    for s in states(p, model, &t.from) {
        if let Some(succ) = successors(t, &s, model.width()) {
            for n in succ {
                rel.insert((s.clone(), n));
            }
        }
    }
    rel
}

/// States reached from `s` by exactly `n` steps of `t`; `None` if any step
/// along the way is not representable.
pub fn iterate(t: &Transition, s: &State, n: usize, width: i64) -> Option<BTreeSet<State>> {
    let mut frontier: BTreeSet<State> = [s.clone()].into_iter().collect();
    for _ in 0..n {
        let mut next = BTreeSet::new();
        for x in &frontier {
            next.extend(successors(t, x, width)?);
        }
        frontier = next;
    }
    Some(frontier)
}

/// `t` with the existential `var` fixed to `value`.
pub fn fix_exist(t: &Transition, var: &str, value: i64) -> Transition {
    let mut s = Subst::default();
    s.vars.insert(var.to_string(), Term::Num(value));
    let mut out = t.clone();
    out.exist_vars.retain(|v| v != var);
    out.guard = s.formula(&t.guard);
    if let Some(u) = &mut out.uguard {
        u.body = s.formula(&u.body);
    }
    for l in out.array_updates.values_mut() {
        let mut sl = s.clone();
        sl.vars.remove(&l.var);
        l.body = sl.term(&l.body);
    }
    for u in out.const_updates.values_mut() {
        *u = s.term(u);
    }
    out
}

/// `p` cut down to the symbols `t` reads or changes.
pub fn restrict(p: &Program, t: &Transition) -> Program {
    let mut parts = vec![t.full_guard()];
    for (c, u) in t.changed_consts() {
        parts.push(Formula::eq(Term::cst(c), u.clone()));
    }
    for (a, l) in t.changed_arrays() {
        parts.push(Formula::eq(Term::app(a, Term::num(0)), l.body.clone()));
    }
    let f = Formula::and(parts);
    let (consts, arrays) = (f.consts(), f.arrays());
    let mut q = p.clone();
    q.consts.retain(|c| consts.contains(c));
    q.arrays.retain(|a| arrays.contains(a));
    q
}

#[derive(Clone, Debug, Default)]
pub struct Exactness {
    /// States where both sides were representable and compared.
    pub compared: usize,
    pub mismatches: Vec<String>,
}

/// Compares `acc` with its iteration count fixed to each `n ∈ 1..=max_n`
/// against the `n`-fold iterate of `src`, from every state of a model with
/// arrays of length 4 over {0, 1}.
pub fn acceleration_exactness(p: &Program, src: &Transition, acc: &Transition, max_n: usize) -> Exactness {
    let q = restrict(p, src);
    let mut model = BoundedModel {
        len: 4,
        max_value: 1,
        max_const: 4,
    };
    let count = |m: &BoundedModel| {
        (m.max_const as usize + 1).pow(q.consts.len() as u32) * 2usize.pow((q.arrays.len() * m.len) as u32)
    };
    if count(&model) > 100_000 {
        model.max_const = 3;
    }
    let mut out = Exactness::default();
    let Some(y) = acc.exist_vars.first() else {
        out.mismatches.push(format!("{}: no iteration count", acc.name));
        return out;
    };
    for n in 1..=max_n {
        let fixed = fix_exist(acc, y, n as i64);
        for s in states(&q, &model, &src.from) {
            let (Some(a), Some(b)) = (
                iterate(src, &s, n, model.width()),
                successors(&fixed, &s, model.width()),
            ) else {
                continue;
            };
            let b: BTreeSet<State> = b.into_iter().collect();
            if a != b {
                out.mismatches.push(format!("{} n={n} from {s:?}", src.name));
            }
            out.compared += 1;
        }
    }
    out
}

/// Whether executing `trace` from `init` can reach the error location.
/// Every intermediate nondeterministic choice is explored.
pub fn replay(p: &Program, trace: &[String], init: &State, width: i64) -> bool {
    if init.pc != p.init || eval_formula(&p.init_cond, init, &Env::new(), width) != Some(true) {
        return false;
    }
    let mut frontier: BTreeSet<State> = [init.clone()].into_iter().collect();
    for name in trace {
        let Some(t) = p.transition(name) else {
            return false;
        };
        let mut next = BTreeSet::new();
        for s in &frontier {
            if let Some(succ) = successors(t, s, width) {
                next.extend(succ);
            }
        }
        frontier = next;
    }
    frontier.iter().any(|s| s.pc == p.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_format::parse_program;

    fn reverse() -> Program {
        parse_program(include_str!("../corpus/reverse.spec")).unwrap()
    }

    fn state(pc: &str, consts: &[(&str, i64)], arrays: &[(&str, Vec<i64>)]) -> State {
        State {
            pc: pc.into(),
            consts: consts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            arrays: arrays.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn table_lookup() {
        let s = state(
            "l3",
            &[("N", 2), ("c", 0)],
            &[("I", vec![0, 1, 0]), ("O", vec![0, 1, 0])],
        );
        let mut env = Env::new();
        env.insert("z1".into(), 0);
        env.insert("z2".into(), 2);
        let f = Formula::ne(Term::app("I", Term::var("z1")), Term::app("O", Term::var("z2")));
        assert_eq!(eval_formula(&f, &s, &env, 5), Some(false));
        assert_eq!(eval_formula(&Formula::False, &s, &env, 5), Some(false));
        // ∀j (0 ≤ j < 0 → false)
        let j = Term::var("j");
        let g = Formula::forall(
            vec!["j".into()],
            Formula::implies(
                Formula::and(vec![Formula::le(Term::num(0), j.clone()), Formula::lt(j, Term::num(0))]),
                Formula::False,
            ),
        );
        assert_eq!(eval_formula(&g, &s, &env, 5), Some(true));
        // out-of-range read is undefined
        let h = Formula::eq(Term::app("I", Term::num(7)), Term::num(0));
        assert_eq!(eval_formula(&h, &s, &env, 5), None);
        assert_eq!(
            eval_formula(&Formula::and(vec![h.clone(), Formula::False]), &s, &env, 5),
            Some(false)
        );
    }

    #[test]
    fn reverse_t2_writes_one_cell() {
        let p = reverse();
        let t2 = p.transition("t2").unwrap();
        let s = state("l2", &[("N", 1), ("c", 0)], &[("I", vec![0, 1]), ("O", vec![0, 0])]);
        let succ = successors(t2, &s, 4).unwrap();
        assert_eq!(
            succ,
            vec![state(
                "l2",
                &[("N", 1), ("c", 1)],
                &[("I", vec![0, 1]), ("O", vec![1, 0])]
            )]
        );
    }

    #[test]
    fn false_guard_is_empty() {
        let p = reverse();
        let mut t = p.transition("t2").unwrap().clone();
        t.guard = Formula::False;
        assert!(step_relation(
            &t,
            &p,
            &BoundedModel {
                len: 2,
                max_value: 1,
                max_const: 2
            }
        )
        .is_empty());
    }

    #[test]
    fn reverse_bug_trace_replays() {
        let p = reverse();
        // N = 1, I = [0, 1]: the program is correct, no trace reaches l4
        let s = state("l1", &[("N", 1), ("c", 0)], &[("I", vec![0, 1]), ("O", vec![0, 0])]);
        let trace: Vec<String> = ["t1", "t2", "t2", "t3", "t4"].iter().map(|x| x.to_string()).collect();
        assert!(!replay(&p, &trace, &s, 4));
    }
}
