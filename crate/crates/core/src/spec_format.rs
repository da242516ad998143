//! The S-expression program format.
//!
//! ```text
//! (program
//!   (arrays I O)
//!   (consts c N)
//!   (locations l1 l2 l3 l4)
//!   (init l1)
//!   (error l4)
//!   (initially (= c 0))                       ; optional
//!   (transition t2 (from l2) (to l2)
//!     (exists k)                              ; optional
//!     (guard (distinct c (+ N 1)))
//!     (uguard (vars j) (<= c j))              ; optional
//!     (set (c (+ c 1)) (O (store O c (select I (- N c)))))
//!     (accelerated-from t2)))                 ; optional
//! ```
//!
//! Identity updates may be omitted. Array right-hand sides are written-array
//! expressions (`store`) or `(lambda (j) TERM)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::ParseError;
use crate::logic::{ArrayTerm, Formula, Lambda, Rel, Term};
use crate::system::{Origin, Program, Transition, UGuard};

/// Bound variable used for lambdas written as `store` chains.
pub const LAMBDA_VAR: &str = "%j";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            _ => None,
        }
    }

    /// The head atom of a non-empty list.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|v| v.first()).and_then(|h| h.atom())
    }
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    })
}

/// Reads every S-expression in `src`. `;` starts a line comment and `|…|`
/// quotes an atom.
pub fn parse_sexps(src: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = vec![(Vec::new(), Pos::default())];
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&ch) = chars.peek() {
        let here = Pos { line, col };
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), here));
            }
            ')' => {
                chars.next();
                col += 1;
                if stack.len() == 1 {
                    return err(here, "unbalanced `)`");
                }
                let (items, p) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, p));
            }
            '|' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('|') => {
                            col += 1;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            col = 1;
                            s.push('\n');
                        }
                        Some(c) => {
                            col += 1;
                            s.push(c);
                        }
                        None => return err(here, "unterminated `|`"),
                    }
                }
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, here));
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some(c) => {
                            col += 1;
                            s.push(c);
                        }
                        None => return err(here, "unterminated string"),
                    }
                }
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, here));
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    col += 1;
                }
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, here));
            }
        }
    }
    if stack.len() != 1 {
        return err(stack.last().unwrap().1, "unclosed `(`");
    }
    Ok(stack.pop().unwrap().0)
}

// ---------------------------------------------------------------------------
// Program parsing

struct Scope<'a> {
    arrays: &'a BTreeSet<String>,
    consts: &'a BTreeSet<String>,
    locations: &'a BTreeSet<String>,
    bound: Vec<String>,
}

impl Scope<'_> {
    fn bind(&mut self, s: &Sexp) -> Result<String, ParseError> {
        let Some(name) = s.atom() else {
            return err(s.pos(), "expected a variable name");
        };
        if self.arrays.contains(name) || self.consts.contains(name) || self.bound.iter().any(|b| b == name) {
            return err(s.pos(), format!("variable `{name}` shadows another symbol"));
        }
        if name.parse::<i64>().is_ok() {
            return err(s.pos(), format!("`{name}` is not a valid variable name"));
        }
        self.bound.push(name.to_string());
        Ok(name.to_string())
    }

    fn term(&mut self, s: &Sexp) -> Result<Term, ParseError> {
        match s {
            Sexp::Atom(a, p) => {
                if let Ok(n) = a.parse::<i64>() {
                    return Ok(Term::Num(n));
                }
                if self.bound.iter().any(|b| b == a) {
                    return Ok(Term::Var(a.clone()));
                }
                if self.consts.contains(a) {
                    return Ok(Term::Const(a.clone()));
                }
                if self.arrays.contains(a) {
                    return err(*p, format!("array `{a}` used as an integer term"));
                }
                err(*p, format!("unknown symbol `{a}`"))
            }
            Sexp::List(items, p) => {
                let Some(head) = items.first().and_then(|h| h.atom()) else {
                    return err(*p, "expected an operator");
                };
                let args = &items[1..];
                match head {
                    "+" => {
                        if args.is_empty() {
                            return err(*p, "`+` needs arguments");
                        }
                        let mut acc = self.term(&args[0])?;
                        for a in &args[1..] {
                            acc = acc + self.term(a)?;
                        }
                        Ok(acc)
                    }
                    "-" => match args.len() {
                        1 => Ok(Term::Num(0) - self.term(&args[0])?),
                        2 => Ok(self.term(&args[0])? - self.term(&args[1])?),
                        _ => err(*p, "`-` takes one or two arguments"),
                    },
                    "*" => {
                        if args.len() != 2 {
                            return err(*p, "`*` takes two arguments");
                        }
                        let (k, t) = match (
                            args[0].atom().and_then(|a| a.parse().ok()),
                            args[1].atom().and_then(|a| a.parse().ok()),
                        ) {
                            (Some(k), _) => (k, &args[1]),
                            (_, Some(k)) => (k, &args[0]),
                            _ => return err(*p, "`*` needs a numeral factor"),
                        };
                        Ok(Term::mul(k, self.term(t)?))
                    }
                    "div" => {
                        let k = args.get(1).and_then(|a| a.atom()).and_then(|a| a.parse::<i64>().ok());
                        match (args.len(), k) {
                            (2, Some(k)) if k > 0 => Ok(Term::div(self.term(&args[0])?, k)),
                            _ => err(*p, "`div` takes a term and a positive numeral"),
                        }
                    }
                    "ite" => {
                        if args.len() != 3 {
                            return err(*p, "`ite` takes three arguments");
                        }
                        Ok(Term::ite(
                            self.formula(&args[0])?,
                            self.term(&args[1])?,
                            self.term(&args[2])?,
                        ))
                    }
                    "select" => {
                        if args.len() != 2 {
                            return err(*p, "`select` takes two arguments");
                        }
                        let arr = self.array(&args[0])?;
                        let idx = self.term(&args[1])?;
                        Ok(match arr {
                            ArrayTerm::Sym(a) => Term::App(a, Box::new(idx)),
                            arr => Term::read(arr, idx),
                        })
                    }
                    a if self.arrays.contains(a) => {
                        if args.len() != 1 {
                            return err(*p, format!("array `{a}` takes one index"));
                        }
                        Ok(Term::app(a, self.term(&args[0])?))
                    }
                    other => err(*p, format!("unknown term operator `{other}`")),
                }
            }
        }
    }

    fn array(&mut self, s: &Sexp) -> Result<ArrayTerm, ParseError> {
        match s {
            Sexp::Atom(a, p) => {
                if self.arrays.contains(a) {
                    Ok(ArrayTerm::sym(a))
                } else {
                    err(*p, format!("unknown array `{a}`"))
                }
            }
            Sexp::List(items, p) => {
                if s.head() != Some("store") || items.len() != 4 {
                    return err(*p, "expected an array or `(store A i x)`");
                }
                let inner = self.array(&items[1])?;
                Ok(inner.store(self.term(&items[2])?, self.term(&items[3])?))
            }
        }
    }

    fn formula(&mut self, s: &Sexp) -> Result<Formula, ParseError> {
        match s {
            Sexp::Atom(a, p) => match a.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => err(*p, format!("expected a formula, found `{a}`")),
            },
            Sexp::List(items, p) => {
                let Some(head) = items.first().and_then(|h| h.atom()) else {
                    return err(*p, "expected a connective");
                };
                let args = &items[1..];
                let binary = |scope: &mut Self, r: Rel, swap: bool| -> Result<Formula, ParseError> {
                    if args.len() != 2 {
                        return err(*p, format!("`{head}` takes two arguments"));
                    }
                    let a = scope.term(&args[0])?;
                    let b = scope.term(&args[1])?;
                    Ok(if swap {
                        Formula::Atom(r, b, a)
                    } else {
                        Formula::Atom(r, a, b)
                    })
                };
                match head {
                    "=" => binary(self, Rel::Eq, false),
                    "distinct" => binary(self, Rel::Ne, false),
                    "<" => binary(self, Rel::Lt, false),
                    "<=" => binary(self, Rel::Le, false),
                    ">" => binary(self, Rel::Lt, true),
                    ">=" => binary(self, Rel::Le, true),
                    "and" => Ok(Formula::And(
                        args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?,
                    )),
                    "or" => Ok(Formula::Or(
                        args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?,
                    )),
                    "not" if args.len() == 1 => Ok(Formula::not(self.formula(&args[0])?)),
                    "=>" if args.len() == 2 => Ok(Formula::implies(self.formula(&args[0])?, self.formula(&args[1])?)),
                    "pc" => match args {
                        [Sexp::Atom(l, lp)] => {
                            if self.locations.contains(l) {
                                Ok(Formula::pc(l))
                            } else {
                                err(*lp, format!("unknown location `{l}`"))
                            }
                        }
                        _ => err(*p, "`pc` takes one location"),
                    },
                    "exists" | "forall" => {
                        let (Some(vars), Some(body)) = (args.first().and_then(|v| v.list()), args.get(1)) else {
                            return err(*p, format!("`{head}` takes a variable list and a body"));
                        };
                        let mark = self.bound.len();
                        let names = vars.iter().map(|v| self.bind(v)).collect::<Result<Vec<_>, _>>()?;
                        let body = self.formula(body);
                        self.bound.truncate(mark);
                        let body = body?;
                        Ok(if head == "exists" {
                            Formula::Exists(names, Box::new(body))
                        } else {
                            Formula::Forall(names, Box::new(body))
                        })
                    }
                    other => err(*p, format!("unknown connective `{other}`")),
                }
            }
        }
    }
}

fn names_of(items: &[Sexp]) -> Result<Vec<String>, ParseError> {
    items
        .iter()
        .map(|s| match s {
            Sexp::Atom(a, _) => Ok(a.clone()),
            Sexp::List(v, p) => match v.as_slice() {
                [Sexp::Atom(a, _)] => Ok(a.clone()),
                _ => err(*p, "expected a name"),
            },
        })
        .collect()
}

fn single_name(items: &[Sexp], p: Pos, what: &str) -> Result<String, ParseError> {
    match items {
        [Sexp::Atom(a, _)] => Ok(a.clone()),
        _ => err(p, format!("`{what}` takes one name")),
    }
}

/// Parses a program; symbol and location errors carry line/column positions.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let top = parse_sexps(src)?;
    let [prog] = top.as_slice() else {
        return err(Pos { line: 1, col: 1 }, "expected exactly one `(program …)` form");
    };
    if prog.head() != Some("program") {
        return err(prog.pos(), "expected `(program …)`");
    }
    let sections = &prog.list().unwrap()[1..];
    let mut arrays = Vec::new();
    let mut consts = Vec::new();
    let mut locations = Vec::new();
    let mut init = None;
    let mut error = None;
    let mut initially = None;
    let mut transitions = Vec::new();
    for s in sections {
        let Some(items) = s.list() else {
            return err(s.pos(), "expected a section");
        };
        let rest = &items[1..];
        match s.head() {
            Some("arrays") => arrays.extend(names_of(rest)?),
            Some("consts") => consts.extend(names_of(rest)?),
            Some("locations") => locations.extend(names_of(rest)?),
            Some("init") => init = Some((single_name(rest, s.pos(), "init")?, s.pos())),
            Some("error") => error = Some((single_name(rest, s.pos(), "error")?, s.pos())),
            Some("initially") => initially = Some(s),
            Some("transition") => transitions.push(s),
            _ => return err(s.pos(), "unknown section"),
        }
    }
    let array_set: BTreeSet<String> = arrays.iter().cloned().collect();
    let const_set: BTreeSet<String> = consts.iter().cloned().collect();
    let loc_set: BTreeSet<String> = locations.iter().cloned().collect();
    let mut seen = BTreeSet::new();
    for n in arrays.iter().chain(&consts) {
        if !seen.insert(n) || matches!(n.as_str(), "pc" | "true" | "false") || n.parse::<i64>().is_ok() {
            return err(prog.pos(), format!("bad or duplicate symbol declaration `{n}`"));
        }
    }
    let (init, ipos) = init.ok_or(()).or_else(|_| err(prog.pos(), "missing `(init …)`"))?;
    let (error, epos) = error.ok_or(()).or_else(|_| err(prog.pos(), "missing `(error …)`"))?;
    if !loc_set.contains(&init) {
        return err(ipos, format!("unknown location `{init}`"));
    }
    if !loc_set.contains(&error) {
        return err(epos, format!("unknown location `{error}`"));
    }
    let mut scope = Scope {
        arrays: &array_set,
        consts: &const_set,
        locations: &loc_set,
        bound: Vec::new(),
    };
    let init_cond = match initially {
        Some(s) => match &s.list().unwrap()[1..] {
            [f] => scope.formula(f)?,
            _ => return err(s.pos(), "`initially` takes one formula"),
        },
        None => Formula::True,
    };
    let mut names = BTreeSet::new();
    let mut parsed = Vec::new();
    for t in transitions {
        let tr = parse_transition(t, &mut scope)?;
        if !names.insert(tr.name.clone()) {
            return err(t.pos(), format!("duplicate transition name `{}`", tr.name));
        }
        parsed.push(tr);
    }
    let program = Program {
        arrays,
        consts,
        locations,
        init,
        error,
        init_cond,
        transitions: parsed,
    };
    program.validate().map_err(|e| ParseError {
        line: prog.pos().line,
        col: prog.pos().col,
        msg: e.to_string(),
    })
}

fn parse_transition(s: &Sexp, scope: &mut Scope<'_>) -> Result<Transition, ParseError> {
    let items = s.list().unwrap();
    let Some(name) = items.get(1).and_then(|n| n.atom()) else {
        return err(s.pos(), "transition needs a name");
    };
    let mut from = None;
    let mut to = None;
    let mut exist_vars = Vec::new();
    let mut guard_s = None;
    let mut uguard_s = None;
    let mut set_s = None;
    let mut origin = Origin::Original;
    for part in &items[2..] {
        let Some(pl) = part.list() else {
            return err(part.pos(), "expected a transition clause");
        };
        let rest = &pl[1..];
        let loc = |scope: &Scope<'_>| -> Result<String, ParseError> {
            let l = single_name(rest, part.pos(), "location")?;
            if scope.locations.contains(&l) {
                Ok(l)
            } else {
                err(rest[0].pos(), format!("unknown location `{l}`"))
            }
        };
        match part.head() {
            Some("from") => from = Some(loc(scope)?),
            Some("to") => to = Some(loc(scope)?),
            Some("exists") => {
                for v in rest {
                    exist_vars.push(scope.bind(v)?);
                }
            }
            Some("guard") => guard_s = Some((rest, part.pos())),
            Some("uguard") => uguard_s = Some((rest, part.pos())),
            Some("set") => set_s = Some(rest),
            Some("accelerated-from") => {
                origin = Origin::Accelerated(single_name(rest, part.pos(), "accelerated-from")?)
            }
            _ => return err(part.pos(), "unknown transition clause"),
        }
    }
    let (Some(from), Some(to)) = (from, to) else {
        return err(s.pos(), format!("transition `{name}` needs `from` and `to`"));
    };
    let guard = match guard_s {
        Some(([f], _)) => scope.formula(f)?,
        Some((_, p)) => return err(p, "`guard` takes one formula"),
        None => Formula::True,
    };
    if !guard.is_quantifier_free() {
        return err(s.pos(), format!("guard of `{name}` must be quantifier-free"));
    }
    let uguard = match uguard_s {
        Some(([vars, body], p)) => {
            let Some(vs) = vars.list().filter(|v| v.first().and_then(|h| h.atom()) == Some("vars")) else {
                return err(p, "`uguard` takes `(vars …)` and a formula");
            };
            let mark = scope.bound.len();
            let names = vs[1..].iter().map(|v| scope.bind(v)).collect::<Result<Vec<_>, _>>()?;
            let body = scope.formula(body);
            scope.bound.truncate(mark);
            Some(UGuard {
                vars: names,
                body: body?,
            })
        }
        Some((_, p)) => return err(p, "`uguard` takes `(vars …)` and a formula"),
        None => None,
    };
    let mut array_updates = BTreeMap::new();
    let mut const_updates = BTreeMap::new();
    for upd in set_s.unwrap_or(&[]) {
        let (Some([target, rhs]), p) = (upd.list().and_then(|l| l.get(..2).filter(|_| l.len() == 2)), upd.pos()) else {
            return err(upd.pos(), "expected `(symbol TERM)`");
        };
        let Some(sym) = target.atom() else {
            return err(p, "expected an updated symbol");
        };
        if scope.consts.contains(sym) {
            if const_updates.insert(sym.to_string(), scope.term(rhs)?).is_some() {
                return err(p, format!("`{sym}` updated twice"));
            }
        } else if scope.arrays.contains(sym) {
            let lambda = if rhs.head() == Some("lambda") {
                let l = rhs.list().unwrap();
                let ([_, Sexp::List(vs, _), body], true) = (l, l.len() == 3) else {
                    return err(rhs.pos(), "expected `(lambda (j) TERM)`");
                };
                let [v] = vs.as_slice() else {
                    return err(rhs.pos(), "lambda binds exactly one variable");
                };
                let mark = scope.bound.len();
                let var = scope.bind(v)?;
                let body = scope.term(body);
                scope.bound.truncate(mark);
                Lambda {
                    var,
                    body: body?.expand_writes(),
                }
            } else {
                let arr = scope.array(rhs)?;
                Lambda {
                    var: LAMBDA_VAR.into(),
                    body: Term::read(arr, Term::var(LAMBDA_VAR)).expand_writes(),
                }
            };
            if array_updates.insert(sym.to_string(), lambda).is_some() {
                return err(p, format!("`{sym}` updated twice"));
            }
        } else {
            return err(target.pos(), format!("unknown symbol `{sym}`"));
        }
    }
    for v in &exist_vars {
        scope.bound.retain(|b| b != v);
    }
    Ok(Transition {
        name: name.to_string(),
        from,
        to,
        exist_vars,
        guard,
        uguard,
        array_updates,
        const_updates,
        origin,
    })
}

// ---------------------------------------------------------------------------
// Printing

pub fn term_to_sexp(t: &Term) -> String {
    match t {
        Term::Var(v) | Term::Const(v) => v.clone(),
        Term::Num(n) if *n < 0 => format!("(- {})", -n),
        Term::Num(n) => n.to_string(),
        Term::Add(a, b) => format!("(+ {} {})", term_to_sexp(a), term_to_sexp(b)),
        Term::Sub(a, b) => format!("(- {} {})", term_to_sexp(a), term_to_sexp(b)),
        Term::Mul(k, a) if *k < 0 => format!("(* (- {}) {})", -k, term_to_sexp(a)),
        Term::Mul(k, a) => format!("(* {} {})", k, term_to_sexp(a)),
        Term::App(a, i) => format!("(select {} {})", a, term_to_sexp(i)),
        Term::Ite(c, a, b) => format!("(ite {} {} {})", formula_to_sexp(c), term_to_sexp(a), term_to_sexp(b)),
        Term::Div(a, k) => format!("(div {} {})", term_to_sexp(a), k),
        Term::Read(arr, i) => format!("(select {} {})", array_to_sexp(arr), term_to_sexp(i)),
    }
}

fn array_to_sexp(a: &ArrayTerm) -> String {
    match a {
        ArrayTerm::Sym(s) => s.clone(),
        ArrayTerm::Store(inner, i, x) => format!(
            "(store {} {} {})",
            array_to_sexp(inner),
            term_to_sexp(i),
            term_to_sexp(x)
        ),
    }
}

pub fn formula_to_sexp(f: &Formula) -> String {
    let list = |op: &str, v: &[Formula]| {
        let mut s = format!("({op}");
        for g in v {
            s.push(' ');
            s.push_str(&formula_to_sexp(g));
        }
        s.push(')');
        s
    };
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(r, a, b) => {
            let op = match r {
                Rel::Eq => "=",
                Rel::Ne => "distinct",
                Rel::Lt => "<",
                Rel::Le => "<=",
            };
            format!("({op} {} {})", term_to_sexp(a), term_to_sexp(b))
        }
        Formula::Pc(l) => format!("(pc {l})"),
        Formula::And(v) => list("and", v),
        Formula::Or(v) => list("or", v),
        Formula::Not(g) => format!("(not {})", formula_to_sexp(g)),
        Formula::Exists(vs, g) => format!("(exists ({}) {})", vs.join(" "), formula_to_sexp(g)),
        Formula::Forall(vs, g) => format!("(forall ({}) {})", vs.join(" "), formula_to_sexp(g)),
    }
}

/// Recovers `store` chains from lambdas of the form `ite(j = i, x, …a(j))`.
fn lambda_as_array(array: &str, l: &Lambda) -> Option<ArrayTerm> {
    let j = Term::var(&l.var);
    fn go(t: &Term, array: &str, j: &Term) -> Option<ArrayTerm> {
        match t {
            Term::App(a, idx) if a == array && **idx == *j => Some(ArrayTerm::sym(array)),
            Term::Ite(c, x, rest) => {
                let Formula::Atom(Rel::Eq, lhs, rhs) = c.as_ref() else {
                    return None;
                };
                let i = if lhs == j {
                    rhs
                } else if rhs == j {
                    lhs
                } else {
                    return None;
                };
                let var = match j {
                    Term::Var(v) => v,
                    _ => return None,
                };
                if i.free_vars().contains(var) || x.free_vars().contains(var) {
                    return None;
                }
                Some(go(rest, array, j)?.store(i.clone(), (**x).clone()))
            }
            _ => None,
        }
    }
    go(&l.body, array, &j)
}

pub fn transition_to_sexp(t: &Transition) -> String {
    let mut s = String::new();
    let _ = write!(s, "  (transition {}\n    (from {}) (to {})", t.name, t.from, t.to);
    if !t.exist_vars.is_empty() {
        let _ = write!(s, "\n    (exists {})", t.exist_vars.join(" "));
    }
    let _ = write!(s, "\n    (guard {})", formula_to_sexp(&t.guard));
    if let Some(u) = &t.uguard {
        let _ = write!(
            s,
            "\n    (uguard (vars {}) {})",
            u.vars.join(" "),
            formula_to_sexp(&u.body)
        );
    }
    let mut sets = Vec::new();
    for (c, u) in t.changed_consts() {
        sets.push(format!("({c} {})", term_to_sexp(u)));
    }
    for (a, l) in t.changed_arrays() {
        match lambda_as_array(a, l) {
            Some(arr) => sets.push(format!("({a} {})", array_to_sexp(&arr))),
            None => sets.push(format!("({a} (lambda ({}) {}))", l.var, term_to_sexp(&l.body))),
        }
    }
    if !sets.is_empty() {
        let _ = write!(s, "\n    (set {})", sets.join("\n         "));
    }
    if let Origin::Accelerated(src) = &t.origin {
        let _ = write!(s, "\n    (accelerated-from {src})");
    }
    s.push(')');
    s
}

pub fn print_program(p: &Program) -> String {
    let mut s = String::from("(program\n");
    let _ = writeln!(s, "  (arrays {})", p.arrays.join(" "));
    let _ = writeln!(s, "  (consts {})", p.consts.join(" "));
    let _ = writeln!(s, "  (locations {})", p.locations.join(" "));
    let _ = writeln!(s, "  (init {})", p.init);
    let _ = writeln!(s, "  (error {})", p.error);
    if p.init_cond != Formula::True {
        let _ = writeln!(s, "  (initially {})", formula_to_sexp(&p.init_cond));
    }
    for t in &p.transitions {
        s.push_str(&transition_to_sexp(t));
        s.push('\n');
    }
    s.push(')');
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        (program
          (arrays a)
          (consts i N)
          (locations l1 l2 l3)
          (init l1)
          (error l3)
          (transition t1 (from l1) (to l2) (set (i 0)))
          (transition t2 (from l2) (to l2)
             (guard (< i N))
             (set (i (+ i 1)) (a (store a i 0))))
          (transition t3 (from l2) (to l3)
             (exists x)
             (guard (and (= i N) (< x N) (distinct (select a x) 0)))))
    "#;

    #[test]
    fn parses_small_program() {
        let p = parse_program(SMALL).unwrap();
        assert_eq!(p.transitions.len(), 3);
        assert_eq!(p.transitions[2].exist_vars, vec!["x".to_string()]);
        // identity updates are materialized
        assert!(p.transitions[0].array_updates["a"].is_identity_for("a"));
        assert_eq!(p.transitions[1].const_updates["N"], Term::cst("N"));
    }

    #[test]
    fn round_trip() {
        let p = parse_program(SMALL).unwrap();
        let q = parse_program(&print_program(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn undeclared_location_is_reported_with_position() {
        let src = SMALL.replace("(init l1)", "(init l9)");
        let e = parse_program(&src).unwrap_err();
        assert!(e.msg.contains("l9"), "{e}");
        assert_eq!(e.line, 6);
    }

    #[test]
    fn unknown_symbol() {
        let src = SMALL.replace("(< i N)", "(< i M)");
        let e = parse_program(&src).unwrap_err();
        assert!(e.msg.contains("`M`"), "{e}");
        assert_eq!(e.line, 10);
    }

    #[test]
    fn duplicate_transition() {
        let src = SMALL.replace("transition t3", "transition t2");
        assert!(parse_program(&src).unwrap_err().msg.contains("duplicate"));
    }

    #[test]
    fn sexp_reader_handles_quotes_and_comments() {
        let v = parse_sexps("(a |b c| ; comment\n (d))").unwrap();
        assert_eq!(v.len(), 1);
        let items = v[0].list().unwrap();
        assert_eq!(items[1].atom(), Some("b c"));
        assert_eq!(items[2].pos().line, 2);
        assert!(parse_sexps("(a").is_err());
        assert!(parse_sexps("a)").is_err());
    }
}
