//! SMT-LIB 2 encoding and an external solver process.
//!
//! Arrays become uninterpreted `Int → Int` functions, free constants and
//! Skolem constants become `Int` constants constrained to be non-negative,
//! and `pc` is an `Int` ranging over location codes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use log::{debug, warn};

use crate::abstraction::instantiate;
use crate::error::SmtError;
use crate::logic::{classify, nnf, prenex, refresh_bound, Formula, Rel, SentenceClass, Term};
use crate::spec_format::{parse_sexps, Sexp};

pub const DEFAULT_LOGIC: &str = "QF_UFLIA";
pub const QUANTIFIED_LOGIC: &str = "UFLIA";

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub timeout_ms: u64,
    pub logic: String,
    /// Every query is also written as a standalone script into this directory.
    pub dump_dir: Option<PathBuf>,
    /// Instance cap for Σ⁰₂ queries.
    pub inst_cap: usize,
    /// Budget for the quantified second attempt on Σ⁰₂ queries; 0 disables it.
    pub quantified_timeout_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".into(), "-in".into(), "-smt2".into()],
            timeout_ms: 10_000,
            logic: DEFAULT_LOGIC.into(),
            dump_dir: None,
            inst_cap: crate::abstraction::DEFAULT_CAP,
            quantified_timeout_ms: 2_000,
        }
    }
}

impl SolverConfig {
    /// Replaces the solver command line (split on whitespace).
    pub fn with_command(mut self, cmd: &str) -> Self {
        self.command = cmd.split_whitespace().map(String::from).collect();
        self
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = ms.max(1);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub calls: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
}

/// Values of a satisfying assignment, restricted to what was asked for.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub consts: BTreeMap<String, i64>,
    /// Entries at indices `0..width`.
    pub arrays: BTreeMap<String, Vec<i64>>,
    pub pc: Option<i64>,
}

// ---------------------------------------------------------------------------
// Encoding

const RESERVED: &[&str] = &[
    "and", "or", "not", "ite", "let", "forall", "exists", "true", "false", "distinct", "div", "mod", "abs", "select",
    "store", "Int", "Bool", "Array", "par", "as", "pc", "_", "!", "=>", "=", "<", "<=", ">", ">=", "+", "-", "*",
];

fn quote(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!$%^&*_-+=<>.?/".contains(c))
        && !RESERVED.contains(&name);
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn num(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Const,
    Var,
    Array,
    Quot,
}

/// A query in SMT-LIB syntax, without `check-sat`.
#[derive(Clone, Debug, Default)]
pub struct Query {
    decls: Vec<String>,
    asserts: Vec<String>,
    symbols: BTreeMap<(Kind, String), String>,
    pub locations: Vec<String>,
}

impl Query {
    pub fn body(&self) -> String {
        let mut s = String::new();
        for d in self.decls.iter().chain(&self.asserts) {
            s.push_str(d);
            s.push('\n');
        }
        s
    }

    /// A standalone script for `logic`.
    pub fn script(&self, logic: &str) -> String {
        format!("(set-logic {logic})\n{}(check-sat)\n", self.body())
    }

    fn const_symbol(&self, name: &str) -> Option<&String> {
        self.symbols.get(&(Kind::Const, name.to_string()))
    }

    fn array_symbol(&self, name: &str) -> Option<&String> {
        self.symbols.get(&(Kind::Array, name.to_string()))
    }
}

struct Encoder {
    quantified: bool,
    locations: Vec<String>,
    uses_pc: bool,
    used: BTreeSet<String>,
    symbols: BTreeMap<(Kind, String), String>,
    order: Vec<(Kind, String)>,
    bound: Vec<(String, String)>,
    divs: BTreeMap<(String, i64), String>,
    side: Vec<String>,
    apps: Vec<String>,
}

impl Encoder {
    fn new(locations: &[String], quantified: bool) -> Encoder {
        Encoder {
            quantified,
            locations: locations.to_vec(),
            uses_pc: false,
            used: ["pc".to_string()].into_iter().collect(),
            symbols: BTreeMap::new(),
            order: Vec::new(),
            bound: Vec::new(),
            divs: BTreeMap::new(),
            side: Vec::new(),
            apps: Vec::new(),
        }
    }

    fn unused(&mut self, name: &str) -> String {
        let mut cand = quote(name);
        let mut k = 1;
        while self.used.contains(&cand) {
            cand = quote(&format!("{name}_{k}"));
            k += 1;
        }
        self.used.insert(cand.clone());
        cand
    }

    fn symbol(&mut self, kind: Kind, name: &str) -> String {
        if let Some(s) = self.symbols.get(&(kind, name.to_string())) {
            return s.clone();
        }
        let s = self.unused(name);
        self.symbols.insert((kind, name.to_string()), s.clone());
        self.order.push((kind, name.to_string()));
        s
    }

    fn mentions_bound(&self, t: &Term) -> bool {
        if self.bound.is_empty() {
            return false;
        }
        let fv = t.free_vars();
        self.bound.iter().any(|(v, _)| fv.contains(v))
    }

    fn term(&mut self, t: &Term) -> Result<String, SmtError> {
        Ok(match t {
            Term::Var(v) => match self.bound.iter().rev().find(|(b, _)| b == v) {
                Some((_, s)) => s.clone(),
                None => self.symbol(Kind::Var, v),
            },
            Term::Const(c) => self.symbol(Kind::Const, c),
            Term::Num(n) => num(*n),
            Term::Add(a, b) => format!("(+ {} {})", self.term(a)?, self.term(b)?),
            Term::Sub(a, b) => format!("(- {} {})", self.term(a)?, self.term(b)?),
            Term::Mul(k, a) => format!("(* {} {})", num(*k), self.term(a)?),
            Term::App(f, i) => {
                let s = self.symbol(Kind::Array, f);
                let app = format!("({s} {})", self.term(i)?);
                if !self.mentions_bound(i) && !self.apps.contains(&app) {
                    self.apps.push(app.clone());
                }
                app
            }
            Term::Ite(c, a, b) => format!("(ite {} {} {})", self.formula(c)?, self.term(a)?, self.term(b)?),
            Term::Div(a, k) => {
                let body = self.term(a)?;
                if self.mentions_bound(a) {
                    format!("(div {body} {k})")
                } else if let Some(q) = self.divs.get(&(body.clone(), *k)) {
                    q.clone()
                } else {
                    let q = self.symbol(Kind::Quot, &format!("q!{}", self.divs.len()));
                    // floor division: k·q ≤ t < k·(q+1)
                    self.side
                        .push(format!("(and (<= (* {k} {q}) {body}) (< {body} (* {k} (+ {q} 1))))"));
                    self.divs.insert((body, *k), q.clone());
                    q
                }
            }
            Term::Read(..) => self.term(&t.expand_writes())?,
        })
    }

    fn formula(&mut self, f: &Formula) -> Result<String, SmtError> {
        let nary = |enc: &mut Self, op: &str, unit: &str, v: &[Formula]| -> Result<String, SmtError> {
            match v {
                [] => Ok(unit.to_string()),
                [g] => enc.formula(g),
                _ => {
                    let parts = v.iter().map(|g| enc.formula(g)).collect::<Result<Vec<_>, _>>()?;
                    Ok(format!("({op} {})", parts.join(" ")))
                }
            }
        };
        Ok(match f {
            Formula::True => "true".into(),
            Formula::False => "false".into(),
            Formula::Atom(r, a, b) => {
                let (a, b) = (self.term(a)?, self.term(b)?);
                match r {
                    Rel::Eq => format!("(= {a} {b})"),
                    Rel::Ne => format!("(not (= {a} {b}))"),
                    Rel::Lt => format!("(< {a} {b})"),
                    Rel::Le => format!("(<= {a} {b})"),
                }
            }
            Formula::Pc(l) => {
                self.uses_pc = true;
                let code = match self.locations.iter().position(|x| x == l) {
                    Some(c) => c,
                    None => {
                        self.locations.push(l.clone());
                        self.locations.len() - 1
                    }
                };
                format!("(= pc {code})")
            }
            Formula::And(v) => nary(self, "and", "true", v)?,
            Formula::Or(v) => nary(self, "or", "false", v)?,
            Formula::Not(g) => format!("(not {})", self.formula(g)?),
            Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                if !self.quantified {
                    return Err(SmtError::ResidualQuantifier);
                }
                let mark = self.bound.len();
                let mut binders = Vec::new();
                let mut ranges = Vec::new();
                for v in vs {
                    let s = self.unused(v);
                    binders.push(format!("({s} Int)"));
                    ranges.push(format!("(>= {s} 0)"));
                    self.bound.push((v.clone(), s));
                }
                let body = self.formula(g);
                self.bound.truncate(mark);
                let body = body?;
                let range = if ranges.len() == 1 {
                    ranges.pop().unwrap()
                } else {
                    format!("(and {})", ranges.join(" "))
                };
                if matches!(f, Formula::Exists(..)) {
                    format!("(exists ({}) (and {range} {body}))", binders.join(" "))
                } else {
                    format!("(forall ({}) (=> {range} {body}))", binders.join(" "))
                }
            }
        })
    }

    fn finish(self, main: String) -> Query {
        let mut decls = Vec::new();
        let mut asserts = Vec::new();
        if self.uses_pc {
            decls.push("(declare-fun pc () Int)".to_string());
            asserts.push(format!("(assert (and (<= 0 pc) (< pc {})))", self.locations.len()));
        }
        for key in &self.order {
            let s = &self.symbols[key];
            match key.0 {
                Kind::Array => decls.push(format!("(declare-fun {s} (Int) Int)")),
                Kind::Quot => decls.push(format!("(declare-fun {s} () Int)")),
                Kind::Const | Kind::Var => {
                    decls.push(format!("(declare-fun {s} () Int)"));
                    asserts.push(format!("(assert (>= {s} 0))"));
                }
            }
        }
        for a in &self.apps {
            asserts.push(format!("(assert (>= {a} 0))"));
        }
        for c in &self.side {
            asserts.push(format!("(assert {c})"));
        }
        asserts.push(format!("(assert {main})"));
        Query {
            decls,
            asserts,
            symbols: self.symbols,
            locations: self.locations,
        }
    }
}

/// Encodes a quantifier-free formula. Free index variables are treated as
/// constants.
pub fn encode_query(f: &Formula, locations: &[String]) -> Result<Query, SmtError> {
    let mut enc = Encoder::new(locations, false);
    let main = enc.formula(f)?;
    Ok(enc.finish(main))
}

/// Encodes a formula keeping its quantifiers (bound variables range over the
/// naturals).
pub fn encode_quantified(f: &Formula, locations: &[String]) -> Result<Query, SmtError> {
    let mut enc = Encoder::new(locations, true);
    let main = enc.formula(f)?;
    Ok(enc.finish(main))
}

/// A standalone script for a quantifier-free formula.
pub fn encode(f: &Formula, locations: &[String]) -> Result<String, SmtError> {
    Ok(encode_query(f, locations)?.script(DEFAULT_LOGIC))
}

/// Existentials of a Σ⁰₁ sentence become free (Skolem) variables.
pub fn skolemize(f: &Formula) -> Result<Formula, SmtError> {
    let p = prenex(f).ok_or(SmtError::ResidualQuantifier)?;
    if !p.forall.is_empty() {
        return Err(SmtError::ResidualQuantifier);
    }
    Ok(p.matrix)
}

/// Instance set for a Σ⁰₂ query: the Skolem variables first, then ground
/// index terms.
fn sigma02_instances(f: &Formula, cap: usize) -> Result<Option<Formula>, SmtError> {
    fn split(f: &Formula, out: &mut Vec<Formula>) {
        match f {
            Formula::And(v) => v.iter().for_each(|g| split(g, out)),
            Formula::Exists(_, g) => split(g, out),
            g => out.push(g.clone()),
        }
    }
    let mut parts = Vec::new();
    split(&nnf(&refresh_bound(f)), &mut parts);
    let mut direct = Vec::new();
    let mut blocks = Vec::new();
    let mut skolems: Vec<Term> = Vec::new();
    for part in parts {
        let p = prenex(&part).ok_or(SmtError::ResidualQuantifier)?;
        skolems.extend(p.exists.iter().map(|v| Term::var(v)));
        if p.forall.is_empty() {
            direct.push(p.matrix);
        } else {
            blocks.push((p.forall, p.matrix));
        }
    }
    let base = Formula::And(direct.clone());
    let mut seen: BTreeSet<String> = BTreeSet::new();
    skolems.extend(base.free_vars().into_iter().map(|v| Term::var(&v)));
    for (univ, m) in &blocks {
        skolems.extend(
            m.free_vars()
                .into_iter()
                .filter(|v| !univ.contains(v))
                .map(|v| Term::var(&v)),
        );
    }
    skolems.retain(|t| seen.insert(t.to_string()));
    let mut ground: Vec<Term> = Vec::new();
    for (univ, m) in &blocks {
        let set = crate::abstraction::default_set(
            &Formula::exists(Vec::new(), Formula::forall(univ.clone(), m.clone())),
            crate::abstraction::InstMode::Terms,
        );
        ground.extend(set.terms);
    }
    base.visit_terms(&mut |t| {
        if !matches!(t, Term::Num(_)) && !t.mentions_array() {
            ground.push(t.clone());
        }
    });
    let mut all = skolems.clone();
    for t in ground {
        if seen.insert(t.to_string()) {
            all.push(t);
        }
    }
    for (univ, m) in &blocks {
        let inst = match instantiate(m, univ, &all, cap) {
            Ok(i) => i,
            Err(_) => match instantiate(m, univ, &skolems, cap) {
                Ok(i) => i,
                Err(e) => {
                    debug!("sigma02 instantiation gave up: {e}");
                    return Ok(None);
                }
            },
        };
        direct.push(inst);
    }
    Ok(Some(Formula::And(direct)))
}

// ---------------------------------------------------------------------------
// Solver process

struct Proc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Proc {
    fn spawn(cfg: &SolverConfig, logic: &str) -> Result<Proc, SmtError> {
        let cmd = cfg.command.join(" ");
        let (prog, args) = cfg.command.split_first().ok_or_else(|| SmtError::Spawn {
            cmd: cmd.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty solver command"),
        })?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SmtError::Spawn { cmd, source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        let mut p = Proc {
            child,
            stdin,
            lines: rx,
        };
        p.send(&format!(
            "(set-option :print-success false)\n(set-option :produce-models true)\n(set-logic {logic})\n(set-option :timeout {})\n",
            cfg.timeout_ms
        ))?;
        Ok(p)
    }

    fn send(&mut self, s: &str) -> Result<(), SmtError> {
        self.stdin.write_all(s.as_bytes())?;
        self.stdin.flush()?;
        Ok(())
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One solver process per logic, started on first use. Queries are
/// serialized and isolated with `push`/`pop`.
pub struct Solver {
    cfg: SolverConfig,
    procs: BTreeMap<String, Proc>,
    pub stats: SolverStats,
    dumped: usize,
    /// Per-query timeout when it differs from the configured one.
    short_timeout: Option<u64>,
}

enum Reply {
    Line(String),
    Timeout,
}

impl Solver {
    /// Starts the solver for the configured logic, so a missing binary is
    /// reported immediately.
    pub fn new(cfg: SolverConfig) -> Result<Solver, SmtError> {
        let mut s = Solver {
            cfg,
            procs: BTreeMap::new(),
            stats: SolverStats::default(),
            dumped: 0,
            short_timeout: None,
        };
        let logic = s.cfg.logic.clone();
        s.proc(&logic)?;
        Ok(s)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn proc(&mut self, logic: &str) -> Result<&mut Proc, SmtError> {
        if !self.procs.contains_key(logic) {
            let p = Proc::spawn(&self.cfg, logic)?;
            self.procs.insert(logic.to_string(), p);
        }
        Ok(self.procs.get_mut(logic).unwrap())
    }

    fn read(&mut self, logic: &str) -> Result<Reply, SmtError> {
        let ms = self.short_timeout.unwrap_or(self.cfg.timeout_ms);
        let wait = Duration::from_millis(ms.saturating_add(2_000));
        let p = self.proc(logic)?;
        match p.lines.recv_timeout(wait) {
            Ok(l) => Ok(Reply::Line(l)),
            Err(RecvTimeoutError::Timeout) => {
                warn!("solver did not answer within {wait:?}; restarting it");
                self.procs.remove(logic);
                Ok(Reply::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.procs.remove(logic);
                Err(SmtError::Protocol("solver exited".into()))
            }
        }
    }

    fn dump(&mut self, q: &Query, logic: &str) {
        if let Some(dir) = &self.cfg.dump_dir {
            let path = dir.join(format!("q{:06}.smt2", self.dumped));
            self.dumped += 1;
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, q.script(logic))) {
                warn!("cannot dump {}: {e}", path.display());
            }
        }
    }

    fn run<T>(
        &mut self,
        q: &Query,
        logic: &str,
        on_sat: impl FnOnce(&mut Self, &Query) -> Result<T, SmtError>,
    ) -> Result<(SatResult, Option<T>), SmtError> {
        self.stats.calls += 1;
        self.dump(q, logic);
        let text = match self.short_timeout {
            Some(ms) => format!("(push 1)\n(set-option :timeout {ms})\n{}(check-sat)\n", q.body()),
            None => format!("(push 1)\n{}(check-sat)\n", q.body()),
        };
        let started = std::time::Instant::now();
        self.proc(logic)?.send(&text)?;
        let mut errors = Vec::new();
        let result = loop {
            match self.read(logic)? {
                Reply::Timeout => {
                    self.stats.unknown += 1;
                    return Ok((SatResult::Unknown, None));
                }
                Reply::Line(l) => match l.trim() {
                    "sat" => break SatResult::Sat,
                    "unsat" => break SatResult::Unsat,
                    "unknown" | "timeout" => break SatResult::Unknown,
                    "" => {}
                    other if other.starts_with("(error") => errors.push(other.to_string()),
                    other => debug!("solver: {other}"),
                },
            }
        };
        if !errors.is_empty() {
            self.proc(logic)?.send("(pop 1)\n")?;
            return Err(SmtError::Protocol(errors.join("; ")));
        }
        debug!(
            "{logic} query {} ({} bytes): {result:?} in {:?}",
            self.stats.calls,
            text.len(),
            started.elapsed()
        );
        match result {
            SatResult::Sat => self.stats.sat += 1,
            SatResult::Unsat => self.stats.unsat += 1,
            SatResult::Unknown => self.stats.unknown += 1,
        }
        let extra = match result {
            SatResult::Sat => Some(on_sat(self, q)),
            _ => None,
        };
        self.proc(logic)?.send("(pop 1)\n")?;
        match extra {
            Some(Err(e)) => Err(e),
            Some(Ok(v)) => Ok((result, Some(v))),
            None => Ok((result, None)),
        }
    }

    fn get_values(&mut self, logic: &str, terms: &[String]) -> Result<Vec<i64>, SmtError> {
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        self.proc(logic)?
            .send(&format!("(get-value ({}))\n", terms.join(" ")))?;
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let Reply::Line(l) = self.read(logic)? else {
                return Err(SmtError::Protocol("get-value timed out".into()));
            };
            if l.trim_start().starts_with("(error") {
                return Err(SmtError::Protocol(l));
            }
            depth += l.matches('(').count() as i64 - l.matches(')').count() as i64;
            text.push_str(&l);
            text.push('\n');
            if depth <= 0 && !text.trim().is_empty() {
                break;
            }
        }
        let parsed = parse_sexps(&text).map_err(|e| SmtError::Protocol(format!("bad get-value reply: {e}")))?;
        let pairs = parsed
            .first()
            .and_then(|s| s.list())
            .ok_or_else(|| SmtError::Protocol(text.clone()))?;
        pairs
            .iter()
            .map(|p| {
                p.list()
                    .and_then(|v| v.get(1))
                    .and_then(value_of)
                    .ok_or_else(|| SmtError::Protocol(format!("bad value in {text}")))
            })
            .collect()
    }

    /// Decides a ground or Σ⁰₁ sentence by Skolemization.
    pub fn check_sat(&mut self, f: &Formula, locations: &[String]) -> Result<SatResult, SmtError> {
        let q = encode_query(&skolemize(f)?, locations)?;
        let logic = self.cfg.logic.clone();
        Ok(self.run(&q, &logic, |_, _| Ok(()))?.0)
    }

    /// Like [`Solver::check_sat`], and on Sat reads back the given constants,
    /// `pc`, and the arrays at indices `0..width(consts)`.
    pub fn check_sat_model(
        &mut self,
        f: &Formula,
        locations: &[String],
        consts: &[String],
        arrays: &[String],
        width: impl FnOnce(&BTreeMap<String, i64>) -> usize,
    ) -> Result<(SatResult, Option<Model>), SmtError> {
        let q = encode_query(&skolemize(f)?, locations)?;
        let logic = self.cfg.logic.clone();
        let (r, m) = self.run(&q, &logic, |s, q| {
            let mut model = Model::default();
            let known: Vec<&String> = consts.iter().filter(|c| q.const_symbol(c).is_some()).collect();
            let syms: Vec<String> = known.iter().map(|c| q.const_symbol(c).unwrap().clone()).collect();
            for (c, v) in known.iter().zip(s.get_values(&logic, &syms)?) {
                model.consts.insert((*c).clone(), v);
            }
            for c in consts {
                model.consts.entry(c.clone()).or_insert(0);
            }
            if q.decls.iter().any(|d| d.starts_with("(declare-fun pc ")) {
                model.pc = s.get_values(&logic, &["pc".to_string()])?.first().copied();
            }
            let w = width(&model.consts);
            for a in arrays {
                let vals = match q.array_symbol(a) {
                    Some(sym) => {
                        let cells: Vec<String> = (0..w).map(|i| format!("({sym} {i})")).collect();
                        s.get_values(&logic, &cells)?
                    }
                    None => vec![0; w],
                };
                model.arrays.insert(a.clone(), vals);
            }
            Ok(model)
        })?;
        Ok((r, m))
    }

    /// Σ⁰₂ check by instantiation: Unsat is trusted, anything else is
    /// reported as Unknown.
    pub fn check_sat_sigma02(&mut self, f: &Formula, locations: &[String]) -> Result<SatResult, SmtError> {
        if classify(f) == SentenceClass::Other {
            return Err(SmtError::ResidualQuantifier);
        }
        let Some(g) = sigma02_instances(f, self.cfg.inst_cap)? else {
            self.stats.unknown += 1;
            return Ok(SatResult::Unknown);
        };
        let q = encode_query(&g, locations)?;
        let logic = self.cfg.logic.clone();
        if self.run(&q, &logic, |_, _| Ok(()))?.0 == SatResult::Unsat {
            return Ok(SatResult::Unsat);
        }
        if self.cfg.quantified_timeout_ms == 0 {
            return Ok(SatResult::Unknown);
        }
        // second attempt with the solver's own quantifier handling
        let q = encode_quantified(f, locations)?;
        self.short_timeout = Some(self.cfg.quantified_timeout_ms.min(self.cfg.timeout_ms));
        let r = self.run(&q, QUANTIFIED_LOGIC, |_, _| Ok(()));
        let restore = self.short_timeout.take().is_some() && self.procs.contains_key(QUANTIFIED_LOGIC);
        if restore {
            let reset = format!("(set-option :timeout {})\n", self.cfg.timeout_ms);
            self.proc(QUANTIFIED_LOGIC)?.send(&reset)?;
        }
        Ok(match r?.0 {
            SatResult::Unsat => SatResult::Unsat,
            _ => SatResult::Unknown,
        })
    }

    /// Hands a quantified formula to the solver's own quantifier support.
    pub fn check_quantified(&mut self, f: &Formula, locations: &[String]) -> Result<SatResult, SmtError> {
        let q = encode_quantified(f, locations)?;
        Ok(self.run(&q, QUANTIFIED_LOGIC, |_, _| Ok(()))?.0)
    }

    /// Validity of a closed formula (free index variables read universally).
    /// `None` when the solver cannot decide.
    pub fn is_valid(&mut self, f: &Formula, locations: &[String]) -> Result<Option<bool>, SmtError> {
        let fv: Vec<String> = f.free_vars().into_iter().collect();
        let closed = Formula::forall(fv, f.clone());
        Ok(match self.check_quantified(&Formula::not(closed), locations)? {
            SatResult::Unsat => Some(true),
            SatResult::Sat => Some(false),
            SatResult::Unknown => None,
        })
    }
}

fn value_of(s: &Sexp) -> Option<i64> {
    match s {
        Sexp::Atom(a, _) => a.parse().ok(),
        Sexp::List(v, _) => match v.as_slice() {
            [op, x] if op.atom() == Some("-") => value_of(x).map(|n| -n),
            _ => None,
        },
    }
}
