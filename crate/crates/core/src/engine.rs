//! Backward reachability over a proof tree, with optional acceleration,
//! monotonic abstraction of ∃∀ labels and pruning of spurious traces.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use log::{debug, info};
use serde::Serialize;

use crate::abstraction::{abstract_label, InstMode, DEFAULT_CAP};
use crate::accel::preprocess;
use crate::error::{AbstractionError, SmtError};
use crate::logic::{classify, reseed_fresh, simplify, Formula, SentenceClass, Subst};
use crate::oracle::State;
use crate::smt::{SatResult, Solver, SolverConfig};
use crate::system::{preimage, Program, Transition};

#[derive(Clone, Debug)]
pub struct Options {
    /// Run the acceleration preprocessing first.
    pub accelerate: bool,
    pub max_nodes: usize,
    pub max_depth: usize,
    pub inst_mode: InstMode,
    pub inst_cap: usize,
    /// Wall-clock budget for the whole search.
    pub timeout: Duration,
    pub solver: SolverConfig,
    /// Keep a JSON-serializable event log in the outcome.
    pub record_events: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            accelerate: false,
            max_nodes: 2000,
            max_depth: 200,
            inst_mode: InstMode::EVars,
            inst_cap: DEFAULT_CAP,
            timeout: Duration::from_secs(60),
            solver: SolverConfig::default(),
            record_events: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownReason {
    Budget,
    Solver,
    InstantiationCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Safe,
    /// Transition names from the initial location to the error location.
    Unsafe(Vec<String>),
    Unknown(UnknownReason),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Safe => write!(f, "SAFE"),
            Verdict::Unsafe(_) => write!(f, "UNSAFE"),
            Verdict::Unknown(r) => {
                let r = match r {
                    UnknownReason::Budget => "budget",
                    UnknownReason::Solver => "solver",
                    UnknownReason::InstantiationCap => "instantiation-cap",
                };
                write!(f, "UNKNOWN({r})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mark {
    Unchecked,
    Checked,
    Covered(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: usize,
    pub label: Formula,
    pub mark: Mark,
    /// Parent node and the transition on the arc.
    pub parent: Option<(usize, String)>,
    pub depth: usize,
    pub children: Vec<usize>,
    /// Target of a pruned accelerated arc: kept, but never expanded and
    /// never used for covering.
    pub pruned: bool,
    pub deleted: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        node: usize,
        parent: Option<usize>,
        transition: Option<String>,
        label: String,
    },
    Abstracted {
        node: usize,
        original: String,
        abstracted: String,
    },
    Checked {
        node: usize,
    },
    Covered {
        node: usize,
        by: Vec<usize>,
    },
    Pruned {
        node: usize,
        deleted: Vec<usize>,
        reopened: Vec<usize>,
    },
    Verdict {
        verdict: String,
    },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub nodes: usize,
    pub solver_calls: usize,
    pub pruned: usize,
    pub elapsed_ms: u128,
}

/// A concrete initial state from which the unsafe trace should replay.
#[derive(Clone, Debug)]
pub struct Witness {
    pub initial: State,
    /// Range bound for existential choices during replay.
    pub width: i64,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub verdict: Verdict,
    pub stats: Stats,
    pub witness: Option<Witness>,
    pub events: Vec<Event>,
    /// Every ∃∀ label met during the run, with its abstraction.
    pub abstractions: Vec<(Formula, Formula)>,
    pub tree: Vec<Node>,
}

enum Check {
    Unsafe(Vec<String>, Option<Witness>),
    Covered,
    Checked,
    Pruned,
}

struct Search<'a> {
    program: Program,
    transitions: Vec<Transition>,
    opts: &'a Options,
    solver: Solver,
    nodes: Vec<Node>,
    queue: VecDeque<usize>,
    events: Vec<Event>,
    abstractions: Vec<(Formula, Formula)>,
    pruned: usize,
    depth_capped: bool,
    witness_slot: Option<Witness>,
}

enum Stop {
    Verdict(Verdict),
    Budget,
    Cap,
    Solver(SmtError),
}

impl From<SmtError> for Stop {
    fn from(e: SmtError) -> Self {
        Stop::Solver(e)
    }
}

impl Search<'_> {
    fn log(&mut self, e: Event) {
        if self.opts.record_events {
            self.events.push(e);
        }
    }

    fn add_node(&mut self, label: Formula, parent: Option<(usize, String)>) -> Result<usize, Stop> {
        if self.nodes.len() >= self.opts.max_nodes {
            return Err(Stop::Budget);
        }
        let id = self.nodes.len();
        let depth = parent.as_ref().map(|(p, _)| self.nodes[*p].depth + 1).unwrap_or(0);
        let mark = if label == Formula::False {
            Mark::Covered(Vec::new())
        } else {
            Mark::Unchecked
        };
        if self.opts.record_events {
            let e = Event::Created {
                node: id,
                parent: parent.as_ref().map(|p| p.0),
                transition: parent.as_ref().map(|p| p.1.clone()),
                label: label.to_string(),
            };
            self.events.push(e);
        }
        if let Some((p, _)) = &parent {
            self.nodes[*p].children.push(id);
        }
        if mark == Mark::Unchecked {
            self.queue.push_back(id);
        }
        self.nodes.push(Node {
            id,
            label,
            mark,
            parent,
            depth,
            children: Vec::new(),
            pruned: false,
            deleted: false,
        });
        Ok(id)
    }

    /// Arcs from the node up to the root, nearest first.
    fn path(&self, id: usize) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some((p, t)) = &self.nodes[cur].parent {
            out.push((cur, t.clone()));
            cur = *p;
        }
        out
    }

    fn is_accelerated(&self, name: &str) -> bool {
        self.transitions.iter().any(|t| t.name == name && t.is_accelerated())
    }

    fn check(&mut self, id: usize) -> Result<Check, Stop> {
        let label = self.nodes[id].label.clone();
        if classify(&label) >= SentenceClass::Sigma02 {
            let abs = match abstract_label(&label, self.opts.inst_mode, self.opts.inst_cap) {
                Ok(a) => a,
                Err(AbstractionError::NotSigma02) => return Err(Stop::Cap),
                Err(e) => {
                    debug!("abstraction of node {id} failed: {e}");
                    return Err(Stop::Cap);
                }
            };
            self.log(Event::Abstracted {
                node: id,
                original: label.to_string(),
                abstracted: abs.to_string(),
            });
            self.abstractions.push((label, abs.clone()));
            self.nodes[id].label = abs;
        }
        let label = self.nodes[id].label.clone();
        if label == Formula::False {
            return Ok(Check::Covered);
        }

        // safety test
        let init = Subst {
            pc: Some(self.program.init.clone()),
            ..Subst::default()
        };
        let at_init = simplify(&Formula::and(vec![
            init.formula(&label),
            self.program.init_cond.clone(),
        ]));
        if at_init != Formula::False {
            match self.solver.check_sat(&at_init, &self.program.locations)? {
                SatResult::Unsat => {}
                SatResult::Unknown => return Err(Stop::Solver(SmtError::Protocol("safety test undecided".into()))),
                SatResult::Sat => {
                    let path = self.path(id);
                    if let Some((target, _)) = path.iter().find(|(_, t)| self.is_accelerated(t)) {
                        self.prune(*target);
                        return Ok(Check::Pruned);
                    }
                    let trace: Vec<String> = path.iter().map(|(_, t)| t.clone()).collect();
                    let witness = self.witness(&at_init)?;
                    return Ok(Check::Unsafe(trace, witness));
                }
            }
        }

        // fixpoint test
        let pc = label.pc_literal().map(String::from);
        let candidates: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| {
                n.id != id
                    && !n.deleted
                    && !n.pruned
                    && n.mark == Mark::Checked
                    && n.label.pc_literal().map(String::from) == pc
                    && classify(&n.label) <= SentenceClass::Sigma01
            })
            .map(|n| n.id)
            .collect();
        if !candidates.is_empty() {
            let mut parts = vec![label.clone()];
            parts.extend(candidates.iter().map(|c| Formula::not(self.nodes[*c].label.clone())));
            let query = Formula::and(parts);
            if self.solver.check_sat_sigma02(&query, &self.program.locations)? == SatResult::Unsat {
                self.log(Event::Covered {
                    node: id,
                    by: candidates.clone(),
                });
                self.nodes[id].mark = Mark::Covered(candidates);
                return Ok(Check::Covered);
            }
        }
        Ok(Check::Checked)
    }

    /// Deletes the subtree below `target`, closes `target` and reopens every
    /// node whose covering set touched the removed part.
    fn prune(&mut self, target: usize) {
        self.pruned += 1;
        let mut gone = BTreeSet::new();
        let mut stack = self.nodes[target].children.clone();
        while let Some(n) = stack.pop() {
            if gone.insert(n) {
                stack.extend(self.nodes[n].children.iter().copied());
            }
        }
        for &n in &gone {
            self.nodes[n].deleted = true;
        }
        self.nodes[target].children.clear();
        self.nodes[target].pruned = true;
        self.nodes[target].mark = Mark::Checked;
        let mut closed = gone.clone();
        closed.insert(target);
        let mut reopened = Vec::new();
        for n in 0..self.nodes.len() {
            if self.nodes[n].deleted {
                continue;
            }
            if let Mark::Covered(by) = &self.nodes[n].mark {
                if by.iter().any(|b| closed.contains(b)) {
                    self.nodes[n].mark = Mark::Unchecked;
                    self.queue.push_back(n);
                    reopened.push(n);
                }
            }
        }
        debug!(
            "pruned below node {target}: {} deleted, {} reopened",
            gone.len(),
            reopened.len()
        );
        self.log(Event::Pruned {
            node: target,
            deleted: gone.into_iter().collect(),
            reopened,
        });
    }

    fn witness(&mut self, at_init: &Formula) -> Result<Option<Witness>, Stop> {
        let consts = self.program.consts.clone();
        let arrays = self.program.arrays.clone();
        let (r, model) = self
            .solver
            .check_sat_model(at_init, &self.program.locations, &consts, &arrays, |c| {
                (c.values().copied().max().unwrap_or(0).max(0) as usize + 2).min(32)
            })?;
        Ok(match (r, model) {
            (SatResult::Sat, Some(m)) => {
                let len = m.arrays.values().map(|v| v.len()).max().unwrap_or(0) as i64;
                let max_const = m.consts.values().copied().max().unwrap_or(0);
                Some(Witness {
                    initial: State {
                        pc: self.program.init.clone(),
                        consts: m.consts,
                        arrays: m.arrays,
                    },
                    width: len + max_const + 1,
                })
            }
            _ => None,
        })
    }

    fn expand(&mut self, id: usize) -> Result<(), Stop> {
        if self.nodes[id].depth >= self.opts.max_depth {
            self.depth_capped = true;
            return Ok(());
        }
        let label = self.nodes[id].label.clone();
        let via = self.nodes[id].parent.as_ref().map(|(_, t)| t.clone());
        for k in 0..self.transitions.len() {
            let t = &self.transitions[k];
            let name = t.name.clone();
            // no τ⁺ directly after τ⁺
            if t.is_accelerated() && via.as_deref() == Some(name.as_str()) {
                continue;
            }
            let pre = match preimage(t, &label) {
                Ok(f) => simplify(&f),
                Err(e) => return Err(Stop::Solver(SmtError::Protocol(e.to_string()))),
            };
            self.add_node(pre, Some((id, name)))?;
        }
        Ok(())
    }

    fn run(&mut self, deadline: Instant) -> Result<Verdict, Stop> {
        self.add_node(Formula::pc(&self.program.error.clone()), None)?;
        while let Some(id) = self.queue.pop_front() {
            if Instant::now() > deadline {
                return Err(Stop::Budget);
            }
            if self.nodes[id].deleted || self.nodes[id].mark != Mark::Unchecked {
                continue;
            }
            match self.check(id)? {
                Check::Unsafe(trace, witness) => return Err(Stop::Verdict(self.unsafe_verdict(trace, witness))),
                Check::Covered => {
                    if !matches!(self.nodes[id].mark, Mark::Covered(_)) {
                        self.nodes[id].mark = Mark::Covered(Vec::new());
                    }
                }
                Check::Pruned => {}
                Check::Checked => {
                    self.nodes[id].mark = Mark::Checked;
                    self.log(Event::Checked { node: id });
                    if !self.nodes[id].pruned {
                        self.expand(id)?;
                    }
                }
            }
        }
        if self.depth_capped {
            return Err(Stop::Budget);
        }
        Ok(Verdict::Safe)
    }

    fn unsafe_verdict(&mut self, trace: Vec<String>, witness: Option<Witness>) -> Verdict {
        self.witness_slot = witness;
        Verdict::Unsafe(trace)
    }
}

/// Runs the search. Only a solver that cannot be started is an error; every
/// other failure ends in an `Unknown` verdict.
pub fn backward_search(p: &Program, opts: &Options) -> Result<Outcome, SmtError> {
    let start = Instant::now();
    reseed_fresh(&format!("{p:?}"));
    let program = if opts.accelerate { preprocess(p) } else { p.clone() };
    let mut transitions: Vec<Transition> = program
        .transitions
        .iter()
        .filter(|t| t.is_accelerated())
        .cloned()
        .collect();
    transitions.extend(program.transitions.iter().filter(|t| !t.is_accelerated()).cloned());
    let mut cfg = opts.solver.clone();
    cfg.inst_cap = opts.inst_cap;
    let solver = Solver::new(cfg)?;
    let mut s = Search {
        program,
        transitions,
        opts,
        solver,
        nodes: Vec::new(),
        queue: VecDeque::new(),
        events: Vec::new(),
        abstractions: Vec::new(),
        pruned: 0,
        depth_capped: false,
        witness_slot: None,
    };
    let verdict = match s.run(start + opts.timeout) {
        Ok(v) | Err(Stop::Verdict(v)) => v,
        Err(Stop::Budget) => Verdict::Unknown(UnknownReason::Budget),
        Err(Stop::Cap) => Verdict::Unknown(UnknownReason::InstantiationCap),
        Err(Stop::Solver(e)) => {
            info!("solver failure: {e}");
            Verdict::Unknown(UnknownReason::Solver)
        }
    };
    s.log(Event::Verdict {
        verdict: verdict.to_string(),
    });
    let stats = Stats {
        nodes: s.nodes.len(),
        solver_calls: s.solver.stats.calls,
        pruned: s.pruned,
        elapsed_ms: start.elapsed().as_millis(),
    };
    Ok(Outcome {
        verdict,
        stats,
        witness: s.witness_slot.take(),
        events: s.events,
        abstractions: s.abstractions,
        tree: s.nodes,
    })
}
