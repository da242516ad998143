//! Programs as sets of guarded assignments over arrays and integer constants,
//! with symbolic composition and preimage.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::SystemError;
use crate::logic::{fresh_name, simplify, simplify_term, Formula, Lambda, Linear, Subst, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub arrays: Vec<String>,
    pub consts: Vec<String>,
    pub locations: Vec<String>,
    pub init: String,
    pub error: String,
    /// Extra constraint on initial states besides `pc = init`; `True` when absent.
    pub init_cond: Formula,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Original,
    /// Acceleration of the named (possibly composite) transition.
    Accelerated(String),
}

/// The `∀ vars. body` conjunct of a Σ⁰₂-assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UGuard {
    pub vars: Vec<String>,
    pub body: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    pub from: String,
    pub to: String,
    pub exist_vars: Vec<String>,
    /// Quantifier-free over constants, arrays and `exist_vars`.
    pub guard: Formula,
    pub uguard: Option<UGuard>,
    pub array_updates: BTreeMap<String, Lambda>,
    pub const_updates: BTreeMap<String, Term>,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TransitionKind {
    GroundAsg,
    Sigma01Asg,
    Sigma02Asg,
}

impl Transition {
    pub fn kind(&self) -> TransitionKind {
        match (&self.uguard, self.exist_vars.is_empty()) {
            (Some(_), _) => TransitionKind::Sigma02Asg,
            (None, true) => TransitionKind::GroundAsg,
            (None, false) => TransitionKind::Sigma01Asg,
        }
    }

    pub fn is_accelerated(&self) -> bool {
        matches!(self.origin, Origin::Accelerated(_))
    }

    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }

    /// Constant updates that are not the identity.
    pub fn changed_consts(&self) -> BTreeMap<&str, &Term> {
        self.const_updates
            .iter()
            .filter(|(c, t)| **t != Term::Const((*c).clone()))
            .map(|(c, t)| (c.as_str(), t))
            .collect()
    }

    /// Array updates that are not the identity.
    pub fn changed_arrays(&self) -> BTreeMap<&str, &Lambda> {
        self.array_updates
            .iter()
            .filter(|(a, l)| !l.is_identity_for(a))
            .map(|(a, l)| (a.as_str(), l))
            .collect()
    }

    /// A copy with all bound variables (existential, universal, lambda)
    /// renamed to fresh names.
    pub fn refreshed(&self) -> Transition {
        let mut s = Subst::default();
        let exist_vars: Vec<String> = self
            .exist_vars
            .iter()
            .map(|v| {
                let n = fresh_name(v);
                s.vars.insert(v.clone(), Term::Var(n.clone()));
                n
            })
            .collect();
        let uguard = self.uguard.as_ref().map(|u| {
            let mut su = s.clone();
            let vars = u
                .vars
                .iter()
                .map(|v| {
                    let n = fresh_name(v);
                    su.vars.insert(v.clone(), Term::Var(n.clone()));
                    n
                })
                .collect();
            UGuard {
                vars,
                body: su.formula(&u.body),
            }
        });
        let array_updates = self
            .array_updates
            .iter()
            .map(|(a, l)| {
                let mut sl = s.clone();
                let var = fresh_name(&l.var);
                sl.vars.insert(l.var.clone(), Term::Var(var.clone()));
                (
                    a.clone(),
                    Lambda {
                        var,
                        body: sl.term(&l.body),
                    },
                )
            })
            .collect();
        Transition {
            name: self.name.clone(),
            from: self.from.clone(),
            to: self.to.clone(),
            exist_vars,
            guard: s.formula(&self.guard),
            uguard,
            array_updates,
            const_updates: self.const_updates.iter().map(|(c, t)| (c.clone(), s.term(t))).collect(),
            origin: self.origin.clone(),
        }
    }

    /// Substitution replacing every state symbol by its post-state term.
    fn post_state(&self) -> Subst {
        Subst {
            consts: self.const_updates.clone(),
            arrays: self.array_updates.clone(),
            pc: Some(self.to.clone()),
            ..Subst::default()
        }
    }

    /// `0 ≤ u` for every constant update `u` that may leave the naturals.
    pub fn natural_post(&self) -> Vec<Formula> {
        self.changed_consts()
            .into_values()
            .filter(|u| !surely_natural(u))
            .map(|u| Formula::le(Term::Num(0), u.clone()))
            .collect()
    }

    /// Guard and universal guard together (without the location literal).
    pub fn full_guard(&self) -> Formula {
        let mut parts = vec![self.guard.clone()];
        if let Some(u) = &self.uguard {
            parts.push(Formula::forall(u.vars.clone(), u.body.clone()));
        }
        Formula::and(parts)
    }
}

fn surely_natural(t: &Term) -> bool {
    let lin = Linear::of(t);
    lin.constant >= 0
        && lin
            .coeffs
            .iter()
            .all(|(a, k)| *k > 0 && matches!(a, Term::Const(_) | Term::Var(_) | Term::App(..)))
}

/// `Pre(t, k)`: states with a `t`-successor satisfying `k`.
///
/// The result is `pc = from ∧ ∃k̃ (guard ∧ ∀j̃ ψ ∧ k[updates])`, with array
/// writes expanded. It is not simplified.
pub fn preimage(t: &Transition, k: &Formula) -> Result<Formula, SystemError> {
    if let Some(p) = k.consts().into_iter().find(|c| c.ends_with('\'')) {
        return Err(SystemError::PrimedSymbol(p));
    }
    let t = t.refreshed();
    let post = t.post_state().formula(k);
    let mut body = vec![t.guard.clone()];
    body.extend(t.natural_post());
    if let Some(u) = &t.uguard {
        body.push(Formula::forall(u.vars.clone(), u.body.clone()));
    }
    body.push(post);
    Ok(Formula::and(vec![
        Formula::pc(&t.from),
        Formula::exists(t.exist_vars.clone(), Formula::and(body)),
    ]))
}

/// Sequential composition `t1 ; t2`, or `None` on a location mismatch.
pub fn compose(t1: &Transition, t2: &Transition) -> Option<Transition> {
    if t1.to != t2.from {
        return None;
    }
    let t1 = t1.refreshed();
    let t2 = t2.refreshed();
    let mid = Subst {
        consts: t1.const_updates.clone(),
        arrays: t1.array_updates.clone(),
        ..Subst::default()
    };
    let mut guard = vec![t1.guard.clone()];
    guard.extend(t1.natural_post());
    guard.push(mid.formula(&t2.guard));
    let guard = simplify(&Formula::and(guard));
    let uguard = match (&t1.uguard, &t2.uguard) {
        (None, None) => None,
        (a, b) => {
            let mut vars = Vec::new();
            let mut body = Vec::new();
            if let Some(u) = a {
                vars.extend(u.vars.clone());
                body.push(u.body.clone());
            }
            if let Some(u) = b {
                vars.extend(u.vars.clone());
                body.push(mid.formula(&u.body));
            }
            Some(UGuard {
                vars,
                body: simplify(&Formula::and(body)),
            })
        }
    };
    let const_updates = t2
        .const_updates
        .iter()
        .map(|(c, t)| (c.clone(), simplify_term(&mid.term(t))))
        .collect();
    let array_updates = t2
        .array_updates
        .iter()
        .map(|(a, l)| {
            (
                a.clone(),
                Lambda {
                    var: l.var.clone(),
                    body: simplify_term(&mid.term(&l.body)),
                },
            )
        })
        .collect();
    let mut exist_vars = t1.exist_vars.clone();
    exist_vars.extend(t2.exist_vars.clone());
    Some(Transition {
        name: format!("{}.{}", t1.name, t2.name),
        from: t1.from.clone(),
        to: t2.to.clone(),
        exist_vars,
        guard,
        uguard,
        array_updates,
        const_updates,
        origin: Origin::Original,
    })
}

impl Program {
    /// Fills in identity updates for every undeclared target and checks that
    /// all referenced symbols are declared.
    pub fn validate(mut self) -> Result<Program, SystemError> {
        let locs: BTreeSet<&String> = self.locations.iter().collect();
        for l in [&self.init, &self.error] {
            if !locs.contains(l) {
                return Err(SystemError::Undeclared {
                    kind: "location",
                    name: l.clone(),
                });
            }
        }
        if self.init == self.error {
            return Err(SystemError::InitIsError(self.init.clone()));
        }
        let mut names = BTreeSet::new();
        let arrays: BTreeSet<String> = self.arrays.iter().cloned().collect();
        let consts: BTreeSet<String> = self.consts.iter().cloned().collect();
        self.check_formula(&self.init_cond, &arrays, &consts, "initial condition")?;
        for t in &mut self.transitions {
            if !names.insert(t.name.clone()) {
                return Err(SystemError::DuplicateTransition(t.name.clone()));
            }
            for l in [&t.from, &t.to] {
                if !locs.contains(l) {
                    return Err(SystemError::Undeclared {
                        kind: "location",
                        name: l.clone(),
                    });
                }
            }
            if !t.guard.is_quantifier_free() {
                return Err(SystemError::Malformed(
                    t.name.clone(),
                    "guard must be quantifier-free".into(),
                ));
            }
            for a in t.array_updates.keys() {
                if !arrays.contains(a) {
                    return Err(SystemError::Undeclared {
                        kind: "array",
                        name: a.clone(),
                    });
                }
            }
            for c in t.const_updates.keys() {
                if !consts.contains(c) {
                    return Err(SystemError::Undeclared {
                        kind: "constant",
                        name: c.clone(),
                    });
                }
            }
            for a in &self.arrays {
                t.array_updates.entry(a.clone()).or_insert_with(|| Lambda::identity(a));
            }
            for c in &self.consts {
                t.const_updates
                    .entry(c.clone())
                    .or_insert_with(|| Term::Const(c.clone()));
            }
        }
        for t in &self.transitions {
            let mut fs = vec![t.full_guard()];
            fs.extend(t.const_updates.values().map(|u| Formula::eq(u.clone(), u.clone())));
            fs.extend(
                t.array_updates
                    .values()
                    .map(|l| Formula::eq(l.body.clone(), l.body.clone())),
            );
            for f in fs {
                self.check_formula(&f, &arrays, &consts, &t.name)?;
            }
        }
        Ok(self)
    }

    fn check_formula(
        &self,
        f: &Formula,
        arrays: &BTreeSet<String>,
        consts: &BTreeSet<String>,
        _ctx: &str,
    ) -> Result<(), SystemError> {
        if let Some(a) = f.arrays().into_iter().find(|a| !arrays.contains(a)) {
            return Err(SystemError::Undeclared { kind: "array", name: a });
        }
        if let Some(c) = f.consts().into_iter().find(|c| !consts.contains(c)) {
            return Err(SystemError::Undeclared {
                kind: "constant",
                name: c,
            });
        }
        Ok(())
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.name == name)
    }

    pub fn location_code(&self, l: &str) -> Option<usize> {
        self.locations.iter().position(|x| x == l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{classify, ArrayTerm, SentenceClass};

    fn c(n: &str) -> Term {
        Term::cst(n)
    }

    fn reverse_tau2() -> Transition {
        let j = "j".to_string();
        let mut au = BTreeMap::new();
        au.insert(
            "O".to_string(),
            Lambda {
                var: j.clone(),
                body: Term::read(
                    ArrayTerm::sym("O").store(c("c"), Term::app("I", c("N") - c("c"))),
                    Term::var(&j),
                )
                .expand_writes(),
            },
        );
        au.insert("I".into(), Lambda::identity("I"));
        let mut cu = BTreeMap::new();
        cu.insert("c".to_string(), c("c") + Term::num(1));
        cu.insert("N".to_string(), c("N"));
        Transition {
            name: "t2".into(),
            from: "l2".into(),
            to: "l2".into(),
            exist_vars: vec![],
            guard: Formula::ne(c("c"), c("N") + Term::num(1)),
            uguard: None,
            array_updates: au,
            const_updates: cu,
            origin: Origin::Original,
        }
    }

    #[test]
    fn kinds() {
        let t = reverse_tau2();
        assert_eq!(t.kind(), TransitionKind::GroundAsg);
        let mut e = t.clone();
        e.exist_vars.push("z".into());
        assert_eq!(e.kind(), TransitionKind::Sigma01Asg);
        e.uguard = Some(UGuard {
            vars: vec!["j".into()],
            body: Formula::True,
        });
        assert_eq!(e.kind(), TransitionKind::Sigma02Asg);
    }

    #[test]
    fn preimage_of_false_is_false() {
        let p = preimage(&reverse_tau2(), &Formula::False).unwrap();
        assert_eq!(simplify(&p), Formula::False);
    }

    #[test]
    fn preimage_decides_location() {
        let p = preimage(&reverse_tau2(), &Formula::pc("l3")).unwrap();
        assert_eq!(simplify(&p), Formula::False);
        let p = preimage(&reverse_tau2(), &Formula::pc("l2")).unwrap();
        assert_eq!(classify(&p), SentenceClass::Ground);
    }

    #[test]
    fn preimage_rejects_primed_symbols() {
        let k = Formula::eq(c("c'"), Term::num(0));
        assert!(matches!(
            preimage(&reverse_tau2(), &k),
            Err(SystemError::PrimedSymbol(_))
        ));
    }

    #[test]
    fn compose_location_mismatch() {
        let mut t1 = reverse_tau2();
        t1.to = "l3".into();
        assert!(compose(&t1, &t1).is_none());
        let t = reverse_tau2();
        let tt = compose(&t, &t).unwrap();
        assert_eq!(tt.kind(), TransitionKind::GroundAsg);
        assert_eq!(tt.const_updates["c"], c("c") + Term::num(2));
    }
}
