//! Monotonic approximation of ∃∀ sentences by finite instantiation of the
//! universal block.

use std::collections::BTreeMap;

use crate::error::AbstractionError;
use crate::logic::{prenex, simplify, Formula, Prenex, Subst, Term};

pub const DEFAULT_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InstMode {
    /// The existential prefix variables only.
    #[default]
    EVars,
    /// Existential variables plus maximal universal-free index subterms.
    Terms,
    /// Existential variables other than the iteration counts introduced by
    /// acceleration; all existentials when that leaves none.
    Index,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiationSet {
    pub mode: InstMode,
    pub terms: Vec<Term>,
}

/// Instantiation terms for `psi` as prenexed by [`prenex`].
pub fn default_set(psi: &Formula, mode: InstMode) -> InstantiationSet {
    let terms = match prenex(psi) {
        Some(p) => terms_of(&p, mode),
        None => Vec::new(),
    };
    InstantiationSet { mode, terms }
}

fn terms_of(p: &Prenex, mode: InstMode) -> Vec<Term> {
    let mut terms: Vec<Term> = p.exists.iter().map(|v| Term::var(v)).collect();
    if mode == InstMode::Index {
        let index: Vec<Term> = p
            .exists
            .iter()
            .filter(|v| !crate::accel::is_iteration_var(v))
            .map(|v| Term::var(v))
            .collect();
        if !index.is_empty() {
            terms = index;
        }
    }
    if mode == InstMode::Terms {
        let univ = &p.forall;
        let mut extra = Vec::new();
        p.matrix.visit_terms(&mut |t| collect_ground(t, univ, &mut extra));
        for t in extra {
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
    }
    terms
}

// `visit_terms` hands over the top-level atom arguments; descend manually.
fn collect_ground(t: &Term, univ: &[String], out: &mut Vec<Term>) {
    let free = t.free_vars();
    let has_univ = univ.iter().any(|u| free.contains(u));
    match t {
        Term::Num(_) => {}
        Term::App(_, i) => collect_ground(i, univ, out),
        Term::Ite(c, a, b) => {
            c.visit_terms(&mut |s| collect_ground(s, univ, out));
            collect_ground(a, univ, out);
            collect_ground(b, univ, out);
        }
        Term::Read(..) => collect_ground(&t.expand_writes(), univ, out),
        _ if !has_univ && !t.mentions_array() => {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            collect_ground(a, univ, out);
            collect_ground(b, univ, out);
        }
        Term::Mul(_, a) | Term::Div(a, _) => collect_ground(a, univ, out),
        _ => {}
    }
}

/// `⋀_σ matrix[σ]` over all maps σ from `forall` into `terms`, enumerated
/// lexicographically. Instances at terms that are not symbols are guarded
/// by `t ≥ 0`, since universals range over the naturals.
pub fn instantiate(
    matrix: &Formula,
    forall: &[String],
    terms: &[Term],
    cap: usize,
) -> Result<Formula, AbstractionError> {
    if forall.is_empty() {
        return Ok(matrix.clone());
    }
    if terms.is_empty() {
        return Err(AbstractionError::EmptySet);
    }
    let needed = (terms.len() as u64)
        .checked_pow(forall.len() as u32)
        .filter(|n| *n <= cap as u64)
        .ok_or(AbstractionError::Cap {
            needed: (terms.len() as f64).powi(forall.len() as i32).min(usize::MAX as f64) as usize,
            cap,
        })? as usize;
    let mut out = Vec::with_capacity(needed);
    let mut idx = vec![0usize; forall.len()];
    loop {
        let mut map = BTreeMap::new();
        let mut side = Vec::new();
        for (v, &k) in forall.iter().zip(&idx) {
            let t = &terms[k];
            if !matches!(t, Term::Var(_) | Term::Const(_) | Term::Num(_)) {
                side.push(Formula::le(Term::Num(0), t.clone()));
            }
            map.insert(v.clone(), t.clone());
        }
        let inst = Subst::vars(map).formula(matrix);
        out.push(if side.is_empty() {
            inst
        } else {
            Formula::implies(Formula::and(side), inst)
        });
        // next map, last position varying fastest
        let mut pos = forall.len();
        loop {
            if pos == 0 {
                return Ok(Formula::And(out));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < terms.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// The monotonic S-approximation of `psi`. Sentences without universals are
/// returned unchanged; otherwise the result is an existential sentence
/// implied by `psi`.
pub fn monotonic_approx(psi: &Formula, s: &InstantiationSet, cap: usize) -> Result<Formula, AbstractionError> {
    let p = prenex(psi).ok_or(AbstractionError::NotSigma02)?;
    if p.forall.is_empty() {
        return Ok(psi.clone());
    }
    let body = instantiate(&p.matrix, &p.forall, &s.terms, cap)?;
    Ok(simplify(&Formula::exists(p.exists, body)))
}

/// Approximation with the default term set for `mode`.
pub fn abstract_label(psi: &Formula, mode: InstMode, cap: usize) -> Result<Formula, AbstractionError> {
    let p = prenex(psi).ok_or(AbstractionError::NotSigma02)?;
    if p.forall.is_empty() {
        return Ok(psi.clone());
    }
    let terms = terms_of(&p, mode);
    let body = instantiate(&p.matrix, &p.forall, &terms, cap)?;
    Ok(simplify(&Formula::exists(p.exists, body)))
}
