//! PCTL over configurations with regular valuations: syntax, negation
//! pushing, and the qualitative model checker whose satisfaction sets are
//! returned as automata.

mod formula;
mod qualitative;

use std::collections::BTreeMap;

use thiserror::Error;

pub use formula::{parse_formula, Bound, Formula};
pub use qualitative::{
    check_qualitative, sat_next_qual, sat_next_quant, sat_until_eq0, sat_until_eq1, QualMode,
};

use crate::equations::EqError;
use crate::model::{normalize, Ppda};
use crate::regsets::{reduce_to_simple, DeltaAutomaton, Definitions, RegError, SimpleSet};
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum PctlError {
    #[error("bound {0} is not qualitative")]
    NonQualitative(String),
    #[error("undecided: {0}")]
    Undecided(String),
    #[error("unknown atomic proposition `{0}`")]
    UnknownAtom(String),
    #[error(transparent)]
    Regular(#[from] RegError),
    #[error(transparent)]
    Equations(#[from] EqError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Atomic propositions interpreted as regular sets of configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularValuation {
    num_control: usize,
    num_symbols: usize,
    map: BTreeMap<String, DeltaAutomaton>,
}

impl RegularValuation {
    pub fn new(ppda: &Ppda) -> Self {
        RegularValuation {
            num_control: ppda.num_states(),
            num_symbols: ppda.num_symbols(),
            map: BTreeMap::new(),
        }
    }

    /// Every set defined in `defs`.
    pub fn from_definitions(ppda: &Ppda, defs: &Definitions) -> Self {
        let mut v = Self::new(ppda);
        for (name, set) in &defs.sets {
            v.map.insert(name.clone(), set.to_automaton(ppda));
        }
        v
    }

    pub fn insert(&mut self, name: impl Into<String>, aut: DeltaAutomaton) -> Result<(), PctlError> {
        if aut.num_control() != self.num_control || aut.num_symbols() != self.num_symbols {
            return Err(RegError::DimensionMismatch {
                left: (self.num_control, self.num_symbols),
                right: (aut.num_control(), aut.num_symbols()),
            }
            .into());
        }
        self.map.insert(name.into(), aut);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DeltaAutomaton> {
        self.map.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Binds every atom of `f` missing from the valuation that reads `atX`
    /// for a stack symbol `X` to the configurations topped by `X`.
    pub fn complete(&mut self, ppda: &Ppda, f: &Formula) -> Result<(), PctlError> {
        for atom in f.atoms() {
            if self.map.contains_key(atom) {
                continue;
            }
            let symbol = atom.strip_prefix("at").and_then(|x| ppda.symbol_id(x));
            match symbol {
                Some(x) => {
                    let set = SimpleSet::topped_by(ppda, x);
                    self.map.insert(atom.to_string(), set.to_automaton(ppda.num_states(), ppda.num_symbols()));
                }
                None => return Err(PctlError::UnknownAtom(atom.to_string())),
            }
        }
        Ok(())
    }

    fn lift(&self, num_control: usize, num_symbols: usize) -> BTreeMap<String, DeltaAutomaton> {
        self.map
            .iter()
            .map(|(k, a)| (k.clone(), a.lift(num_control, num_symbols)))
            .collect()
    }
}

/// An equivalent formula without negations, with negated atoms replaced by
/// fresh atoms `!a` bound to complemented sets.
pub fn negation_free(f: &Formula, v: &RegularValuation) -> Result<(Formula, RegularValuation), PctlError> {
    fn replace(f: &Formula, v: &RegularValuation, out: &mut RegularValuation) -> Result<Formula, PctlError> {
        Ok(match f {
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Atom(a) => {
                    let aut = v.get(a).ok_or_else(|| PctlError::UnknownAtom(a.clone()))?;
                    let name = format!("!{a}");
                    out.map.insert(name.clone(), aut.complement());
                    Formula::Atom(name)
                }
                _ => unreachable!("negations sit on atoms"),
            },
            Formula::And(a, b) => Formula::and(replace(a, v, out)?, replace(b, v, out)?),
            Formula::Or(a, b) => Formula::or(replace(a, v, out)?, replace(b, v, out)?),
            Formula::Next(bound, g) => Formula::next(bound.clone(), replace(g, v, out)?),
            Formula::Until(bound, a, b) => Formula::until(bound.clone(), replace(a, v, out)?, replace(b, v, out)?),
            Formula::Atom(a) if v.get(a).is_none() => return Err(PctlError::UnknownAtom(a.clone())),
            other => other.clone(),
        })
    }
    let pushed = f.push_negations(false);
    let mut out = v.clone();
    let g = replace(&pushed, v, &mut out)?;
    Ok((g, out))
}

/// Until strategy: satisfaction set over a product system whose operands are simple.
pub(crate) type UntilSat<'a, E> = dyn FnMut(&Ppda, &SimpleSet, &SimpleSet, &Bound) -> Result<DeltaAutomaton, E> + 'a;

/// Evaluation of formulas over the normalized system.
///
/// Next operators use the original rules, so a long rule is one step.
/// Until operators run on the normalized rules, where configurations headed
/// by a fresh state or symbol are intermediate and count as `φ ∧ ¬ψ`.
pub(crate) struct Evaluator {
    num_control: usize,
    num_symbols: usize,
    normalized: Ppda,
    original_rules: Ppda,
    fresh: DeltaAutomaton,
    valuation: BTreeMap<String, DeltaAutomaton>,
}

impl Evaluator {
    pub(crate) fn new(ppda: &Ppda, valuation: &RegularValuation) -> Result<Self, PctlError> {
        let normalized = normalize(ppda).ppda;
        let (nq2, ng2) = (normalized.num_states(), normalized.num_symbols());
        let (nq, ng) = (ppda.num_states(), ppda.num_symbols());
        let original_rules = Ppda::new(
            normalized.state_names().to_vec(),
            normalized.symbol_names().to_vec(),
            ppda.rules().to_vec(),
        )
        .expect("original rules fit the normalized alphabet")
        .with_stateless_syntax(ppda.stateless_syntax());
        let fresh = DeltaAutomaton::from_top_two(nq2, ng2, |p, top, _| {
            p.index() >= nq || top.is_some_and(|x| x.index() >= ng)
        });
        if valuation.num_control != nq || valuation.num_symbols != ng {
            return Err(RegError::DimensionMismatch {
                left: (nq, ng),
                right: (valuation.num_control, valuation.num_symbols),
            }
            .into());
        }
        Ok(Evaluator {
            num_control: nq,
            num_symbols: ng,
            valuation: valuation.lift(nq2, ng2),
            normalized,
            original_rules,
            fresh,
        })
    }

    pub(crate) fn eval<E: From<PctlError>>(&self, f: &Formula, until: &mut UntilSat<'_, E>) -> Result<DeltaAutomaton, E> {
        let (nq, ng) = (self.normalized.num_states(), self.normalized.num_symbols());
        let reg = |e: RegError| E::from(PctlError::from(e));
        Ok(match f {
            Formula::True => DeltaAutomaton::universal(nq, ng),
            Formula::False => DeltaAutomaton::empty(nq, ng),
            Formula::Atom(a) => self
                .valuation
                .get(a)
                .cloned()
                .ok_or_else(|| E::from(PctlError::UnknownAtom(a.clone())))?,
            Formula::Not(g) => self.eval(g, until)?.complement(),
            Formula::And(a, b) => self.eval(a, until)?.intersect(&self.eval(b, until)?).map_err(reg)?,
            Formula::Or(a, b) => self.eval(a, until)?.union(&self.eval(b, until)?).map_err(reg)?,
            Formula::Next(bound, g) => match bound.trivial() {
                Some(all) => Self::constant(all, nq, ng),
                None => {
                    let target = self.eval(g, until)?;
                    let red = reduce_to_simple(&self.original_rules, &[target]).map_err(reg)?;
                    red.map_back(&sat_next_quant(&red.product, &red.simple_images[0], bound)).map_err(reg)?
                }
            },
            Formula::Until(bound, a, b) => match bound.trivial() {
                Some(all) => Self::constant(all, nq, ng),
                None => {
                    let c1 = self.eval(a, until)?.union(&self.fresh).map_err(reg)?;
                    let c2 = self.eval(b, until)?.intersect(&self.fresh.complement()).map_err(reg)?;
                    let red = reduce_to_simple(&self.normalized, &[c1, c2]).map_err(reg)?;
                    let sat = until(&red.product, &red.simple_images[0], &red.simple_images[1], bound)?;
                    red.map_back(&sat).map_err(reg)?
                }
            },
        })
    }

    fn constant(all: bool, nq: usize, ng: usize) -> DeltaAutomaton {
        if all {
            DeltaAutomaton::universal(nq, ng)
        } else {
            DeltaAutomaton::empty(nq, ng)
        }
    }

    /// The satisfaction set on configurations of the input system.
    pub(crate) fn project(&self, a: &DeltaAutomaton) -> DeltaAutomaton {
        a.restrict(self.num_control, self.num_symbols)
    }
}
