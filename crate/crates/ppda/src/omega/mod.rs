//! ω-regular properties through stack minima: observing automata that read
//! the heads between consecutive minima, deterministic Muller automata, and
//! the finite chain of minima whose bottom components decide acceptance.

mod chain;
mod minima;
mod parse;

use std::collections::BTreeSet;

use thiserror::Error;

pub use chain::{build_min_chain, pop_path_prob, product_observer, ChainBuilder, ChainState, Edge, MinChain, PopPaths};
pub use minima::{footprint, footprint_of, minima, Horizon, PopReach};
pub use parse::{parse_muller, parse_observer};

use crate::equations::EqError;
use crate::model::{Head, Ppda};
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum OmegaError {
    #[error("step table has {found} entries, expected {expected}")]
    StepTable { found: usize, expected: usize },
    #[error("automaton state {0} is out of range")]
    StateRange(usize),
    #[error("automaton reads heads of {found:?} (states, symbols), system has {expected:?}")]
    Dimension {
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("rule `{0}` pushes more than two symbols; minima are defined on normalized systems")]
    NotNormalized(String),
    #[error("cannot decide whether runs from {0} avoid termination with positive probability")]
    IrunUndecided(String),
    #[error("product would need {0} control states")]
    TooLarge(usize),
    #[error(transparent)]
    Equations(#[from] EqError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Which sets of recurring automaton states are accepting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Acceptance {
    /// An explicit family of state sets.
    Sets(BTreeSet<BTreeSet<usize>>),
    /// `S` is accepting iff the union of the labels of its members is in `family`.
    UnionIn {
        labels: Vec<BTreeSet<usize>>,
        family: BTreeSet<BTreeSet<usize>>,
    },
    /// The sets the inner condition rejects.
    Not(Box<Acceptance>),
}

impl Acceptance {
    pub fn sets<I, J>(family: I) -> Self
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = usize>,
    {
        Acceptance::Sets(family.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    pub fn accepts(&self, set: &BTreeSet<usize>) -> bool {
        match self {
            Acceptance::Sets(family) => family.contains(set),
            Acceptance::UnionIn { labels, family } => {
                let union: BTreeSet<usize> = set.iter().flat_map(|&a| labels[a].iter().copied()).collect();
                family.contains(&union)
            }
            Acceptance::Not(inner) => !inner.accepts(set),
        }
    }

    pub fn complement(self) -> Self {
        match self {
            Acceptance::Not(inner) => *inner,
            other => Acceptance::Not(Box::new(other)),
        }
    }

    fn max_state(&self) -> Option<usize> {
        match self {
            Acceptance::Sets(family) => family.iter().flatten().copied().max(),
            Acceptance::UnionIn { labels, .. } => labels.len().checked_sub(1),
            Acceptance::Not(inner) => inner.max_state(),
        }
    }
}

/// Deterministic automaton over heads with a total step table indexed by
/// `state · |heads| + head_index`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct HeadDfa {
    names: Vec<String>,
    num_control: usize,
    num_symbols: usize,
    step: Vec<usize>,
    init: usize,
}

impl HeadDfa {
    fn new(names: Vec<String>, dims: (usize, usize), step: Vec<usize>, init: usize) -> Result<Self, OmegaError> {
        let heads = dims.0 * dims.1;
        let expected = names.len() * heads;
        if step.len() != expected {
            return Err(OmegaError::StepTable {
                found: step.len(),
                expected,
            });
        }
        if let Some(&bad) = step.iter().chain([&init]).find(|&&a| a >= names.len()) {
            return Err(OmegaError::StateRange(bad));
        }
        Ok(HeadDfa {
            names,
            num_control: dims.0,
            num_symbols: dims.1,
            step,
            init,
        })
    }

    fn num_heads(&self) -> usize {
        self.num_control * self.num_symbols
    }

    fn step(&self, a: usize, h: Head) -> usize {
        self.step[a * self.num_heads() + h.state.index() * self.num_symbols + h.symbol.index()]
    }

    fn check(&self, ppda: &Ppda) -> Result<(), OmegaError> {
        let expected = (ppda.num_states(), ppda.num_symbols());
        if (self.num_control, self.num_symbols) != expected {
            return Err(OmegaError::Dimension {
                found: (self.num_control, self.num_symbols),
                expected,
            });
        }
        Ok(())
    }

    /// The same automaton over a system with more states or symbols; new
    /// heads leave the automaton state unchanged.
    fn lift(&self, num_control: usize, num_symbols: usize) -> Self {
        let nh = num_control * num_symbols;
        let mut step = Vec::with_capacity(self.names.len() * nh);
        for a in 0..self.names.len() {
            for p in 0..num_control {
                for x in 0..num_symbols {
                    step.push(if p < self.num_control && x < self.num_symbols {
                        self.step[a * self.num_heads() + p * self.num_symbols + x]
                    } else {
                        a
                    });
                }
            }
        }
        HeadDfa {
            names: self.names.clone(),
            num_control,
            num_symbols,
            step,
            init: self.init,
        }
    }
}

/// Reads the heads of all configurations after a minimum up to and including
/// the next one, restarting from `init` at every minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservingAutomaton {
    dfa: HeadDfa,
    acceptance: Acceptance,
}

impl ObservingAutomaton {
    /// `step[a · |Q||Γ| + head_index]` is the successor of `a` on that head.
    pub fn new(
        names: Vec<String>,
        num_control: usize,
        num_symbols: usize,
        step: Vec<usize>,
        init: usize,
        acceptance: Acceptance,
    ) -> Result<Self, OmegaError> {
        let dfa = HeadDfa::new(names, (num_control, num_symbols), step, init)?;
        if let Some(a) = acceptance.max_state().filter(|&a| a >= dfa.names.len()) {
            return Err(OmegaError::StateRange(a));
        }
        Ok(ObservingAutomaton { dfa, acceptance })
    }

    /// One state, accepting every infinite run.
    pub fn trivial(ppda: &Ppda) -> Self {
        let n = ppda.num_heads();
        Self::new(
            vec!["a0".into()],
            ppda.num_states(),
            ppda.num_symbols(),
            vec![0; n],
            0,
            Acceptance::sets([[0]]),
        )
        .expect("well-formed")
    }

    pub fn num_states(&self) -> usize {
        self.dfa.names.len()
    }

    pub fn name(&self, a: usize) -> &str {
        &self.dfa.names[a]
    }

    pub fn names(&self) -> &[String] {
        &self.dfa.names
    }

    pub fn init(&self) -> usize {
        self.dfa.init
    }

    pub fn step(&self, a: usize, h: Head) -> usize {
        self.dfa.step(a, h)
    }

    /// State reached from `init` after reading `heads`.
    pub fn observe(&self, heads: impl IntoIterator<Item = Head>) -> usize {
        heads.into_iter().fold(self.dfa.init, |a, h| self.dfa.step(a, h))
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn accepts(&self, recurring: &BTreeSet<usize>) -> bool {
        self.acceptance.accepts(recurring)
    }

    pub fn with_acceptance(mut self, acceptance: Acceptance) -> Self {
        self.acceptance = acceptance;
        self
    }

    pub fn check(&self, ppda: &Ppda) -> Result<(), OmegaError> {
        self.dfa.check(ppda)
    }

    /// The observer over a system that extends `self`'s alphabet; added heads
    /// are read without effect.
    pub fn lift(&self, num_control: usize, num_symbols: usize) -> Self {
        ObservingAutomaton {
            dfa: self.dfa.lift(num_control, num_symbols),
            acceptance: self.acceptance.clone(),
        }
    }
}

/// Deterministic Muller automaton reading the head of every configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MullerAutomaton {
    dfa: HeadDfa,
    family: BTreeSet<BTreeSet<usize>>,
}

impl MullerAutomaton {
    pub fn new(
        names: Vec<String>,
        num_control: usize,
        num_symbols: usize,
        step: Vec<usize>,
        init: usize,
        family: BTreeSet<BTreeSet<usize>>,
    ) -> Result<Self, OmegaError> {
        let dfa = HeadDfa::new(names, (num_control, num_symbols), step, init)?;
        if let Some(&b) = family.iter().flatten().find(|&&b| b >= dfa.names.len()) {
            return Err(OmegaError::StateRange(b));
        }
        Ok(MullerAutomaton { dfa, family })
    }

    pub fn num_states(&self) -> usize {
        self.dfa.names.len()
    }

    pub fn name(&self, b: usize) -> &str {
        &self.dfa.names[b]
    }

    pub fn init(&self) -> usize {
        self.dfa.init
    }

    pub fn step(&self, b: usize, h: Head) -> usize {
        self.dfa.step(b, h)
    }

    pub fn family(&self) -> &BTreeSet<BTreeSet<usize>> {
        &self.family
    }

    /// The automaton over a system extending `self`'s alphabet; added heads
    /// leave the state unchanged.
    pub fn lift(&self, num_control: usize, num_symbols: usize) -> Self {
        MullerAutomaton {
            dfa: self.dfa.lift(num_control, num_symbols),
            family: self.family.clone(),
        }
    }

    pub fn check(&self, ppda: &Ppda) -> Result<(), OmegaError> {
        self.dfa.check(ppda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bernoulli, z_observer};
    use crate::rat;

    #[test]
    fn observation_of_head_sequences() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let h = |n: &str| Head::new(crate::model::StateId(0), walk.symbol_id(n).unwrap());
        assert_eq!(obs.observe([h("I"), h("Z")]), 1);
        assert_eq!(obs.observe([]), 0);
        assert_eq!(obs.observe([h("I"), h("D"), h("I")]), 0);
    }

    #[test]
    fn acceptance_forms() {
        let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        let explicit = Acceptance::sets([vec![1]]);
        assert!(explicit.accepts(&s(&[1])) && !explicit.accepts(&s(&[0, 1])));
        let union = Acceptance::UnionIn {
            labels: vec![s(&[]), s(&[0]), s(&[1]), s(&[0, 1])],
            family: [s(&[1])].into(),
        };
        assert!(union.accepts(&s(&[0, 2])) && !union.accepts(&s(&[1, 2])));
        assert!(union.clone().complement().accepts(&s(&[1, 2])));
        assert_eq!(union.clone().complement().complement(), union);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let e = ObservingAutomaton::new(vec!["a".into()], 1, 2, vec![0], 0, Acceptance::sets([[0]]));
        assert!(matches!(e, Err(OmegaError::StepTable { found: 1, expected: 2 })));
        let e = ObservingAutomaton::new(vec!["a".into()], 1, 1, vec![1], 0, Acceptance::sets([[0]]));
        assert!(matches!(e, Err(OmegaError::StateRange(1))));
    }
}
