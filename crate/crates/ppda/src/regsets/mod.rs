//! Sets of configurations: head-defined simple sets, regular sets given by
//! bottom-up automata, and the product reduction turning regular sets into
//! simple ones.

mod automaton;
mod parse;
mod reduction;

use std::collections::BTreeSet;

pub use automaton::{bool_ops, BoolOp, DeltaAutomaton, TopDownDfa};
pub(crate) use automaton::explore;
pub use parse::{parse_definitions, parse_set_expr, Definitions};
pub use reduction::{reduce_to_simple, RegSimReduction};

use crate::model::{Configuration, Head, Ppda, StateId, SymbolId};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegError {
    #[error("automata over ({}, {}) and ({}, {}) control states and symbols cannot be combined", left.0, left.1, right.0, right.1)]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("state {state} lacks a transition for some symbol")]
    NotTotal { state: usize },
    #[error("malformed automaton: {0}")]
    Shape(String),
}

/// A set of configurations decided by the head alone: `pXβ` is a member iff
/// `pX` is listed, `pε` iff `p` is listed among the empty-stack states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimpleSet {
    heads: BTreeSet<Head>,
    eps: BTreeSet<StateId>,
}

impl SimpleSet {
    pub fn new(heads: BTreeSet<Head>, eps: BTreeSet<StateId>) -> Self {
        SimpleSet { heads, eps }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(ppda: &Ppda) -> Self {
        SimpleSet {
            heads: ppda.heads().collect(),
            eps: ppda.states().collect(),
        }
    }

    /// Every empty-stack configuration.
    pub fn all_eps(ppda: &Ppda) -> Self {
        SimpleSet {
            heads: BTreeSet::new(),
            eps: ppda.states().collect(),
        }
    }

    /// Configurations with `symbol` on top, in any control state.
    pub fn topped_by(ppda: &Ppda, symbol: SymbolId) -> Self {
        SimpleSet {
            heads: ppda.states().map(|p| Head::new(p, symbol)).collect(),
            eps: BTreeSet::new(),
        }
    }

    /// Configurations without successors: empty stacks and stuck heads.
    pub fn dead(ppda: &Ppda) -> Self {
        SimpleSet {
            heads: ppda.heads().filter(|&h| ppda.is_stuck(h)).collect(),
            eps: ppda.states().collect(),
        }
    }

    pub fn heads(&self) -> &BTreeSet<Head> {
        &self.heads
    }

    pub fn eps(&self) -> &BTreeSet<StateId> {
        &self.eps
    }

    pub fn contains_head(&self, h: Head) -> bool {
        self.heads.contains(&h)
    }

    pub fn contains_eps(&self, p: StateId) -> bool {
        self.eps.contains(&p)
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        match c.head() {
            Some(h) => self.contains_head(h),
            None => self.contains_eps(c.state),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty() && self.eps.is_empty()
    }

    pub fn union(&self, other: &Self) -> Self {
        SimpleSet {
            heads: &self.heads | &other.heads,
            eps: &self.eps | &other.eps,
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        SimpleSet {
            heads: &self.heads & &other.heads,
            eps: &self.eps & &other.eps,
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        SimpleSet {
            heads: &self.heads - &other.heads,
            eps: &self.eps - &other.eps,
        }
    }

    pub fn complement(&self, ppda: &Ppda) -> Self {
        SimpleSet::all(ppda).difference(self)
    }

    pub fn to_automaton(&self, num_control: usize, num_symbols: usize) -> DeltaAutomaton {
        // State p is the empty stack; state (p, X) remembers the last symbol read.
        let initial = (0..num_control).map(|p| (p, None)).collect();
        explore(
            num_control,
            num_symbols,
            initial,
            |&(p, _), x| (p, Some(x)),
            |&(p, top)| {
                let p = StateId(p as u32);
                match top {
                    Some(x) => self.contains_head(Head::new(p, x)),
                    None => self.contains_eps(p),
                }
            },
        )
        .minimize()
    }
}

pub fn simple_to_automaton(ppda: &Ppda, set: &SimpleSet) -> DeltaAutomaton {
    set.to_automaton(ppda.num_states(), ppda.num_symbols())
}

/// Drops the empty-stack configurations.
pub fn derived_bullet(set: &SimpleSet) -> SimpleSet {
    SimpleSet {
        heads: set.heads.clone(),
        eps: BTreeSet::new(),
    }
}

/// A configuration set given either by its heads or by an automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigSet {
    Simple(SimpleSet),
    Regular(DeltaAutomaton),
}

impl ConfigSet {
    pub fn to_automaton(&self, ppda: &Ppda) -> DeltaAutomaton {
        match self {
            ConfigSet::Simple(s) => simple_to_automaton(ppda, s),
            ConfigSet::Regular(a) => a.clone(),
        }
    }

    /// The simple set with the same members, when there is one.
    pub fn as_simple(&self) -> Option<SimpleSet> {
        match self {
            ConfigSet::Simple(s) => Some(s.clone()),
            ConfigSet::Regular(a) => a.as_simple(),
        }
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        match self {
            ConfigSet::Simple(s) => s.contains(c),
            ConfigSet::Regular(a) => a.accepts(c),
        }
    }
}

/// Every configuration with stack length at most `max_len`, shortest first.
pub fn configurations_up_to(ppda: &Ppda, max_len: usize) -> Vec<Configuration> {
    let mut words: Vec<Vec<SymbolId>> = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<SymbolId>| {
                ppda.symbols().map(move |x| {
                    let mut v = vec![x];
                    v.extend_from_slice(w);
                    v
                })
            })
            .collect();
        words.extend(layer.iter().cloned());
    }
    words
        .iter()
        .flat_map(|w| ppda.states().map(move |p| Configuration::new(p, w.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bernoulli;
    use crate::model::parse_configuration;
    use crate::rat;

    fn word_automaton(ppda: &Ppda, accepted: &[&str]) -> DeltaAutomaton {
        // Union of single-word automata built through simple sets and products.
        let mut acc = DeltaAutomaton::empty(ppda.num_states(), ppda.num_symbols());
        for w in accepted {
            let c = parse_configuration(ppda, w).unwrap();
            let single = single_word(ppda, &c);
            acc = acc.union(&single).unwrap();
        }
        acc
    }

    fn single_word(ppda: &Ppda, c: &Configuration) -> DeltaAutomaton {
        let target: Vec<SymbolId> = c.stack.iter().rev().copied().collect();
        let initial = ppda.states().map(|p| (p.index(), Some(0usize))).collect();
        explore(
            ppda.num_states(),
            ppda.num_symbols(),
            initial,
            |&(p, read), x| match read {
                Some(k) if k < target.len() && target[k] == x => (p, Some(k + 1)),
                _ => (p, None),
            },
            |&(p, read)| p == c.state.index() && read == Some(target.len()),
        )
    }

    #[test]
    fn single_word_language() {
        let walk = bernoulli(&rat(1, 2));
        let a = word_automaton(&walk, &["Z"]);
        assert!(a.accepts(&parse_configuration(&walk, "Z").unwrap()));
        assert!(!a.accepts(&parse_configuration(&walk, "IZ").unwrap()));
        let u = DeltaAutomaton::universal(1, 3);
        assert!(configurations_up_to(&walk, 3).iter().all(|c| u.accepts(c)));
    }

    #[test]
    fn even_length_z_bottom() {
        let walk = bernoulli(&rat(1, 2));
        // States: p (start), 1 = odd length ending Z, 2 = even length ending Z, 3 = sink.
        let z = 0;
        let mut trans = vec![vec![3; 3]; 4];
        trans[0][z] = 1;
        for x in 0..3 {
            trans[1][x] = 2;
            trans[2][x] = 1;
        }
        let a = DeltaAutomaton::new(1, 3, trans, vec![false, false, true, false]).unwrap();
        for c in configurations_up_to(&walk, 4) {
            let expected = c.stack.last() == Some(&SymbolId(0)) && c.len() % 2 == 0;
            assert_eq!(a.accepts(&c), expected, "{}", walk.display_config(&c));
        }
        assert!(a.accepts(&parse_configuration(&walk, "IZ").unwrap()));
        assert!(!a.accepts(&parse_configuration(&walk, "IIZ").unwrap()));
    }

    #[test]
    fn boolean_laws() {
        let walk = bernoulli(&rat(1, 2));
        let a = word_automaton(&walk, &["Z", "IZ", "DIZ"]);
        let b = simple_to_automaton(&walk, &SimpleSet::topped_by(&walk, SymbolId(1)));
        let configs = configurations_up_to(&walk, 5);
        let cc = a.complement().complement();
        let dm_left = a.union(&b).unwrap().complement();
        let dm_right = a.complement().intersect(&b.complement()).unwrap();
        for c in &configs {
            assert_eq!(cc.accepts(c), a.accepts(c));
            assert_eq!(dm_left.accepts(c), dm_right.accepts(c));
        }
        assert!(a.intersect(&a.complement()).unwrap().is_empty());
        assert!(a.equivalent(&cc).unwrap());
        let u = word_automaton(&walk, &["Z", "IZ"]);
        let members: Vec<_> = configurations_up_to(&walk, 3)
            .into_iter()
            .filter(|c| u.accepts(c))
            .map(|c| walk.display_config(&c))
            .collect();
        assert_eq!(members, ["Z", "IZ"]);
        assert!(a.union(&DeltaAutomaton::empty(2, 3)).is_err());
    }

    #[test]
    fn simple_sets_as_automata() {
        let walk = bernoulli(&rat(1, 2));
        let p = StateId(0);
        let z_top = SimpleSet::new([Head::new(p, SymbolId(0))].into(), BTreeSet::new());
        let eps_only = SimpleSet::new(BTreeSet::new(), [p].into());
        let both = z_top.union(&eps_only);
        for c in configurations_up_to(&walk, 3) {
            let z = c.stack.first() == Some(&SymbolId(0));
            assert_eq!(simple_to_automaton(&walk, &z_top).accepts(&c), z);
            assert_eq!(simple_to_automaton(&walk, &eps_only).accepts(&c), c.is_empty());
            assert_eq!(simple_to_automaton(&walk, &both).accepts(&c), z || c.is_empty());
        }
        assert_eq!(derived_bullet(&both), z_top);
        assert!(derived_bullet(&eps_only).is_empty());
        assert_eq!(simple_to_automaton(&walk, &both).as_simple(), Some(both));
        assert_eq!(word_automaton(&walk, &["Z"]).as_simple(), None);
    }

    #[test]
    fn lifting_rejects_new_states_and_symbols() {
        let walk = bernoulli(&rat(1, 2));
        let a = simple_to_automaton(&walk, &SimpleSet::all(&walk));
        let lifted = a.lift(2, 4);
        assert!(lifted.accepts(&Configuration::new(StateId(0), vec![SymbolId(2), SymbolId(0)])));
        assert!(!lifted.accepts(&Configuration::new(StateId(0), vec![SymbolId(3)])));
        assert!(!lifted.accepts(&Configuration::new(StateId(0), vec![SymbolId(0), SymbolId(3)])));
        assert!(!lifted.accepts(&Configuration::empty(StateId(1))));
    }
}
