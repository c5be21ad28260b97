use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use super::{RegError, SimpleSet};
use crate::model::{Configuration, Head, StateId, SymbolId};

/// Deterministic, total automaton reading a stack from the bottom up, started
/// in the state named after the configuration's control state.
///
/// States `0..num_control` are the control states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaAutomaton {
    num_control: usize,
    num_symbols: usize,
    trans: Vec<u32>,
    accepting: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoolOp {
    Complement,
    Intersect,
    Union,
}

/// Deterministic automaton reading a stack top first; used by constructions
/// whose natural direction is top-down before [`DeltaAutomaton::from_top_down`]
/// reverses them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopDownDfa {
    pub init: usize,
    /// `trans[state][symbol]`.
    pub trans: Vec<Vec<usize>>,
    pub accepting: Vec<bool>,
}

impl DeltaAutomaton {
    pub fn new(
        num_control: usize,
        num_symbols: usize,
        trans: Vec<Vec<usize>>,
        accepting: Vec<bool>,
    ) -> Result<Self, RegError> {
        let n = trans.len();
        if n < num_control || accepting.len() != n {
            return Err(RegError::Shape(format!(
                "{n} states with {} acceptance flags cannot host {num_control} control states",
                accepting.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * num_symbols);
        for (s, row) in trans.iter().enumerate() {
            if row.len() != num_symbols {
                return Err(RegError::NotTotal { state: s });
            }
            for &t in row {
                if t >= n {
                    return Err(RegError::Shape(format!("state {s} moves to unknown state {t}")));
                }
                flat.push(t as u32);
            }
        }
        Ok(DeltaAutomaton {
            num_control,
            num_symbols,
            trans: flat,
            accepting,
        })
    }

    /// Accepts every configuration, including empty stacks.
    pub fn universal(num_control: usize, num_symbols: usize) -> Self {
        Self::constant(num_control, num_symbols, true)
    }

    pub fn empty(num_control: usize, num_symbols: usize) -> Self {
        Self::constant(num_control, num_symbols, false)
    }

    fn constant(num_control: usize, num_symbols: usize, accept: bool) -> Self {
        let n = num_control.max(1);
        let trans = (0..n)
            .flat_map(|s| std::iter::repeat(s as u32).take(num_symbols))
            .collect();
        DeltaAutomaton {
            num_control,
            num_symbols,
            trans,
            accepting: vec![accept; n],
        }
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn num_control(&self) -> usize {
        self.num_control
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn step(&self, state: usize, symbol: SymbolId) -> usize {
        self.trans[state * self.num_symbols + symbol.index()] as usize
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    /// State reached after reading `stack` (top first) from the bottom.
    pub fn run(&self, state: StateId, stack: &[SymbolId]) -> usize {
        stack
            .iter()
            .rev()
            .fold(state.index(), |s, &x| self.step(s, x))
    }

    pub fn accepts(&self, c: &Configuration) -> bool {
        self.accepting[self.run(c.state, &c.stack)]
    }

    fn same_shape(&self, other: &Self) -> Result<(), RegError> {
        if self.num_control != other.num_control || self.num_symbols != other.num_symbols {
            return Err(RegError::DimensionMismatch {
                left: (self.num_control, self.num_symbols),
                right: (other.num_control, other.num_symbols),
            });
        }
        Ok(())
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.accepting {
            *a = !*a;
        }
        out
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, RegError> {
        self.product(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Self) -> Result<Self, RegError> {
        self.product(other, |a, b| a || b)
    }

    fn product(&self, other: &Self, combine: impl Fn(bool, bool) -> bool) -> Result<Self, RegError> {
        self.same_shape(other)?;
        let initial = (0..self.num_control).map(|p| (p, p)).collect();
        let out = explore(
            self.num_control,
            self.num_symbols,
            initial,
            |&(s, t), x| (self.step(s, x), other.step(t, x)),
            |&(s, t)| combine(self.accepting[s], other.accepting[t]),
        );
        Ok(out.minimize())
    }

    /// True when no configuration is accepted.
    pub fn is_empty(&self) -> bool {
        self.reachable().iter().all(|&s| !self.accepting[s])
    }

    pub fn equivalent(&self, other: &Self) -> Result<bool, RegError> {
        Ok(self.product(other, |a, b| a != b)?.is_empty())
    }

    fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_states()];
        let mut queue: VecDeque<usize> = (0..self.num_control).collect();
        let mut order = Vec::new();
        for &p in &queue {
            seen[p] = true;
        }
        while let Some(s) = queue.pop_front() {
            order.push(s);
            for x in 0..self.num_symbols {
                let t = self.trans[s * self.num_symbols + x] as usize;
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        order
    }

    /// Merges language-equivalent states and drops unreachable ones. Control
    /// states keep their indices; two control states with the same language
    /// stay separate copies.
    pub fn minimize(&self) -> Self {
        let order = self.reachable();
        let ng = self.num_symbols;
        let mut class: HashMap<usize, usize> = order
            .iter()
            .map(|&s| (s, usize::from(self.accepting[s])))
            .collect();
        let mut count = class.values().collect::<BTreeSet<_>>().len();
        loop {
            let mut sig_index: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
            let mut next = HashMap::with_capacity(order.len());
            for &s in &order {
                let sig = (
                    class[&s],
                    (0..ng)
                        .map(|x| class[&(self.trans[s * ng + x] as usize)])
                        .collect::<Vec<_>>(),
                );
                let fresh = sig_index.len();
                let c = *sig_index.entry(sig).or_insert(fresh);
                next.insert(s, c);
            }
            let new_count = sig_index.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let mut rep_index: HashMap<usize, usize> = HashMap::new();
        let mut reps: Vec<usize> = Vec::new();
        for p in 0..self.num_control {
            rep_index.entry(class[&p]).or_insert(p);
            reps.push(p);
        }
        for &s in &order {
            if let std::collections::hash_map::Entry::Vacant(e) = rep_index.entry(class[&s]) {
                e.insert(reps.len());
                reps.push(s);
            }
        }
        let trans = reps
            .iter()
            .flat_map(|&s| {
                (0..ng).map(|x| rep_index[&class[&(self.trans[s * ng + x] as usize)]] as u32)
                    .collect::<Vec<_>>()
            })
            .collect();
        let accepting = reps.iter().map(|&s| self.accepting[s]).collect();
        DeltaAutomaton {
            num_control: self.num_control,
            num_symbols: ng,
            trans,
            accepting,
        }
    }

    /// The simple set with the same language, if membership only ever depends
    /// on the head (or on the control state for empty stacks).
    pub fn as_simple(&self) -> Option<SimpleSet> {
        let ng = self.num_symbols;
        let mut heads = BTreeSet::new();
        let mut eps = BTreeSet::new();
        for p in 0..self.num_control {
            if self.accepting[p] {
                eps.insert(StateId(p as u32));
            }
            let mut seen = vec![false; self.num_states()];
            let mut stack = vec![p];
            seen[p] = true;
            let mut below = Vec::new();
            while let Some(s) = stack.pop() {
                below.push(s);
                for x in 0..ng {
                    let t = self.trans[s * ng + x] as usize;
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            for x in 0..ng {
                let mut verdicts = below
                    .iter()
                    .map(|&s| self.accepting[self.trans[s * ng + x] as usize]);
                let first = verdicts.next().expect("p reaches itself");
                if verdicts.any(|v| v != first) {
                    return None;
                }
                if first {
                    heads.insert(Head::new(StateId(p as u32), SymbolId(x as u32)));
                }
            }
        }
        Some(SimpleSet::new(heads, eps))
    }

    /// Same language over larger state and symbol sets; the added control
    /// states and symbols lead to rejection.
    pub fn lift(&self, num_control: usize, num_symbols: usize) -> Self {
        assert!(num_control >= self.num_control && num_symbols >= self.num_symbols);
        let old_n = self.num_states();
        let extra_control = num_control - self.num_control;
        // Layout: new control states, then the old states shifted, then a sink.
        let shift = |s: usize| if s < self.num_control { s } else { s + extra_control };
        let n = old_n + extra_control + 1;
        let sink = n - 1;
        let mut trans = vec![sink as u32; n * num_symbols];
        let mut accepting = vec![false; n];
        for s in 0..old_n {
            let ns = shift(s);
            accepting[ns] = self.accepting[s];
            for x in 0..self.num_symbols {
                trans[ns * num_symbols + x] = shift(self.trans[s * self.num_symbols + x] as usize) as u32;
            }
        }
        DeltaAutomaton {
            num_control,
            num_symbols,
            trans,
            accepting,
        }
        .minimize()
    }

    /// Same language on configurations that only use the first `num_control`
    /// states and `num_symbols` symbols; inverse of [`Self::lift`].
    pub fn restrict(&self, num_control: usize, num_symbols: usize) -> Self {
        assert!(num_control <= self.num_control && num_symbols <= self.num_symbols);
        let initial = (0..num_control).collect();
        explore(
            num_control,
            num_symbols,
            initial,
            |&s, x| self.step(s, x),
            |&s| self.accepting[s],
        )
        .minimize()
    }

    /// Reverses and determinizes per-control-state top-down automata: the
    /// result accepts `pα` iff `per_control[p]` accepts `α` read top first.
    pub fn from_top_down(num_symbols: usize, per_control: &[TopDownDfa]) -> Self {
        // rev[p][x][t] = states s with trans[s][x] = t
        let rev: Vec<Vec<Vec<Vec<usize>>>> = per_control
            .iter()
            .map(|d| {
                let mut r = vec![vec![Vec::new(); d.trans.len()]; num_symbols];
                for (s, row) in d.trans.iter().enumerate() {
                    for (x, &t) in row.iter().enumerate() {
                        r[x][t].push(s);
                    }
                }
                r
            })
            .collect();
        let initial = per_control
            .iter()
            .enumerate()
            .map(|(p, d)| {
                let set: BTreeSet<usize> = (0..d.accepting.len()).filter(|&s| d.accepting[s]).collect();
                (p, set)
            })
            .collect();
        explore(
            per_control.len(),
            num_symbols,
            initial,
            |(p, set), x| {
                let mut next = BTreeSet::new();
                for &t in set {
                    next.extend(rev[*p][x.index()][t].iter().copied());
                }
                (*p, next)
            },
            |(p, set)| set.contains(&per_control[*p].init),
        )
        .minimize()
    }

    /// Membership depends only on the control state and the top two symbols.
    pub fn from_top_two(
        num_control: usize,
        num_symbols: usize,
        pred: impl Fn(StateId, Option<SymbolId>, Option<SymbolId>) -> bool,
    ) -> Self {
        let initial = (0..num_control).map(|p| (p, None, None)).collect();
        explore(
            num_control,
            num_symbols,
            initial,
            |&(p, top, _), x| (p, Some(x), top),
            |&(p, top, second)| pred(StateId(p as u32), top, second),
        )
        .minimize()
    }
}

/// Builds the automaton whose states are the keys reachable from `initial`
/// (one per control state) under `step`.
pub(crate) fn explore<K: Clone + Eq + Hash>(
    num_control: usize,
    num_symbols: usize,
    initial: Vec<K>,
    mut step: impl FnMut(&K, SymbolId) -> K,
    mut accept: impl FnMut(&K) -> bool,
) -> DeltaAutomaton {
    assert_eq!(initial.len(), num_control);
    let mut index: HashMap<K, usize> = HashMap::new();
    for (i, k) in initial.iter().enumerate() {
        index.entry(k.clone()).or_insert(i);
    }
    let mut keys = initial;
    let mut trans = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        for x in 0..num_symbols {
            let next = step(&keys[i], SymbolId(x as u32));
            let t = match index.get(&next) {
                Some(&t) => t,
                None => {
                    keys.push(next.clone());
                    index.insert(next, keys.len() - 1);
                    keys.len() - 1
                }
            };
            trans.push(t as u32);
        }
        i += 1;
    }
    if keys.is_empty() {
        return DeltaAutomaton::empty(0, num_symbols);
    }
    let accepting = keys.iter().map(&mut accept).collect();
    DeltaAutomaton {
        num_control,
        num_symbols,
        trans,
        accepting,
    }
}

pub fn bool_ops(a: &DeltaAutomaton, b: &DeltaAutomaton, op: BoolOp) -> Result<DeltaAutomaton, RegError> {
    match op {
        BoolOp::Complement => Ok(a.complement()),
        BoolOp::Intersect => a.intersect(b),
        BoolOp::Union => a.union(b),
    }
}
