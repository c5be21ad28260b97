//! Generators and an explicit-state reference checker shared by the
//! integration tests.
//!
//! The reference checker never looks at the pushdown structure: it
//! enumerates configurations, builds the finite Markov chain between them and
//! solves reachability with exact Gaussian elimination, one strongly
//! connected component at a time.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use ppda::model::{successors, Configuration, Head, Ppda, Prob, Rule, StateId, SymbolId};
use ppda::pctl::{Bound, Formula, RegularValuation};
use ppda::regsets::{configurations_up_to, DeltaAutomaton};
use ppda::solver::Relation;
use ppda::Rational;
use proptest::prelude::*;

/// Right-hand side of a generated rule: weight, target state, pushed word.
pub type RuleSpec = (u32, usize, Vec<usize>);

/// A system from per-head rule lists; weights of a head are normalized to
/// sum to one.
pub fn system(nq: usize, ng: usize, heads: &[Vec<RuleSpec>], stateless: bool) -> Ppda {
    let mut rules = Vec::new();
    for (i, specs) in heads.iter().enumerate() {
        let total: u32 = specs.iter().map(|s| s.0).sum();
        let mut seen = HashSet::new();
        for (_, q, word) in specs {
            if !seen.insert((*q, word.clone())) {
                continue;
            }
            // Merged duplicates keep their weight on the first copy.
            let weight: u32 = specs.iter().filter(|s| s.1 == *q && s.2 == *word).map(|s| s.0).sum();
            rules.push(Rule {
                lhs: Head::new(StateId((i / ng) as u32), SymbolId((i % ng) as u32)),
                rhs_state: StateId(*q as u32),
                rhs_stack: word.iter().map(|&x| SymbolId(x as u32)).collect(),
                prob: Prob::new(Rational::new(weight.into(), total.into())).unwrap(),
            });
        }
    }
    let states = (0..nq).map(|q| format!("q{q}")).collect();
    let symbols = (0..ng).map(|x| ((b'A' + x as u8) as char).to_string()).collect();
    if stateless {
        assert_eq!(nq, 1);
        Ppda::stateless(symbols, rules).unwrap()
    } else {
        Ppda::new(states, symbols, rules).unwrap()
    }
}

fn head_rules(nq: usize, ng: usize, max_push: usize, allow_stuck: bool) -> impl Strategy<Value = Vec<RuleSpec>> {
    let rule = (1u32..=4, 0..nq, prop::collection::vec(0..ng, 0..=max_push));
    let min = if allow_stuck { 0 } else { 1 };
    prop::collection::vec(rule, min..=3)
}

/// Random system with up to `max_states` control states and `max_symbols`
/// symbols whose rules push at most `max_push` symbols.
pub fn arb_ppda(max_states: usize, max_symbols: usize, max_push: usize) -> impl Strategy<Value = Ppda> {
    (1..=max_states, 1..=max_symbols).prop_flat_map(move |(nq, ng)| {
        prop::collection::vec(head_rules(nq, ng, max_push, true), nq * ng)
            .prop_map(move |heads| system(nq, ng, &heads, false))
    })
}

/// Random single-state system whose rules pop or swap the top symbol, so
/// stacks never grow.
pub fn arb_bounded_pbpa(max_symbols: usize) -> impl Strategy<Value = Ppda> {
    (2..=max_symbols).prop_flat_map(|ng| {
        prop::collection::vec(head_rules(1, ng, 1, false), ng).prop_map(move |heads| system(1, ng, &heads, true))
    })
}

/// Random non-pushing system with several control states.
pub fn arb_bounded_ppda(max_states: usize, max_symbols: usize) -> impl Strategy<Value = Ppda> {
    (1..=max_states, 1..=max_symbols).prop_flat_map(|(nq, ng)| {
        prop::collection::vec(head_rules(nq, ng, 1, true), nq * ng).prop_map(move |heads| system(nq, ng, &heads, false))
    })
}

/// Random total automaton over the given control states and symbols.
pub fn arb_automaton(nq: usize, ng: usize, extra: usize) -> impl Strategy<Value = DeltaAutomaton> {
    (0..=extra).prop_flat_map(move |k| {
        let n = nq + k;
        (
            prop::collection::vec(prop::collection::vec(0..n, ng), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(trans, acc)| DeltaAutomaton::new(nq, ng, trans, acc).unwrap())
    })
}

/// Exact reachability on the explicit chain over `universe`, which must be
/// closed under successors.
pub fn explicit_until(
    ppda: &Ppda,
    universe: &[Configuration],
    c1: &dyn Fn(&Configuration) -> bool,
    c2: &dyn Fn(&Configuration) -> bool,
) -> HashMap<Configuration, Rational> {
    let index: HashMap<&Configuration, usize> = universe.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let n = universe.len();
    let target: Vec<bool> = universe.iter().map(|c| c2(c)).collect();
    let inside: Vec<bool> = universe.iter().map(|c| c1(c) && !c2(c)).collect();
    let succ: Vec<Vec<(usize, Rational)>> = universe
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if !inside[i] {
                return Vec::new();
            }
            successors(ppda, c)
                .into_iter()
                .map(|(d, p)| {
                    let j = *index.get(&d).expect("universe closed under successors");
                    (j, p.into_inner())
                })
                .collect()
        })
        .collect();
    // States that can reach the target at all.
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, out) in succ.iter().enumerate() {
        for &(j, _) in out {
            pred[j].push(i);
        }
    }
    let mut live: Vec<bool> = target.clone();
    let mut stack: Vec<usize> = (0..n).filter(|&i| target[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &pred[j] {
            if !live[i] && inside[i] {
                live[i] = true;
                stack.push(i);
            }
        }
    }
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for (i, out) in succ.iter().enumerate() {
        for &(j, _) in out {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut value: Vec<Option<Rational>> = vec![None; n];
    // Tarjan yields components in reverse topological order: successors first.
    for comp in tarjan_scc(&graph) {
        let members: Vec<usize> = comp.iter().map(|&v| graph[v]).collect();
        let local: HashMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let m = members.len();
        // Rows: x_i - Σ_{j in comp} p x_j = Σ_{j outside} p v_j.
        let mut a = vec![vec![Rational::zero(); m + 1]; m];
        for (k, &i) in members.iter().enumerate() {
            a[k][k] = Rational::one();
            if target[i] {
                a[k][m] = Rational::one();
                continue;
            }
            if !live[i] {
                continue;
            }
            for (j, p) in &succ[i] {
                match local.get(j) {
                    Some(&l) if live[*j] => a[k][l] -= p,
                    Some(_) => {}
                    None => a[k][m] += p * value[*j].as_ref().expect("successor solved"),
                }
            }
        }
        let x = gauss(a);
        for (k, &i) in members.iter().enumerate() {
            value[i] = Some(x[k].clone());
        }
    }
    universe
        .iter()
        .cloned()
        .zip(value.into_iter().map(|v| v.expect("solved")))
        .collect()
}

/// Solves a square system given as an augmented matrix.
fn gauss(mut a: Vec<Vec<Rational>>) -> Vec<Rational> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero()).expect("nonsingular system");
        a.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..m {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=m {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
    }
    a.into_iter().map(|row| row[m].clone()).collect()
}

/// Satisfaction sets of PCTL formulas over all configurations of a
/// non-pushing system up to a stack length, by explicit enumeration.
pub struct Brute<'a> {
    pub ppda: &'a Ppda,
    pub universe: Vec<Configuration>,
    valuation: &'a RegularValuation,
    /// Until thresholds are shifted by this much in the permissive direction.
    slack: Rational,
}

impl<'a> Brute<'a> {
    pub fn new(ppda: &'a Ppda, valuation: &'a RegularValuation, max_len: usize, slack: Rational) -> Self {
        assert!(ppda.rules().iter().all(|r| r.rhs_stack.len() <= 1), "stacks must not grow");
        Brute {
            ppda,
            universe: configurations_up_to(ppda, max_len),
            valuation,
            slack,
        }
    }

    /// `b` with its threshold moved by the slack towards acceptance; the
    /// shifted value may leave `[0, 1]`.
    fn holds_relaxed(&self, b: &Bound, p: &Rational) -> bool {
        let shifted = match b.rel() {
            Relation::Ge | Relation::Gt => b.value() - &self.slack,
            _ => b.value() + &self.slack,
        };
        b.rel().holds(p, &shifted)
    }

    pub fn sat(&self, f: &Formula) -> BTreeSet<Configuration> {
        match f {
            Formula::True => self.universe.iter().cloned().collect(),
            Formula::False => BTreeSet::new(),
            Formula::Atom(a) => {
                let aut = self.valuation.get(a).expect("atom bound");
                self.universe.iter().filter(|c| aut.accepts(c)).cloned().collect()
            }
            Formula::Not(g) => {
                let s = self.sat(g);
                self.universe.iter().filter(|c| !s.contains(c)).cloned().collect()
            }
            Formula::And(a, b) => self.sat(a).intersection(&self.sat(b)).cloned().collect(),
            Formula::Or(a, b) => self.sat(a).union(&self.sat(b)).cloned().collect(),
            Formula::Next(bound, g) => {
                let s = self.sat(g);
                self.universe
                    .iter()
                    .filter(|c| {
                        let p: Rational = successors(self.ppda, c)
                            .into_iter()
                            .filter(|(d, _)| s.contains(d))
                            .map(|(_, p)| p.into_inner())
                            .sum();
                        bound.holds(&p)
                    })
                    .cloned()
                    .collect()
            }
            Formula::Until(bound, a, b) => {
                let (sa, sb) = (self.sat(a), self.sat(b));
                let values = self.until_values(&sa, &sb);
                self.universe
                    .iter()
                    .filter(|c| self.holds_relaxed(bound, &values[*c]))
                    .cloned()
                    .collect()
            }
        }
    }

    pub fn until_values(&self, c1: &BTreeSet<Configuration>, c2: &BTreeSet<Configuration>) -> HashMap<Configuration, Rational> {
        explicit_until(self.ppda, &self.universe, &|c| c1.contains(c), &|c| c2.contains(c))
    }
}

/// Whether `q ε` is reachable from `p X` within the stack and depth bounds.
pub fn bounded_pop_search(ppda: &Ppda, from: Head, to: StateId, max_stack: usize, max_depth: usize) -> bool {
    let start = Configuration::new(from.state, vec![from.symbol]);
    let mut seen: HashSet<Configuration> = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for c in &frontier {
            for (d, _) in successors(ppda, c) {
                if d.is_empty() {
                    if d.state == to {
                        return true;
                    }
                    continue;
                }
                if d.len() <= max_stack && seen.insert(d.clone()) {
                    next.push(d);
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        frontier = next;
    }
    false
}

/// Configurations reachable from `c` in at most `steps` steps, in discovery order.
pub fn reachable(ppda: &Ppda, c: &Configuration, steps: usize, limit: usize) -> Vec<Configuration> {
    let mut seen: HashSet<Configuration> = HashSet::from([c.clone()]);
    let mut order = vec![c.clone()];
    let mut frontier = vec![c.clone()];
    for _ in 0..steps {
        let mut next = Vec::new();
        for d in &frontier {
            for (e, _) in successors(ppda, d) {
                if order.len() >= limit {
                    return order;
                }
                if seen.insert(e.clone()) {
                    order.push(e.clone());
                    next.push(e);
                }
            }
        }
        frontier = next;
    }
    order
}

/// Successor distribution as a map, merging equal targets.
pub fn distribution(ppda: &Ppda, c: &Configuration) -> BTreeMap<Configuration, Rational> {
    let mut out: BTreeMap<Configuration, Rational> = BTreeMap::new();
    for (d, p) in successors(ppda, c) {
        *out.entry(d).or_insert_with(Rational::zero) += p.into_inner();
    }
    out
}

pub fn as_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("finite")
}

/// `rel ρ` with `ρ` on a coarse grid, or one of the four qualitative bounds.
pub fn arb_bound(qualitative: bool) -> BoxedStrategy<Bound> {
    let rel = prop_oneof![Just(Relation::Lt), Just(Relation::Le), Just(Relation::Ge), Just(Relation::Gt)];
    if qualitative {
        prop_oneof![
            Just(Bound::new(Relation::Ge, Rational::one()).unwrap()),
            Just(Bound::new(Relation::Gt, Rational::zero()).unwrap()),
            Just(Bound::new(Relation::Le, Rational::zero()).unwrap()),
            Just(Bound::new(Relation::Lt, Rational::one()).unwrap()),
        ]
        .boxed()
    } else {
        (rel, 0i64..=8)
            .prop_map(|(r, k)| Bound::new(r, Rational::new(k.into(), 8.into())).unwrap())
            .boxed()
    }
}

/// Formulas over the atoms `a` and `b`. Next operators always carry
/// qualitative bounds; negation appears only when `negation` is set.
pub fn arb_formula(depth: u32, qualitative: bool, negation: bool) -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        Just(Formula::atom("a")),
        Just(Formula::atom("b")),
    ];
    leaf.prop_recursive(depth, 12, 2, move |inner| {
        let mut options = vec![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::and(x, y)).boxed(),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::or(x, y)).boxed(),
            (arb_bound(true), inner.clone()).prop_map(|(b, x)| Formula::next(b, x)).boxed(),
            (arb_bound(qualitative), inner.clone(), inner.clone())
                .prop_map(|(b, x, y)| Formula::until(b, x, y))
                .boxed(),
        ];
        if negation {
            options.push(inner.prop_map(Formula::not).boxed());
        }
        proptest::strategy::Union::new(options)
    })
    .boxed()
}

/// Valuation with `a` the configurations topped by the first symbol and `b`
/// the language of `aut`.
pub fn valuation(ppda: &Ppda, aut: DeltaAutomaton) -> RegularValuation {
    let mut v = RegularValuation::new(ppda);
    let a = ppda::regsets::SimpleSet::topped_by(ppda, SymbolId(0));
    v.insert("a", ppda::regsets::simple_to_automaton(ppda, &a)).unwrap();
    v.insert("b", aut).unwrap();
    v
}
