//! Analysis of the minima chain: bottom components, certified hitting
//! probabilities, and end-to-end acceptance probabilities for observers and
//! Muller automata.

use std::collections::{BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::model::{normalize, Configuration, Head, Ppda, Rule, StateId, FRESH_PREFIX};
use crate::omega::{Acceptance, ChainBuilder, ChainState, MinChain, MullerAutomaton, ObservingAutomaton, OmegaError};
use crate::solver::{Interval, Oracle};
use crate::Rational;

/// Bottom strongly connected components of the positive-edge digraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BsccClassification {
    /// Sorted state lists, ordered by their least state.
    pub components: Vec<Vec<usize>>,
    pub accepting: Vec<bool>,
}

impl BsccClassification {
    pub fn accepting_states(&self) -> BTreeSet<usize> {
        self.components
            .iter()
            .zip(&self.accepting)
            .filter(|(_, &acc)| acc)
            .flat_map(|(c, _)| c.iter().copied())
            .collect()
    }

    pub fn rejecting_states(&self) -> BTreeSet<usize> {
        self.components
            .iter()
            .zip(&self.accepting)
            .filter(|(_, &acc)| !acc)
            .flat_map(|(c, _)| c.iter().copied())
            .collect()
    }

    pub fn component_of(&self, state: usize) -> Option<usize> {
        self.components.iter().position(|c| c.binary_search(&state).is_ok())
    }
}

pub fn bsccs(chain: &MinChain, obs: &ObservingAutomaton) -> BsccClassification {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(chain.len(), 0);
    let nodes: Vec<NodeIndex> = (0..chain.len()).map(|_| g.add_node(())).collect();
    for i in 0..chain.len() {
        for e in chain.edges(i) {
            g.add_edge(nodes[i], nodes[e.target], ());
        }
    }
    let mut components: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .filter(|c| c.iter().all(|&i| chain.edges(i).iter().all(|e| c.binary_search(&e.target).is_ok())))
        .collect();
    components.sort();
    let accepting = components
        .iter()
        .map(|c| {
            let observed: BTreeSet<usize> = c
                .iter()
                .filter_map(|&i| match chain.state(i) {
                    ChainState::Pair(_, a) => Some(a),
                    _ => None,
                })
                .collect();
            // ⊥ is the only bottom component without pair states.
            !observed.is_empty() && obs.accepts(&observed)
        })
        .collect();
    BsccClassification { components, accepting }
}

/// Bits of the dyadic grid the iteration rounds onto.
const GRID_BITS: usize = 96;
const MAX_SWEEPS: usize = 200_000;

fn round_to_grid(x: &Rational, up: bool) -> Rational {
    let scaled = x.numer() << GRID_BITS;
    let (q, r) = scaled.div_mod_floor(x.denom());
    let q = if up && !r.is_zero() { q + 1 } else { q };
    Rational::new(q, BigInt::one() << GRID_BITS)
}

/// States with a positive-edge path into `targets`.
fn can_reach(chain: &MinChain, targets: &BTreeSet<usize>) -> Vec<bool> {
    let mut preds = vec![Vec::new(); chain.len()];
    for i in 0..chain.len() {
        for e in chain.edges(i) {
            preds[e.target].push(i);
        }
    }
    let mut seen = vec![false; chain.len()];
    let mut queue: VecDeque<usize> = targets.iter().copied().collect();
    for &t in targets {
        seen[t] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

/// Certified bracket of the probability of reaching `targets` from `source`,
/// valid for every choice of edge probabilities inside the edge intervals
/// that sums to one. Iterates until the bracket is at most `width` wide or
/// stops changing.
pub fn hitting_probability(chain: &MinChain, targets: &BTreeSet<usize>, source: usize, width: &Rational) -> Interval {
    if targets.contains(&source) {
        return Interval::one();
    }
    let reach = can_reach(chain, targets);
    if !reach[source] {
        return Interval::zero();
    }
    let n = chain.len();
    let fixed = |i: usize| targets.contains(&i) || !reach[i];
    let init = |i: usize, hi: bool| {
        if targets.contains(&i) || (hi && reach[i]) {
            Rational::one()
        } else {
            Rational::zero()
        }
    };
    let mut lo: Vec<Rational> = (0..n).map(|i| init(i, false)).collect();
    let mut hi: Vec<Rational> = (0..n).map(|i| init(i, true)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        let mut next_lo = lo.clone();
        let mut next_hi = hi.clone();
        for i in (0..n).filter(|&i| !fixed(i)) {
            let (l, h) = chain.edges(i).iter().fold((Rational::zero(), Rational::zero()), |(l, h), e| {
                (l + e.prob.lo() * &lo[e.target], h + e.prob.hi() * &hi[e.target])
            });
            let l = round_to_grid(&l, false).max(lo[i].clone());
            let h = round_to_grid(&h, true).min(Rational::one()).min(hi[i].clone());
            changed |= l != lo[i] || h != hi[i];
            next_lo[i] = l;
            next_hi[i] = h;
        }
        lo = next_lo;
        hi = next_hi;
        if !changed || &hi[source] - &lo[source] <= *width {
            break;
        }
    }
    Interval::new(lo[source].clone(), hi[source].clone())
}

#[derive(Clone, Debug)]
pub struct AcceptanceReport {
    pub interval: Interval,
    pub width_met: bool,
    pub chain: MinChain,
    pub classification: BsccClassification,
    /// Chain state the runs start from.
    pub entry: usize,
}

const REFINEMENT_ROUNDS: usize = 8;

/// Bracket of the probability that a run from `head` is accepted by `obs`,
/// refining edge intervals until the bracket is at most `width` wide.
pub fn acceptance_probability(
    ppda: &Ppda,
    obs: &ObservingAutomaton,
    head: Head,
    width: &Rational,
    oracle: &Oracle,
) -> Result<AcceptanceReport, OmegaError> {
    let builder = ChainBuilder::new(ppda, obs, oracle)?;
    let mut edge_width = width / Rational::from_integer(8.into());
    let mut round = 0;
    loop {
        let chain = builder.build(&edge_width);
        let classification = bsccs(&chain, obs);
        let entry = chain.entry(head).expect("every head has an entry state");
        let targets = classification.accepting_states();
        let interval = if targets.is_empty() {
            Interval::zero()
        } else {
            hitting_probability(&chain, &targets, entry, width)
        };
        round += 1;
        let width_met = interval.width() <= *width;
        if width_met || round == REFINEMENT_ROUNDS {
            return Ok(AcceptanceReport {
                interval,
                width_met,
                chain,
                classification,
                entry,
            });
        }
        edge_width /= Rational::from_integer(256.into());
    }
}

/// The system extended by a fresh symbol whose single rule rewrites it to
/// `c`, normalized; runs from the returned head mirror runs from `c` after
/// one step.
pub fn bootstrap(ppda: &Ppda, c: &Configuration) -> (Ppda, Head) {
    let mut symbols = ppda.symbol_names().to_vec();
    let start = crate::model::SymbolId(symbols.len() as u32);
    symbols.push(format!("{FRESH_PREFIX}start"));
    let mut rules = ppda.rules().to_vec();
    rules.push(Rule {
        lhs: Head::new(c.state, start),
        rhs_state: c.state,
        rhs_stack: c.stack.clone(),
        prob: crate::model::Prob::one(),
    });
    let extended = Ppda::new(ppda.state_names().to_vec(), symbols, rules)
        .expect("fresh symbol keeps the system valid")
        .with_stateless_syntax(ppda.stateless_syntax());
    (normalize(&extended).ppda, Head::new(c.state, start))
}

/// A chain analysis together with the system and observer it ran on.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// The input system, or its bootstrap or Muller product.
    pub system: Ppda,
    pub observer: ObservingAutomaton,
    /// One-symbol configuration of `system` whose runs mirror the input's.
    pub start: Configuration,
    pub report: AcceptanceReport,
}

/// Start head for `c`: its own head when `c` has one symbol and the system
/// is normalized, else the head of a bootstrapped system. Automata read the
/// fresh heads of the bootstrap without effect.
fn entry_system(ppda: &Ppda, c: &Configuration) -> (Option<Ppda>, Head) {
    match (c.len(), c.head()) {
        (1, Some(h)) if ppda.is_normalized() => (None, h),
        _ => {
            let (boot, head) = bootstrap(ppda, c);
            (Some(boot), head)
        }
    }
}

/// [`acceptance_probability`] from an arbitrary configuration.
pub fn analyze(
    ppda: &Ppda,
    obs: &ObservingAutomaton,
    c: &Configuration,
    width: &Rational,
    oracle: &Oracle,
) -> Result<Analysis, OmegaError> {
    obs.check(ppda)?;
    let (boot, head) = entry_system(ppda, c);
    let (system, observer) = match boot {
        None => (ppda.clone(), obs.clone()),
        Some(b) => {
            let lifted = obs.lift(b.num_states(), b.num_symbols());
            (b, lifted)
        }
    };
    let report = acceptance_probability(&system, &observer, head, width, oracle)?;
    Ok(Analysis {
        start: Configuration::new(head.state, vec![head.symbol]),
        system,
        observer,
        report,
    })
}

/// [`muller_probability`] from an arbitrary configuration.
pub fn analyze_muller(
    ppda: &Ppda,
    muller: &MullerAutomaton,
    c: &Configuration,
    width: &Rational,
    oracle: &Oracle,
) -> Result<Analysis, OmegaError> {
    muller.check(ppda)?;
    let (boot, head) = entry_system(ppda, c);
    let (base, muller) = match boot {
        None => (ppda.clone(), muller.clone()),
        Some(b) => {
            let lifted = muller.lift(b.num_states(), b.num_symbols());
            (b, lifted)
        }
    };
    let (system, observer) = muller_product(&base, &muller)?;
    let start = Head::new(StateId((head.state.index() * muller.num_states() + muller.init()) as u32), head.symbol);
    let report = acceptance_probability(&system, &observer, start, width, oracle)?;
    Ok(Analysis {
        start: Configuration::new(start.state, vec![start.symbol]),
        system,
        observer,
        report,
    })
}

/// Largest Muller automaton handled; the observer has `2^|B|` states.
pub const MAX_MULLER_STATES: usize = 12;

/// Product of a system with a Muller automaton, and the observer collecting
/// the Muller states read between minima. Control state `(p, b)` has index
/// `p·|B| + b`; observer state `M ⊆ B` is the bitmask of `M`.
pub fn muller_product(ppda: &Ppda, muller: &MullerAutomaton) -> Result<(Ppda, ObservingAutomaton), OmegaError> {
    muller.check(ppda)?;
    let nb = muller.num_states();
    if nb > MAX_MULLER_STATES {
        return Err(OmegaError::TooLarge(ppda.num_states() << nb));
    }
    let states = ppda
        .state_names()
        .iter()
        .flat_map(|p| (0..nb).map(move |b| format!("({p},{})", muller.name(b))))
        .collect();
    let rules = ppda
        .rules()
        .iter()
        .flat_map(|r| {
            (0..nb).map(move |b| Rule {
                lhs: Head::new(StateId((r.lhs.state.index() * nb + b) as u32), r.lhs.symbol),
                rhs_state: StateId((r.rhs_state.index() * nb + muller.step(b, r.lhs)) as u32),
                rhs_stack: r.rhs_stack.clone(),
                prob: r.prob.clone(),
            })
        })
        .collect();
    let product = Ppda::new(states, ppda.symbol_names().to_vec(), rules).expect("product of a valid system");
    let subsets = 1usize << nb;
    let names = (0..subsets)
        .map(|m| {
            let members: Vec<&str> = (0..nb).filter(|b| m >> b & 1 == 1).map(|b| muller.name(b)).collect();
            format!("{{{}}}", members.join(","))
        })
        .collect();
    let mut step = Vec::with_capacity(subsets * product.num_heads());
    for m in 0..subsets {
        for h in product.heads() {
            step.push(m | 1 << (h.state.index() % nb));
        }
    }
    let labels = (0..subsets).map(|m| (0..nb).filter(|b| m >> b & 1 == 1).collect()).collect();
    let acceptance = Acceptance::UnionIn {
        labels,
        family: muller.family().clone(),
    };
    let obs = ObservingAutomaton::new(names, product.num_states(), product.num_symbols(), step, 0, acceptance)?;
    Ok((product, obs))
}

/// Bracket of the probability that the Muller automaton accepts the heads
/// of a run from `head`.
pub fn muller_probability(
    ppda: &Ppda,
    muller: &MullerAutomaton,
    head: Head,
    width: &Rational,
    oracle: &Oracle,
) -> Result<AcceptanceReport, OmegaError> {
    let (product, obs) = muller_product(ppda, muller)?;
    let start = Head::new(StateId((head.state.index() * muller.num_states() + muller.init()) as u32), head.symbol);
    acceptance_probability(&product, &obs, start, width, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bernoulli, z_muller, z_observer};
    use crate::model::parse_configuration;
    use crate::rat;
    use crate::solver::Backend;

    fn oracle() -> Oracle {
        Oracle::new(Backend::Exact).with_solver(None)
    }

    fn z(walk: &Ppda) -> Head {
        parse_configuration(walk, "Z").unwrap().head().unwrap()
    }

    #[test]
    fn fair_walk_components() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let report = acceptance_probability(&walk, &obs, z(&walk), &rat(1, 100), &oracle()).unwrap();
        let c = &report.classification;
        let labels: Vec<Vec<String>> = c
            .components
            .iter()
            .map(|comp| comp.iter().map(|&i| report.chain.state(i).label(&walk, &obs)).collect())
            .collect();
        assert_eq!(labels, [vec!["⊥".to_string()], vec!["(Z, a1)".to_string()]]);
        assert_eq!(c.accepting, [false, true]);
        assert!(report.interval.contains(&rat(1, 1)) && report.width_met);
    }

    #[test]
    fn biased_walk_components() {
        let walk = bernoulli(&rat(3, 4));
        let obs = z_observer(&walk);
        let report = acceptance_probability(&walk, &obs, z(&walk), &rat(1, 100), &oracle()).unwrap();
        assert_eq!(report.classification.accepting, [false, false]);
        assert_eq!(report.interval, Interval::zero());
    }

    #[test]
    fn empty_acceptance_never_accepts() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk).with_acceptance(Acceptance::sets(Vec::<Vec<usize>>::new()));
        let report = acceptance_probability(&walk, &obs, z(&walk), &rat(1, 100), &oracle()).unwrap();
        assert_eq!(report.interval, Interval::zero());
    }

    #[test]
    fn hitting_inside_and_from_bottom() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let report = acceptance_probability(&walk, &obs, z(&walk), &rat(1, 100), &oracle()).unwrap();
        let targets = report.classification.accepting_states();
        let inside = *targets.iter().next().unwrap();
        assert_eq!(hitting_probability(&report.chain, &targets, inside, &rat(0, 1)), Interval::one());
        assert_eq!(hitting_probability(&report.chain, &targets, 0, &rat(0, 1)), Interval::zero());
    }

    #[test]
    fn muller_matches_observer() {
        let walk = bernoulli(&rat(1, 2));
        let report = muller_probability(&walk, &z_muller(&walk), z(&walk), &rat(1, 100), &oracle()).unwrap();
        assert!(report.interval.contains(&rat(1, 1)));
        let biased = bernoulli(&rat(3, 4));
        let report = muller_probability(&biased, &z_muller(&biased), z(&biased), &rat(1, 100), &oracle()).unwrap();
        assert_eq!(report.interval, Interval::zero());
    }

    #[test]
    fn complement_and_termination_sum_to_one() {
        let walk = bernoulli(&rat(2, 3));
        let obs = z_observer(&walk);
        let i = parse_configuration(&walk, "I").unwrap().head().unwrap();
        let w = rat(1, 100);
        let acc = acceptance_probability(&walk, &obs, i, &w, &oracle()).unwrap();
        let rej = acceptance_probability(&walk, &obs.clone().with_acceptance(obs.acceptance().clone().complement()), i, &w, &oracle())
            .unwrap();
        let dead = acc.chain.edge(acc.entry, 0).unwrap().prob.clone();
        let total = acc.interval.add(&rej.interval).add(&dead);
        assert!(total.contains(&rat(1, 1)), "{total}");
        assert!(dead.contains(&rat(1, 2)));
    }

    #[test]
    fn configurations_are_bootstrapped() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let c = parse_configuration(&walk, "IIZ").unwrap();
        let x = analyze(&walk, &obs, &c, &rat(1, 100), &oracle()).unwrap().report.interval;
        assert!(x.contains(&rat(1, 1)));
        let x = analyze_muller(&walk, &z_muller(&walk), &c, &rat(1, 100), &oracle()).unwrap().report.interval;
        assert!(x.contains(&rat(1, 1)));
        let biased = bernoulli(&rat(3, 4));
        let c = parse_configuration(&biased, "DZ").unwrap();
        let x = analyze(&biased, &z_observer(&biased), &c, &rat(1, 100), &oracle()).unwrap();
        assert_eq!(x.report.interval, Interval::zero());
        let empty = Configuration::empty(StateId(0));
        let x = analyze(&biased, &z_observer(&biased), &empty, &rat(1, 100), &oracle()).unwrap();
        assert_eq!(x.report.interval, Interval::zero());
    }
}
