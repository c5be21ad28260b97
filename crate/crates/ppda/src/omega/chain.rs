//! The finite Markov chain over minima.
//!
//! Its states are `⊥`, one entry state per head, and pairs `(qY, a)` of a
//! head that can run forever with the observation of the jump into it.
//! Pairs sharing a head have the same outgoing edges, each given as
//! `IRun(q′Y′)/IRun(qY)` times the mass of the one-step or pop-path routes
//! from `qY` to the next minimum `q′Y′` that leave the observer in `a′`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use super::{ObservingAutomaton, OmegaError};
use crate::equations::{build_until_system, Polynomial, VarId};
use crate::model::{Head, Ppda, Rule, RuleShape, StateId, SymbolId};
use crate::regsets::SimpleSet;
use crate::solver::{Brackets, DecisionQuery, Interval, Method, Oracle, Relation, SystemSolver, Verdict};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainState {
    Bottom,
    Entry(Head),
    /// A minimum with this head, entered with this observer state.
    Pair(Head, usize),
}

impl ChainState {
    pub fn head(&self) -> Option<Head> {
        match self {
            ChainState::Bottom => None,
            ChainState::Entry(h) | ChainState::Pair(h, _) => Some(*h),
        }
    }

    pub fn label(&self, ppda: &Ppda, obs: &ObservingAutomaton) -> String {
        match self {
            ChainState::Bottom => "⊥".to_string(),
            ChainState::Entry(h) => ppda.display_head(*h),
            ChainState::Pair(h, a) => format!("({}, {})", ppda.display_head(*h), obs.name(*a)),
        }
    }
}

/// An edge of positive probability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub target: usize,
    pub prob: Interval,
}

/// Control states of the product with an observer: `(p, a)` has index `p·|A| + a`.
pub fn product_observer(ppda: &Ppda, obs: &ObservingAutomaton) -> Ppda {
    let na = obs.num_states();
    let states = ppda
        .state_names()
        .iter()
        .flat_map(|p| obs.names().iter().map(move |a| format!("({p},{a})")))
        .collect();
    let rules = ppda
        .rules()
        .iter()
        .flat_map(|r| {
            (0..na).map(move |a| Rule {
                lhs: Head::new(StateId((r.lhs.state.index() * na + a) as u32), r.lhs.symbol),
                rhs_state: StateId((r.rhs_state.index() * na + obs.step(a, r.lhs)) as u32),
                rhs_stack: r.rhs_stack.clone(),
                prob: r.prob.clone(),
            })
        })
        .collect();
    Ppda::new(states, ppda.symbol_names().to_vec(), rules).expect("product of a valid system")
}

/// Pop-path probabilities `⟨(q,a₀)Y (r,ā)⟩` of the observer product.
#[derive(Clone, Debug)]
pub struct PopPaths {
    num_obs: usize,
    init: usize,
    solver: Arc<SystemSolver>,
    positive: Vec<bool>,
}

impl PopPaths {
    pub fn new(ppda: &Ppda, obs: &ObservingAutomaton) -> Result<Self, OmegaError> {
        let product = product_observer(ppda, obs);
        let sys = build_until_system(&product, &SimpleSet::all(&product), &SimpleSet::empty())?;
        let positive = sys.boolean_abstraction().least_fixed_point();
        Ok(PopPaths {
            num_obs: obs.num_states(),
            init: obs.init(),
            solver: Arc::new(SystemSolver::new(&sys)),
            positive,
        })
    }

    fn var(&self, from: Head, r: StateId, a: usize) -> usize {
        let q = StateId((from.state.index() * self.num_obs + self.init) as u32);
        let t = StateId((r.index() * self.num_obs + a) as u32);
        self.solver
            .var_index(VarId::pop_to(Head::new(q, from.symbol), t))
            .expect("product variable")
    }

    /// Whether `from` can empty its stack into `r` with the observer in `a`.
    pub fn is_positive(&self, from: Head, r: StateId, a: usize) -> bool {
        self.positive[self.var(from, r, a)]
    }

    pub fn bracket(&self, b: &Brackets, from: Head, r: StateId, a: usize) -> Interval {
        let i = self.var(from, r, a);
        Interval::new(b.lo[i].clone(), b.hi[i].clone())
    }

    pub fn brackets(&self, width: &Rational) -> Brackets {
        self.solver.brackets(Method::Decomposed, width)
    }
}

/// Probability that `from` empties its stack into `r` along a path after
/// which reading `rZ` leaves the observer in `a`.
pub fn pop_path_prob(
    ppda: &Ppda,
    obs: &ObservingAutomaton,
    from: Head,
    r: StateId,
    z: SymbolId,
    a: usize,
    width: &Rational,
) -> Result<Interval, OmegaError> {
    obs.check(ppda)?;
    let paths = PopPaths::new(ppda, obs)?;
    let b = paths.brackets(width);
    let target = Head::new(r, z);
    Ok((0..obs.num_states())
        .filter(|&abar| obs.step(abar, target) == a && paths.is_positive(from, r, abar))
        .map(|abar| paths.bracket(&b, from, r, abar))
        .fold(Interval::zero(), |acc, x| acc.add(&x)))
}

/// Probabilities that runs of the system itself die, by emptying the
/// stack or by reaching a stuck head.
struct Termination {
    solver: Arc<SystemSolver>,
    positive: Vec<bool>,
    num_states: usize,
}

impl Termination {
    fn new(ppda: &Ppda) -> Result<Self, OmegaError> {
        let sys = build_until_system(ppda, &SimpleSet::all(ppda), &SimpleSet::dead(ppda))?;
        let positive = sys.boolean_abstraction().least_fixed_point();
        Ok(Termination {
            solver: Arc::new(SystemSolver::new(&sys)),
            positive,
            num_states: ppda.num_states(),
        })
    }

    /// Positive variables whose sum is the probability that a run from `h` dies.
    fn dying(&self, h: Head) -> Vec<usize> {
        (0..self.num_states)
            .map(|t| VarId::pop_to(h, StateId(t as u32)))
            .chain([VarId::bullet(h)])
            .map(|v| self.solver.var_index(v).expect("termination variable"))
            .filter(|&i| self.positive[i])
            .collect()
    }

    /// `IRun(h) > 0`, decided exactly.
    fn irun_positive(&self, ppda: &Ppda, h: Head, oracle: &Oracle) -> Result<bool, OmegaError> {
        let dying = self.dying(h);
        if dying.is_empty() {
            return Ok(true);
        }
        let sum = dying.iter().fold(Polynomial::zero(), |acc, &i| acc.add(&Polynomial::var(i)));
        let query = DecisionQuery::new(Arc::clone(&self.solver), sum, Relation::Lt, Rational::one());
        match oracle.decide(&query)?.verdict {
            Verdict::True => Ok(true),
            Verdict::False => Ok(false),
            Verdict::Unknown => Err(OmegaError::IrunUndecided(ppda.display_head(h))),
        }
    }

    fn irun(&self, b: &Brackets, h: Head) -> Interval {
        self.dying(h)
            .into_iter()
            .fold(Interval::zero(), |acc, i| acc.add(&Interval::new(b.lo[i].clone(), b.hi[i].clone())))
            .clamp_unit()
            .complement()
    }
}

/// `num / den` for probabilities, with `den` known to be positive.
fn ratio(num: &Interval, den: &Interval) -> Interval {
    if den.lo().is_positive() {
        num.div_positive(den).clamp_unit()
    } else {
        Interval::new(Rational::zero(), Rational::one())
    }
}

/// The finite chain of minima; immutable once built.
#[derive(Clone, Debug)]
pub struct MinChain {
    states: Vec<ChainState>,
    index: HashMap<ChainState, usize>,
    edges: Vec<Vec<Edge>>,
    irun: BTreeMap<Head, Interval>,
    component_width: Rational,
}

impl MinChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> ChainState {
        self.states[i]
    }

    pub fn index_of(&self, s: &ChainState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn bottom(&self) -> usize {
        0
    }

    pub fn entry(&self, h: Head) -> Option<usize> {
        self.index_of(&ChainState::Entry(h))
    }

    pub fn edges(&self, i: usize) -> &[Edge] {
        &self.edges[i]
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges[from].iter().find(|e| e.target == to)
    }

    /// Bracket of the probability that a run from `h` never terminates.
    pub fn irun(&self, h: Head) -> Option<&Interval> {
        self.irun.get(&h)
    }

    /// Width requested from the equation solvers for this chain.
    pub fn component_width(&self) -> &Rational {
        &self.component_width
    }

    /// Whether the outgoing intervals of `i` admit probabilities summing to 1.
    pub fn sums_bracket_one(&self, i: usize) -> bool {
        let (lo, hi) = self.edges[i].iter().fold((Rational::zero(), Rational::zero()), |(lo, hi), e| {
            (lo + e.prob.lo(), hi + e.prob.hi())
        });
        lo <= Rational::one() && Rational::one() <= hi
    }

    pub fn render(&self, ppda: &Ppda, obs: &ObservingAutomaton) -> String {
        Rendered { chain: self, ppda, obs }.to_string()
    }
}

struct Rendered<'a> {
    chain: &'a MinChain,
    ppda: &'a Ppda,
    obs: &'a ObservingAutomaton,
}

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.chain.states.iter().enumerate() {
            writeln!(f, "state {}", s.label(self.ppda, self.obs))?;
            for e in &self.chain.edges[i] {
                let to = self.chain.states[e.target].label(self.ppda, self.obs);
                writeln!(f, "  -> {to} {}", e.prob)?;
            }
        }
        Ok(())
    }
}

/// Largest number of halvings of the solver width spent on making positive
/// denominators bracket away from zero.
const DENOMINATOR_REFINEMENTS: usize = 64;

/// Exact structure of the chain (which heads can run forever, which pop
/// paths exist) together with the solvers that bracket its edges.
pub struct ChainBuilder<'a> {
    ppda: &'a Ppda,
    obs: &'a ObservingAutomaton,
    term: Termination,
    paths: PopPaths,
    positive: BTreeMap<Head, bool>,
}

impl<'a> ChainBuilder<'a> {
    /// Decides `IRun(h) > 0` for every head through the oracle.
    pub fn new(ppda: &'a Ppda, obs: &'a ObservingAutomaton, oracle: &Oracle) -> Result<Self, OmegaError> {
        if let Some(r) = ppda.rules().iter().find(|r| r.shape() == RuleShape::Long) {
            return Err(OmegaError::NotNormalized(ppda.display_rule(r)));
        }
        obs.check(ppda)?;
        let term = Termination::new(ppda)?;
        let mut positive = BTreeMap::new();
        for h in ppda.heads() {
            positive.insert(h, term.irun_positive(ppda, h, oracle)?);
        }
        let paths = PopPaths::new(ppda, obs)?;
        Ok(ChainBuilder {
            ppda,
            obs,
            term,
            paths,
            positive,
        })
    }

    pub fn irun_positive(&self, h: Head) -> bool {
        self.positive[&h]
    }

    /// The chain with solver brackets of width at most `width`.
    pub fn build(&self, width: &Rational) -> MinChain {
        let (ppda, obs, term, paths, positive) = (self.ppda, self.obs, &self.term, &self.paths, &self.positive);
        let heads: Vec<Head> = ppda.heads().collect();
        // Refine until every positive denominator is bracketed away from zero.
        let mut w = width.clone();
        let mut attempt = 0;
        let irun: BTreeMap<Head, Interval> = loop {
            let b = term.solver.brackets(Method::Decomposed, &w);
            let irun: BTreeMap<Head, Interval> = heads.iter().map(|&h| (h, term.irun(&b, h))).collect();
            let settled = heads.iter().all(|h| !positive[h] || irun[h].lo().is_positive());
            if settled || attempt == DENOMINATOR_REFINEMENTS {
                break irun;
            }
            attempt += 1;
            w /= Rational::from_integer(2.into());
        };
        let path_b = paths.brackets(&w);

        let na = obs.num_states();
        let mut states = vec![ChainState::Bottom];
        states.extend(heads.iter().map(|&h| ChainState::Entry(h)));
        for &h in heads.iter().filter(|h| positive[h]) {
            states.extend((0..na).map(|a| ChainState::Pair(h, a)));
        }
        let index: HashMap<ChainState, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let a0 = obs.init();

        let pair_edges: Vec<(Head, Vec<Edge>)> = heads
            .par_iter()
            .filter(|h| positive[h])
            .map(|&h| {
                let mut mass: BTreeMap<ChainState, Interval> = BTreeMap::new();
                let mut add = |target: ChainState, x: Interval| {
                    let slot = mass.entry(target).or_insert_with(Interval::zero);
                    *slot = slot.add(&x);
                };
                for rule in ppda.rules_of(h) {
                    let x = Interval::point(rule.prob.value().clone());
                    let r = rule.rhs_state;
                    let (top, below) = match rule.shape() {
                        RuleShape::Pop | RuleShape::Long => continue,
                        RuleShape::Swap(y) => (Head::new(r, y), None),
                        RuleShape::Push(y, z) => (Head::new(r, y), Some(z)),
                    };
                    // The successor is itself the next minimum.
                    if positive[&top] {
                        add(ChainState::Pair(top, obs.step(a0, top)), x.mul(&irun[&top]));
                    }
                    // The pushed top is popped first; the next minimum sits below it.
                    let Some(z) = below else { continue };
                    for t in ppda.states() {
                        let next = Head::new(t, z);
                        if !positive[&next] {
                            continue;
                        }
                        for abar in (0..na).filter(|&abar| paths.is_positive(top, t, abar)) {
                            let route = x.mul(&paths.bracket(&path_b, top, t, abar)).mul(&irun[&next]);
                            add(ChainState::Pair(next, obs.step(abar, next)), route);
                        }
                    }
                }
                let edges = mass
                    .into_iter()
                    .map(|(s, m)| Edge {
                        target: index[&s],
                        prob: ratio(&m, &irun[&h]),
                    })
                    .collect();
                (h, edges)
            })
            .collect();
        let pair_edges: HashMap<Head, Vec<Edge>> = pair_edges.into_iter().collect();

        let bottom_edge = || Edge {
            target: 0,
            prob: Interval::one(),
        };
        let edges = states
            .iter()
            .map(|s| match *s {
                ChainState::Bottom => vec![bottom_edge()],
                ChainState::Entry(h) if !positive[&h] => vec![bottom_edge()],
                ChainState::Entry(h) => {
                    let stay = Edge {
                        target: index[&ChainState::Pair(h, a0)],
                        prob: irun[&h].clone(),
                    };
                    if term.dying(h).is_empty() {
                        vec![stay]
                    } else {
                        vec![
                            Edge {
                                target: 0,
                                prob: irun[&h].complement(),
                            },
                            stay,
                        ]
                    }
                }
                ChainState::Pair(h, _) => pair_edges[&h].clone(),
            })
            .collect();
        let irun = irun.into_iter().filter(|(h, _)| positive[h]).collect();
        MinChain {
            states,
            index,
            edges,
            irun,
            component_width: w,
        }
    }
}

/// Builds the chain with solver brackets of width at most `width`; edge
/// positivity is exact and independent of `width`.
pub fn build_min_chain(ppda: &Ppda, obs: &ObservingAutomaton, width: &Rational, oracle: &Oracle) -> Result<MinChain, OmegaError> {
    Ok(ChainBuilder::new(ppda, obs, oracle)?.build(width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bernoulli, z_observer};
    use crate::rat;
    use crate::solver::Backend;

    fn oracle() -> Oracle {
        Oracle::new(Backend::Exact).with_solver(None)
    }

    #[test]
    fn product_doubles_rules() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let p = product_observer(&walk, &obs);
        assert_eq!(p.num_states(), 2);
        assert_eq!(p.rules().len(), 2 * walk.rules().len());
        let trivial = product_observer(&walk, &ObservingAutomaton::trivial(&walk));
        assert_eq!(trivial.rules(), walk.rules());
    }

    #[test]
    fn pop_paths_on_the_fair_walk() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let h = |n: &str| Head::new(StateId(0), walk.symbol_id(n).unwrap());
        let z = walk.symbol_id("Z").unwrap();
        let w = rat(1, 1000);
        let to_a1 = pop_path_prob(&walk, &obs, h("I"), StateId(0), z, 1, &w).unwrap();
        assert!(to_a1.contains(&rat(1, 1)) && to_a1.width() <= rat(1, 100));
        let to_a0 = pop_path_prob(&walk, &obs, h("D"), StateId(0), z, 0, &w).unwrap();
        assert_eq!(to_a0, Interval::zero());
        let i = walk.symbol_id("I").unwrap();
        let trivial = ObservingAutomaton::trivial(&walk);
        let once = pop_path_prob(&walk, &trivial, h("I"), StateId(0), i, 0, &w).unwrap();
        assert!(once.contains(&rat(1, 1)));
    }

    #[test]
    fn fair_walk_chain() {
        let walk = bernoulli(&rat(1, 2));
        let obs = z_observer(&walk);
        let chain = build_min_chain(&walk, &obs, &rat(1, 1000), &oracle()).unwrap();
        let h = |n: &str| Head::new(StateId(0), walk.symbol_id(n).unwrap());
        let pairs: Vec<_> = chain.states().iter().filter(|s| matches!(s, ChainState::Pair(..))).collect();
        assert_eq!(pairs, [&ChainState::Pair(h("Z"), 0), &ChainState::Pair(h("Z"), 1)]);
        let z0 = chain.index_of(&ChainState::Pair(h("Z"), 0)).unwrap();
        let z1 = chain.index_of(&ChainState::Pair(h("Z"), 1)).unwrap();
        let e = chain.edge(chain.entry(h("Z")).unwrap(), z0).unwrap();
        assert_eq!(e.prob, Interval::one());
        assert_eq!(chain.edges(z0).len(), 1);
        assert!(chain.edge(z0, z1).unwrap().prob.contains(&rat(1, 1)));
        assert_eq!(chain.edges(z0), chain.edges(z1));
        assert_eq!(chain.edges(chain.entry(h("I")).unwrap()), [bottom(1)]);
        for i in 0..chain.len() {
            assert!(chain.sums_bracket_one(i), "{}", chain.state(i).label(&walk, &obs));
        }
    }

    fn bottom(p: i64) -> Edge {
        Edge {
            target: 0,
            prob: Interval::point(rat(p, 1)),
        }
    }

    #[test]
    fn biased_walk_chain() {
        let x = rat(3, 4);
        let walk = bernoulli(&x);
        let obs = z_observer(&walk);
        let chain = build_min_chain(&walk, &obs, &rat(1, 1000), &oracle()).unwrap();
        let h = |n: &str| Head::new(StateId(0), walk.symbol_id(n).unwrap());
        let i0 = chain.index_of(&ChainState::Pair(h("I"), 0)).unwrap();
        assert_eq!(chain.edges(i0).len(), 1);
        assert!(chain.edge(i0, i0).unwrap().prob.contains(&rat(1, 1)));
        let entry = chain.entry(h("I")).unwrap();
        // (1 - x)/x to the bottom, (2x - 1)/x onwards
        assert!(chain.edge(entry, 0).unwrap().prob.contains(&rat(1, 3)));
        assert!(chain.edge(entry, i0).unwrap().prob.contains(&rat(2, 3)));
        assert!(chain.index_of(&ChainState::Pair(h("D"), 0)).is_none());
        for i in 0..chain.len() {
            assert!(chain.sums_bracket_one(i), "{}", chain.state(i).label(&walk, &obs));
        }
        let rendered = chain.render(&walk, &obs);
        assert!(rendered.contains("state (I, a0)"), "{rendered}");
    }
}
