//! Until probabilities of arbitrary configurations, assembled from the
//! least solution through the stack-by-stack decomposition
//! `P(qXβ) = ⟨qX•⟩ + Σ_t ⟨qXt⟩·P(tβ)`, `P(qε) = [qε ∈ C₂]`.

use std::sync::Arc;

use num_traits::{One, Zero};

use super::oracle::{DecisionQuery, Oracle, OracleAnswer, Relation, Verdict};
use super::system::{Method, SystemSolver};
use super::{Interval, SolverError};
use crate::equations::{build_until_system, Polynomial, VarId};
use crate::model::{normalize, Configuration, Head, Ppda, StateId};
use crate::regsets::SimpleSet;
use crate::Rational;

/// Certified bracket together with whether it met the requested width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UntilBracket {
    pub interval: Interval,
    pub width_met: bool,
}

/// `P(·, C₁ U C₂)` over a system, normalized internally.
///
/// Configurations in the middle of a split long rule are passed through:
/// they count as `C₁` and never as `C₂`.
#[derive(Clone, Debug)]
pub struct UntilProblem {
    ppda: Ppda,
    num_states: usize,
    num_symbols: usize,
    c2_eps: Vec<bool>,
    solver: Arc<SystemSolver>,
}

impl UntilProblem {
    pub fn new(ppda: &Ppda, c1: &SimpleSet, c2: &SimpleSet) -> Result<Self, SolverError> {
        let normalized = normalize(ppda);
        let (nq, ng) = (ppda.num_states(), ppda.num_symbols());
        let inner = normalized.ppda;
        let original = |h: &Head| h.state.index() < nq && h.symbol.index() < ng;
        let mut heads1: std::collections::BTreeSet<Head> = c1.heads().iter().copied().filter(original).collect();
        heads1.extend(inner.heads().filter(|h| h.symbol.index() >= ng));
        let c1 = SimpleSet::new(heads1, c1.eps().clone());
        let c2 = SimpleSet::new(c2.heads().iter().copied().filter(original).collect(), c2.eps().clone());
        let sys = build_until_system(&inner, &c1, &c2)?;
        let c2_eps = inner.states().map(|q| c2.contains_eps(q)).collect();
        Ok(UntilProblem {
            ppda: inner,
            num_states: nq,
            num_symbols: ng,
            c2_eps,
            solver: Arc::new(SystemSolver::new(&sys)),
        })
    }

    pub fn solver(&self) -> &Arc<SystemSolver> {
        &self.solver
    }

    /// The normalized system the equations are built over.
    pub fn normalized(&self) -> &Ppda {
        &self.ppda
    }

    fn check(&self, c: &Configuration) -> Result<(), SolverError> {
        let ok = c.state.index() < self.num_states && c.stack.iter().all(|x| x.index() < self.num_symbols);
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidInput("configuration uses unknown states or symbols".into()))
        }
    }

    fn var(&self, v: VarId) -> usize {
        self.solver.var_index(v).expect("every head has its variables")
    }

    /// Runs the decomposition bottom-up; `leaf` gives the empty-stack values.
    fn fold<T: Clone>(
        &self,
        c: &Configuration,
        leaf: impl Fn(bool) -> T,
        var: impl Fn(usize) -> T,
        add: impl Fn(&T, &T) -> T,
        mul: impl Fn(&T, &T) -> T,
    ) -> T {
        let states: Vec<StateId> = self.ppda.states().collect();
        let mut below: Vec<T> = self.c2_eps.iter().map(|&b| leaf(b)).collect();
        for &x in c.stack.iter().rev() {
            below = states
                .iter()
                .map(|&q| {
                    let h = Head::new(q, x);
                    states.iter().fold(var(self.var(VarId::bullet(h))), |acc, &t| {
                        add(&acc, &mul(&var(self.var(VarId::pop_to(h, t))), &below[t.index()]))
                    })
                })
                .collect();
        }
        below[c.state.index()].clone()
    }

    /// The probability as a polynomial over the system's variables.
    pub fn expression(&self, c: &Configuration) -> Result<Polynomial, SolverError> {
        self.check(c)?;
        let constant = |b: bool| Polynomial::constant(if b { Rational::one() } else { Rational::zero() });
        let sys = self.solver.system();
        let var = |i: usize| match sys.pinned().get(&i) {
            Some(k) => Polynomial::constant(k.clone()),
            None => Polynomial::var(i),
        };
        Ok(self.fold(c, constant, var, |a, b| a.add(b), |a, b| a.mul(b)))
    }

    /// Certified bracket of the probability, refining until `width` is met or
    /// the solver budget runs out.
    pub fn probability(&self, c: &Configuration, width: &Rational) -> Result<UntilBracket, SolverError> {
        self.check(c)?;
        let unit = |b: bool| if b { Interval::one() } else { Interval::zero() };
        let depth = Rational::from_integer((c.len() as i64 + 1).into());
        let mut component = width / (depth * Rational::from_integer(2.into()));
        loop {
            let b = self.solver.brackets(Method::Decomposed, &component);
            let x = self
                .fold(
                    c,
                    unit,
                    |i| Interval::new(b.lo[i].clone(), b.hi[i].clone()),
                    |a, b| a.add(b),
                    |a, b| a.mul(b),
                )
                .clamp_unit();
            if x.width() <= *width {
                return Ok(UntilBracket {
                    interval: x,
                    width_met: true,
                });
            }
            if b.max_width() > component || component.denom().bits() > 2048 {
                return Ok(UntilBracket {
                    interval: x,
                    width_met: false,
                });
            }
            component /= Rational::from_integer(2.into());
        }
    }

    /// Decides `P(c, C₁ U C₂) rel bound` through the oracle.
    pub fn compare(&self, c: &Configuration, rel: Relation, bound: &Rational, oracle: &Oracle) -> Result<OracleAnswer, SolverError> {
        let expr = self.expression(c)?;
        oracle.decide(&DecisionQuery::new(Arc::clone(&self.solver), expr, rel, bound.clone()))
    }

    /// Interval of width at most `lambda` by bisection on oracle answers.
    pub fn bisect(&self, c: &Configuration, lambda: &Rational, oracle: &Oracle) -> Result<Bisection, SolverError> {
        if *lambda <= Rational::zero() || *lambda >= Rational::one() {
            return Err(SolverError::InvalidInput("precision must lie strictly between 0 and 1".into()));
        }
        let expr = self.expression(c)?;
        let mut rounds = 0;
        let mut width = Rational::one();
        while width > *lambda {
            width /= Rational::from_integer(2.into());
            rounds += 1;
        }
        let mut lo = Rational::zero();
        let mut hi = Rational::one();
        let mut fallbacks = 0;
        for _ in 0..rounds {
            let mid = (&lo + &hi) / Rational::from_integer(2.into());
            let query = DecisionQuery::new(Arc::clone(&self.solver), expr.clone(), Relation::Ge, mid.clone());
            match oracle.decide(&query)?.verdict {
                Verdict::True => lo = mid,
                Verdict::False => hi = mid,
                Verdict::Unknown => {
                    fallbacks += 1;
                    let half = (&hi - &lo) / Rational::from_integer(2.into());
                    let refined = self.probability(c, &half)?.interval;
                    let current = Interval::new(lo.clone(), hi.clone());
                    let both = current.intersect(&refined).unwrap_or(refined);
                    lo = both.lo().clone();
                    hi = both.hi().clone();
                }
            }
        }
        Ok(Bisection {
            interval: Interval::new(lo, hi),
            rounds,
            fallbacks,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bisection {
    pub interval: Interval,
    /// Oracle queries issued, one per round.
    pub rounds: usize,
    /// Rounds settled by bracket refinement after an undecided answer.
    pub fallbacks: usize,
}

pub fn until_probability(
    ppda: &Ppda,
    c1: &SimpleSet,
    c2: &SimpleSet,
    c: &Configuration,
    width: &Rational,
) -> Result<UntilBracket, SolverError> {
    UntilProblem::new(ppda, c1, c2)?.probability(c, width)
}

pub fn compare_until(
    ppda: &Ppda,
    c1: &SimpleSet,
    c2: &SimpleSet,
    c: &Configuration,
    rel: Relation,
    bound: &Rational,
    oracle: &Oracle,
) -> Result<OracleAnswer, SolverError> {
    UntilProblem::new(ppda, c1, c2)?.compare(c, rel, bound, oracle)
}

pub fn bisect_bounds(
    ppda: &Ppda,
    c1: &SimpleSet,
    c2: &SimpleSet,
    c: &Configuration,
    lambda: &Rational,
    oracle: &Oracle,
) -> Result<Bisection, SolverError> {
    UntilProblem::new(ppda, c1, c2)?.bisect(c, lambda, oracle)
}

/// Probability that a run from `c` never reaches a dead configuration.
pub fn irun_probability(ppda: &Ppda, c: &Configuration, width: &Rational) -> Result<UntilBracket, SolverError> {
    let dead = until_probability(ppda, &SimpleSet::all(ppda), &SimpleSet::dead(ppda), c, width)?;
    Ok(UntilBracket {
        interval: dead.interval.complement(),
        width_met: dead.width_met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::bernoulli;
    use crate::model::parse_configuration;
    use crate::rat;

    fn walk_until(x: Rational, config: &str, width: Rational) -> UntilBracket {
        let ppda = bernoulli(&x);
        let c = parse_configuration(&ppda, config).unwrap();
        let c2 = SimpleSet::topped_by(&ppda, ppda.symbol_id("Z").unwrap());
        until_probability(&ppda, &SimpleSet::all(&ppda), &c2, &c, &width).unwrap()
    }

    #[test]
    fn two_increments_reach_the_bottom() {
        let at_half = walk_until(rat(1, 2), "IIZ", rat(1, 1000));
        assert!(at_half.interval.contains(&rat(1, 1)) && at_half.width_met);
        let at_two_thirds = walk_until(rat(2, 3), "IIZ", rat(1, 1000));
        assert!(at_two_thirds.interval.contains(&rat(1, 4)) && at_two_thirds.width_met);
    }

    #[test]
    fn empty_stack_is_decided_by_membership() {
        let ppda = bernoulli(&rat(1, 2));
        let eps = Configuration::empty(StateId(0));
        let all = SimpleSet::all(&ppda);
        let hit = until_probability(&ppda, &all, &SimpleSet::all_eps(&ppda), &eps, &rat(1, 10)).unwrap();
        assert_eq!(hit.interval, Interval::one());
        let miss = until_probability(&ppda, &all, &SimpleSet::empty(), &eps, &rat(1, 10)).unwrap();
        assert_eq!(miss.interval, Interval::zero());
    }

    #[test]
    fn single_symbol_matches_variables() {
        let ppda = bernoulli(&rat(2, 3));
        let all = SimpleSet::all(&ppda);
        let eps = SimpleSet::all_eps(&ppda);
        let problem = UntilProblem::new(&ppda, &all, &eps).unwrap();
        let c = parse_configuration(&ppda, "I").unwrap();
        let expr = problem.expression(&c).unwrap();
        let i = ppda.symbol_id("I").unwrap();
        let h = Head::new(StateId(0), i);
        let mut expected = Polynomial::var(problem.var(VarId::pop_to(h, StateId(0))));
        if !problem.solver.system().is_pinned(problem.var(VarId::bullet(h))) {
            expected = expected.add(&Polynomial::var(problem.var(VarId::bullet(h))));
        }
        assert_eq!(expr, expected);
    }

    #[test]
    fn termination_free_runs() {
        let ppda = bernoulli(&rat(1, 2));
        let z = parse_configuration(&ppda, "Z").unwrap();
        let r = irun_probability(&ppda, &z, &rat(1, 100)).unwrap();
        assert_eq!(r.interval, Interval::one());
        let i = parse_configuration(&ppda, "I").unwrap();
        assert!(irun_probability(&ppda, &i, &rat(1, 100)).unwrap().interval.contains(&rat(0, 1)));
    }

    #[test]
    fn bisection_rounds() {
        let ppda = bernoulli(&rat(2, 3));
        let all = SimpleSet::all(&ppda);
        let eps = SimpleSet::all_eps(&ppda);
        let c = parse_configuration(&ppda, "I").unwrap();
        let oracle = Oracle::new(super::super::Backend::Exact).with_solver(None);
        let b = bisect_bounds(&ppda, &all, &eps, &c, &rat(1, 8), &oracle).unwrap();
        assert_eq!(b.rounds, 3);
        assert!(b.interval.width() <= rat(1, 8) && b.interval.contains(&rat(1, 2)));
        let one_round = bisect_bounds(&ppda, &all, &eps, &c, &rat(1, 2), &oracle).unwrap();
        assert_eq!(one_round.rounds, 1);
    }
}
