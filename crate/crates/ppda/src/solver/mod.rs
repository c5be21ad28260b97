//! Certified brackets and threshold decisions for least solutions of
//! monotone systems, and until probabilities built on top of them.
//!
//! All arithmetic is exact. Iteration runs on a dyadic grid whose rounding
//! is always outward: lower vectors round down, upper vectors round up and
//! stay post-fixed, so every reported bracket contains the least solution.

mod decompose;
mod fixpoint;
mod interval;
mod oracle;
mod system;
mod until;

use thiserror::Error;

pub use decompose::Brackets;
pub use interval::Interval;
pub use oracle::{
    export_smt, Backend, DecisionQuery, Evidence, MonotoneQuery, Oracle, OracleAnswer, OracleStats, Relation,
    SolverCommand, Verdict,
};
pub use system::{Method, SystemSolver};
pub use until::{
    bisect_bounds, compare_until, irun_probability, until_probability, Bisection, UntilBracket, UntilProblem,
};

use crate::equations::{EqError, MonotoneSystem, Polynomial, Valuation};
use crate::Rational;
use fixpoint::Compiled;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Equations(#[from] EqError),
    #[error("external solver: {0}")]
    Process(String),
    #[error("external solver timed out")]
    Timeout,
    #[error("{0}")]
    InvalidInput(String),
}

/// When [`kleene_lower`] stops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KleeneStop {
    Iterations(usize),
    /// Once no component grows by more than `width` in one step.
    Increment { width: Rational, max_iterations: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KleeneReport {
    pub values: Valuation,
    /// Steps performed; a stable run stops at the first step that changes nothing.
    pub iterations: usize,
    pub stable: bool,
}

const KLEENE_BITS: u32 = 256;

/// `F^k(0)` rounded down to a fine dyadic grid: a lower bound on the least
/// solution in every component.
pub fn kleene_lower(sys: &MonotoneSystem, stop: KleeneStop) -> KleeneReport {
    let compiled = Compiled::new(&rhs_of(sys), KLEENE_BITS);
    let mut x = vec![num_bigint::BigInt::from(0); sys.len()];
    let (max, threshold) = match &stop {
        KleeneStop::Iterations(k) => (*k, None),
        KleeneStop::Increment { width, max_iterations } => {
            (*max_iterations, Some(compiled.from_rational(width, false)))
        }
    };
    let mut iterations = 0;
    let mut stable = false;
    while iterations < max {
        let before = x.clone();
        if compiled.jacobi(&mut x, 1) == 0 {
            stable = true;
            break;
        }
        iterations += 1;
        if let Some(t) = &threshold {
            let step = x.iter().zip(&before).map(|(a, b)| a - b).max().unwrap_or_default();
            if step <= *t {
                break;
            }
        }
    }
    KleeneReport {
        values: Valuation(x.iter().map(|v| compiled.to_rational(v)).collect()),
        iterations,
        stable,
    }
}

/// Whether `min(1, F(u)) ≤ u` componentwise; then `u` dominates the least solution.
pub fn certify_upper(sys: &MonotoneSystem, u: &Valuation) -> bool {
    u.0.len() == sys.len() && sys.evaluate(u).le(u)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperReport {
    /// Certified post-fixed valuation.
    pub upper: Valuation,
    /// Lower bounds obtained alongside.
    pub lower: Valuation,
    pub gap_met: bool,
}

/// A certified upper valuation within `width` of a lower one where the
/// iteration budget allows.
pub fn find_upper(sys: &MonotoneSystem, width: &Rational) -> UpperReport {
    let solver = SystemSolver::new(sys);
    let b = solver.brackets(Method::Iterative, width);
    let gap_met = b.max_width() <= *width;
    let upper = Valuation(b.hi);
    if certify_upper(sys, &upper) {
        UpperReport {
            upper,
            lower: Valuation(b.lo),
            gap_met,
        }
    } else {
        UpperReport {
            upper: Valuation::constant(sys.len(), num_traits::One::one()),
            lower: Valuation(b.lo),
            gap_met: false,
        }
    }
}

fn rhs_of(sys: &MonotoneSystem) -> Vec<Polynomial> {
    (0..sys.len()).map(|i| sys.rhs(i).clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{build_until_system, VarId};
    use crate::fixtures::bernoulli;
    use crate::model::{Head, StateId};
    use crate::rat;
    use crate::regsets::SimpleSet;
    use std::sync::Arc;

    fn termination(x: Rational) -> (crate::model::Ppda, MonotoneSystem) {
        let ppda = bernoulli(&x);
        let sys = build_until_system(&ppda, &SimpleSet::all(&ppda), &SimpleSet::all_eps(&ppda)).unwrap();
        (ppda, sys)
    }

    fn index(ppda: &crate::model::Ppda, sys: &MonotoneSystem, symbol: &str, bullet: bool) -> usize {
        let h = Head::new(StateId(0), ppda.symbol_id(symbol).unwrap());
        let v = if bullet { VarId::bullet(h) } else { VarId::pop_to(h, StateId(0)) };
        sys.var_index(v).unwrap()
    }

    #[test]
    fn kleene_approaches_from_below() {
        let (ppda, sys) = termination(rat(1, 2));
        let i = index(&ppda, &sys, "I", false);
        let r = kleene_lower(&sys, KleeneStop::Iterations(100));
        assert!(r.values.0[i] >= rat(98, 100));
        assert!(r.values.0[i] < rat(1, 1));
        let (ppda, sys) = termination(rat(2, 3));
        let i = index(&ppda, &sys, "I", false);
        let mut last = rat(0, 1);
        for k in [1, 2, 5, 10, 50] {
            let v = kleene_lower(&sys, KleeneStop::Iterations(k)).values.0[i].clone();
            assert!(v >= last && v <= rat(1, 2));
            last = v;
        }
    }

    #[test]
    fn exact_solution_certifies() {
        let (ppda, sys) = termination(rat(2, 3));
        let mut u = kleene_lower(&sys, KleeneStop::Iterations(0)).values;
        for (name, bullet, value) in [("Z", false, rat(0, 1)), ("I", false, rat(1, 2)), ("D", false, rat(1, 1))] {
            u.0[index(&ppda, &sys, name, bullet)] = value;
        }
        assert!(certify_upper(&sys, &u));
        u.0[index(&ppda, &sys, "I", false)] = rat(49, 100);
        assert!(!certify_upper(&sys, &u));
        assert!(certify_upper(&sys, &Valuation::constant(sys.len(), rat(1, 1))));
    }

    #[test]
    fn upper_search_brackets() {
        let (ppda, sys) = termination(rat(2, 3));
        let r = find_upper(&sys, &rat(1, 1000));
        let i = index(&ppda, &sys, "I", false);
        assert!(r.gap_met && r.upper.0[i] >= rat(1, 2) && r.upper.0[i] <= rat(1, 2) + rat(1, 1000));
    }

    #[test]
    fn oracle_layers() {
        let (ppda, sys) = termination(rat(2, 3));
        let i = index(&ppda, &sys, "I", false);
        let solver = Arc::new(SystemSolver::new(&sys));
        let q = DecisionQuery::new(solver, Polynomial::var(i), Relation::Eq, rat(1, 2));
        let intervals = Oracle::new(Backend::Intervals).with_solver(None);
        assert_eq!(intervals.decide(&q).unwrap().verdict, Verdict::Unknown);
        let exact = Oracle::new(Backend::Exact).with_solver(None);
        assert_eq!(exact.decide(&q).unwrap().verdict, Verdict::True);
    }

    #[test]
    fn external_solver_agrees() {
        let Some(cmd) = SolverCommand::from_env() else { return };
        let external = Oracle::new(Backend::External).with_solver(Some(cmd));
        let (ppda, sys) = termination(rat(2, 3));
        let i = index(&ppda, &sys, "I", false);
        let solver = Arc::new(SystemSolver::new(&sys));
        let q = DecisionQuery::new(Arc::clone(&solver), Polynomial::var(i), Relation::Eq, rat(1, 2));
        assert_eq!(external.decide(&q).unwrap().verdict, Verdict::True);
        let q = DecisionQuery::new(solver, Polynomial::var(i), Relation::Lt, rat(0, 1));
        assert_eq!(external.decide(&q).unwrap().verdict, Verdict::False);
        let (ppda, sys) = termination(rat(1, 2));
        let i = index(&ppda, &sys, "I", false);
        let solver = Arc::new(SystemSolver::new(&sys));
        let q = DecisionQuery::new(Arc::clone(&solver), Polynomial::var(i), Relation::Lt, rat(1, 1));
        assert_eq!(external.decide(&q).unwrap().verdict, Verdict::False);
        let q = DecisionQuery::new(solver, Polynomial::var(i), Relation::Ge, rat(1, 1));
        assert_eq!(external.decide(&q).unwrap().verdict, Verdict::True);
    }
}
