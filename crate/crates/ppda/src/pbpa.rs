//! Error-tolerant checking of quantitative PCTL on stateless systems.
//!
//! For an until node `C₁ U[≥ρ] C₂` only symbols that may fail to pop matter
//! (`S`, those with `[X,ε] < 1`), and every word over `S` longer than `n`
//! has its value decided, up to `λ/3`, by its first `n` symbols. Brackets of
//! `[X,ε]` and `[X,•]` are bisected until the accumulated error along words
//! of length `n` is below `λ/3`, and the threshold set is the finite set of
//! short words whose bracketed value passes, closed under inserting symbols
//! outside `S`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::equations::{build_until_system, EqError, Polynomial, VarId};
use crate::model::{Configuration, Head, Ppda, StateId, SymbolId};
use crate::pctl::{negation_free, Bound, Evaluator, Formula, PctlError, RegularValuation};
use crate::regsets::{DeltaAutomaton, SimpleSet, TopDownDfa};
use crate::solver::{DecisionQuery, Interval, Method, Oracle, Relation, SolverError, SystemSolver, Verdict};
use crate::text::format_rational;
use crate::Rational;

pub use crate::pctl::sat_next_quant;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("error-tolerant checking needs a system with one control state")]
    NotStateless,
    #[error("tolerance must lie strictly between 0 and 1")]
    BadTolerance,
    #[error("parameters not reached within {0} refinement rounds")]
    RoundBudget(usize),
    #[error("threshold set needs {needed} words, budget is {budget}")]
    WordBudget { needed: u128, budget: usize },
    #[error("undecided: {0}")]
    Undecided(String),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Equations(#[from] EqError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Output of the parameter search for one until node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxParams {
    /// Symbols `X` with `[X,ε] ≠ 1`.
    pub s: BTreeSet<SymbolId>,
    pub n: usize,
    pub kappa: Rational,
    /// Width of every bracket below.
    pub nu: Rational,
    pub lambda: Rational,
    /// `[X,ε]` per symbol of `S`.
    pub pop: BTreeMap<SymbolId, Interval>,
    /// `[X,•]` per symbol of `S`.
    pub bullet: BTreeMap<SymbolId, Interval>,
    /// Whether the empty stack belongs to `C₂`.
    pub eps_in_c2: bool,
    pub rounds: usize,
    /// `(n, κ)` after every round that reached `κ < 1`.
    pub history: Vec<(usize, Rational)>,
}

impl ApproxParams {
    /// `P(β)` evaluated with upper (`upper = true`) or lower brackets.
    pub fn bracket_value(&self, beta: &[SymbolId], upper: bool) -> Rational {
        let pick = |i: &Interval| if upper { i.hi().clone() } else { i.lo().clone() };
        let base = if self.eps_in_c2 { Rational::one() } else { Rational::zero() };
        beta.iter().rev().fold(base, |below, x| pick(&self.bullet[x]) + pick(&self.pop[x]) * below)
    }
}

/// Least `n ≥ 1` with `κⁿ ≤ target`; `κ < 1`.
fn exponent_for(kappa: &Rational, target: &Rational) -> usize {
    let mut n = 1;
    let mut power = kappa.clone();
    while power > *target {
        power *= kappa;
        n += 1;
    }
    n
}

/// `n·(ν + ν·(n+1)·(1+ν)ⁿ)`, the bracket error accumulated along `n` symbols.
pub fn accumulated_error(n: usize, nu: &Rational) -> Rational {
    let growth = num_traits::pow(Rational::one() + nu, n);
    let n_r = Rational::from_integer(n.into());
    &n_r * (nu + nu * (&n_r + Rational::one()) * growth)
}

const MAX_ROUNDS: usize = 200;

/// Bisects the brackets of `[X,ε]` and `[X,•]` for `X ∈ S` until
/// `κ < 1` and the accumulated error is at most `λ/3`.
pub fn compute_params(
    pbpa: &Ppda,
    c1: &SimpleSet,
    c2: &SimpleSet,
    lambda: &Rational,
    oracle: &Oracle,
) -> Result<ApproxParams, ApproxError> {
    if pbpa.num_states() != 1 {
        return Err(ApproxError::NotStateless);
    }
    if *lambda <= Rational::zero() || *lambda >= Rational::one() {
        return Err(ApproxError::BadTolerance);
    }
    let sys = build_until_system(pbpa, c1, c2)?;
    let solver = Arc::new(SystemSolver::new(&sys));
    let p = StateId(0);
    let var = |x: SymbolId, bullet: bool| {
        let h = Head::new(p, x);
        let v = if bullet { VarId::bullet(h) } else { VarId::pop_to(h, p) };
        sys.var_index(v).expect("variable exists")
    };
    let decide = |i: usize, rel: Relation, bound: &Rational| -> Result<Verdict, ApproxError> {
        let q = DecisionQuery::new(Arc::clone(&solver), Polynomial::var(i), rel, bound.clone());
        Ok(oracle.decide(&q)?.verdict)
    };

    let mut s = BTreeSet::new();
    for x in pbpa.symbols() {
        match decide(var(x, false), Relation::Ge, &Rational::one())? {
            Verdict::True => {}
            Verdict::False => {
                s.insert(x);
            }
            Verdict::Unknown => return Err(ApproxError::Undecided(format!("{} = 1", sys.name(var(x, false))))),
        }
    }
    let mut pop: BTreeMap<SymbolId, Interval> = s.iter().map(|&x| (x, Interval::unit())).collect();
    let mut bullet = pop.clone();
    let third = lambda / Rational::from_integer(3.into());
    let mut nu = Rational::one();
    let mut history: Vec<(usize, Rational)> = Vec::new();
    for round in 1..=MAX_ROUNDS {
        for &x in &s {
            for (is_bullet, brackets) in [(false, &mut pop), (true, &mut bullet)] {
                let i = var(x, is_bullet);
                let current = brackets[&x].clone();
                let mid = current.mid();
                let next = match decide(i, Relation::Ge, &mid)? {
                    Verdict::True => Interval::new(mid, current.hi().clone()),
                    Verdict::False => Interval::new(current.lo().clone(), mid),
                    Verdict::Unknown => {
                        // Settle the round from a certified bracket of half the width.
                        let half = current.width() / Rational::from_integer(2.into());
                        let b = solver.brackets(Method::Decomposed, &half);
                        let refined = Interval::new(b.lo[i].clone(), b.hi[i].clone());
                        let both = current.intersect(&refined).unwrap_or(refined);
                        if both.width() > half {
                            return Err(ApproxError::Undecided(format!("{} >= {}", sys.name(i), format_rational(&mid))));
                        }
                        both
                    }
                };
                brackets.insert(x, next);
            }
        }
        nu /= Rational::from_integer(2.into());
        let kappa = pop.values().map(|i| i.hi().clone()).max().unwrap_or_else(Rational::zero);
        if kappa < Rational::one() {
            let n = exponent_for(&kappa, &third);
            if let Some((n0, k0)) = history.last() {
                debug_assert!(kappa <= *k0 && n <= *n0, "kappa and n only decrease");
            }
            history.push((n, kappa.clone()));
            if accumulated_error(n, &nu) <= third {
                return Ok(ApproxParams {
                    s,
                    n,
                    kappa,
                    nu,
                    lambda: lambda.clone(),
                    pop,
                    bullet,
                    eps_in_c2: c2.contains_eps(p),
                    rounds: round,
                    history,
                });
            }
        }
    }
    Err(ApproxError::RoundBudget(MAX_ROUNDS))
}

/// `α` with every symbol outside `S` deleted.
pub fn restrict_word(alpha: &[SymbolId], s: &BTreeSet<SymbolId>) -> Vec<SymbolId> {
    alpha.iter().copied().filter(|x| s.contains(x)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Probability at least the threshold.
    AtLeast,
    /// Probability at most the threshold.
    AtMost,
}

/// Upper limit on the number of words over `S` examined by [`build_g`].
pub const WORD_BUDGET: usize = 1 << 20;

/// Words `β ∈ S^{≤n}` (top first) passing the threshold test: for
/// `AtLeast`, upper-bracket value `≥ ρ` (`≥ ρ − λ/3` at length `n`); for
/// `AtMost`, lower-bracket value `≤ ρ` (`≤ ρ + λ/3` at length `n`).
pub fn build_g(params: &ApproxParams, rho: &Rational, dir: Direction) -> Result<BTreeSet<Vec<SymbolId>>, ApproxError> {
    let k = params.s.len() as u128;
    let needed: u128 = (0..=params.n as u32).map(|i| k.saturating_pow(i)).fold(0u128, u128::saturating_add);
    if needed > WORD_BUDGET as u128 {
        return Err(ApproxError::WordBudget {
            needed,
            budget: WORD_BUDGET,
        });
    }
    let third = &params.lambda / Rational::from_integer(3.into());
    let upper = dir == Direction::AtLeast;
    let passes = |value: &Rational, full: bool| match (dir, full) {
        (Direction::AtLeast, false) => value >= rho,
        (Direction::AtLeast, true) => *value >= rho - &third,
        (Direction::AtMost, false) => value <= rho,
        (Direction::AtMost, true) => *value <= rho + &third,
    };
    let pick = |i: &Interval| if upper { i.hi().clone() } else { i.lo().clone() };
    let base = params.bracket_value(&[], upper);
    let mut g = BTreeSet::new();
    // Words of the current length with their values, extended at the top.
    let mut layer: Vec<(Vec<SymbolId>, Rational)> = vec![(Vec::new(), base)];
    for len in 0..=params.n {
        for (w, v) in &layer {
            if passes(v, len == params.n) {
                g.insert(w.clone());
            }
        }
        if len == params.n {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * params.s.len());
        for (w, v) in &layer {
            for &x in &params.s {
                let mut word = Vec::with_capacity(w.len() + 1);
                word.push(x);
                word.extend_from_slice(w);
                next.push((word, pick(&params.bullet[&x]) + pick(&params.pop[&x]) * v));
            }
        }
        layer = next;
    }
    Ok(g)
}

/// Stacks `α` whose restriction to `S` is a member of `G` shorter than `n`,
/// or begins with a member of length `n`.
pub fn build_threshold_automaton(g: &BTreeSet<Vec<SymbolId>>, params: &ApproxParams, num_symbols: usize) -> DeltaAutomaton {
    // Trie over prefixes of G; state 0 rejects, state 1 accepts everything.
    let mut nodes: BTreeMap<Vec<SymbolId>, usize> = BTreeMap::new();
    let mut trans: Vec<Vec<usize>> = vec![vec![0; num_symbols], vec![1; num_symbols]];
    let mut accepting = vec![false, true];
    for w in g {
        for k in 0..=w.len() {
            let prefix = w[..k].to_vec();
            if !nodes.contains_key(&prefix) {
                nodes.insert(prefix, trans.len());
                trans.push(vec![0; num_symbols]);
                accepting.push(false);
            }
        }
    }
    for (prefix, &i) in &nodes {
        accepting[i] = prefix.len() < params.n && g.contains(prefix);
        for x in 0..num_symbols {
            let sym = SymbolId(x as u32);
            trans[i][x] = if !params.s.contains(&sym) {
                i
            } else {
                let mut longer = prefix.clone();
                longer.push(sym);
                if longer.len() == params.n && g.contains(&longer) {
                    1
                } else {
                    nodes.get(&longer).copied().unwrap_or(0)
                }
            };
        }
    }
    let init = nodes.get(&Vec::new()).copied().unwrap_or(0);
    let init = if params.n == 0 && g.contains(&Vec::new()) { 1 } else { init };
    DeltaAutomaton::from_top_down(num_symbols, &[TopDownDfa { init, trans, accepting }])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "YES",
            Answer::No => "NO",
        })
    }
}

/// Parameters used at one until node, in evaluation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeParams {
    pub bound: Bound,
    pub n: usize,
    pub kappa: Rational,
    pub nu: Rational,
    pub s_size: usize,
    pub g_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToleranceVerdict {
    pub answer: Answer,
    pub lambda: Rational,
    pub nodes: Vec<NodeParams>,
}

/// YES for every configuration satisfying `f`; every YES satisfies `f`
/// with each until threshold relaxed by `λ`.
pub fn check_error_tolerant(
    pbpa: &Ppda,
    f: &Formula,
    valuation: &RegularValuation,
    c: &Configuration,
    lambda: &Rational,
    oracle: &Oracle,
) -> Result<ToleranceVerdict, ApproxError> {
    let (set, nodes) = tolerant_set(pbpa, f, valuation, lambda, oracle)?;
    Ok(ToleranceVerdict {
        answer: if set.accepts(c) { Answer::Yes } else { Answer::No },
        lambda: lambda.clone(),
        nodes,
    })
}

/// The set answered YES, as an automaton over the configurations of `pbpa`.
pub fn tolerant_set(
    pbpa: &Ppda,
    f: &Formula,
    valuation: &RegularValuation,
    lambda: &Rational,
    oracle: &Oracle,
) -> Result<(DeltaAutomaton, Vec<NodeParams>), ApproxError> {
    if pbpa.num_states() != 1 {
        return Err(ApproxError::NotStateless);
    }
    if *lambda <= Rational::zero() || *lambda >= Rational::one() {
        return Err(ApproxError::BadTolerance);
    }
    let (f, valuation) = negation_free(f, valuation)?;
    let eval = Evaluator::new(pbpa, &valuation)?;
    let mut nodes = Vec::new();
    let mut until = |sys: &Ppda, c1: &SimpleSet, c2: &SimpleSet, bound: &Bound| -> Result<DeltaAutomaton, ApproxError> {
        // A strict threshold keeps half the slack so the relaxed bound stays strict.
        let slack = match bound.rel() {
            Relation::Lt | Relation::Gt => lambda / Rational::from_integer(2.into()),
            _ => lambda.clone(),
        };
        let dir = match bound.rel() {
            Relation::Ge | Relation::Gt => Direction::AtLeast,
            _ => Direction::AtMost,
        };
        let params = compute_params(sys, c1, c2, &slack, oracle)?;
        let g = build_g(&params, bound.value(), dir)?;
        nodes.push(NodeParams {
            bound: bound.clone(),
            n: params.n,
            kappa: params.kappa.clone(),
            nu: params.nu.clone(),
            s_size: params.s.len(),
            g_size: g.len(),
        });
        Ok(build_threshold_automaton(&g, &params, sys.num_symbols()))
    };
    let sat = eval.eval(&f, &mut until)?;
    Ok((eval.project(&sat), nodes))
}
