use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};

use super::{Bound, Evaluator, Formula, PctlError, RegularValuation};
use crate::equations::{build_until_system, Polynomial, VarId};
use crate::model::{Head, Ppda, StateId, SymbolId};
use crate::regsets::{DeltaAutomaton, SimpleSet, TopDownDfa};
use crate::solver::{DecisionQuery, Oracle, Relation, SystemSolver, Verdict};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QualMode {
    /// Probability zero.
    Zero,
    /// Probability one.
    One,
}

/// Configurations whose one-step probability of entering `c` satisfies `bound`.
///
/// A successor's head is the first pushed symbol, or the symbol below the
/// top after a pop, so two symbols of lookahead suffice.
pub fn sat_next_quant(ppda: &Ppda, c: &SimpleSet, bound: &Bound) -> DeltaAutomaton {
    DeltaAutomaton::from_top_two(ppda.num_states(), ppda.num_symbols(), |p, top, second| {
        let Some(x) = top else {
            return bound.holds(&Rational::zero());
        };
        let mut sum = Rational::zero();
        for rule in ppda.rules_of(Head::new(p, x)) {
            let q = rule.rhs_state;
            let inside = match (rule.rhs_stack.first(), second) {
                (Some(&y), _) | (None, Some(y)) => c.contains_head(Head::new(q, y)),
                (None, None) => c.contains_eps(q),
            };
            if inside {
                sum += rule.prob.value();
            }
        }
        bound.holds(&sum)
    })
}

pub fn sat_next_qual(ppda: &Ppda, c: &SimpleSet, mode: QualMode) -> DeltaAutomaton {
    let bound = match mode {
        QualMode::Zero => Bound::never(),
        QualMode::One => Bound::almost_surely(),
    };
    sat_next_quant(ppda, c, &bound)
}

type StateSet = BTreeSet<StateId>;

/// Top-down subset automata started in `{p}` for every control state `p`;
/// a `None` step rejects the rest of the stack.
fn subset_automaton(
    ppda: &Ppda,
    mut step: impl FnMut(&StateSet, SymbolId) -> Result<Option<StateSet>, PctlError>,
    accept: impl Fn(&StateSet) -> bool,
) -> Result<DeltaAutomaton, PctlError> {
    let ng = ppda.num_symbols();
    // Index 0 is the rejecting sink.
    let mut sets: Vec<Option<StateSet>> = vec![None];
    let mut index: HashMap<StateSet, usize> = HashMap::new();
    let mut trans: Vec<Vec<usize>> = vec![vec![0; ng]];
    let mut inits = Vec::new();
    let mut queue = Vec::new();
    let mut intern = |s: StateSet, sets: &mut Vec<Option<StateSet>>, trans: &mut Vec<Vec<usize>>, queue: &mut Vec<usize>| {
        *index.entry(s.clone()).or_insert_with(|| {
            sets.push(Some(s));
            trans.push(vec![0; ng]);
            queue.push(sets.len() - 1);
            sets.len() - 1
        })
    };
    for p in ppda.states() {
        inits.push(intern(BTreeSet::from([p]), &mut sets, &mut trans, &mut queue));
    }
    while let Some(i) = queue.pop() {
        let set = sets[i].clone().expect("only the sink is empty");
        for x in ppda.symbols() {
            if let Some(next) = step(&set, x)? {
                trans[i][x.index()] = intern(next, &mut sets, &mut trans, &mut queue);
            }
        }
    }
    let accepting: Vec<bool> = sets.iter().map(|s| s.as_ref().is_some_and(&accept)).collect();
    let per_control: Vec<TopDownDfa> = inits
        .into_iter()
        .map(|init| TopDownDfa {
            init,
            trans: trans.clone(),
            accepting: accepting.clone(),
        })
        .collect();
    Ok(DeltaAutomaton::from_top_down(ng, &per_control))
}

/// `R(qX) = {t | ⟨qXt⟩ > 0}` and `⟨qX•⟩ > 0` from the Boolean abstraction.
struct Positivity {
    pop: HashMap<Head, Vec<StateId>>,
    bullet: HashMap<Head, bool>,
}

impl Positivity {
    fn new(ppda: &Ppda, sys: &crate::equations::MonotoneSystem) -> Self {
        let positive = sys.boolean_abstraction().least_fixed_point();
        let at = |v: VarId| positive[sys.var_index(v).expect("variable exists")];
        let mut pop = HashMap::new();
        let mut bullet = HashMap::new();
        for h in ppda.heads() {
            pop.insert(h, ppda.states().filter(|&t| at(VarId::pop_to(h, t))).collect());
            bullet.insert(h, at(VarId::bullet(h)));
        }
        Positivity { pop, bullet }
    }
}

/// Configurations from which `C₁ U C₂` holds with probability one.
///
/// Reading the stack top first, a set `T` of states must all lead to
/// probability one from the rest of the stack: each `qX` with `q ∈ T` needs
/// `⟨qX•⟩ + Σ_t ⟨qXt⟩ = 1`, and then every `t` with `⟨qXt⟩ > 0` must succeed below.
pub fn sat_until_eq1(ppda: &Ppda, c1: &SimpleSet, c2: &SimpleSet, oracle: &Oracle) -> Result<DeltaAutomaton, PctlError> {
    let sys = build_until_system(ppda, c1, c2)?;
    let positivity = Positivity::new(ppda, &sys);
    let solver = Arc::new(SystemSolver::new(&sys));
    let mut full: HashMap<Head, bool> = HashMap::new();
    let mut is_full = |h: Head| -> Result<bool, PctlError> {
        if let Some(&b) = full.get(&h) {
            return Ok(b);
        }
        let mut expr = Polynomial::var(sys.var_index(VarId::bullet(h)).expect("variable exists"));
        for t in ppda.states() {
            expr = expr.add(&Polynomial::var(sys.var_index(VarId::pop_to(h, t)).expect("variable exists")));
        }
        let query = DecisionQuery::new(Arc::clone(&solver), expr, Relation::Ge, Rational::one());
        let b = match oracle.decide(&query)?.verdict {
            Verdict::True => true,
            Verdict::False => false,
            Verdict::Unknown => {
                let names: Vec<String> = std::iter::once(VarId::bullet(h))
                    .chain(ppda.states().map(|t| VarId::pop_to(h, t)))
                    .map(|v| sys.name(sys.var_index(v).expect("variable exists")).to_string())
                    .collect();
                return Err(PctlError::Undecided(format!("{} = 1", names.join(" + "))));
            }
        };
        full.insert(h, b);
        Ok(b)
    };
    subset_automaton(
        ppda,
        |set, x| {
            let mut next = StateSet::new();
            for &q in set {
                let h = Head::new(q, x);
                if !is_full(h)? {
                    return Ok(None);
                }
                next.extend(positivity.pop[&h].iter().copied());
            }
            Ok(Some(next))
        },
        |set| set.iter().all(|&q| c2.contains_eps(q)),
    )
}

/// Configurations from which `C₁ U C₂` holds with probability zero.
pub fn sat_until_eq0(ppda: &Ppda, c1: &SimpleSet, c2: &SimpleSet) -> Result<DeltaAutomaton, PctlError> {
    let sys = build_until_system(ppda, c1, c2)?;
    let positivity = Positivity::new(ppda, &sys);
    subset_automaton(
        ppda,
        |set, x| {
            let mut next = StateSet::new();
            for &q in set {
                let h = Head::new(q, x);
                if positivity.bullet[&h] {
                    return Ok(None);
                }
                next.extend(positivity.pop[&h].iter().copied());
            }
            Ok(Some(next))
        },
        |set| set.iter().all(|&q| !c2.contains_eps(q)),
    )
}

/// Satisfaction set of a qualitative formula over the configurations of `ppda`.
pub fn check_qualitative(
    ppda: &Ppda,
    f: &Formula,
    valuation: &RegularValuation,
    oracle: &Oracle,
) -> Result<DeltaAutomaton, PctlError> {
    let eval = Evaluator::new(ppda, valuation)?;
    let mut until = |sys: &Ppda, c1: &SimpleSet, c2: &SimpleSet, bound: &Bound| {
        if !bound.is_qualitative() {
            return Err(PctlError::NonQualitative(bound.to_string()));
        }
        let one = bound.value().is_one();
        let sat = if one {
            sat_until_eq1(sys, c1, c2, oracle)?
        } else {
            sat_until_eq0(sys, c1, c2)?
        };
        // `< 1` and `> 0` are the complements of `≥ 1` and `≤ 0`.
        Ok(match bound.rel() {
            Relation::Ge | Relation::Le => sat,
            _ => sat.complement(),
        })
    };
    let check_next = |g: &Formula| -> Result<(), PctlError> {
        fn walk(g: &Formula) -> Result<(), PctlError> {
            match g {
                Formula::Next(b, h) if b.is_qualitative() || b.trivial().is_some() => walk(h),
                Formula::Next(b, _) => Err(PctlError::NonQualitative(b.to_string())),
                Formula::Not(h) => walk(h),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => walk(a).and(walk(b)),
                _ => Ok(()),
            }
        }
        walk(g)
    };
    check_next(f)?;
    let sat = eval.eval(f, &mut until)?;
    Ok(eval.project(&sat))
}
