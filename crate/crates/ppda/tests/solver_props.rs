mod common;

use std::collections::BTreeSet;

use common::{arb_bounded_ppda, arb_ppda, explicit_until};
use num_traits::{One, Zero};
use ppda::equations::build_until_system;
use ppda::model::{Configuration, Head, Ppda, StateId};
use ppda::regsets::{configurations_up_to, SimpleSet};
use ppda::solver::{
    bisect_bounds, certify_upper, find_upper, kleene_lower, until_probability, KleeneStop, Method, Oracle,
    Backend, SystemSolver, UntilProblem,
};
use ppda::{rat, Rational};
use proptest::prelude::*;

/// Simple set from bit masks over heads and control states.
fn simple(sys: &Ppda, heads: u64, eps: u64) -> SimpleSet {
    let hs: BTreeSet<Head> = sys.heads().filter(|h| heads >> sys.head_index(*h) & 1 == 1).collect();
    let es: BTreeSet<StateId> = sys.states().filter(|q| eps >> q.index() & 1 == 1).collect();
    SimpleSet::new(hs, es)
}

fn arb_problem(sys: impl Strategy<Value = Ppda>) -> impl Strategy<Value = (Ppda, SimpleSet, SimpleSet)> {
    (sys, any::<u64>(), any::<u64>(), any::<u64>(), any::<u64>()).prop_map(|(sys, h1, e1, h2, e2)| {
        // C1 keeps most heads so that runs have room to move.
        let c1 = simple(&sys, h1 | h1 >> 1 | h1 >> 2, e1);
        let c2 = simple(&sys, h2 & h2 >> 3, e2);
        (sys, c1, c2)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kleene_iterates_stay_below_certified_uppers((sys, c1, c2) in arb_problem(arb_ppda(2, 3, 2))) {
        let eqs = build_until_system(&sys, &c1, &c2).unwrap();
        let upper = find_upper(&eqs, &rat(1, 100));
        prop_assert!(certify_upper(&eqs, &upper.upper));
        let mut previous: Option<ppda::equations::Valuation> = None;
        for k in [1, 2, 4, 8, 16] {
            let low = kleene_lower(&eqs, KleeneStop::Iterations(k)).values;
            prop_assert!(low.le(&upper.upper));
            if let Some(p) = &previous {
                prop_assert!(p.le(&low), "iterates must grow");
            }
            previous = Some(low);
        }
    }

    #[test]
    fn boolean_abstraction_matches_positivity((sys, c1, c2) in arb_problem(arb_ppda(2, 3, 2))) {
        let eqs = build_until_system(&sys, &c1, &c2).unwrap();
        let positive = eqs.boolean_abstraction().least_fixed_point();
        // Positivity shows up within as many rounds as there are variables.
        let low = kleene_lower(&eqs, KleeneStop::Iterations(eqs.len() + 1)).values;
        for (i, p) in positive.iter().enumerate() {
            prop_assert_eq!(*p, !low.0[i].is_zero(), "variable {}", eqs.name(i));
        }
    }

    #[test]
    fn brackets_contain_exact_values((sys, c1, c2) in arb_problem(arb_bounded_ppda(2, 3))) {
        let universe = configurations_up_to(&sys, 3);
        let exact = explicit_until(&sys, &universe, &|c| c1.contains(c), &|c| c2.contains(c));
        let problem = UntilProblem::new(&sys, &c1, &c2).unwrap();
        let width = rat(1, 1000);
        for c in universe.iter().filter(|c| c.len() <= 2) {
            let b = problem.probability(c, &width).unwrap();
            prop_assert!(b.interval.contains(&exact[c]), "{}: {:?} vs {}", sys.display_config(c), b.interval, exact[c]);
            prop_assert!(b.width_met);
        }
    }

    #[test]
    fn both_methods_agree((sys, c1, c2) in arb_problem(arb_ppda(2, 3, 2))) {
        let eqs = build_until_system(&sys, &c1, &c2).unwrap();
        let solver = SystemSolver::new(&eqs);
        let width = rat(1, 1000);
        let a = solver.brackets(Method::Iterative, &width);
        let b = solver.brackets(Method::Decomposed, &width);
        for i in 0..a.lo.len() {
            prop_assert!(a.lo[i] <= b.hi[i] && b.lo[i] <= a.hi[i], "variable {}", solver.system().name(i));
        }
    }

    #[test]
    fn bisection_brackets_contain_exact_values((sys, c1, c2) in arb_problem(arb_bounded_ppda(2, 3)), k in 1usize..6) {
        let universe = configurations_up_to(&sys, 3);
        let exact = explicit_until(&sys, &universe, &|c| c1.contains(c), &|c| c2.contains(c));
        let oracle = Oracle::new(Backend::Auto);
        let lambda = Rational::one() / Rational::from_integer((1u64 << k).into());
        let c = &universe[universe.len() / 2];
        let r = bisect_bounds(&sys, &c1, &c2, c, &lambda, &oracle).unwrap();
        prop_assert!(r.interval.contains(&exact[c]));
        prop_assert!(r.interval.width() <= lambda);
        prop_assert_eq!(r.rounds, k);
    }
}

#[test]
fn stack_words_compose_from_pop_probabilities() {
    // With Z in the target, P(IIZ) = [I,ε]², where [I,ε] is the
    // probability of reaching the empty stack from I.
    let walk = ppda::fixtures::bernoulli(&rat(2, 3));
    let id = |s: &str| walk.symbol_id(s).unwrap();
    let all = SimpleSet::all(&walk);
    let width = rat(1, 100_000);
    let p = |c2: &SimpleSet, w: &[&str]| {
        let c = Configuration::new(StateId(0), w.iter().map(|s| id(s)).collect());
        until_probability(&walk, &all, c2, &c, &width).unwrap().interval
    };
    let pop = p(&SimpleSet::all_eps(&walk), &["I"]);
    let iiz = p(&SimpleSet::topped_by(&walk, id("Z")), &["I", "I", "Z"]);
    assert!(pop.contains(&rat(1, 2)));
    assert!(pop.mul(&pop).intersect(&iiz).is_some());
    assert!(iiz.contains(&rat(1, 4)));
}
