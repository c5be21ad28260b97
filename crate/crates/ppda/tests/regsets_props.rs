mod common;

use common::{arb_automaton, arb_ppda, distribution};
use ppda::model::Ppda;
use ppda::regsets::{bool_ops, configurations_up_to, reduce_to_simple, simple_to_automaton, BoolOp, DeltaAutomaton};
use proptest::prelude::*;

/// A system together with two automata over its configurations.
fn arb_setup() -> impl Strategy<Value = (Ppda, DeltaAutomaton, DeltaAutomaton)> {
    arb_ppda(2, 3, 2).prop_flat_map(|sys| {
        let (nq, ng) = (sys.num_states(), sys.num_symbols());
        (Just(sys), arb_automaton(nq, ng, 2), arb_automaton(nq, ng, 2))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boolean_operations_match_membership((sys, a, b) in arb_setup()) {
        let and = bool_ops(&a, &b, BoolOp::Intersect).unwrap();
        let or = bool_ops(&a, &b, BoolOp::Union).unwrap();
        let not_a = bool_ops(&a, &a, BoolOp::Complement).unwrap();
        for c in configurations_up_to(&sys, 4) {
            let (x, y) = (a.accepts(&c), b.accepts(&c));
            prop_assert_eq!(and.accepts(&c), x && y);
            prop_assert_eq!(or.accepts(&c), x || y);
            prop_assert_eq!(not_a.accepts(&c), !x);
        }
    }

    #[test]
    fn de_morgan((_sys, a, b) in arb_setup()) {
        let lhs = a.intersect(&b).unwrap().complement();
        let rhs = a.complement().union(&b.complement()).unwrap();
        prop_assert!(lhs.equivalent(&rhs).unwrap());
    }

    #[test]
    fn minimization_keeps_the_language((sys, a, _b) in arb_setup()) {
        let m = a.minimize();
        prop_assert!(m.num_states() <= a.num_states().max(sys.num_states()));
        prop_assert!(m.equivalent(&a).unwrap());
        prop_assert_eq!(m.minimize().num_states(), m.num_states());
        for c in configurations_up_to(&sys, 4) {
            prop_assert_eq!(m.accepts(&c), a.accepts(&c));
        }
    }

    #[test]
    fn reduction_is_a_bisimulation((sys, a, b) in arb_setup()) {
        let red = reduce_to_simple(&sys, &[a.clone(), b.clone()]).unwrap();
        let automata = [a, b];
        for c in configurations_up_to(&sys, 3) {
            let e = red.embed(&c);
            prop_assert_eq!(red.project(&e), Some(c.clone()));
            for (j, aut) in automata.iter().enumerate() {
                prop_assert_eq!(red.simple_images[j].contains(&e), aut.accepts(&c));
            }
            let mapped: Vec<_> = distribution(&sys, &c)
                .into_iter()
                .map(|(d, p)| (red.embed(&d), p))
                .collect();
            let image: Vec<_> = distribution(&red.product, &e).into_iter().collect();
            let mut mapped = mapped;
            mapped.sort();
            prop_assert_eq!(image, mapped);
        }
        for (j, aut) in automata.iter().enumerate() {
            let simple = simple_to_automaton(&red.product, &red.simple_images[j]);
            prop_assert!(red.map_back(&simple).unwrap().equivalent(aut).unwrap());
        }
    }
}
