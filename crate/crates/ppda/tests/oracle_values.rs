//! Reference values obtained independently (closed forms and exact
//! linear solves of small recurrences) and frozen here.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use ppda::fixtures::{bernoulli, z_muller, z_observer};
use ppda::mc::{analyze, analyze_muller};
use ppda::model::{parse_configuration, parse_ppda, Head};
use ppda::omega::parse_observer;
use ppda::regsets::{parse_definitions, parse_set_expr, reduce_to_simple, SimpleSet};
use ppda::solver::{irun_probability, until_probability, Backend, Oracle};
use ppda::{rat, Rational};

const TWO_STATE: &str = include_str!("../../../fixtures/two-state.ppda");

fn oracle() -> Oracle {
    Oracle::new(Backend::Auto)
}

fn tight() -> Rational {
    rat(1, 1_000_000)
}

#[test]
fn walk_until_at_two_thirds() {
    let walk = bernoulli(&rat(2, 3));
    let c = parse_configuration(&walk, "I I Z").unwrap();
    let z = SimpleSet::topped_by(&walk, walk.symbol_id("Z").unwrap());
    let r = until_probability(&walk, &SimpleSet::all(&walk), &z, &c, &tight()).unwrap();
    assert!(r.interval.contains(&rat(1, 4)) && r.width_met, "{}", r.interval);
}

#[test]
fn walk_reaches_two_ups_at_one_third() {
    // a = x(x + (1−x)a) + (1−x)·[D,ε]·a with [D,ε] = 1/2 gives a = 1/4.
    let walk = bernoulli(&rat(1, 3));
    let defs = parse_definitions(&walk, include_str!("../../../fixtures/bernoulli.sets")).unwrap();
    let high = parse_set_expr(&walk, "high", &defs).unwrap().to_automaton(&walk);
    let red = reduce_to_simple(&walk, &[high]).unwrap();
    let c = red.embed(&parse_configuration(&walk, "Z").unwrap());
    let all = SimpleSet::all(&red.product);
    let r = until_probability(&red.product, &all, &red.simple_images[0], &c, &tight()).unwrap();
    assert!(r.interval.contains(&rat(1, 4)), "{}", r.interval);
}

#[test]
fn two_state_reaches_q_y() {
    let sys = parse_ppda(TWO_STATE).unwrap();
    let c = parse_configuration(&sys, "p: X").unwrap();
    let qy = Head::new(sys.state_id("q").unwrap(), sys.symbol_id("Y").unwrap());
    let target = SimpleSet::new(BTreeSet::from([qy]), BTreeSet::new());
    let r = until_probability(&sys, &SimpleSet::all(&sys), &target, &c, &tight()).unwrap();
    assert!(r.interval.contains(&rat(2, 5)), "{}", r.interval);
}

#[test]
fn walk_never_empties_below_z() {
    let walk = bernoulli(&rat(3, 4));
    let z = parse_configuration(&walk, "Z").unwrap();
    assert!(irun_probability(&walk, &z, &tight()).unwrap().interval.contains(&Rational::one()));
    // I pops with probability (1−x)/x = 1/3.
    let i = parse_configuration(&walk, "I").unwrap();
    assert!(irun_probability(&walk, &i, &tight()).unwrap().interval.contains(&rat(2, 3)));
}

#[test]
fn fair_walk_returns_to_z_forever() {
    let walk = bernoulli(&rat(1, 2));
    let c = parse_configuration(&walk, "I I Z").unwrap();
    let a = analyze(&walk, &z_observer(&walk), &c, &rat(1, 1000), &oracle()).unwrap();
    assert!(a.report.interval.contains(&Rational::one()));
    let m = analyze_muller(&walk, &z_muller(&walk), &c, &rat(1, 1000), &oracle()).unwrap();
    assert!(m.report.interval.contains(&Rational::one()));
}

#[test]
fn biased_walk_sees_z_finitely_often() {
    let walk = bernoulli(&rat(3, 4));
    let c = parse_configuration(&walk, "Z").unwrap();
    let m = analyze_muller(&walk, &z_muller(&walk), &c, &rat(1, 1000), &oracle()).unwrap();
    assert_eq!(m.report.interval.hi(), &Rational::zero());
}

#[test]
fn two_state_observer_never_accepts() {
    let sys = parse_ppda(TWO_STATE).unwrap();
    let obs = parse_observer(&sys, include_str!("../../../fixtures/two-state.observer")).unwrap();
    let c = parse_configuration(&sys, "p: X").unwrap();
    let a = analyze(&sys, &obs, &c, &rat(1, 1000), &oracle()).unwrap();
    assert_eq!(a.report.interval.hi(), &Rational::zero());
}
