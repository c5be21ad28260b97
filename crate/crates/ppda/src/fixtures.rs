//! Small systems used throughout the documentation and tests.

use crate::model::{parse_ppda, Ppda};
use crate::omega::{Acceptance, MullerAutomaton, ObservingAutomaton};
use crate::text::format_rational;
use crate::Rational;

/// The Bernoulli random walk: `Z` is the bottom, `I`/`D` count up/down steps.
///
/// `Z -x-> IZ`, `Z -(1-x)-> DZ`, `I -x-> II`, `I -(1-x)-> ε`,
/// `D -(1-x)-> DD`, `D -x-> ε`. `x` must lie strictly between 0 and 1.
pub fn bernoulli(x: &Rational) -> Ppda {
    let one = Rational::from_integer(1.into());
    assert!(*x > Rational::from_integer(0.into()) && *x < one, "x must lie in (0, 1)");
    let (p, q) = (format_rational(x), format_rational(&(&one - x)));
    parse_ppda(&format!(
        "pbpa
         alphabet Z I D;
         Z -> {p} I Z;
         Z -> {q} D Z;
         I -> {p} I I;
         I -> {q} eps;
         D -> {q} D D;
         D -> {p} eps;"
    ))
    .expect("fixture parses")
}

/// Observer over the Bernoulli walk that moves to its second state on the
/// first `Z` head and stays there; accepting iff that state recurs.
pub fn z_observer(walk: &Ppda) -> ObservingAutomaton {
    let z = walk.symbol_id("Z").expect("walk has Z");
    let nh = walk.num_heads();
    let mut step = vec![0usize; 2 * nh];
    for h in walk.heads() {
        let i = walk.head_index(h);
        step[i] = usize::from(h.symbol == z);
        step[nh + i] = 1;
    }
    ObservingAutomaton::new(
        vec!["a0".into(), "a1".into()],
        walk.num_states(),
        walk.num_symbols(),
        step,
        0,
        Acceptance::sets([[1usize]]),
    )
    .expect("total step function")
}

/// Muller automaton over the walk's heads accepting runs that see `Z`
/// infinitely often: state `z` is entered exactly on `Z` heads.
pub fn z_muller(walk: &Ppda) -> MullerAutomaton {
    let z = walk.symbol_id("Z").expect("walk has Z");
    let nh = walk.num_heads();
    let mut step = vec![0usize; 2 * nh];
    for h in walk.heads() {
        let i = walk.head_index(h);
        let target = usize::from(h.symbol == z);
        step[i] = target;
        step[nh + i] = target;
    }
    MullerAutomaton::new(
        vec!["other".into(), "z".into()],
        walk.num_states(),
        walk.num_symbols(),
        step,
        0,
        [vec![1usize], vec![0, 1]].into_iter().map(|s| s.into_iter().collect()).collect(),
    )
    .expect("total step function")
}
