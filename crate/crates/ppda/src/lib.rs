//! Model checking for probabilistic pushdown automata.
//!
//! The crate computes certified rational bounds on reachability ("until")
//! probabilities, decides threshold comparisons through a layered oracle,
//! checks qualitative PCTL with regular valuations, runs error-tolerant
//! quantitative PCTL for stateless systems, and bounds probabilities of
//! ω-regular properties through a finite chain over stack minima.
//!
//! All probabilities are exact [`Rational`]s.

pub mod equations;
pub mod solver;
pub mod fixtures;
pub mod mc;
pub mod model;
pub mod omega;
pub mod pbpa;
pub mod pctl;
pub mod regsets;
pub mod sim;
mod text;

pub use num_rational::BigRational as Rational;
pub use text::{format_rational, parse_rational, ParseError, Pos};

/// Shorthand for `Rational::new(num, den)`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
