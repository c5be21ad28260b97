use std::sync::Mutex;

use num_traits::One;

use super::decompose::{self, Brackets, SolveOptions};
use super::fixpoint::{bracket, width_units, Compiled};
use super::Interval;
use crate::equations::{MonotoneSystem, Polynomial, VarId};
use crate::Rational;

/// How brackets of the least solution are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Whole-system lower iteration plus post-fixed upper search.
    Iterative,
    /// Component-wise solving with closed forms where available.
    Decomposed,
}

const MAX_BITS: u32 = 4096;

/// A pruned equation system with cached brackets of its least solution.
#[derive(Debug)]
pub struct SystemSolver {
    sys: MonotoneSystem,
    order: Vec<usize>,
    iterative: Mutex<Option<(Rational, Brackets)>>,
    decomposed: Mutex<Option<(Rational, Brackets)>>,
    /// Sweep budget for iteration.
    budget: usize,
}

impl SystemSolver {
    pub fn new(sys: &MonotoneSystem) -> Self {
        let sys = sys.prune_zeros();
        let order = decompose::sweep_order(&sys);
        SystemSolver {
            sys,
            order,
            iterative: Mutex::new(None),
            decomposed: Mutex::new(None),
            budget: 200_000,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn system(&self) -> &MonotoneSystem {
        &self.sys
    }

    pub fn var_index(&self, v: VarId) -> Option<usize> {
        self.sys.var_index(v)
    }

    /// Brackets with every width at most `width`, or the best the budget
    /// allows (check [`Brackets::max_width`]).
    pub fn brackets(&self, method: Method, width: &Rational) -> Brackets {
        let cache = match method {
            Method::Iterative => &self.iterative,
            Method::Decomposed => &self.decomposed,
        };
        let mut slot = cache.lock().expect("bracket cache poisoned");
        if let Some((w, b)) = slot.as_ref() {
            if w <= width || b.max_width() <= *width {
                return b.clone();
            }
        }
        let b = match method {
            Method::Iterative => self.iterate(width),
            Method::Decomposed => self.decompose(width),
        };
        *slot = Some((width.clone(), b.clone()));
        b
    }

    fn bits_for(width: &Rational) -> u32 {
        // Enough grid resolution that rounding uses a small part of the width.
        let mut bits = 64u32;
        let mut unit = Rational::new(1.into(), num_bigint::BigInt::one() << (bits - 12));
        while unit > *width && bits < MAX_BITS {
            bits *= 2;
            unit = Rational::new(1.into(), num_bigint::BigInt::one() << (bits - 12));
        }
        bits
    }

    fn iterate(&self, width: &Rational) -> Brackets {
        let bits = Self::bits_for(width);
        let rhs: Vec<Polynomial> = (0..self.sys.len()).map(|i| self.sys.rhs(i).clone()).collect();
        let compiled = Compiled::new(&rhs, bits);
        let b = bracket(&compiled, &self.order, &width_units(width, bits), self.budget);
        let mut lo: Vec<Rational> = b.lower.iter().map(|x| compiled.to_rational(x)).collect();
        let mut hi: Vec<Rational> = b.upper.iter().map(|x| compiled.to_rational(x)).collect();
        for (&i, c) in self.sys.pinned() {
            lo[i] = c.clone();
            hi[i] = c.clone();
        }
        Brackets { lo, hi }
    }

    fn decompose(&self, width: &Rational) -> Brackets {
        let mut bits = Self::bits_for(width);
        loop {
            let opts = SolveOptions {
                bits,
                width: width / Rational::from_integer(4.into()),
                budget: self.budget,
            };
            let b = decompose::solve(&self.sys, &opts);
            if b.max_width() <= *width || bits >= MAX_BITS {
                debug_assert!(super::certify_upper(&self.sys, &crate::equations::Valuation(b.hi.clone())));
                return b;
            }
            bits *= 2;
        }
    }

    /// Bracket of a polynomial over the variables.
    pub fn eval_interval(&self, expr: &Polynomial, b: &Brackets) -> Interval {
        eval_poly(expr, |v| Interval::new(b.lo[v].clone(), b.hi[v].clone()))
    }
}

pub(crate) fn eval_poly(expr: &Polynomial, var: impl Fn(usize) -> Interval) -> Interval {
    let mut acc = Interval::zero();
    for (m, c) in expr.terms() {
        let mut term = Interval::point(c.clone());
        for &v in m {
            term = term.mul(&var(v as usize));
        }
        acc = acc.add(&term);
    }
    acc
}
