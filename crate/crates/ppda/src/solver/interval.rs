use std::fmt;

use num_traits::{One, Zero};

use crate::text::format_rational;
use crate::Rational;

/// Closed rational interval `[lo, hi]`, used as a certified bracket.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    /// Panics if `lo > hi`.
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: Rational, hi: Rational) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn one() -> Self {
        Self::point(Rational::one())
    }

    /// `[0, 1]`.
    pub fn unit() -> Self {
        Interval::new(Rational::zero(), Rational::one())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(2.into())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        if self.lo >= Rational::zero() && other.lo >= Rational::zero() {
            return Interval {
                lo: &self.lo * &other.lo,
                hi: &self.hi * &other.hi,
            };
        }
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().expect("four products").clone();
        let hi = products.iter().max().expect("four products").clone();
        Interval { lo, hi }
    }

    /// Quotient by an interval of positive numbers.
    pub fn div_positive(&self, other: &Interval) -> Interval {
        assert!(other.lo > Rational::zero(), "divisor interval must be positive");
        let candidates = [
            &self.lo / &other.lo,
            &self.lo / &other.hi,
            &self.hi / &other.lo,
            &self.hi / &other.hi,
        ];
        Interval {
            lo: candidates.iter().min().expect("four quotients").clone(),
            hi: candidates.iter().max().expect("four quotients").clone(),
        }
    }

    pub fn scale(&self, k: &Rational) -> Interval {
        assert!(*k >= Rational::zero());
        Interval {
            lo: &self.lo * k,
            hi: &self.hi * k,
        }
    }

    /// `1 - self`.
    pub fn complement(&self) -> Interval {
        Interval {
            lo: Rational::one() - &self.hi,
            hi: Rational::one() - &self.lo,
        }
    }

    /// Both intervals bracket the same value, so their intersection does too.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(
            self.lo.clone().max(other.lo.clone()),
            self.hi.clone().min(other.hi.clone()),
        )
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Intersection with `[0, 1]`, for brackets of probabilities.
    pub fn clamp_unit(&self) -> Interval {
        let zero = Rational::zero();
        let one = Rational::one();
        let lo = self.lo.clone().max(zero.clone()).min(one.clone());
        let hi = self.hi.clone().min(one).max(lo.clone());
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
    }
}
