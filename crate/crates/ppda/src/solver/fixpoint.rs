//! Fixed-point iteration on a dyadic grid. Values are integers `X` standing
//! for `X / 2^bits`; equations are compiled to integer coefficients over a
//! common denominator so every rounding step is an exact integer division.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::equations::Polynomial;
use crate::Rational;

struct CompiledEq {
    denom: BigInt,
    constant: BigInt,
    linear: Vec<(usize, BigInt)>,
    quadratic: Vec<(usize, usize, BigInt)>,
}

/// `x = min(1, F(x))` compiled for repeated evaluation.
pub(crate) struct Compiled {
    eqs: Vec<CompiledEq>,
    bits: u32,
    one: BigInt,
}

impl Compiled {
    /// `rhs[i]` may only mention variables `0..rhs.len()` and has degree ≤ 2.
    pub(crate) fn new(rhs: &[Polynomial], bits: u32) -> Self {
        let eqs = rhs
            .iter()
            .map(|p| {
                let denom = p
                    .terms()
                    .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
                let scaled = |c: &Rational| (c * Rational::from_integer(denom.clone())).to_integer();
                let mut eq = CompiledEq {
                    denom: denom.clone(),
                    constant: BigInt::zero(),
                    linear: Vec::new(),
                    quadratic: Vec::new(),
                };
                for (m, c) in p.terms() {
                    match m.as_slice() {
                        [] => eq.constant = scaled(c),
                        [u] => eq.linear.push((*u as usize, scaled(c))),
                        [u, v] => eq.quadratic.push((*u as usize, *v as usize, scaled(c))),
                        _ => panic!("equations have degree at most two"),
                    }
                }
                eq
            })
            .collect();
        Compiled {
            eqs,
            bits,
            one: BigInt::one() << bits,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.eqs.len()
    }

    pub(crate) fn one(&self) -> &BigInt {
        &self.one
    }

    /// `F_i(x)` scaled by `denom_i · 2^(2·bits)`.
    fn raw(&self, i: usize, x: &[BigInt]) -> BigInt {
        let eq = &self.eqs[i];
        let mut s = &eq.constant << (2 * self.bits);
        for (u, c) in &eq.linear {
            s += c * &x[*u] << self.bits;
        }
        for (u, v, c) in &eq.quadratic {
            s += c * &x[*u] * &x[*v];
        }
        s
    }

    /// `min(1, F_i(x))` rounded down (`up = false`) or up to the grid.
    pub(crate) fn eval(&self, i: usize, x: &[BigInt], up: bool) -> BigInt {
        let s = self.raw(i, x);
        let d = &self.eqs[i].denom << self.bits;
        let (q, r) = s.div_mod_floor(&d);
        let v = if up && !r.is_zero() { q + 1 } else { q };
        v.min(self.one.clone())
    }

    /// Whether `min(1, F_i(u)) ≤ u_i`, exactly.
    pub(crate) fn holds_at(&self, i: usize, u: &[BigInt]) -> bool {
        u[i] >= self.one || self.raw(i, u) <= (&u[i] * &self.eqs[i].denom) << self.bits
    }

    pub(crate) fn violations(&self, u: &[BigInt]) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.holds_at(i, u)).collect()
    }

    /// Jacobi steps `x ← ⌊F(x)⌋`; returns the number of steps that changed `x`.
    pub(crate) fn jacobi(&self, x: &mut Vec<BigInt>, steps: usize) -> usize {
        for k in 0..steps {
            let next: Vec<BigInt> = (0..self.len()).map(|i| self.eval(i, x, false)).collect();
            if next == *x {
                return k;
            }
            *x = next;
        }
        steps
    }

    /// In-place lower iteration in the given order; true once a sweep changes nothing.
    pub(crate) fn gauss_seidel(&self, x: &mut [BigInt], order: &[usize], sweeps: usize) -> bool {
        for _ in 0..sweeps {
            let mut changed = false;
            for &i in order {
                let v = self.eval(i, x, false);
                if v != x[i] {
                    x[i] = v;
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
        false
    }

    /// Searches a grid post-fixed point above `lower`, starting `start` grid
    /// units above it and widening per violated component. Always succeeds,
    /// the all-ones vector being post-fixed.
    pub(crate) fn post_fixed_above(&self, lower: &[BigInt], start: &BigInt) -> Vec<BigInt> {
        if let Some(u) = self.directional_post_fixed(lower, start) {
            return u;
        }
        let mut delta = vec![start.clone().max(BigInt::one()); self.len()];
        let mut u: Vec<BigInt> = lower
            .iter()
            .zip(&delta)
            .map(|(l, d)| (l + d).min(self.one.clone()))
            .collect();
        loop {
            let bad = self.violations(&u);
            if bad.is_empty() {
                return u;
            }
            for i in bad {
                delta[i] <<= 1;
                u[i] = (&lower[i] + &delta[i]).min(self.one.clone());
            }
        }
    }

    /// Approximate solution of `v = J·v + 1`, `J` the Jacobian of `F` at `x`,
    /// in floating point. Near a least fixed point with spectral radius
    /// below one, `μ + t·v` is post-fixed for small `t > 0`; `None` when the
    /// iteration diverges, as it does at critical points.
    fn escape_direction(&self, x: &[BigInt]) -> Option<Vec<f64>> {
        use num_traits::ToPrimitive;
        let scale = self.one.to_f64()?;
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap_or(0.0) / scale).collect();
        let rows: Vec<Vec<(usize, f64)>> = self
            .eqs
            .iter()
            .map(|eq| {
                let d = eq.denom.to_f64().unwrap_or(f64::INFINITY);
                let mut row: Vec<(usize, f64)> = eq.linear.iter().map(|(u, c)| (*u, c.to_f64().unwrap_or(0.0) / d)).collect();
                for (u, v, c) in &eq.quadratic {
                    let c = c.to_f64().unwrap_or(0.0) / d;
                    row.push((*u, c * xf[*v]));
                    row.push((*v, c * xf[*u]));
                }
                row
            })
            .collect();
        let mut v = vec![1.0f64; self.len()];
        for _ in 0..DIRECTION_SWEEPS {
            let mut change = 0.0f64;
            for (i, row) in rows.iter().enumerate() {
                let next = 1.0 + row.iter().map(|(u, c)| c * v[*u]).sum::<f64>();
                change = change.max((next - v[i]).abs() / next);
                v[i] = next;
            }
            if !v.iter().all(|x| x.is_finite() && *x < 1e12) {
                return None;
            }
            if change < 1e-9 {
                return Some(v);
            }
        }
        None
    }

    /// Post-fixed grid point `lower + s·v` for the least `s = start·2^k`
    /// that works, with `v` from [`Self::escape_direction`].
    fn directional_post_fixed(&self, lower: &[BigInt], start: &BigInt) -> Option<Vec<BigInt>> {
        let v = self.escape_direction(lower)?;
        // Direction in grid units per unit of `s`, rounded up to stay positive.
        let steps: Vec<BigInt> = v.iter().map(|x| BigInt::from(x.ceil() as u64)).collect();
        let mut s = start.clone().max(BigInt::one());
        while s <= self.one {
            let u: Vec<BigInt> = lower
                .iter()
                .zip(&steps)
                .map(|(l, d)| (l + d * &s).min(self.one.clone()))
                .collect();
            if self.violations(&u).is_empty() {
                return Some(u);
            }
            s <<= 1;
        }
        None
    }

    /// In-place `u_i ← ⌈F_i(u)⌉`; keeps `u` post-fixed. Returns the total decrease.
    pub(crate) fn tighten(&self, u: &mut [BigInt], order: &[usize], sweeps: usize) -> BigInt {
        let mut total = BigInt::zero();
        for _ in 0..sweeps {
            let mut moved = BigInt::zero();
            for &i in order {
                let v = self.eval(i, u, true);
                if v < u[i] {
                    moved += &u[i] - &v;
                    u[i] = v;
                }
            }
            total += &moved;
            if moved.is_zero() {
                break;
            }
        }
        total
    }

    pub(crate) fn to_rational(&self, x: &BigInt) -> Rational {
        Rational::new(x.clone(), self.one.clone())
    }

    /// Grid point at or below `r` (`up = false`) or at or above it.
    pub(crate) fn from_rational(&self, r: &Rational, up: bool) -> BigInt {
        let scaled = r * Rational::from_integer(self.one.clone());
        let v = if up { scaled.ceil() } else { scaled.floor() };
        v.to_integer().max(BigInt::zero()).min(self.one.clone())
    }
}

const DIRECTION_SWEEPS: usize = 2_000;

/// Lower and upper grid vectors with `lower ≤ μ ≤ upper` and `upper` post-fixed.
pub(crate) struct GridBracket {
    pub lower: Vec<BigInt>,
    pub upper: Vec<BigInt>,
}

impl GridBracket {
    #[cfg(test)]
    pub(crate) fn max_gap(&self) -> BigInt {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .max()
            .unwrap_or_else(BigInt::zero)
    }
}

/// Alternates lower iteration and upper search until every component gap is
/// at most `target` grid units or `budget` sweeps are spent.
pub(crate) fn bracket(sys: &Compiled, order: &[usize], target: &BigInt, budget: usize) -> GridBracket {
    let n = sys.len();
    let mut lower = vec![BigInt::zero(); n];
    let mut upper = vec![sys.one().clone(); n];
    // Variables outside `order` have constant right-hand sides.
    let mut swept = vec![false; n];
    for &i in order {
        swept[i] = true;
    }
    for i in (0..n).filter(|&i| !swept[i]) {
        lower[i] = sys.eval(i, &lower, false);
        upper[i] = sys.eval(i, &lower, true);
    }
    let mut spent = 0;
    let mut chunk = 16;
    loop {
        let stable = sys.gauss_seidel(&mut lower, order, chunk);
        spent += chunk;
        let gap = |l: &[BigInt], u: &[BigInt]| -> BigInt {
            l.iter().zip(u).map(|(a, b)| b - a).max().unwrap_or_else(BigInt::zero)
        };
        if gap(&lower, &upper) > *target {
            let start: BigInt = (target / 4u32).max(BigInt::one());
            let cand = sys.post_fixed_above(&lower, &start);
            // The pointwise minimum of two post-fixed points is post-fixed.
            for (u, c) in upper.iter_mut().zip(cand) {
                if c < *u {
                    *u = c;
                }
            }
            sys.tighten(&mut upper, order, chunk);
        }
        let done = gap(&lower, &upper) <= *target;
        if done || spent >= budget || (stable && sys.tighten(&mut upper, order, 4 * chunk).is_zero()) {
            return GridBracket {
                lower,
                upper,
            };
        }
        chunk = (chunk * 2).min(4096);
    }
}

/// Grid units for a rational width (rounded down, at least one).
pub(crate) fn width_units(width: &Rational, bits: u32) -> BigInt {
    let w = (width * Rational::from_integer(BigInt::one() << bits)).floor().to_integer();
    if w.is_positive() {
        w
    } else {
        BigInt::one()
    }
}
