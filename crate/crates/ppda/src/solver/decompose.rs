//! Component-wise least fixed points: variables are grouped into strongly
//! connected components of the dependency graph and solved in dependency
//! order. One-variable components are solved through their quadratic
//! formula and affine components by elimination; only the rest iterate.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::fixpoint::{bracket, width_units, Compiled};
use crate::equations::{MonotoneSystem, Polynomial};
use crate::Rational;

/// Per-variable brackets `lo ≤ μ ≤ hi`; `hi` is post-fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Brackets {
    pub lo: Vec<Rational>,
    pub hi: Vec<Rational>,
}

impl Brackets {
    pub fn max_width(&self) -> Rational {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Debug)]
pub(crate) struct SolveOptions {
    /// Grid and square-root precision.
    pub bits: u32,
    /// Target width for components solved by iteration.
    pub width: Rational,
    /// Sweep budget per iterated component.
    pub budget: usize,
}

/// Strongly connected components of the free variables, dependencies first.
pub(crate) fn components(sys: &MonotoneSystem) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..sys.len()).map(|i| g.add_node(i)).collect();
    for i in sys.free_vars() {
        for j in sys.dependencies(i) {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut vars: Vec<usize> = c.into_iter().map(|n| g[n]).filter(|&i| !sys.is_pinned(i)).collect();
            vars.sort_unstable();
            vars
        })
        .filter(|c| !c.is_empty())
        .collect()
}

/// Dependency order of all free variables, for in-place sweeps.
pub(crate) fn sweep_order(sys: &MonotoneSystem) -> Vec<usize> {
    components(sys).into_iter().flatten().collect()
}

pub(crate) fn solve(sys: &MonotoneSystem, opts: &SolveOptions) -> Brackets {
    let n = sys.len();
    let mut lo = vec![Rational::zero(); n];
    let mut hi = vec![Rational::zero(); n];
    for (&i, c) in sys.pinned() {
        lo[i] = c.clone();
        hi[i] = c.clone();
    }
    for comp in components(sys) {
        let deps_exact = comp
            .iter()
            .flat_map(|&i| sys.dependencies(i))
            .filter(|j| !comp.contains(j))
            .all(|j| lo[j] == hi[j]);
        let local = |values: &[Rational]| -> Vec<Polynomial> {
            let position = |v: usize| comp.iter().position(|&c| c == v);
            comp.iter()
                .map(|&i| {
                    let substituted = sys.rhs(i).substitute(&|v| match position(v) {
                        Some(_) => None,
                        None => Some(Polynomial::constant(values[v].clone())),
                    });
                    let mut out = Polynomial::zero();
                    for (m, c) in substituted.terms() {
                        let vars = m.iter().map(|&v| position(v as usize).expect("local") as u32).collect();
                        out.add_term(vars, c.clone());
                    }
                    out
                })
                .collect()
        };
        let low_eqs = local(&lo);
        let (low, high) = if deps_exact {
            solve_component(&low_eqs, opts)
        } else {
            let high_eqs = local(&hi);
            (solve_component(&low_eqs, opts).0, solve_component(&high_eqs, opts).1)
        };
        for (k, &i) in comp.iter().enumerate() {
            lo[i] = low[k].clone();
            hi[i] = high[k].clone();
        }
    }
    Brackets { lo, hi }
}

/// Lower and upper vectors for the least fixed point of `min(1, F)`.
fn solve_component(eqs: &[Polynomial], opts: &SolveOptions) -> (Vec<Rational>, Vec<Rational>) {
    if eqs.len() == 1 {
        let p = &eqs[0];
        let coeff = |m: &[u32]| {
            p.terms()
                .find(|(k, _)| k.as_slice() == m)
                .map(|(_, c)| c.clone())
                .unwrap_or_else(Rational::zero)
        };
        let (lo, hi) = least_root(&coeff(&[0, 0]), &coeff(&[0]), &coeff(&[]), opts.bits);
        return (vec![lo], vec![hi]);
    }
    if eqs.len() <= 200 && eqs.iter().all(|p| p.degree() <= 1) {
        if let Some(x) = solve_affine(eqs) {
            return (x.clone(), x);
        }
    }
    let compiled = Compiled::new(eqs, opts.bits);
    let order: Vec<usize> = (0..eqs.len()).collect();
    let b = bracket(&compiled, &order, &width_units(&opts.width, opts.bits), opts.budget);
    (
        b.lower.iter().map(|x| compiled.to_rational(x)).collect(),
        b.upper.iter().map(|x| compiled.to_rational(x)).collect(),
    )
}

/// Least fixed point in `[0,1]` of `x ↦ min(1, a·x² + b·x + c)`, with
/// nonnegative coefficients. Exact when the root is rational, otherwise a
/// bracket of width about `2^-bits` whose upper end is post-fixed.
pub(crate) fn least_root(a: &Rational, b: &Rational, c: &Rational, bits: u32) -> (Rational, Rational) {
    let one = Rational::one();
    let zero = Rational::zero();
    if c.is_zero() {
        return (zero.clone(), zero);
    }
    let slope = &one - b;
    if a.is_zero() {
        // (1 - b)·x = c
        if slope.is_positive() {
            let r = c / &slope;
            if r <= one {
                return (r.clone(), r);
            }
        }
        return (one.clone(), one);
    }
    if !slope.is_positive() {
        return (one.clone(), one);
    }
    let disc = &slope * &slope - Rational::from_integer(4.into()) * a * c;
    if disc.is_negative() {
        return (one.clone(), one);
    }
    let two_a = a * Rational::from_integer(2.into());
    // r = (slope - √disc) / 2a is at most 1 iff slope - 2a ≤ √disc.
    let gap = &slope - &two_a;
    if gap.is_positive() && gap.clone() * gap > disc {
        return (one.clone(), one);
    }
    let (n, d) = (disc.numer().clone(), disc.denom().clone());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    if &sn * &sn == n && &sd * &sd == d {
        let r = (&slope - Rational::new(sn, sd)) / &two_a;
        return (r.clone(), r);
    }
    // √disc = √(n·d) / d, bracketed on a 2^-bits grid.
    let scale = BigInt::one() << bits;
    let m = &n * &d * &scale * &scale;
    let s = m.sqrt();
    let root_lo = Rational::new(s.clone(), &d * &scale);
    let root_hi = Rational::new(s + 1, &d * &scale);
    let lo = ((&slope - root_hi) / &two_a).max(zero);
    let hi = ((&slope - root_lo) / &two_a).min(one);
    (lo, hi)
}

/// Exact solution of `x = A·x + b` when it is unique and lies in `[0,1]^n`;
/// then it is the least fixed point of the capped map.
fn solve_affine(eqs: &[Polynomial]) -> Option<Vec<Rational>> {
    let n = eqs.len();
    // Rows of (I - A | b).
    let mut m: Vec<Vec<Rational>> = eqs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![Rational::zero(); n + 1];
            row[i] = Rational::one();
            for (mono, c) in p.terms() {
                match mono.as_slice() {
                    [] => row[n] += c,
                    [v] => row[*v as usize] -= c,
                    _ => unreachable!("affine"),
                }
            }
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let inv = Rational::one() / &m[col][col];
        for v in m[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    let x: Vec<Rational> = m.into_iter().map(|row| row[n].clone()).collect();
    let one = Rational::one();
    x.iter().all(|v| !v.is_negative() && *v <= one).then_some(x)
}
