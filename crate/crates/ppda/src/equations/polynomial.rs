use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::Rational;

/// A product of variables, stored as sorted variable indices; empty for the
/// constant monomial.
pub type Monomial = Vec<u32>;

/// Polynomial with rational coefficients in a canonical form: monomials in
/// sorted order and no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(v: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![v as u32], Rational::one());
        p
    }

    /// Adds `coeff * ∏ vars`.
    pub fn add_term(&mut self, mut vars: Monomial, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        vars.sort_unstable();
        let slot = self.terms.entry(vars).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Rational {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(Rational::zero)
    }

    /// The constant, if no variable occurs.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 if self.terms.contains_key(&Vec::new()) => Some(self.constant_term()),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_monotone(&self) -> bool {
        self.terms.values().all(|c| *c > Rational::zero())
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        let mut vs: Vec<usize> = self.terms.keys().flatten().map(|&v| v as usize).collect();
        vs.sort_unstable();
        vs.dedup();
        vs.into_iter()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, k: &Rational) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                m.extend_from_slice(m2);
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    /// Replaces variables by polynomials.
    pub fn substitute(&self, value: &dyn Fn(usize) -> Option<Polynomial>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(c.clone());
            for &v in m {
                let factor = value(v as usize).unwrap_or_else(|| Polynomial::var(v as usize));
                term = term.mul(&factor);
            }
            out = out.add(&term);
        }
        out
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(c.clone(), |acc, &v| acc * &x[v as usize]))
            .sum()
    }

    /// Renders with `name` for variables, e.g. `1/2*a*b + 1/3`.
    pub fn display_with<'a>(&'a self, name: &'a dyn Fn(usize) -> String) -> impl fmt::Display + 'a {
        DisplayPoly { poly: self, name }
    }
}

struct DisplayPoly<'a> {
    poly: &'a Polynomial,
    name: &'a dyn Fn(usize) -> String,
}

impl fmt::Display for DisplayPoly<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        // Constants last, then by descending degree, for readable dumps.
        let mut terms: Vec<_> = self.poly.terms.iter().collect();
        terms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let coeff = crate::format_rational(c);
            match (m.is_empty(), c.is_one()) {
                (true, _) => f.write_str(&coeff)?,
                (false, true) => {}
                (false, false) => write!(f, "{coeff}*")?,
            }
            for (k, &v) in m.iter().enumerate() {
                if k > 0 {
                    f.write_str("*")?;
                }
                f.write_str(&(self.name)(v as usize))?;
            }
        }
        Ok(())
    }
}
