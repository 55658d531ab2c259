//! Finite sums of `c * t^m * exp(a t)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Relative tolerance under which two rates are treated as one.
const RATE_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Complex64,
    pub power: u32,
    pub rate: f64,
}

impl Term {
    pub fn eval(&self, t: f64) -> Complex64 {
        let poly = if self.power == 0 { 1.0 } else { t.powi(self.power as i32) };
        self.coeff * (poly * (self.rate * t).exp())
    }
}

fn same_rate(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= RATE_REL_TOL * a.abs().max(b.abs())
}

/// A time-dependent coefficient in closed form. Kept canonical: terms sorted
/// by `(power, rate)`, equal keys merged, zero coefficients dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpPolySum {
    terms: Vec<Term>,
}

impl ExpPolySum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::exp(c, 0.0)
    }

    /// `c * exp(rate t)`.
    pub fn exp(c: Complex64, rate: f64) -> Self {
        Self::from_terms(vec![Term { coeff: c, power: 0, rate }])
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut s = Self { terms };
        s.canonicalize();
        s
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_rate(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.rate).reduce(f64::max)
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.power.cmp(&b.power).then(a.rate.total_cmp(&b.rate)));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.power == term.power && same_rate(last.rate, term.rate) => {
                    last.coeff += term.coeff;
                }
                _ => out.push(term),
            }
        }
        out.retain(|t| t.coeff != Complex64::new(0.0, 0.0));
        self.terms = out;
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut re = crate::summation::ComplexSum::new();
        for term in &self.terms {
            re.add(term.eval(t));
        }
        re.value()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term { coeff: t.coeff * c, ..*t }).collect())
    }

    pub fn conj(&self) -> Self {
        Self { terms: self.terms.iter().map(|t| Term { coeff: t.coeff.conj(), ..*t }).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.iter().chain(&other.terms).copied().collect())
    }

    /// Sum of several expressions with a single canonicalization pass.
    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a ExpPolySum>) -> Self {
        Self::from_terms(parts.into_iter().flat_map(|p| p.terms.iter().copied()).collect())
    }

    /// `int_0^t exp(r (t - s)) self(s) ds`, exactly.
    ///
    /// A term with rate equal to `r` gains one power of `t`; any other term
    /// expands through the antiderivative of `s^m exp((a - r) s)`.
    pub fn convolve_exp(&self, r: f64) -> Self {
        let mut out = Vec::new();
        for term in &self.terms {
            let (c, m, a) = (term.coeff, term.power, term.rate);
            if same_rate(a, r) {
                out.push(Term { coeff: c / (m as f64 + 1.0), power: m + 1, rate: a });
                continue;
            }
            let d = a - r;
            // j-th term: c (-1)^j m!/(m-j)! / d^(j+1) t^(m-j) e^{a t}
            let mut factor = c / d;
            for j in 0..=m {
                out.push(Term { coeff: factor, power: m - j, rate: a });
                factor *= -((m - j) as f64) / d;
            }
            // boundary term at s = 0: -c (-1)^m m! / d^(m+1) e^{r t}
            let mut fact = 1.0;
            for i in 1..=m {
                fact *= i as f64;
            }
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            out.push(Term { coeff: c * (sign * fact / d.powi(m as i32 + 1)), power: 0, rate: r });
        }
        Self::from_terms(out)
    }
}

impl fmt::Display for ExpPolySum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i)", t.coeff.re, t.coeff.im)?;
            if t.power > 0 {
                write!(f, " t^{}", t.power)?;
            }
            if t.rate != 0.0 {
                write!(f, " e^({:.6e} t)", t.rate)?;
            }
        }
        Ok(())
    }
}
