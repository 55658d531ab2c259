//! Single-particle profiles given by finitely many Fourier coefficients.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

const POSITIVITY_GRID: usize = 1 << 12;
const POSITIVITY_TOL: f64 = 1e-9;
const MAX_REJECTIONS: usize = 1_000_000;

/// A probability density on the torus (with respect to `dtheta / 2pi`) written
/// as a trigonometric polynomial
/// `f(theta) = 1 + 2 sum_{n >= 1} Re(c_n exp(i n theta))`,
/// so that `fhat(n) = c_n` and `fhat(-n) = conj(c_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderProfile {
    name: String,
    // coeffs[n] = fhat(n) for n = 0..=degree, coeffs[0] = 1
    coeffs: Vec<Complex64>,
    envelope: f64,
}

impl OrderProfile {
    /// Profile from the coefficients `fhat(1), ..., fhat(d)`.
    pub fn from_positive_coeffs(name: impl Into<String>, positive: &[Complex64]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(positive.len() + 1);
        coeffs.push(Complex64::new(1.0, 0.0));
        coeffs.extend_from_slice(positive);
        while coeffs.len() > 1 && coeffs.last() == Some(&Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("profile coefficients must be finite"));
        }
        let envelope = 1.0 + 2.0 * coeffs[1..].iter().map(|c| c.norm()).sum::<f64>();
        let profile = Self { name: name.into(), coeffs, envelope };
        let min = (0..POSITIVITY_GRID)
            .map(|j| profile.density(-PI + TAU * j as f64 / POSITIVITY_GRID as f64))
            .fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::domain(format!(
                "profile `{}` is not a density: minimum {min:e} on the grid",
                profile.name
            )));
        }
        Ok(profile)
    }

    pub fn uniform() -> Self {
        Self { name: "uniform".into(), coeffs: vec![Complex64::new(1.0, 0.0)], envelope: 1.0 }
    }

    /// `f(theta) = 1 + cos(theta)`.
    pub fn one_plus_cos() -> Self {
        Self::from_positive_coeffs("one-plus-cos", &[Complex64::new(0.5, 0.0)])
            .expect("1 + cos is a density")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Highest non-zero frequency.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `fhat(n)`; exactly zero beyond the degree.
    pub fn coeff(&self, n: i64) -> Complex64 {
        match self.coeffs.get(n.unsigned_abs() as usize) {
            Some(&c) if n >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        1.0 + 2.0
            * self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (c * Complex64::from_polar(1.0, (i + 1) as f64 * theta)).re)
                .sum::<f64>()
    }

    /// Rejection sampling against the uniform envelope `1 + 2 sum |c_n|`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.coeffs.len() == 1 {
            return rng.random_range(-PI..PI);
        }
        for _ in 0..MAX_REJECTIONS {
            let theta = rng.random_range(-PI..PI);
            if rng.random::<f64>() * self.envelope < self.density(theta) {
                return theta;
            }
        }
        panic!("internal error: profile `{}` rejection sampler did not accept", self.name);
    }
}

impl fmt::Display for OrderProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for OrderProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::uniform()),
            "one-plus-cos" | "one_plus_cos" | "1+cos" => Ok(Self::one_plus_cos()),
            other => Err(Error::domain(format!("unknown profile preset `{other}`"))),
        }
    }
}
