//! Noise kernels for the CL interaction.
//!
//! A [`BaseDensity`] is a symmetric probability density `g` on the real line.
//! The torus kernel `g_eps` is obtained by rescaling `g` by `eps`, restricting
//! it to `[-pi, pi]` and renormalizing (densities on the torus are taken with
//! respect to `dtheta / 2pi`):
//!
//! ```text
//! g_eps(theta) = g(theta / eps) / (eps * gt_eps),   gt_eps = (1/2pi) * int_{-pi/eps}^{pi/eps} g
//! ```
//!
//! Its Fourier coefficients are ratios of the eps-truncated transform
//! `F_eps(g)(xi) = int_{-pi/eps}^{pi/eps} g(x) exp(-i xi x) dx`:
//! `ghat_eps(n) = F_eps(g)(n eps) / F_eps(g)(0)`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::RwLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance of the truncated Fourier transform quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// Slack allowed when checking the small-frequency bound against quadrature values.
pub const BOUND_SLACK: f64 = 1e-8;

const MAX_REJECTIONS: usize = 1_000_000;

/// Beyond this many standard deviations the Gaussian contributes nothing in f64.
const GAUSSIAN_CUTOFF_SIGMAS: f64 = 40.0;

/// Symmetric probability densities on the real line with closed-form moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseDensity {
    Gaussian { sigma: f64 },
    Laplace { b: f64 },
    UniformSym { a: f64 },
}

fn check_scale(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl BaseDensity {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(BaseDensity::Gaussian { sigma: check_scale("sigma", sigma)? })
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Ok(BaseDensity::Laplace { b: check_scale("b", b)? })
    }

    pub fn uniform(a: f64) -> Result<Self> {
        Ok(BaseDensity::UniformSym { a: check_scale("a", a)? })
    }

    /// Builds a density from a family name (`gaussian`, `laplace`, `uniform`)
    /// and its single scale parameter.
    pub fn from_name(family: &str, param: f64) -> Result<Self> {
        match family.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Self::gaussian(param),
            "laplace" => Self::laplace(param),
            "uniform" | "uniform_sym" => Self::uniform(param),
            other => Err(Error::domain(format!("unknown density family `{other}`"))),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            BaseDensity::Gaussian { .. } => "gaussian",
            BaseDensity::Laplace { .. } => "laplace",
            BaseDensity::UniformSym { .. } => "uniform",
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            BaseDensity::Gaussian { sigma } => sigma,
            BaseDensity::Laplace { b } => b,
            BaseDensity::UniformSym { a } => a,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            BaseDensity::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * TAU.sqrt())
            }
            BaseDensity::Laplace { b } => (-x.abs() / b).exp() / (2.0 * b),
            BaseDensity::UniformSym { a } => {
                if x.abs() <= a {
                    0.5 / a
                } else {
                    0.0
                }
            }
        }
    }

    /// Absolute moment `m_k = int |x|^k g(x) dx` for `k <= 4`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k > 4 {
            return Err(Error::domain(format!("moment order {k} not supported (k <= 4)")));
        }
        let m = match *self {
            BaseDensity::Gaussian { sigma } => {
                let s = sigma.powi(k as i32);
                let sqrt_2_over_pi = (2.0 / PI).sqrt();
                s * match k {
                    0 => 1.0,
                    1 => sqrt_2_over_pi,
                    2 => 1.0,
                    3 => 2.0 * sqrt_2_over_pi,
                    _ => 3.0,
                }
            }
            BaseDensity::Laplace { b } => {
                let factorial: f64 = (1..=k).map(f64::from).product();
                factorial * b.powi(k as i32)
            }
            BaseDensity::UniformSym { a } => a.powi(k as i32) / f64::from(k + 1),
        };
        Ok(m)
    }

    /// Full Fourier transform `F(g)(xi) = int g(x) exp(-i xi x) dx` (real by symmetry).
    pub fn fourier_transform(&self, xi: f64) -> f64 {
        match *self {
            BaseDensity::Gaussian { sigma } => (-0.5 * sigma * sigma * xi * xi).exp(),
            BaseDensity::Laplace { b } => 1.0 / (1.0 + b * b * xi * xi),
            BaseDensity::UniformSym { a } => sinc(a * xi),
        }
    }

    /// `int_{-half_width}^{half_width} g(x) exp(-i xi x) dx`.
    pub fn truncated_transform(&self, xi: f64, half_width: f64) -> Result<f64> {
        match *self {
            BaseDensity::Gaussian { sigma } => {
                let upper = half_width.min(GAUSSIAN_CUTOFF_SIGMAS * sigma);
                let q = quadrature::integrate(
                    |x| 2.0 * self.density(x) * (xi * x).cos(),
                    0.0,
                    upper,
                    QUADRATURE_TOL,
                )?;
                Ok(q.value)
            }
            BaseDensity::Laplace { b } => {
                // (1/b) Re int_0^L exp((-1/b + i xi) x) dx
                let z = num_complex::Complex64::new(-1.0 / b, xi);
                let integral = ((z * half_width).exp() - 1.0) / z;
                Ok(integral.re / b)
            }
            BaseDensity::UniformSym { a } => {
                let m = half_width.min(a);
                Ok(m / a * sinc(xi * m))
            }
        }
    }

    /// Draws from `g` on the real line.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseDensity::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            BaseDensity::Laplace { b } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
            BaseDensity::UniformSym { a } => rng.random_range(-a..a),
        }
    }
}

impl fmt::Display for BaseDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BaseDensity::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            BaseDensity::Laplace { b } => write!(f, "laplace(b={b})"),
            BaseDensity::UniformSym { a } => write!(f, "uniform(a={a})"),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Result of checking `|ghat(n) - 1 + (m2/2)(n eps)^2| <= 2 eps^k m_k / (pi^k - eps^k m_k) + (m3/3)(|n| eps)^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub n: i64,
    pub k: u32,
    pub g_hat: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// The rescaled and restricted kernel `g_eps` on the torus.
///
/// Immutable apart from an internal coefficient cache; shareable across threads.
pub struct NoiseKernel {
    base: BaseDensity,
    epsilon: f64,
    mass: f64,
    cache: RwLock<HashMap<i64, f64>>,
}

impl NoiseKernel {
    pub fn new(base: BaseDensity, epsilon: f64) -> Result<Self> {
        let epsilon = check_scale("epsilon", epsilon)?;
        let mass = base.truncated_transform(0.0, PI / epsilon)?;
        if mass.is_nan() || mass <= 0.0 {
            return Err(Error::domain(format!(
                "{base} has no mass on [-pi/eps, pi/eps] for eps = {epsilon}"
            )));
        }
        Ok(Self { base, epsilon, mass, cache: RwLock::new(HashMap::new()) })
    }

    /// Kernel with `eps = n_particles^(-gamma)`.
    pub fn for_scaling(base: BaseDensity, n_particles: usize, gamma: f64) -> Result<Self> {
        Self::new(base, epsilon_for(n_particles, gamma)?)
    }

    pub fn base(&self) -> BaseDensity {
        self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `gt_eps`, the normalizing constant of the restriction.
    pub fn restricted_mass(&self) -> f64 {
        self.mass / TAU
    }

    /// `F_eps(g)(xi)`.
    pub fn truncated_fourier(&self, xi: f64) -> Result<f64> {
        self.base.truncated_transform(xi, PI / self.epsilon)
    }

    /// `ghat_eps(n)`; cached per `|n|`.
    pub fn fourier_coeff(&self, n: i64) -> f64 {
        let key = n.abs();
        if key == 0 {
            return 1.0;
        }
        if let Some(&v) = self.cache.read().expect("cache lock").get(&key) {
            return v;
        }
        let xi = key as f64 * self.epsilon;
        let v = self
            .truncated_fourier(xi)
            .map(|f| (f / self.mass).clamp(-1.0, 1.0))
            .expect("truncated transform of a closed-family density converges");
        self.cache.write().expect("cache lock").insert(key, v);
        v
    }

    /// Density of `g_eps` with respect to `dtheta / 2pi`.
    pub fn torus_density(&self, theta: f64) -> f64 {
        if theta.abs() > PI {
            return 0.0;
        }
        self.base.density(theta / self.epsilon) / (self.epsilon * self.restricted_mass())
    }

    /// Largest admissible `eps` for the order-`k` bound: `pi / m_k^(1/k)`.
    pub fn epsilon_threshold(&self, k: u32) -> Result<f64> {
        let mk = self.base.moment(k)?;
        Ok(PI / mk.powf(1.0 / f64::from(k)))
    }

    pub fn coeff_bound_check(&self, n: i64, k: u32) -> Result<BoundCheck> {
        if !(3..=4).contains(&k) {
            return Err(Error::domain(format!("bound order k must be 3 or 4, got {k}")));
        }
        let threshold = self.epsilon_threshold(k)?;
        if self.epsilon >= threshold {
            return Err(Error::EpsilonTooLarge { epsilon: self.epsilon, k, threshold });
        }
        let m2 = self.base.moment(2)?;
        let m3 = self.base.moment(3)?;
        let mk = self.base.moment(k)?;
        let g_hat = self.fourier_coeff(n);
        let ne = n.unsigned_abs() as f64 * self.epsilon;
        let lhs = (g_hat - 1.0 + 0.5 * m2 * ne * ne).abs();
        let ek = self.epsilon.powi(k as i32) * mk;
        let rhs = 2.0 * ek / (PI.powi(k as i32) - ek) + m3 / 3.0 * ne.powi(3);
        Ok(BoundCheck { n, k, g_hat, lhs, rhs, pass: lhs <= rhs + BOUND_SLACK })
    }

    /// Draws an angle from `g_eps`: a draw of `g` conditioned on `|X| <= pi/eps`, scaled by `eps`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let cutoff = PI / self.epsilon;
        for _ in 0..MAX_REJECTIONS {
            let x = self.base.sample(rng);
            if x.abs() <= cutoff {
                let theta = self.epsilon * x;
                return if theta >= PI { -PI } else { theta };
            }
        }
        panic!(
            "internal error: {} rejections sampling {} at eps = {}",
            MAX_REJECTIONS, self.base, self.epsilon
        );
    }
}

impl Clone for NoiseKernel {
    fn clone(&self) -> Self {
        let cache = self.cache.read().expect("cache lock").clone();
        Self { base: self.base, epsilon: self.epsilon, mass: self.mass, cache: RwLock::new(cache) }
    }
}

impl fmt::Debug for NoiseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseKernel")
            .field("base", &self.base)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

/// `eps_N = N^(-gamma)`.
pub fn epsilon_for(n_particles: usize, gamma: f64) -> Result<f64> {
    if n_particles == 0 || !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::domain(format!(
            "invalid scaling: N = {n_particles}, gamma = {gamma}"
        )));
    }
    Ok((n_particles as f64).powf(-gamma))
}
