//! Exact solutions of the Fourier-space BBGKY hierarchy.
//!
//! Every regime has the same shape: the level-k coefficient obeys
//!
//! ```text
//! d/dt F_k(n) = rate_k(n) F_k(n) + sum_{i<j} w(n_i, n_j) F_{k-1}(n with n_i, n_j merged)
//! ```
//!
//! with a nonpositive rate. The solution is therefore a finite sum of
//! `t^m exp(a t)` terms, represented by [`ExpPolySum`] and built level by
//! level in [`solve_hierarchy`].
//!
//! | regime        | `rate_k(n)`                                      | `w(a, b)`                |
//! |---------------|--------------------------------------------------|--------------------------|
//! | finite N      | `-c ((N-k) sum_l (1 - g(n_l)) + k(k-1))`         | `c (g(a) + g(b))`        |
//! | strong limit  | `-lambda k(k-1)`                                  | `2 lambda`               |
//! | balanced      | `-lambda ((m2/2) sum_l n_l^2 + k(k-1))`           | `2 lambda`               |
//! | unscaled      | `lambda sum_l (g(n_l) - 1)`                      | 0                        |
//!
//! where `c = lambda N / (N - 1)` and `g` is the torus Fourier coefficient of
//! the noise kernel.

mod coalescent;
mod exppoly;
mod solve;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::NoiseKernel;

pub use coalescent::{limit_density_k, BlockComponent, StrongLimitMixture};
pub use exppoly::{ExpPolySum, Term};
pub use solve::{solve_hierarchy, HierarchySolution, InitialCoefficients, InitialTables};

#[derive(Clone, Debug)]
pub enum Regime {
    FiniteN { n: usize, kernel: NoiseKernel, lambda: f64 },
    StrongLimit { lambda: f64 },
    BalancedLimit { lambda: f64, m2: f64 },
    /// Mean-field limit of the unscaled model; chaotic, so levels decouple.
    Unscaled { kernel: NoiseKernel, lambda: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::FiniteN { .. } => "finite-n",
            Regime::StrongLimit { .. } => "strong-limit",
            Regime::BalancedLimit { .. } => "balanced-limit",
            Regime::Unscaled { .. } => "unscaled",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Regime::FiniteN { lambda, .. }
            | Regime::StrongLimit { lambda }
            | Regime::BalancedLimit { lambda, .. }
            | Regime::Unscaled { lambda, .. } => *lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        match self {
            Regime::FiniteN { n, .. } if *n < 2 => Err(Error::domain(format!("need N >= 2, got {n}"))),
            Regime::BalancedLimit { m2, .. } if !(m2.is_finite() && *m2 > 0.0) => {
                Err(Error::domain(format!("m2 must be positive, got {m2}")))
            }
            _ => Ok(()),
        }
    }

    /// Largest level the regime supports.
    pub fn max_level(&self) -> usize {
        match self {
            Regime::FiniteN { n, .. } => *n,
            _ => usize::MAX,
        }
    }

    /// Sum of `1 - g(n_l)`, accumulated in order of increasing `|n_l|` so that
    /// a tuple and its negation give bit-identical rates.
    fn deficit(kernel: &NoiseKernel, tuple: &[i64]) -> f64 {
        let mut abs: Vec<i64> = tuple.iter().map(|n| n.abs()).collect();
        abs.sort_unstable();
        abs.iter().map(|&n| 1.0 - kernel.fourier_coeff(n)).sum()
    }

    /// Decay rate of the level-`tuple.len()` coefficient at `tuple`.
    pub fn level_rate(&self, tuple: &[i64]) -> f64 {
        let k = tuple.len() as f64;
        let pairs = k * (k - 1.0);
        match self {
            Regime::FiniteN { n, kernel, lambda } => {
                let nf = *n as f64;
                let c = lambda * nf / (nf - 1.0);
                -c * ((nf - k) * Self::deficit(kernel, tuple) + pairs)
            }
            Regime::StrongLimit { lambda } => -lambda * pairs,
            Regime::BalancedLimit { lambda, m2 } => {
                let sq: i64 = tuple.iter().map(|n| n * n).sum();
                -lambda * (0.5 * m2 * sq as f64 + pairs)
            }
            Regime::Unscaled { kernel, lambda } => -lambda * Self::deficit(kernel, tuple),
        }
    }

    /// Weight of the merged-pair source term for the pair `(a, b)`.
    pub fn pair_weight(&self, a: i64, b: i64) -> f64 {
        match self {
            Regime::FiniteN { n, kernel, lambda } => {
                let nf = *n as f64;
                lambda * nf / (nf - 1.0) * (kernel.fourier_coeff(a) + kernel.fourier_coeff(b))
            }
            Regime::StrongLimit { lambda } | Regime::BalancedLimit { lambda, .. } => 2.0 * lambda,
            Regime::Unscaled { .. } => 0.0,
        }
    }
}

/// `(e^{alpha t} - e^{beta t}) / (alpha - beta)`, equal to `t e^{alpha t}` when
/// `alpha == beta`. Evaluated as `t e^{hi t} expm1(x) / x` with
/// `x = (lo - hi) t <= 0`, which has no cancellation for any gap.
pub fn exp_divided_difference(alpha: f64, beta: f64, t: f64) -> f64 {
    let (hi, lo) = if alpha >= beta { (alpha, beta) } else { (beta, alpha) };
    let x = (lo - hi) * t;
    let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
    t * (hi * t).exp() * ratio
}

/// Closed-form first marginal `exp(rate_1(n) t) f_1(n, 0)`.
pub fn first_marginal(regime: &Regime, initial: Complex64, n: i64, t: f64) -> Complex64 {
    if n == 0 {
        return initial;
    }
    initial * (regime.level_rate(&[n]) * t).exp()
}

/// Closed-form finite-N second marginal at `(n1, n2)` from the initial values
/// `f2 = F_2(n1, n2, 0)` and `f1 = F_1(n1 + n2, 0)`.
pub fn second_marginal_finite_n(
    n_particles: usize,
    kernel: &NoiseKernel,
    lambda: f64,
    f2: Complex64,
    f1: Complex64,
    (n1, n2): (i64, i64),
    t: f64,
) -> Result<Complex64> {
    let regime = Regime::FiniteN { n: n_particles, kernel: kernel.clone(), lambda };
    regime.validate()?;
    if n1 == 0 && n2 == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let alpha = regime.level_rate(&[n1, n2]);
    let beta = regime.level_rate(&[n1 + n2]);
    let w = regime.pair_weight(n1, n2);
    Ok(f2 * (alpha * t).exp() + f1 * (w * exp_divided_difference(alpha, beta, t)))
}

/// N -> infinity second marginal in the balanced regime.
pub fn balanced_f2(f2: Complex64, f1: Complex64, lambda: f64, m2: f64, (n1, n2): (i64, i64), t: f64) -> Result<Complex64> {
    let regime = Regime::BalancedLimit { lambda, m2 };
    regime.validate()?;
    if n1 == 0 && n2 == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let alpha = regime.level_rate(&[n1, n2]);
    let beta = regime.level_rate(&[n1 + n2]);
    Ok(f2 * (alpha * t).exp() + f1 * (2.0 * lambda * exp_divided_difference(alpha, beta, t)))
}

/// Unscaled mean-field solution `exp((g(n) - 1) t) f(n, 0)`.
pub fn unscaled_meanfield(kernel: &NoiseKernel, initial: Complex64, n: i64, t: f64) -> Complex64 {
    first_marginal(&Regime::Unscaled { kernel: kernel.clone(), lambda: 1.0 }, initial, n, t)
}

/// Partial sums of the balanced-regime pair profile `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct HProfile {
    pub m2: f64,
    pub terms: usize,
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
}

impl HProfile {
    /// `H^(n, -n) = 2 / (m2 n^2 + 2)`.
    pub fn coeff(&self, n: i64) -> f64 {
        2.0 / (self.m2 * (n * n) as f64 + 2.0)
    }

    /// Closed form of `H(0)` summed to infinity.
    pub fn value_at_zero_limit(m2: f64) -> f64 {
        // sum_{n>=1} 1/(n^2 + a^2) = (pi a coth(pi a) - 1) / (2 a^2), a^2 = 2/m2
        let a = (2.0 / m2).sqrt();
        let s = (PI * a / (PI * a).tanh() - 1.0) / (2.0 * a * a);
        1.0 + 4.0 / m2 * s
    }

    /// Uniform grid of `points` angles on `[-pi, pi)`.
    pub fn grid(points: usize) -> Vec<f64> {
        (0..points).map(|i| -PI + 2.0 * PI * i as f64 / points as f64).collect()
    }
}

/// `1 + 4 sum_{n=1}^{terms} cos(n theta) / (m2 n^2 + 2)` on `theta`.
pub fn h_profile(m2: f64, terms: usize, theta: &[f64]) -> Result<HProfile> {
    if terms == 0 {
        return Err(Error::domain("need at least one term"));
    }
    if !(m2.is_finite() && m2 > 0.0) {
        return Err(Error::domain(format!("m2 must be positive, got {m2}")));
    }
    let values = theta
        .iter()
        .map(|&th| {
            // smallest terms first
            let tail: f64 = (1..=terms).rev().map(|n| (n as f64 * th).cos() / (m2 * (n * n) as f64 + 2.0)).sum();
            1.0 + 4.0 * tail
        })
        .collect();
    Ok(HProfile { m2, terms, theta: theta.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BaseDensity;

    fn kernel(eps: f64) -> NoiseKernel {
        NoiseKernel::new(BaseDensity::gaussian(1.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn divided_difference() {
        let direct = |a: f64, b: f64, t: f64| ((a * t).exp() - (b * t).exp()) / (a - b);
        assert_eq!(exp_divided_difference(-1.0, -1.0, 2.0), 2.0 * (-2.0f64).exp());
        for &(a, b, t) in &[(-1.0, -3.0, 0.7), (-3.0, -1.0, 0.7), (-0.2, -5.0, 4.0), (0.0, -1.0, 1.0)] {
            let d = exp_divided_difference(a, b, t);
            assert!((d - direct(a, b, t)).abs() <= 1e-13 * d.abs());
        }
        // near-degenerate gaps approach t e^{a t} smoothly
        let a: f64 = -1.3;
        let t: f64 = 0.9;
        let limit = t * (a * t).exp();
        for &gap in &[1e-3, 1e-6, 1e-9, 1e-14] {
            let d = exp_divided_difference(a, a - gap, t);
            let x = -gap * t;
            let expected = limit * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0);
            assert!((d - expected).abs() <= 1e-12 * limit, "gap {gap}");
        }
        // no underflow trap for widely separated rates
        assert!(exp_divided_difference(-1.0, -2000.0, 1.0) > 0.0);
    }

    #[test]
    fn first_marginal_regimes() {
        let half = Complex64::new(0.5, 0.0);
        let strong = Regime::StrongLimit { lambda: 1.0 };
        assert_eq!(first_marginal(&strong, half, 3, 7.0), half);
        let bal = Regime::BalancedLimit { lambda: 1.0, m2: 1.0 };
        let v = first_marginal(&bal, half, 1, 2.0);
        assert!((v.re - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        let k = kernel(0.2);
        let fin = Regime::FiniteN { n: 10, kernel: k.clone(), lambda: 2.0 };
        let v = first_marginal(&fin, half, 2, 0.3);
        assert!((v.re - 0.5 * (2.0 * 10.0 * (k.fourier_coeff(2) - 1.0) * 0.3).exp()).abs() < 1e-15);
        assert_eq!(first_marginal(&fin, Complex64::new(1.0, 0.0), 0, 5.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn finite_n_rate_reduces_to_first_marginal_rate() {
        let k = kernel(0.1);
        let fin = Regime::FiniteN { n: 16, kernel: k.clone(), lambda: 1.5 };
        let r = fin.level_rate(&[3]);
        assert!((r - (-1.5 * 16.0 * (1.0 - k.fourier_coeff(3)))).abs() < 1e-12);
        assert_eq!(fin.level_rate(&[1, -2, 3]), fin.level_rate(&[-3, 2, -1]));
    }

    #[test]
    fn second_marginal_edges() {
        let k = kernel(16f64.powf(-0.75));
        let f2 = Complex64::new(0.25, 0.0);
        let f1 = Complex64::new(1.0, 0.0);
        let v = second_marginal_finite_n(16, &k, 1.0, f2, f1, (1, -1), 0.0).unwrap();
        assert_eq!(v, f2);
        assert_eq!(second_marginal_finite_n(16, &k, 1.0, f2, f1, (0, 0), 3.0).unwrap(), f1);
        assert!(second_marginal_finite_n(1, &k, 1.0, f2, f1, (1, 1), 1.0).is_err());
    }

    #[test]
    fn balanced_pair_limit() {
        let one = Complex64::new(1.0, 0.0);
        let v = balanced_f2(Complex64::new(0.3, 0.0), one, 1.0, 1.0, (1, -1), 50.0).unwrap();
        assert!((v.re - 2.0 / 3.0).abs() < 1e-12);
        let v0 = balanced_f2(Complex64::new(0.3, 0.1), one, 1.0, 1.0, (2, 1), 0.0).unwrap();
        assert_eq!(v0, Complex64::new(0.3, 0.1));
        assert!(balanced_f2(one, one, 1.0, 0.0, (1, 1), 1.0).is_err());
    }

    #[test]
    fn h_profile_values() {
        let grid = HProfile::grid(1024);
        let h = h_profile(1.0, 500, &grid).unwrap();
        let mean = h.values.iter().sum::<f64>() / grid.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        let at_zero = h_profile(1.0, 500, &[0.0]).unwrap().values[0];
        let limit = HProfile::value_at_zero_limit(1.0);
        let expected = 1.0 + 4.0 * (PI / (PI * 2f64.sqrt()).tanh() / (2.0 * 2f64.sqrt()) - 0.25);
        assert!((limit - expected).abs() < 1e-14);
        assert!(at_zero < limit && limit - at_zero < 8e-3);
        assert!(h_profile(1.0, 0, &grid).is_err());
    }

    #[test]
    fn unscaled_fixed_points() {
        let k = kernel(0.3);
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(unscaled_meanfield(&k, zero, 2, 4.0), zero);
        let c = Complex64::new(0.4, -0.1);
        assert_eq!(unscaled_meanfield(&k, c, 2, 0.0), c);
        let v = unscaled_meanfield(&k, c, 2, 1.5);
        assert!((v - c * ((k.fourier_coeff(2) - 1.0) * 1.5).exp()).norm() < 1e-15);
    }
}
