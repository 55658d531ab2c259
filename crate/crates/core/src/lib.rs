//! Simulation and exact analytics for the Choose-the-Leader (CL) model.
//!
//! The CL model is a pair-interaction jump process on the N-torus: at the
//! ticks of a Poisson clock a uniformly chosen pair of particles meets and one
//! of them (chosen uniformly) adopts the other's angle up to a small noise
//! drawn from a rescaled density `g_eps`. This crate provides
//!
//! * [`kernel`]: the noise density, its exact torus Fourier coefficients and
//!   the small-frequency approximation bounds,
//! * [`simulator`]: an exact event-driven simulator in unscaled or rescaled
//!   time with reproducible per-run random streams,
//! * [`marginals`]: Monte Carlo estimation of Fourier coefficients of k-th
//!   marginals with standard errors,
//! * [`hierarchy`]: an exact solver of the Fourier-space BBGKY hierarchy
//!   (finite N and the strong, balanced and unscaled limits),
//! * [`metrics`]: order, chaos and partial-order residuals,
//! * [`harness`]: regime sweeps, Monte Carlo vs analytic comparisons and
//!   report files.

pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod kernel;
pub mod marginals;
pub mod metrics;
pub mod profile;
pub mod quadrature;
pub mod simulator;
pub mod summation;

pub use error::{Error, Result};
pub use hierarchy::{ExpPolySum, HierarchySolution, Regime};
pub use kernel::{BaseDensity, NoiseKernel};
pub use marginals::{CoeffEntry, CoeffTable};
pub use profile::OrderProfile;
pub use simulator::{Configuration, InitialCondition, SimParams, TimeMode};

pub use num_complex::Complex64;
