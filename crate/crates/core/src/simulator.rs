//! Exact event-driven simulation of the CL jump process.
//!
//! Every event picks an ordered pair `(leader, follower)` uniformly among the
//! `N(N-1)` ordered pairs (equivalently: a uniform unordered pair, then a
//! uniform follower within it). The follower takes the leader's angle plus a
//! draw from the noise kernel. The total event rate does not depend on the
//! configuration: `lambda * N` in unscaled time and `lambda * N^2` in rescaled
//! time (`t' = t / N`, the pair rate `2 lambda N / (N - 1)` times
//! `N (N - 1) / 2` pairs).

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{epsilon_for, NoiseKernel};
use crate::profile::OrderProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Unscaled,
    Rescaled,
}

impl FromStr for TimeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unscaled" => Ok(TimeMode::Unscaled),
            "rescaled" => Ok(TimeMode::Rescaled),
            other => Err(Error::domain(format!("unknown time mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_particles: usize,
    pub lambda: f64,
    /// Noise scale of the kernel; must match the kernel passed to [`step`] / [`run`].
    pub epsilon: f64,
    /// Scaling exponent the epsilon was derived from, if any.
    pub gamma: Option<f64>,
    pub mode: TimeMode,
    pub seed: u64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
}

impl SimParams {
    /// Rescaled-time parameters with `eps = N^(-gamma)` and a single snapshot at `t_end`.
    pub fn rescaled(n_particles: usize, lambda: f64, gamma: f64, t_end: f64, seed: u64) -> Result<Self> {
        let params = Self {
            n_particles,
            lambda,
            epsilon: epsilon_for(n_particles, gamma)?,
            gamma: Some(gamma),
            mode: TimeMode::Rescaled,
            seed,
            t_end,
            snapshot_times: vec![t_end],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_snapshots(mut self, mut times: Vec<f64>) -> Result<Self> {
        times.sort_by(f64::total_cmp);
        times.dedup();
        if let Some(&last) = times.last() {
            self.t_end = self.t_end.max(last);
        }
        self.snapshot_times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: TimeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::domain(format!("need N >= 2 particles, got {}", self.n_particles)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::domain(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        let sorted = self.snapshot_times.windows(2).all(|w| w[0] <= w[1]);
        let inside = self.snapshot_times.iter().all(|&t| (0.0..=self.t_end).contains(&t));
        if !sorted || !inside {
            return Err(Error::domain("snapshot times must be sorted and lie in [0, t_end]"));
        }
        Ok(())
    }

    /// Total event rate of the jump process in the active time mode.
    pub fn event_rate(&self) -> f64 {
        let n = self.n_particles as f64;
        match self.mode {
            TimeMode::Rescaled => self.lambda * n * n,
            TimeMode::Unscaled => self.lambda * n,
        }
    }

    fn check_kernel(&self, kernel: &NoiseKernel) -> Result<()> {
        let rel = (kernel.epsilon() - self.epsilon).abs() / self.epsilon;
        if rel > 1e-12 {
            return Err(Error::domain(format!(
                "kernel epsilon {} does not match params epsilon {}",
                kernel.epsilon(),
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Law of the initial configuration. All variants are exchangeable, and their
/// k-particle marginals do not depend on N.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Independent draws from the profile (chaotic data).
    Iid(OrderProfile),
    /// One draw from the profile shared by every particle (ordered data).
    Ordered(OrderProfile),
    /// Every particle at the given angle.
    PointMass(f64),
    /// Ordered with probability `ordered_weight`, otherwise iid.
    Mixture { ordered_weight: f64, profile: OrderProfile },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::PointMass(theta) if !theta.is_finite() => {
                Err(Error::domain("point mass angle must be finite"))
            }
            InitialCondition::Mixture { ordered_weight, .. } if !(0.0..=1.0).contains(ordered_weight) => {
                Err(Error::domain(format!("mixture weight {ordered_weight} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Exact Fourier coefficient of the k-marginal at the tuple `n`.
    pub fn coeff(&self, n: &[i64]) -> Complex64 {
        let total: i64 = n.iter().sum();
        match self {
            InitialCondition::Iid(p) => n.iter().map(|&m| p.coeff(m)).product(),
            InitialCondition::Ordered(p) => p.coeff(total),
            InitialCondition::PointMass(theta) => Complex64::from_polar(1.0, -(total as f64) * theta),
            InitialCondition::Mixture { ordered_weight, profile } => {
                let iid: Complex64 = n.iter().map(|&m| profile.coeff(m)).product();
                profile.coeff(total) * *ordered_weight + iid * (1.0 - ordered_weight)
            }
        }
    }

    /// The single-particle profile, when there is one.
    pub fn profile(&self) -> Option<&OrderProfile> {
        match self {
            InitialCondition::Iid(p) | InitialCondition::Ordered(p) => Some(p),
            InitialCondition::Mixture { profile, .. } => Some(profile),
            InitialCondition::PointMass(_) => None,
        }
    }
}

impl FromStr for InitialCondition {
    type Err = Error;

    /// Accepts `uniform`, `one-plus-cos` (iid draws), `chaotic:<profile>`,
    /// `ordered:<profile>` and `point:<angle>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            Some(("chaotic", p)) | Some(("iid", p)) => Ok(InitialCondition::Iid(p.parse()?)),
            Some(("ordered", p)) => Ok(InitialCondition::Ordered(p.parse()?)),
            Some(("point", a)) => a
                .parse::<f64>()
                .map(|theta| InitialCondition::PointMass(wrap_angle(theta)))
                .map_err(|e| Error::domain(format!("bad point mass angle `{a}`: {e}"))),
            Some((kind, _)) => Err(Error::domain(format!("unknown initial kind `{kind}`"))),
            None => Ok(InitialCondition::Iid(s.parse()?)),
        }
    }
}

/// The N angles at one instant plus the model clock.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub angles: Vec<f64>,
    pub clock: f64,
}

/// Which particle followed which in a single event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub leader: usize,
    pub follower: usize,
}

/// State at a snapshot instant: the left limit, i.e. the configuration right
/// before the first event at or after `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub config: Configuration,
}

/// Maps an angle into `[-pi, pi)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let mut y = (theta + PI).rem_euclid(TAU) - PI;
    if y >= PI {
        y -= TAU;
    }
    if y < -PI {
        y = -PI;
    }
    y
}

/// Independent, reproducible random stream for run `run` of an ensemble.
pub fn rng_for_run(master_seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run);
    rng
}

pub fn init<R: Rng + ?Sized>(params: &SimParams, initial: &InitialCondition, rng: &mut R) -> Result<Configuration> {
    params.validate()?;
    initial.validate()?;
    let n = params.n_particles;
    let angles = match initial {
        InitialCondition::Iid(p) => (0..n).map(|_| p.sample(rng)).collect(),
        InitialCondition::Ordered(p) => vec![p.sample(rng); n],
        InitialCondition::PointMass(theta) => vec![wrap_angle(*theta); n],
        InitialCondition::Mixture { ordered_weight, profile } => {
            if rng.random::<f64>() < *ordered_weight {
                vec![profile.sample(rng); n]
            } else {
                (0..n).map(|_| profile.sample(rng)).collect()
            }
        }
    };
    Ok(Configuration { angles, clock: 0.0 })
}

#[inline]
fn draw_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Event {
    let leader = rng.random_range(0..n);
    let mut follower = rng.random_range(0..n - 1);
    if follower >= leader {
        follower += 1;
    }
    Event { leader, follower }
}

#[inline]
fn apply<R: Rng + ?Sized>(config: &mut Configuration, event: Event, kernel: &NoiseKernel, rng: &mut R) {
    let noise = kernel.sample(rng);
    config.angles[event.follower] = wrap_angle(config.angles[event.leader] + noise);
}

/// Advances the configuration by one event.
pub fn step<R: Rng + ?Sized>(
    config: &mut Configuration,
    params: &SimParams,
    kernel: &NoiseKernel,
    rng: &mut R,
) -> Event {
    let dt: f64 = Exp1.sample(rng);
    config.clock += dt / params.event_rate();
    let event = draw_pair(config.angles.len(), rng);
    apply(config, event, kernel, rng);
    event
}

/// Runs one trajectory from `config` and records the snapshots.
pub fn run_from<R: Rng + ?Sized>(
    mut config: Configuration,
    params: &SimParams,
    kernel: &NoiseKernel,
    rng: &mut R,
) -> Result<Vec<Snapshot>> {
    params.validate()?;
    params.check_kernel(kernel)?;
    let rate = params.event_rate();
    let n = config.angles.len();
    let mut snapshots = Vec::with_capacity(params.snapshot_times.len());
    let mut pending = params.snapshot_times.iter().copied().peekable();
    loop {
        let dt: f64 = Exp1.sample(rng);
        let next = config.clock + dt / rate;
        while let Some(t) = pending.next_if(|&t| t <= next) {
            snapshots.push(Snapshot { time: t, config: config.clone() });
        }
        if next >= params.t_end && pending.peek().is_none() {
            break;
        }
        config.clock = next;
        let event = draw_pair(n, rng);
        apply(&mut config, event, kernel, rng);
    }
    Ok(snapshots)
}

pub fn run<R: Rng + ?Sized>(
    params: &SimParams,
    initial: &InitialCondition,
    kernel: &NoiseKernel,
    rng: &mut R,
) -> Result<Vec<Snapshot>> {
    let config = init(params, initial, rng)?;
    run_from(config, params, kernel, rng)
}

/// Runs `runs` independent trajectories (run `r` uses stream `r` of the
/// master seed) and maps each one through `per_run`. Results come back in run
/// order regardless of scheduling.
pub fn run_ensemble<T, F>(
    params: &SimParams,
    initial: &InitialCondition,
    kernel: &NoiseKernel,
    runs: usize,
    per_run: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Vec<Snapshot>) -> T + Sync,
{
    params.validate()?;
    initial.validate()?;
    params.check_kernel(kernel)?;
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for_run(params.seed, r as u64);
            run(params, initial, kernel, &mut rng).map(|snaps| per_run(r, snaps))
        })
        .collect()
}

/// Circular variance `1 - |mean(exp(i theta))|`.
pub fn circular_variance(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (c, s) = angles.iter().fold((0.0, 0.0), |(c, s), t| (c + t.cos(), s + t.sin()));
    1.0 - (c * c + s * s).sqrt() / n
}
