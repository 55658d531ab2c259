//! Regime sweeps: simulate every `(N, gamma)` cell of a grid, estimate the
//! marginal tables, solve the matching finite-N hierarchy, and write the
//! comparison and metrics to disk with a hashed manifest.
//!
//! Configuration is a single JSON file:
//!
//! ```json
//! {
//!   "name": "order-emergence",
//!   "grid": {
//!     "n": [32, 128],
//!     "gamma": [1.0],
//!     "lambda": 1.0,
//!     "kernel": { "family": "gaussian", "param": 1.0 },
//!     "initial": "one-plus-cos"
//!   },
//!   "runs": 200,
//!   "snapshots": [0.5, 1.0],
//!   "nmax": 3,
//!   "kmax": 2,
//!   "seed": 7
//! }
//! ```
//!
//! `gamma` may be omitted, in which case the three presets 0.75, 0.5 and
//! 0.25 are swept. Tables at `t = 0` are always produced.

mod compare;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hierarchy::{solve_hierarchy, HProfile, Regime};
use crate::kernel::{BaseDensity, NoiseKernel};
use crate::marginals::{CoeffTable, Estimator, TupleSampling};
use crate::metrics::{chaos_residual, diag_gap, order_residual_against};
use crate::simulator::{run_ensemble, InitialCondition, SimParams};

pub use compare::{compare_mc_analytic, Comparison, EntryZ};

/// Scaling exponents swept when a grid names none.
pub const DEFAULT_GAMMAS: [f64; 3] = [0.75, 0.5, 0.25];

pub const SUMMARY_HEADER: &str = "n_particles,gamma,t,order_residual,chaos_residual,diag_gap_n1,se_flag";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    pub param: f64,
}

impl KernelSpec {
    pub fn base(&self) -> Result<BaseDensity> {
        BaseDensity::from_name(&self.family, self.param)
    }
}

fn default_gammas() -> Vec<f64> {
    DEFAULT_GAMMAS.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    #[serde(default = "default_gammas")]
    pub gamma: Vec<f64>,
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub initial: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub grid: Grid,
    pub runs: usize,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    pub nmax: i64,
    pub kmax: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n.is_empty() || g.gamma.is_empty() {
            return Err(Error::domain("grid needs at least one N and one gamma"));
        }
        if self.runs == 0 {
            return Err(Error::domain("runs must be at least 1"));
        }
        if self.kmax < 2 {
            return Err(Error::domain("kmax must be at least 2 for the pair metrics"));
        }
        if let Some(&n) = g.n.iter().find(|&&n| n < self.kmax) {
            return Err(Error::domain(format!("N = {n} is smaller than kmax = {}", self.kmax)));
        }
        if self.nmax < 1 {
            return Err(Error::domain("nmax must be at least 1"));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::domain(format!("bad snapshot time {t}")));
        }
        self.grid.kernel.base()?;
        self.initial()?.validate()?;
        for &n in &g.n {
            for &gamma in &g.gamma {
                SimParams::rescaled(n, g.lambda, gamma, 0.0, self.seed)?;
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> Result<InitialCondition> {
        self.grid.initial.parse()
    }

    /// Snapshot times including 0, sorted and deduplicated.
    pub fn times(&self) -> Vec<f64> {
        let mut t = self.snapshots.clone();
        t.push(0.0);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n_particles: usize,
    pub gamma: f64,
    pub t: f64,
    pub order_residual: f64,
    pub chaos_residual: f64,
    pub diag_gap_n1: f64,
    pub se_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub n_particles: usize,
    pub gamma: f64,
    pub t: f64,
    pub k: usize,
    pub fraction_within: f64,
    pub median_z: f64,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub complete: bool,
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<ComparisonSummary>,
    pub manifest: Manifest,
}

struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(FileRecord { path: rel.to_string(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() });
        Ok(())
    }

    fn write_table(&mut self, rel: &str, table: &CoeffTable) -> Result<()> {
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        self.write(rel, &buf)
    }
}

fn cell_seed(seed: u64, cell: usize) -> u64 {
    seed.wrapping_add((cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn write_comparison(out: &mut OutputDir, rel: &str, cmp: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tuple", "gap", "stderr", "z"])?;
    for e in &cmp.entries {
        let tuple = e.tuple.iter().map(i64::to_string).collect::<Vec<_>>().join(";");
        w.write_record([tuple, e.gap.to_string(), e.stderr.to_string(), e.z.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    out.write(rel, &bytes)
}

fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.n_particles.to_string(),
            r.gamma.to_string(),
            r.t.to_string(),
            r.order_residual.to_string(),
            r.chaos_residual.to_string(),
            r.diag_gap_n1.to_string(),
            r.se_flag.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

/// Runs the whole grid and writes its outputs under `out_dir`. On an I/O
/// failure the manifest lists what was written before the failure and is
/// marked incomplete.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let mut out = OutputDir { root: out_dir.to_path_buf(), files: Vec::new() };
    let result = run_cells(config, &mut out);
    let manifest = Manifest {
        name: config.name.clone(),
        seed: config.seed,
        complete: result.is_ok(),
        error: result.as_ref().err().map(|e| e.to_string()),
        files: out.files.clone(),
    };
    let manifest_written = fs::create_dir_all(out_dir)
        .map_err(Error::from)
        .and_then(|_| Ok(fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?));
    let (summary, comparisons) = result?;
    manifest_written?;
    Ok(ExperimentReport { summary, comparisons, manifest })
}

fn run_cells(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Vec<SummaryRow>, Vec<ComparisonSummary>)> {
    let g = &config.grid;
    let base = g.kernel.base()?;
    let initial = config.initial()?;
    let times = config.times();
    let t_end = *times.last().unwrap_or(&0.0);
    let estimators: Vec<Estimator> = (1..=config.kmax)
        .map(|k| Estimator::new(k, config.nmax, TupleSampling::Exhaustive))
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    let mut comparisons = Vec::new();
    let mut residual_series = Vec::new();
    let mut cell = 0;
    for &n in &g.n {
        for &gamma in &g.gamma {
            let seed = cell_seed(config.seed, cell);
            cell += 1;
            let params = SimParams::rescaled(n, g.lambda, gamma, t_end, seed)?.with_snapshots(times.clone())?;
            let kernel = NoiseKernel::new(base, params.epsilon)?;

            // per run: per snapshot, per level, class estimates
            let per_run = run_ensemble(&params, &initial, &kernel, config.runs, |r, snaps| {
                snaps
                    .iter()
                    .map(|s| {
                        estimators
                            .iter()
                            .map(|e| e.single(&s.config.angles, (seed, r as u64)))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })?
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

            let regime = Regime::FiniteN { n, kernel: kernel.clone(), lambda: g.lambda };
            let solution = solve_hierarchy(&regime, &initial, config.kmax, config.nmax)?;
            let dir = format!("cells/n{n}_gamma{gamma}");
            let mut points = Vec::new();
            for (ti, &t) in times.iter().enumerate() {
                let mut empirical = Vec::with_capacity(config.kmax);
                for (ki, est) in estimators.iter().enumerate() {
                    let k = ki + 1;
                    let runs: Vec<Vec<Complex64>> = per_run.iter().map(|r| r[ti][ki].clone()).collect();
                    let emp = est.from_runs(&runs, t);
                    let ana = solution.table(k, t)?;
                    let cmp = compare_mc_analytic(&emp, &ana)?;
                    out.write_table(&format!("{dir}/empirical_k{k}_t{t}.csv"), &emp)?;
                    out.write_table(&format!("{dir}/analytic_k{k}_t{t}.csv"), &ana)?;
                    write_comparison(out, &format!("{dir}/compare_k{k}_t{t}.csv"), &cmp)?;
                    comparisons.push(ComparisonSummary {
                        n_particles: n,
                        gamma,
                        t,
                        k,
                        fraction_within: cmp.fraction_within(),
                        median_z: cmp.median_z(),
                        flagged: cmp.flagged().count(),
                    });
                    empirical.push(emp);
                }
                let order = order_residual_against(&empirical[1], &empirical[0])?;
                let chaos = chaos_residual(&empirical[1], &empirical[0])?;
                let gap = diag_gap(&empirical[1])?;
                let row = SummaryRow {
                    n_particles: n,
                    gamma,
                    t,
                    order_residual: order.value,
                    chaos_residual: chaos.value,
                    diag_gap_n1: gap[0].1,
                    se_flag: order.within_noise() || chaos.within_noise(),
                };
                points.push((t, row.diag_gap_n1));
                summary.push(row);
            }
            residual_series.push(svg::Series::new(format!("N={n} gamma={gamma}"), points));
        }
    }
    out.write("summary.csv", &summary_csv(&summary)?)?;
    let plot = svg::line_plot(&config.name, "t", "1 - Re F2(1,-1)", &residual_series);
    out.write("diag_gap.svg", plot.as_bytes())?;
    Ok((summary, comparisons))
}

/// Line plot of an `H` partial sum over its grid.
pub fn h_profile_svg(profile: &HProfile) -> String {
    let points = profile.theta.iter().copied().zip(profile.values.iter().copied()).collect();
    let title = format!("H(theta), m2 = {}, {} terms", profile.m2, profile.terms);
    svg::line_plot(&title, "theta", "H", &[svg::Series::new("H", points)])
}
