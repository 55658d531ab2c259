//! `cl-order` command line tool.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cl_order::harness::{h_profile_svg, run_experiment, ExperimentConfig};
use cl_order::hierarchy::{h_profile, solve_hierarchy, HProfile};
use cl_order::kernel::epsilon_for;
use cl_order::marginals::{Estimator, TupleSampling};
use cl_order::metrics::DiagnosticsReport;
use cl_order::simulator::run_ensemble;
use cl_order::{BaseDensity, CoeffTable, InitialCondition, NoiseKernel, OrderProfile, Regime, SimParams, TimeMode};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "cl-order", version, about = "Choose-the-Leader simulator and Fourier hierarchy solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate kernel Fourier coefficients and the small-frequency bound.
    Kernel(KernelCmd),
    /// Simulate an ensemble and write particle snapshots.
    Simulate(SimulateCmd),
    /// Estimate marginal Fourier coefficients from simulate output.
    Marginals(MarginalsCmd),
    /// Solve the Fourier hierarchy exactly.
    Hierarchy(HierarchyCmd),
    /// Partial sums of the balanced-regime pair profile H.
    Hprofile(HprofileCmd),
    /// Order, chaos and partial-order residuals of coefficient tables.
    Metrics(MetricsCmd),
    /// Run a JSON-configured regime sweep.
    Experiment(ExperimentCmd),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Family {
    Gaussian,
    Laplace,
    Uniform,
}

#[derive(Args, Clone, Debug)]
struct DensityArgs {
    /// Base density of the noise.
    #[arg(long, value_enum, default_value = "gaussian")]
    density: Family,
    /// Gaussian standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Laplace scale.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Half-width of the uniform density.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

impl DensityArgs {
    fn param(&self) -> f64 {
        match self.density {
            Family::Gaussian => self.sigma,
            Family::Laplace => self.b,
            Family::Uniform => self.a,
        }
    }

    fn base(&self) -> Result<BaseDensity> {
        let name = match self.density {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Uniform => "uniform",
        };
        Ok(BaseDensity::from_name(name, self.param())?)
    }
}

#[derive(Args, Clone, Debug)]
struct ScalingArgs {
    /// Scaling exponent, eps = N^-gamma.
    #[arg(long, conflicts_with = "epsilon")]
    gamma: Option<f64>,
    /// Noise scale, used as given.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ScalingArgs {
    fn epsilon(&self, n: usize) -> Result<f64> {
        match (self.gamma, self.epsilon) {
            (_, Some(e)) => Ok(e),
            (Some(g), None) => Ok(epsilon_for(n, g)?),
            (None, None) => bail!("give either --gamma or --epsilon"),
        }
    }
}

#[derive(Args)]
struct KernelCmd {
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 50)]
    nmax: i64,
    /// Moment order of the bound (3 or 4).
    #[arg(long, default_value_t = 3)]
    moment_k: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long, default_value = "rescaled")]
    mode: TimeMode,
    #[arg(long)]
    t_end: f64,
    /// Comma-separated snapshot times; defaults to t_end.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform, one-plus-cos, ordered:<profile> or point:<angle>.
    #[arg(long, default_value = "one-plus-cos")]
    initial: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MarginalsCmd {
    /// Directory written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    nmax: i64,
    /// Sample this many random tuples per configuration instead of all of them.
    #[arg(long)]
    tuples_per_config: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeKind {
    FiniteN,
    Strong,
    Balanced,
    Unscaled,
}

#[derive(Args)]
struct HierarchyCmd {
    #[arg(long, value_enum)]
    regime: RegimeKind,
    /// Particle number (finite-n) or the N defining eps through --gamma (unscaled).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long, default_value_t = 3)]
    nmax: i64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    density: DensityArgs,
    /// Second moment for the balanced limit; defaults to that of the density.
    #[arg(long)]
    m2: Option<f64>,
    #[arg(long, default_value = "one-plus-cos")]
    initial: InitialCondition,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    times: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HprofileCmd {
    #[arg(long, default_value_t = 1.0)]
    m2: f64,
    #[arg(long, default_value_t = 500)]
    terms: usize,
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the profile as an SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsCmd {
    /// Level-1 coefficient CSV.
    #[arg(long)]
    k1: PathBuf,
    /// Level-2 coefficient CSV at the same time.
    #[arg(long)]
    k2: PathBuf,
    #[arg(long, default_value = "one-plus-cos")]
    profile: OrderProfile,
    #[arg(long, default_value_t = 1.0)]
    m2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-frequency diagonal gaps.
    #[arg(long)]
    diag_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentCmd {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    t: f64,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct SimulationMeta {
    params: SimParams,
    density: Family,
    density_param: f64,
    initial: String,
    runs: usize,
    snapshots: Vec<SnapshotFile>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn kernel(cmd: KernelCmd) -> Result<()> {
    let k = NoiseKernel::new(cmd.density.base()?, cmd.epsilon)?;
    let mut w = csv::Writer::from_writer(sink(cmd.out.as_deref())?);
    w.write_record(["n", "g_hat", "bound_lhs", "bound_rhs", "pass"])?;
    for n in -cmd.nmax..=cmd.nmax {
        let b = k.coeff_bound_check(n, cmd.moment_k)?;
        w.write_record([n.to_string(), b.g_hat.to_string(), b.lhs.to_string(), b.rhs.to_string(), b.pass.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(cmd: SimulateCmd) -> Result<()> {
    let epsilon = cmd.scaling.epsilon(cmd.n)?;
    let snapshots = if cmd.snapshots.is_empty() { vec![cmd.t_end] } else { cmd.snapshots.clone() };
    let params = SimParams {
        n_particles: cmd.n,
        lambda: cmd.lambda,
        epsilon,
        gamma: cmd.scaling.gamma,
        mode: cmd.mode,
        seed: cmd.seed,
        t_end: cmd.t_end,
        snapshot_times: vec![],
    }
    .with_snapshots(snapshots)?;
    let kernel = NoiseKernel::new(cmd.density.base()?, epsilon)?;
    let initial: InitialCondition = cmd.initial.parse()?;
    let runs = run_ensemble(&params, &initial, &kernel, cmd.runs, |_, snaps| snaps)?;
    fs::create_dir_all(&cmd.out)?;
    let mut files = Vec::new();
    for (i, &t) in params.snapshot_times.iter().enumerate() {
        let name = format!("snapshot_{i:03}.csv");
        let mut w = csv::Writer::from_path(cmd.out.join(&name))?;
        w.write_record(["run", "particle", "theta"])?;
        for (r, snaps) in runs.iter().enumerate() {
            for (p, theta) in snaps[i].config.angles.iter().enumerate() {
                w.write_record([r.to_string(), p.to_string(), theta.to_string()])?;
            }
        }
        w.flush()?;
        files.push(SnapshotFile { t, file: name });
    }
    let meta = SimulationMeta {
        params,
        density: cmd.density.density,
        density_param: cmd.density.param(),
        initial: cmd.initial,
        runs: cmd.runs,
        snapshots: files,
    };
    fs::write(cmd.out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn read_snapshot(path: &Path, runs: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut configs = vec![vec![f64::NAN; n]; runs];
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    for rec in rdr.deserialize() {
        let (r, p, theta): (usize, usize, f64) = rec?;
        if r >= runs || p >= n {
            bail!("{}: run {r} particle {p} out of range", path.display());
        }
        configs[r][p] = theta;
    }
    if configs.iter().flatten().any(|x| x.is_nan()) {
        bail!("{}: missing particle angles", path.display());
    }
    Ok(configs)
}

fn marginals(cmd: MarginalsCmd) -> Result<()> {
    let meta: SimulationMeta = serde_json::from_str(&fs::read_to_string(cmd.input.join("meta.json"))?)?;
    let sampling = match cmd.tuples_per_config {
        Some(per_config) => TupleSampling::Random { per_config },
        None => TupleSampling::Exhaustive,
    };
    let est = Estimator::new(cmd.k, cmd.nmax, sampling)?;
    let mut out = sink(cmd.out.as_deref())?;
    for (i, snap) in meta.snapshots.iter().enumerate() {
        let configs = read_snapshot(&cmd.input.join(&snap.file), meta.runs, meta.params.n_particles)?;
        let table = est.estimate(&configs, snap.t, cmd.seed)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        let text = String::from_utf8(buf)?;
        let body = if i == 0 { text.as_str() } else { text.split_once('\n').map_or("", |(_, rest)| rest) };
        out.write_all(body.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn hierarchy(cmd: HierarchyCmd) -> Result<()> {
    let need_n = || cmd.n.context("--n is required for this regime");
    let kernel = |n: usize| -> Result<NoiseKernel> { Ok(NoiseKernel::new(cmd.density.base()?, cmd.scaling.epsilon(n)?)?) };
    let regime = match cmd.regime {
        RegimeKind::FiniteN => {
            let n = need_n()?;
            Regime::FiniteN { n, kernel: kernel(n)?, lambda: cmd.lambda }
        }
        RegimeKind::Strong => Regime::StrongLimit { lambda: cmd.lambda },
        RegimeKind::Balanced => {
            let m2 = match cmd.m2 {
                Some(m) => m,
                None => cmd.density.base()?.moment(2)?,
            };
            Regime::BalancedLimit { lambda: cmd.lambda, m2 }
        }
        RegimeKind::Unscaled => {
            let n = match cmd.scaling.epsilon {
                Some(_) => 1,
                None => need_n()?,
            };
            Regime::Unscaled { kernel: kernel(n)?, lambda: cmd.lambda }
        }
    };
    let sol = solve_hierarchy(&regime, &cmd.initial, cmd.kmax, cmd.nmax)?;
    let mut w = csv::Writer::from_writer(sink(cmd.out.as_deref())?);
    let mut header = vec!["k".to_string()];
    header.extend((1..=cmd.kmax).map(|i| format!("n{i}")));
    header.extend(["t", "re", "im"].map(String::from));
    w.write_record(&header)?;
    for &t in &cmd.times {
        for k in 1..=cmd.kmax {
            for (tuple, entry) in &sol.table(k, t)?.entries {
                let mut row = vec![k.to_string()];
                row.extend(tuple.iter().map(i64::to_string));
                row.extend(std::iter::repeat_n(String::new(), cmd.kmax - k));
                row.extend([t.to_string(), entry.value.re.to_string(), entry.value.im.to_string()]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn hprofile(cmd: HprofileCmd) -> Result<()> {
    let profile = h_profile(cmd.m2, cmd.terms, &HProfile::grid(cmd.grid))?;
    let mut w = csv::Writer::from_writer(sink(cmd.out.as_deref())?);
    w.write_record(["theta", "H"])?;
    for (th, h) in profile.theta.iter().zip(&profile.values) {
        w.write_record([th.to_string(), h.to_string()])?;
    }
    w.flush()?;
    if let Some(path) = cmd.svg {
        fs::write(&path, h_profile_svg(&profile)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<CoeffTable> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    CoeffTable::read_csv(file).with_context(|| format!("parsing {}", path.display()))
}

fn metrics(cmd: MetricsCmd) -> Result<()> {
    let t1 = read_table(&cmd.k1)?;
    let t2 = read_table(&cmd.k2)?;
    let report = DiagnosticsReport::new(&t1, &t2, &cmd.profile, cmd.m2)?;
    let mut w = csv::Writer::from_writer(sink(cmd.out.as_deref())?);
    w.write_record(["t", "order_residual", "chaos_residual", "partial_order_residual"])?;
    w.write_record([
        report.t.to_string(),
        report.order_residual.value.to_string(),
        report.chaos_residual.value.to_string(),
        report.partial_order_residual.value.to_string(),
    ])?;
    w.flush()?;
    if let Some(path) = cmd.diag_out {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "n", "diag_gap"])?;
        for (n, gap) in &report.diag_gap {
            w.write_record([report.t.to_string(), n.to_string(), gap.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn experiment(cmd: ExperimentCmd) -> Result<()> {
    let config = ExperimentConfig::load(&cmd.config)?;
    let report = run_experiment(&config, &cmd.out)?;
    for c in &report.comparisons {
        eprintln!(
            "N={} gamma={} t={} k={}: {:.1}% within 4 SE, median z {:.2}",
            c.n_particles,
            c.gamma,
            c.t,
            c.k,
            100.0 * c.fraction_within,
            c.median_z
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Kernel(c) => kernel(c),
        Command::Simulate(c) => simulate(c),
        Command::Marginals(c) => marginals(c),
        Command::Hierarchy(c) => hierarchy(c),
        Command::Hprofile(c) => hprofile(c),
        Command::Metrics(c) => metrics(c),
        Command::Experiment(c) => experiment(c),
    }
}
