//! The `dynamo` command-line tool.
//!
//! Subcommands: `equilibria`, `lyapunov`, `meansquare`, `simulate`, `scan`.
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 for
//! numerical non-convergence, 1 for I/O failures.

pub mod config;
mod render;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dynamo_core::lyapunov::{lyapunov, LyapunovResult, Method};
use dynamo_core::meansquare::{ms_report, spectral_abscissa};
use dynamo_core::model::{find_equilibria, linearize, FieldState, ModelParams};
use dynamo_core::regions::{scan, trace_boundary, BoundaryKind, GridAxis, ScanSpec};
use dynamo_core::sde::{angular_density, mc_lyapunov, mc_second_moment, RngSpec, SimConfig};

use config::ConfigFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dynamo_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dynamo", version, about = "Stochastic stability of a reduced alpha-Omega dynamo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady states of the noise-free nonlinear system.
    Equilibria(Common),
    /// Top Lyapunov exponent of the linearization.
    Lyapunov(LyapunovArgs),
    /// Exponential mean-square stability report.
    Meansquare(Common),
    /// Monte Carlo estimates with an analytic reference.
    Simulate(SimulateArgs),
    /// Scan of the (eps, sigma1) plane, with optional boundary tracing.
    Scan(ScanArgs),
}

/// Flags shared by every subcommand. Defaults: g=0.99, delta=0.01, eps=0.1,
/// sigma1=0.05, k-alpha=k-beta=1, format=csv, output to stdout.
#[derive(Debug, Args, Default)]
pub struct Common {
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma1: Option<f64>,
    #[arg(long = "k-alpha")]
    pub k_alpha: Option<f64>,
    #[arg(long = "k-beta")]
    pub k_beta: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<Format>,
    /// Flat key=value file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for scan and simulate (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Random seed for simulate.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub common: Common,
    /// quadrature, series, hypergeometric or all (default hypergeometric).
    #[arg(long)]
    pub method: Option<MethodChoice>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// lyapunov, second-moment or angular (default lyapunov).
    #[arg(long)]
    pub mode: Option<SimMode>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long = "renorm-every")]
    pub renorm_every: Option<usize>,
    #[arg(long = "x0-r", allow_negative_numbers = true)]
    pub x0_r: Option<f64>,
    #[arg(long = "x0-phi", allow_negative_numbers = true)]
    pub x0_phi: Option<f64>,
    #[arg(long)]
    pub stream: Option<u64>,
    /// Histogram bins for the angular mode (default 64).
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "eps-min")]
    pub eps_min: Option<f64>,
    #[arg(long = "eps-max")]
    pub eps_max: Option<f64>,
    #[arg(long = "eps-n")]
    pub eps_n: Option<usize>,
    #[arg(long = "sigma1-min")]
    pub sigma1_min: Option<f64>,
    #[arg(long = "sigma1-max")]
    pub sigma1_max: Option<f64>,
    #[arg(long = "sigma1-n")]
    pub sigma1_n: Option<usize>,
    /// Lyapunov evaluator: quadrature, series or hypergeometric.
    #[arg(long)]
    pub method: Option<MethodChoice>,
    /// Also trace the three boundaries and write them here.
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    One(Method),
    All,
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(MethodChoice::All);
        }
        match s.parse::<Method>() {
            Ok(Method::MonteCarlo) => Err("use the simulate subcommand for Monte Carlo".into()),
            Ok(m) => Ok(MethodChoice::One(m)),
            Err(e) => Err(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Lyapunov,
    SecondMoment,
    Angular,
}

impl FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lyapunov" => Ok(SimMode::Lyapunov),
            "second-moment" => Ok(SimMode::SecondMoment),
            "angular" => Ok(SimMode::Angular),
            other => Err(format!("unknown mode `{other}` (expected lyapunov, second-moment or angular)")),
        }
    }
}

impl SimMode {
    fn as_str(&self) -> &'static str {
        match self {
            SimMode::Lyapunov => "lyapunov",
            SimMode::SecondMoment => "second-moment",
            SimMode::Angular => "angular",
        }
    }
}

/// Common settings after merging flags, config file and defaults.
struct Resolved {
    params: ModelParams,
    out: Option<PathBuf>,
    format: Format,
    seed: u64,
}

fn resolve_common(c: &Common, file: &mut ConfigFile) -> Result<Resolved, CliError> {
    let g = file.resolve("g", c.g, 0.99)?;
    let delta = file.resolve("delta", c.delta, 0.01)?;
    let eps = file.resolve("eps", c.eps, 0.1)?;
    let sigma1 = file.resolve("sigma1", c.sigma1, 0.05)?;
    let k_alpha = file.resolve("k-alpha", c.k_alpha, 1.0)?;
    let k_beta = file.resolve("k-beta", c.k_beta, 1.0)?;
    let out = file.resolve_opt::<PathBuf>("out", c.out.clone())?;
    let format = file.resolve("format", c.format, Format::Csv)?;
    let workers = file.resolve_opt("workers", c.workers)?;
    let seed = file.resolve("seed", c.seed, RngSpec::DEFAULT_SEED)?;
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // A pool can only be installed once per process; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let params = ModelParams::new(g, delta, eps, sigma1, k_alpha, k_beta)?;
    Ok(Resolved {
        params,
        out,
        format,
        seed,
    })
}

fn load_config(c: &Common) -> Result<ConfigFile, CliError> {
    match &c.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Equilibria(c) => cmd_equilibria(&c),
        Command::Lyapunov(a) => cmd_lyapunov(&a),
        Command::Meansquare(c) => cmd_meansquare(&c),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Scan(a) => cmd_scan(&a),
    }
}

fn cmd_equilibria(c: &Common) -> Result<(), CliError> {
    let mut file = load_config(c)?;
    let r = resolve_common(c, &mut file)?;
    file.finish()?;
    let eqs = find_equilibria(&r.params);
    emit(&r.out, &render::equilibria(r.format, &r.params, &eqs))
}

fn cmd_lyapunov(a: &LyapunovArgs) -> Result<(), CliError> {
    let mut file = load_config(&a.common)?;
    let r = resolve_common(&a.common, &mut file)?;
    let method = file.resolve("method", a.method, MethodChoice::One(Method::Hypergeometric))?;
    file.finish()?;
    let methods: Vec<Method> = match method {
        MethodChoice::One(m) => vec![m],
        MethodChoice::All => Method::ANALYTIC.to_vec(),
    };
    let results = methods
        .iter()
        .map(|m| lyapunov(&r.params, *m))
        .collect::<Result<Vec<LyapunovResult>, _>>()?;
    let discrepancy = (results.len() > 1).then(|| max_rel_discrepancy(&results));
    emit(&r.out, &render::lyapunov(r.format, &r.params, &results, discrepancy))
}

/// Largest pairwise relative difference of `lambda + eps`.
fn max_rel_discrepancy(results: &[LyapunovResult]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            let scale = a.noise_term.abs().max(b.noise_term.abs());
            if scale > 0.0 {
                worst = worst.max((a.noise_term - b.noise_term).abs() / scale);
            }
        }
    }
    worst
}

fn cmd_meansquare(c: &Common) -> Result<(), CliError> {
    let mut file = load_config(c)?;
    let r = resolve_common(c, &mut file)?;
    file.finish()?;
    emit(&r.out, &render::meansquare(r.format, &r.params, &ms_report(&r.params)))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut file = load_config(&a.common)?;
    let r = resolve_common(&a.common, &mut file)?;
    let d = SimConfig::default();
    let mode = file.resolve("mode", a.mode, SimMode::Lyapunov)?;
    let cfg = SimConfig {
        dt: file.resolve("dt", a.dt, d.dt)?,
        t_final: file.resolve("t-final", a.t_final, d.t_final)?,
        n_paths: file.resolve("paths", a.paths, d.n_paths)?,
        renorm_every: file.resolve("renorm-every", a.renorm_every, d.renorm_every)?,
        x0: FieldState::new(
            file.resolve("x0-r", a.x0_r, d.x0.b_r)?,
            file.resolve("x0-phi", a.x0_phi, d.x0.b_phi)?,
        ),
    };
    let stream = file.resolve("stream", a.stream, 0)?;
    let bins = file.resolve("bins", a.bins, 64)?;
    file.finish()?;
    if cfg.x0 == FieldState::ZERO {
        return Err(CliError::Usage("x0 must be nonzero (set --x0-r or --x0-phi)".into()));
    }
    let rng = RngSpec::new(r.seed, stream);
    let sys = linearize(&r.params);
    let text = match mode {
        SimMode::Lyapunov => {
            let est = mc_lyapunov(&sys, &cfg, &rng)?;
            let reference = lyapunov(&r.params, Method::Hypergeometric)?.value;
            render::simulation(r.format, mode.as_str(), &r.params, &cfg, &rng, &est, reference)
        }
        SimMode::SecondMoment => {
            let est = mc_second_moment(&sys, &cfg, &rng)?;
            let reference = spectral_abscissa(&r.params);
            render::simulation(r.format, mode.as_str(), &r.params, &cfg, &rng, &est, reference)
        }
        SimMode::Angular => {
            let hist = angular_density(&sys, &cfg, &rng, bins)?;
            render::angular(r.format, &r.params, &cfg, &rng, &hist)
        }
    };
    emit(&r.out, &text)
}

fn cmd_scan(a: &ScanArgs) -> Result<(), CliError> {
    let mut file = load_config(&a.common)?;
    if a.common.eps.is_some() || a.common.sigma1.is_some() {
        return Err(CliError::Usage(
            "scan takes --eps-min/--eps-max/--eps-n and --sigma1-min/--sigma1-max/--sigma1-n".into(),
        ));
    }
    let r = resolve_common(&a.common, &mut file)?;
    let d = ScanSpec::default();
    let method = match file.resolve("method", a.method, MethodChoice::One(d.method))? {
        MethodChoice::One(m) => m,
        MethodChoice::All => return Err(CliError::Usage("scan needs a single --method".into())),
    };
    let spec = ScanSpec {
        eps: GridAxis::new(
            file.resolve("eps-min", a.eps_min, d.eps.min)?,
            file.resolve("eps-max", a.eps_max, d.eps.max)?,
            file.resolve("eps-n", a.eps_n, d.eps.n)?,
        ),
        sigma1: GridAxis::new(
            file.resolve("sigma1-min", a.sigma1_min, d.sigma1.min)?,
            file.resolve("sigma1-max", a.sigma1_max, d.sigma1.max)?,
            file.resolve("sigma1-n", a.sigma1_n, d.sigma1.n)?,
        ),
        g: r.params.g(),
        delta: r.params.delta(),
        k_alpha: r.params.k_alpha(),
        k_beta: r.params.k_beta(),
        method,
    };
    let boundaries_path = file.resolve_opt::<PathBuf>("boundaries", a.boundaries.clone())?;
    file.finish()?;

    let records = scan(&spec)?;
    emit(&r.out, &render::scan(r.format, &spec, &records))?;
    if let Some(path) = boundaries_path {
        let mut points = Vec::new();
        for kind in BoundaryKind::ALL {
            points.extend(trace_boundary(&spec, kind)?);
        }
        emit(&Some(path), &render::boundaries(r.format, &points))?;
    }
    Ok(())
}
