//! `galvi` — higher-order Galerkin variational integrators.
//!
//! Exit codes: 0 on success, 1 on validation or configuration errors, 2 on
//! numerical failures (non-convergence, singularities).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use galvi::cli::{self, Command, ErrorMetric, OutputFormat, RunConfig};
use galvi::Error;

#[derive(Parser)]
#[command(
    name = "galvi",
    version,
    about = "Higher-order Galerkin variational integrators (PsNrQu family)",
    after_help = "Presets for the standard experiments live under presets/; \
                  run e.g. `galvi converge --preset harmonic_orders_gauss`."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one spec and write the trajectory series
    Integrate(RunArgs),
    /// Step-size sweeps with fitted convergence orders
    Converge(RunArgs),
    /// Linear stability scan over h*omega for the scalar harmonic oscillator
    Stability(RunArgs),
    /// Energy and angular-momentum deviation series, optional RK4 comparator
    Conserve(RunArgs),
    /// Runtime-versus-error study (median of repeated runs)
    Benchmark(RunArgs),
}

impl Cmd {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Cmd::Integrate(a) => (Command::Integrate, a),
            Cmd::Converge(a) => (Command::Converge, a),
            Cmd::Stability(a) => (Command::Stability, a),
            Cmd::Conserve(a) => (Command::Conserve, a),
            Cmd::Benchmark(a) => (Command::Benchmark, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (resolved in $GALVI_PRESETS and ./presets) or a TOML path
    #[arg(long)]
    preset: Option<String>,
    /// Model: harmonic | kepler
    #[arg(long)]
    model: Option<String>,
    /// Integrator spec, e.g. s3r4lobatto (repeatable)
    #[arg(long = "spec", value_name = "sSrRkK")]
    specs: Vec<String>,
    /// Step size
    #[arg(long)]
    h: Option<f64>,
    /// Number of macro steps
    #[arg(long)]
    steps: Option<usize>,
    /// Time horizon T (steps = round(T/h) when --steps is absent)
    #[arg(long)]
    horizon: Option<f64>,
    /// Step sizes for sweep commands (comma-separated)
    #[arg(long, value_delimiter = ',')]
    step_sizes: Vec<f64>,
    /// Error metric for converge: global | return
    #[arg(long)]
    metric: Option<String>,
    /// Newton residual tolerance (max-norm)
    #[arg(long)]
    tol: Option<f64>,
    /// Output path prefix
    #[arg(long)]
    out: Option<PathBuf>,
    /// Series format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Accept specs with polynomial degree above the quadrature point count
    #[arg(long)]
    allow_s_gt_r: bool,
    /// Initial configuration (comma-separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q0: Vec<f64>,
    /// Initial momentum (comma-separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p0: Vec<f64>,
    /// Harmonic oscillator dimension (1 or 2)
    #[arg(long)]
    dim: Option<usize>,
    /// Harmonic oscillator frequency
    #[arg(long)]
    omega: Option<f64>,
    /// Kepler force constant
    #[arg(long)]
    k: Option<f64>,
    /// Control-point scheme: equispaced | chebyshev
    #[arg(long)]
    scheme: Option<String>,
    /// Stability grid upper end
    #[arg(long)]
    grid_max: Option<f64>,
    /// Stability grid spacing
    #[arg(long)]
    grid_step: Option<f64>,
    /// Include the RK4 comparator in conserve runs
    #[arg(long)]
    include_rk4: bool,
    /// RK4 comparator step size
    #[arg(long)]
    rk4_h: Option<f64>,
    /// Benchmark repetitions per cell
    #[arg(long)]
    reps: Option<usize>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut config = match &self.preset {
            Some(name) => RunConfig::from_preset_file(&cli::resolve_preset(name)?)?,
            None => RunConfig::default(),
        };
        if let Some(model) = self.model {
            config.model = model;
        }
        if !self.specs.is_empty() {
            config.specs = self.specs;
        }
        if let Some(h) = self.h {
            config.h = h;
        }
        if self.steps.is_some() {
            config.steps = self.steps;
        }
        if self.horizon.is_some() {
            config.horizon = self.horizon;
        }
        if !self.step_sizes.is_empty() {
            config.step_sizes = self.step_sizes;
        }
        if let Some(metric) = self.metric {
            config.metric = match metric.as_str() {
                "global" => ErrorMetric::Global,
                "return" => ErrorMetric::Return,
                other => {
                    return Err(Error::Config(format!(
                        "unknown metric '{other}' (expected 'global' or 'return')"
                    )))
                }
            };
        }
        if let Some(tol) = self.tol {
            config.tol = tol;
        }
        if self.out.is_some() {
            config.out = self.out;
        }
        if let Some(format) = self.format {
            config.format = match format.as_str() {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                other => {
                    return Err(Error::Config(format!(
                        "unknown format '{other}' (expected 'csv' or 'json')"
                    )))
                }
            };
        }
        if self.allow_s_gt_r {
            config.allow_s_gt_r = true;
        }
        if !self.q0.is_empty() {
            config.q0 = self.q0;
        }
        if !self.p0.is_empty() {
            config.p0 = self.p0;
        }
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(omega) = self.omega {
            config.omega = omega;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(scheme) = self.scheme {
            config.scheme = scheme;
        }
        if let Some(x) = self.grid_max {
            config.grid_max = x;
        }
        if let Some(x) = self.grid_step {
            config.grid_step = x;
        }
        if self.include_rk4 {
            config.include_rk4 = true;
        }
        if let Some(h) = self.rk4_h {
            config.rk4_h = h;
        }
        if let Some(reps) = self.reps {
            config.repetitions = reps;
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (command, args) = Cli::parse().command.split();
    let result = args
        .into_config()
        .and_then(|config| cli::run(command, &config));
    match result {
        Ok(files) => {
            for file in files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            report_error(&err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

/// Numerical failures are reported as a JSON record so callers can locate
/// the failing step programmatically.
fn report_error(err: &Error) {
    let record = match err {
        Error::StepFailed { step, source, .. } => serde_json::json!({
            "error": "step_failed",
            "step": step,
            "cause": source.to_string(),
        }),
        Error::NonConvergence { report } => serde_json::json!({
            "error": "non_convergence",
            "iterations": report.iterations,
            "final_residual": report.final_residual,
        }),
        Error::Singularity(msg) => serde_json::json!({
            "error": "singularity",
            "detail": msg,
        }),
        other => serde_json::json!({
            "error": "invalid",
            "detail": other.to_string(),
        }),
    };
    eprintln!("{record}");
}
