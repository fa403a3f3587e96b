//! Experiment driver behind the `galvi` binary.
//!
//! A run is described by a [`RunConfig`], read from a TOML preset and/or
//! assembled from command-line flags; the commands reproduce the standard
//! experiments (trajectory dumps, step-size sweeps with fitted convergence
//! orders, linear stability scans, conservation series with an RK4
//! comparator, and runtime-versus-error tables). Series are written as CSV,
//! summaries as JSON; all output is deterministic for a given configuration
//! except wall-clock fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, conservation_series, fit_order, global_error, return_error, ConservedQuantity,
    ConvergenceReport, StabilityGrid, ORDER_FIT_FLOOR,
};
use crate::galerkin::{integrate, IntegratorSpec, Trajectory};
use crate::models::{angular_momentum, rk4_step, LagrangianSystem, PhasePoint};
use crate::quadrature::QuadratureKind;
use crate::basis::ControlScheme;
use crate::Error;

/// The default Kepler force constant: together with `q0 = (5, 0)` and
/// `p0 = (0, 17)` it produces an elliptic orbit of period 5.
pub const KEPLER_K: f64 = 1.016895192894334e3;

/// Which command a configuration drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Integrate,
    Converge,
    Stability,
    Conserve,
    Benchmark,
}

/// Error metric for convergence sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Max-norm distance to the exact flow over the whole trajectory.
    Global,
    /// Max-norm distance between the final and the initial phase point.
    Return,
}

/// Output format for series files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A declarative run description. Every field has a default so presets can
/// stay minimal; command-line flags override file values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// `"harmonic"` or `"kepler"`.
    pub model: String,
    /// Harmonic dimension (1 or 2).
    pub dim: usize,
    /// Harmonic frequency.
    pub omega: f64,
    /// Kepler force constant.
    pub k: f64,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    /// Integrators, e.g. `["s2r3lobatto", "s3r3gauss"]`.
    pub specs: Vec<String>,
    /// Step size for single-step-size commands.
    pub h: f64,
    /// Step count; when absent, derived from `horizon`.
    pub steps: Option<usize>,
    /// Time horizon `T` (used when `steps` is absent: `N = round(T/h)`).
    pub horizon: Option<f64>,
    /// Step sizes for sweep commands.
    pub step_sizes: Vec<f64>,
    pub metric: ErrorMetric,
    /// Newton residual tolerance.
    pub tol: f64,
    /// Control-point scheme: `"equispaced"` or `"chebyshev"`.
    pub scheme: String,
    pub allow_s_gt_r: bool,
    /// Output path prefix.
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Stability grid: `(0, grid_max]` with spacing `grid_step`.
    pub grid_max: f64,
    pub grid_step: f64,
    /// Include the non-symplectic RK4 comparator in conservation runs.
    pub include_rk4: bool,
    pub rk4_h: f64,
    /// Timing repetitions per (spec, h) cell in benchmarks.
    pub repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            model: "harmonic".into(),
            dim: 2,
            omega: 1.0,
            k: KEPLER_K,
            q0: vec![],
            p0: vec![],
            specs: vec![],
            h: 0.1,
            steps: None,
            horizon: None,
            step_sizes: vec![1.0, 0.5, 0.25, 0.125, 0.1, 0.0625, 0.03125],
            metric: ErrorMetric::Global,
            tol: 1e-12,
            scheme: "equispaced".into(),
            allow_s_gt_r: false,
            out: None,
            format: OutputFormat::Csv,
            grid_max: 5.0,
            grid_step: 0.01,
            include_rk4: false,
            rk4_h: 0.015625,
            repetitions: 5,
        }
    }
}

impl RunConfig {
    /// Parse a TOML preset.
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(format!("preset parse error: {e}")))
    }

    pub fn from_preset_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read preset {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Build the model.
    pub fn system(&self) -> Result<LagrangianSystem, Error> {
        match self.model.as_str() {
            "harmonic" => LagrangianSystem::harmonic_oscillator(self.dim, self.omega),
            "kepler" => LagrangianSystem::kepler(self.k),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected 'harmonic' or 'kepler')"
            ))),
        }
    }

    /// The initial phase point, defaulting to a unit-amplitude state for the
    /// harmonic oscillator and the standard elliptic orbit for Kepler.
    pub fn initial_point(&self, system: &LagrangianSystem) -> Result<PhasePoint, Error> {
        let n = system.dim();
        let (q0, p0) = if self.q0.is_empty() && self.p0.is_empty() {
            match self.model.as_str() {
                "kepler" => (vec![5.0, 0.0], vec![0.0, 17.0]),
                _ => {
                    let mut q = vec![0.0; n];
                    let mut p = vec![0.0; n];
                    q[0] = 1.0;
                    p[n - 1] = 1.0;
                    (q, p)
                }
            }
        } else {
            (self.q0.clone(), self.p0.clone())
        };
        if q0.len() != n || p0.len() != n {
            return Err(Error::Validation(format!(
                "initial data must have dimension {n}"
            )));
        }
        Ok(PhasePoint::new(q0, p0))
    }

    fn control_scheme(&self) -> Result<ControlScheme, Error> {
        match self.scheme.as_str() {
            "equispaced" => Ok(ControlScheme::Equispaced),
            "chebyshev" => Ok(ControlScheme::ChebyshevLobatto),
            other => Err(Error::Config(format!(
                "unknown control-point scheme '{other}'"
            ))),
        }
    }

    /// Build every integrator named in `specs`. Validation failures surface
    /// here, at load time.
    pub fn integrator_specs(&self) -> Result<Vec<IntegratorSpec>, Error> {
        let scheme = self.control_scheme()?;
        self.specs
            .iter()
            .map(|tag| {
                let (s, r, kind) = parse_spec_tag(tag)?;
                let rule = crate::quadrature::QuadratureRule::new(kind, r)?;
                let points = crate::basis::ControlPoints::new(s, scheme)?;
                let mut spec =
                    IntegratorSpec::with_control_points(s, rule, points, self.allow_s_gt_r)?;
                spec.solver.residual_tol = self.tol;
                Ok(spec)
            })
            .collect()
    }

    fn step_count(&self, h: f64) -> Result<usize, Error> {
        let n = match (self.steps, self.horizon) {
            (Some(n), _) => n,
            (None, Some(t)) => (t / h).round() as usize,
            (None, None) => {
                return Err(Error::Validation(
                    "either a step count or a time horizon is required".into(),
                ))
            }
        };
        if n == 0 {
            return Err(Error::Validation(
                "the run must cover at least one step".into(),
            ));
        }
        Ok(n)
    }

    fn out_prefix(&self, command: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("out/{command}")))
    }
}

/// Parse an integrator tag of the form `s<degree>r<points><kind>`,
/// e.g. `s3r4lobatto` or `s2r2gauss`.
pub fn parse_spec_tag(tag: &str) -> Result<(usize, usize, QuadratureKind), Error> {
    let lower = tag.trim().to_ascii_lowercase();
    let rest = lower
        .strip_prefix('s')
        .ok_or_else(|| Error::Config(format!("spec '{tag}' must start with 's<degree>'")))?;
    let r_pos = rest
        .find('r')
        .ok_or_else(|| Error::Config(format!("spec '{tag}' is missing 'r<points>'")))?;
    let s: usize = rest[..r_pos]
        .parse()
        .map_err(|_| Error::Config(format!("spec '{tag}': bad degree")))?;
    let rest = &rest[r_pos + 1..];
    let kind_pos = rest
        .find(|c: char| !c.is_ascii_digit())
        .ok_or_else(|| Error::Config(format!("spec '{tag}' is missing the quadrature kind")))?;
    let r: usize = rest[..kind_pos]
        .parse()
        .map_err(|_| Error::Config(format!("spec '{tag}': bad point count")))?;
    let kind = match &rest[kind_pos..] {
        "gauss" | "gau" => QuadratureKind::Gauss,
        "lobatto" | "lob" => QuadratureKind::Lobatto,
        other => {
            return Err(Error::Config(format!(
                "spec '{tag}': unknown quadrature kind '{other}'"
            )))
        }
    };
    Ok((s, r, kind))
}

/// Resolve a preset argument: a path is used as-is, a bare name is looked up
/// in `$GALVI_PRESETS`, `./presets/` and the repository presets directory.
pub fn resolve_preset(name: &str) -> Result<PathBuf, Error> {
    let direct = PathBuf::from(name);
    if name.contains('/') || name.ends_with(".toml") {
        if direct.exists() {
            return Ok(direct);
        }
        return Err(Error::Config(format!("preset file '{name}' not found")));
    }
    let mut candidates = Vec::new();
    if let Ok(dir) = std::env::var("GALVI_PRESETS") {
        candidates.push(PathBuf::from(dir).join(format!("{name}.toml")));
    }
    candidates.push(PathBuf::from("presets").join(format!("{name}.toml")));
    candidates.push(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../presets")
            .join(format!("{name}.toml")),
    );
    for candidate in &candidates {
        if candidate.exists() {
            return Ok(candidate.clone());
        }
    }
    Err(Error::Config(format!(
        "preset '{name}' not found (searched {})",
        candidates
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

fn write_output(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Files produced by a command, in the order they were written.
pub type OutputFiles = Vec<PathBuf>;

/// Integrate one spec and dump the trajectory: per macro step the time, the
/// phase point, the energy, the angular momentum (planar systems) and the
/// Newton iteration count.
pub fn cmd_integrate(config: &RunConfig) -> Result<OutputFiles, Error> {
    let system = config.system()?;
    let specs = config.integrator_specs()?;
    if specs.len() != 1 {
        return Err(Error::Validation(
            "integrate expects exactly one spec".into(),
        ));
    }
    let spec = &specs[0];
    let start = config.initial_point(&system)?;
    let n = config.step_count(config.h)?;
    let trajectory = integrate(spec, &system, &start, config.h, n)?;

    let prefix = config.out_prefix("integrate");
    let path = match config.format {
        OutputFormat::Csv => {
            let csv = trajectory_csv(&trajectory, &system)?;
            let path = prefix.with_extension("csv");
            write_output(&path, &csv)?;
            path
        }
        OutputFormat::Json => {
            let json = trajectory_json(&trajectory, &system)?;
            let path = prefix.with_extension("json");
            write_output(&path, &json)?;
            path
        }
    };
    Ok(vec![path])
}

fn trajectory_rows(
    trajectory: &Trajectory,
    system: &LagrangianSystem,
) -> Result<Vec<(f64, Vec<f64>, Vec<f64>, f64, Option<f64>, usize)>, Error> {
    let planar = system.dim() == 2;
    trajectory
        .phase_points
        .iter()
        .enumerate()
        .map(|(k, point)| {
            let energy = system.energy(&point.q, &point.p)?;
            let momentum = planar.then(|| angular_momentum(point)).transpose()?;
            let iterations = if k == 0 {
                0
            } else {
                trajectory.reports[k - 1].iterations
            };
            Ok((
                trajectory.time(k),
                point.q.clone(),
                point.p.clone(),
                energy,
                momentum,
                iterations,
            ))
        })
        .collect()
}

fn trajectory_csv(trajectory: &Trajectory, system: &LagrangianSystem) -> Result<String, Error> {
    let n = system.dim();
    let mut out = String::from("t");
    for j in 1..=n {
        write!(out, ",q_{j}").unwrap();
    }
    for j in 1..=n {
        write!(out, ",p_{j}").unwrap();
    }
    out.push_str(",energy");
    if n == 2 {
        out.push_str(",angular_momentum");
    }
    out.push_str(",newton_iterations\n");
    for (t, q, p, energy, momentum, iterations) in trajectory_rows(trajectory, system)? {
        out.push_str(&fmt_float(t));
        for x in q.iter().chain(&p) {
            out.push(',');
            out.push_str(&fmt_float(*x));
        }
        out.push(',');
        out.push_str(&fmt_float(energy));
        if let Some(m) = momentum {
            out.push(',');
            out.push_str(&fmt_float(m));
        }
        writeln!(out, ",{iterations}").unwrap();
    }
    Ok(out)
}

fn trajectory_json(trajectory: &Trajectory, system: &LagrangianSystem) -> Result<String, Error> {
    let rows: Vec<serde_json::Value> = trajectory_rows(trajectory, system)?
        .into_iter()
        .map(|(t, q, p, energy, momentum, iterations)| {
            let mut row = serde_json::json!({
                "t": t,
                "q": q,
                "p": p,
                "energy": energy,
                "newton_iterations": iterations,
            });
            if let Some(m) = momentum {
                row["angular_momentum"] = serde_json::json!(m);
            }
            row
        })
        .collect();
    let doc = serde_json::json!({
        "spec": trajectory.spec_name,
        "h": trajectory.h,
        "rows": rows,
    });
    Ok(serde_json::to_string_pretty(&doc).unwrap())
}

/// Outcome of one spec's step-size sweep inside [`cmd_converge`].
#[derive(Debug, Serialize)]
pub struct SweepOutcome {
    pub spec_name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ConvergenceReport>,
    /// Present when the sweep failed; the other specs continue.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Run the step-size sweep for every spec and fit convergence orders.
///
/// Writes a JSON summary (fitted orders per spec) and a CSV error table.
pub fn cmd_converge(config: &RunConfig) -> Result<OutputFiles, Error> {
    let system = config.system()?;
    let specs = config.integrator_specs()?;
    if specs.is_empty() {
        return Err(Error::Validation("converge needs at least one spec".into()));
    }
    if config.step_sizes.is_empty() {
        return Err(Error::Validation("converge needs step sizes".into()));
    }
    if config.metric == ErrorMetric::Global && !system.has_exact_flow() {
        return Err(Error::Validation(
            "the global error metric needs a model with an exact reference; \
             use the return metric instead"
                .into(),
        ));
    }
    let start = config.initial_point(&system)?;

    let outcomes: Vec<SweepOutcome> = specs
        .par_iter()
        .map(|spec| match sweep_spec(config, spec, &system, &start) {
            Ok(report) => SweepOutcome {
                spec_name: spec.name().to_string(),
                report: Some(report),
                failure: None,
            },
            Err(err) => SweepOutcome {
                spec_name: spec.name().to_string(),
                report: None,
                failure: Some(err.to_string()),
            },
        })
        .collect();

    let prefix = config.out_prefix("converge");
    let json_path = prefix.with_extension("json");
    let doc = serde_json::json!({
        "model": config.model,
        "metric": config.metric,
        "step_sizes": config.step_sizes,
        "order_fit_floor": ORDER_FIT_FLOOR,
        "results": outcomes,
    });
    write_output(&json_path, &serde_json::to_string_pretty(&doc).unwrap())?;

    let mut csv = String::from("spec,h,err_q,err_p\n");
    for outcome in &outcomes {
        if let Some(report) = &outcome.report {
            for (i, &h) in report.step_sizes.iter().enumerate() {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    report.spec_name,
                    fmt_float(h),
                    fmt_float(report.errors_q[i]),
                    fmt_float(report.errors_p[i])
                )
                .unwrap();
            }
        }
    }
    let csv_path = prefix.with_extension("csv");
    write_output(&csv_path, &csv)?;
    Ok(vec![json_path, csv_path])
}

fn sweep_spec(
    config: &RunConfig,
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    start: &PhasePoint,
) -> Result<ConvergenceReport, Error> {
    let mut errors_q = Vec::with_capacity(config.step_sizes.len());
    let mut errors_p = Vec::with_capacity(config.step_sizes.len());
    for &h in &config.step_sizes {
        let n = config.step_count(h)?;
        let trajectory = integrate(spec, system, start, h, n)?;
        let (eq, ep) = match config.metric {
            ErrorMetric::Global => {
                global_error(&trajectory, |t| system.exact_flow(start, t).unwrap())
            }
            ErrorMetric::Return => return_error(&trajectory, start),
        };
        errors_q.push(eq);
        errors_p.push(ep);
    }
    Ok(ConvergenceReport::new(
        spec.name().to_string(),
        config.step_sizes.clone(),
        errors_q,
        errors_p,
    ))
}

/// Scan the linear stability grid for every spec; one CSV of
/// `(h_omega, max_modulus)` per spec plus a JSON summary with the detected
/// boundaries.
pub fn cmd_stability(config: &RunConfig) -> Result<OutputFiles, Error> {
    let specs = config.integrator_specs()?;
    if specs.is_empty() {
        return Err(Error::Validation(
            "stability needs at least one spec".into(),
        ));
    }
    if !(config.grid_step > 0.0) || !(config.grid_max > config.grid_step) {
        return Err(Error::Validation("bad stability grid".into()));
    }
    let count = (config.grid_max / config.grid_step).round() as usize;
    let grid: Vec<f64> = (1..=count).map(|i| i as f64 * config.grid_step).collect();

    let prefix = config.out_prefix("stability");
    let mut files = Vec::new();
    let mut scans: Vec<StabilityGrid> = Vec::new();
    for spec in &specs {
        let scan = analysis::stability_scan(spec, &grid)?;
        let mut csv = String::from("h_omega,max_modulus\n");
        for (x, m) in scan.h_omega.iter().zip(&scan.max_modulus) {
            writeln!(csv, "{},{}", fmt_float(*x), fmt_float(*m)).unwrap();
        }
        let path = prefix.with_file_name(format!(
            "{}_{}.csv",
            prefix.file_name().unwrap_or_default().to_string_lossy(),
            spec.name()
        ));
        write_output(&path, &csv)?;
        files.push(path);
        scans.push(scan);
    }
    let summary: Vec<serde_json::Value> = scans
        .iter()
        .map(|scan| {
            serde_json::json!({
                "spec": scan.spec_name,
                "boundary": scan.boundary,
            })
        })
        .collect();
    let json_path = prefix.with_extension("json");
    write_output(
        &json_path,
        &serde_json::to_string_pretty(&serde_json::json!({
            "grid_max": config.grid_max,
            "grid_step": config.grid_step,
            "boundaries": summary,
        }))
        .unwrap(),
    )?;
    files.push(json_path);
    Ok(files)
}

/// Conservation series per integrator (energy and, for planar systems,
/// angular momentum), with an optional RK4 comparator series.
pub fn cmd_conserve(config: &RunConfig) -> Result<OutputFiles, Error> {
    let system = config.system()?;
    let specs = config.integrator_specs()?;
    if specs.is_empty() {
        return Err(Error::Validation("conserve needs at least one spec".into()));
    }
    let start = config.initial_point(&system)?;
    let planar = system.dim() == 2;
    let prefix = config.out_prefix("conserve");
    let mut files = Vec::new();

    for spec in &specs {
        let n = config.step_count(config.h)?;
        let trajectory = integrate(spec, &system, &start, config.h, n)?;
        let energy = conservation_series(&trajectory, &system, ConservedQuantity::Energy)?;
        let momentum = planar
            .then(|| conservation_series(&trajectory, &system, ConservedQuantity::AngularMomentum))
            .transpose()?;
        let mut csv = String::from(if planar {
            "t,energy_deviation,angular_momentum_deviation\n"
        } else {
            "t,energy_deviation\n"
        });
        for k in 0..trajectory.phase_points.len() {
            write!(csv, "{},{}", fmt_float(trajectory.time(k)), fmt_float(energy[k])).unwrap();
            if let Some(momentum) = &momentum {
                write!(csv, ",{}", fmt_float(momentum[k])).unwrap();
            }
            csv.push('\n');
        }
        let path = prefix.with_file_name(format!(
            "{}_{}.csv",
            prefix.file_name().unwrap_or_default().to_string_lossy(),
            spec.name()
        ));
        write_output(&path, &csv)?;
        files.push(path);
    }

    if config.include_rk4 {
        let h = config.rk4_h;
        let total_time = config
            .horizon
            .unwrap_or(config.h * config.step_count(config.h)? as f64);
        let n = (total_time / h).round() as usize;
        let e0 = system.energy(&start.q, &start.p)?;
        let i0 = planar.then(|| angular_momentum(&start)).transpose()?;
        let mut point = start.clone();
        let mut csv = String::from(if planar {
            "t,energy_deviation,angular_momentum_deviation\n"
        } else {
            "t,energy_deviation\n"
        });
        for k in 0..=n {
            let e = system.energy(&point.q, &point.p)?;
            write!(
                csv,
                "{},{}",
                fmt_float(k as f64 * h),
                fmt_float((e - e0).abs())
            )
            .unwrap();
            if let Some(i0) = i0 {
                write!(csv, ",{}", fmt_float((angular_momentum(&point)? - i0).abs())).unwrap();
            }
            csv.push('\n');
            if k < n {
                point = rk4_step(&system, &point, h)?;
            }
        }
        let path = prefix.with_file_name(format!(
            "{}_rk4.csv",
            prefix.file_name().unwrap_or_default().to_string_lossy()
        ));
        write_output(&path, &csv)?;
        files.push(path);
    }
    Ok(files)
}

/// One benchmark cell: median wall time over the configured repetitions and
/// the global errors of the run.
#[derive(Debug, Serialize)]
pub struct BenchmarkRow {
    pub spec_name: String,
    pub h: f64,
    pub median_seconds: f64,
    pub err_q: f64,
    pub err_p: f64,
}

/// Runtime-versus-error study on the harmonic oscillator: every (spec, h)
/// cell is integrated `repetitions` times and the median wall time recorded
/// together with the global errors. Timing excludes setup; runs are
/// sequential so the medians are comparable.
pub fn cmd_benchmark(config: &RunConfig) -> Result<OutputFiles, Error> {
    let system = config.system()?;
    if !system.has_exact_flow() {
        return Err(Error::Validation(
            "benchmark needs a model with an exact reference".into(),
        ));
    }
    let specs = config.integrator_specs()?;
    if specs.is_empty() {
        return Err(Error::Validation(
            "benchmark needs at least one spec".into(),
        ));
    }
    if config.step_sizes.is_empty() {
        return Err(Error::Validation("benchmark needs step sizes".into()));
    }
    let start = config.initial_point(&system)?;
    let reps = config.repetitions.max(1);

    let mut rows = Vec::new();
    for spec in &specs {
        for &h in &config.step_sizes {
            let n = config.step_count(h)?;
            let mut times = Vec::with_capacity(reps);
            let mut last = None;
            for _ in 0..reps {
                let clock = Instant::now();
                let trajectory = integrate(spec, &system, &start, h, n)?;
                times.push(clock.elapsed().as_secs_f64());
                last = Some(trajectory);
            }
            times.sort_by(f64::total_cmp);
            let trajectory = last.expect("at least one repetition");
            let (err_q, err_p) =
                global_error(&trajectory, |t| system.exact_flow(&start, t).unwrap());
            rows.push(BenchmarkRow {
                spec_name: spec.name().to_string(),
                h,
                median_seconds: times[times.len() / 2],
                err_q,
                err_p,
            });
        }
    }

    let prefix = config.out_prefix("benchmark");
    let mut csv = String::from("spec,h,median_seconds,err_q,err_p\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.spec_name,
            fmt_float(row.h),
            fmt_float(row.median_seconds),
            fmt_float(row.err_q),
            fmt_float(row.err_p)
        )
        .unwrap();
    }
    let csv_path = prefix.with_extension("csv");
    write_output(&csv_path, &csv)?;
    Ok(vec![csv_path])
}

/// Dispatch a configuration to its command.
pub fn run(command: Command, config: &RunConfig) -> Result<OutputFiles, Error> {
    match command {
        Command::Integrate => cmd_integrate(config),
        Command::Converge => cmd_converge(config),
        Command::Stability => cmd_stability(config),
        Command::Conserve => cmd_conserve(config),
        Command::Benchmark => cmd_benchmark(config),
    }
}

/// A compact order-matrix view of converge outcomes, handy for comparing a
/// family of integrators: one row per spec with the fitted orders.
pub fn order_matrix(outcomes: &[SweepOutcome]) -> Vec<(String, Option<f64>, Option<f64>)> {
    outcomes
        .iter()
        .map(|o| {
            let orders = o.report.as_ref().map(|r| {
                (
                    r.fitted_order_q.reliable.then_some(r.fitted_order_q.order),
                    r.fitted_order_p.reliable.then_some(r.fitted_order_p.order),
                )
            });
            match orders {
                Some((q, p)) => (o.spec_name.clone(), q, p),
                None => (o.spec_name.clone(), None, None),
            }
        })
        .collect()
}

#[allow(unused_imports)]
use crate::analysis::OrderFit; // referenced by serde output shapes
