//! Discrete Lagrangian assembly, discrete Euler-Lagrange residuals, discrete
//! Legendre transforms, and trajectory stepping.
//!
//! A step of `PsNrQu` carries `s + 1` stage configurations
//! `(q_k^0, ..., q_k^s)`; the discrete Lagrangian is the quadrature
//! approximation of the action over one macro step,
//!
//! ```text
//! L_d(q_k) = h sum_i b_i L(q_d(c_i h), qdot_d(c_i h)),
//! ```
//!
//! with `q_d` the degree-s interpolant through the stages. Stationarity in
//! the interior stages gives the internal stage equations; stationarity at
//! the shared endpoints couples neighbouring steps and defines the discrete
//! momenta via the discrete Legendre transforms.

use crate::basis::{make_basis_tables, BasisTables, ControlPoints, ControlScheme};
use crate::models::{LagrangianSystem, PhasePoint};
use crate::quadrature::{QuadratureKind, QuadratureRule};
use crate::solver::{newton_solve, SolveReport, SolverSettings};
use crate::Error;

/// One fully assembled integrator `PsNrQu`: polynomial degree, quadrature
/// rule, control points, precomputed basis tables and solver settings.
#[derive(Clone, Debug)]
pub struct IntegratorSpec {
    s: usize,
    rule: QuadratureRule,
    points: ControlPoints,
    tables: BasisTables,
    /// Newton parameters used for the stage systems. Freely adjustable.
    pub solver: SolverSettings,
    well_posed: bool,
    name: String,
}

impl IntegratorSpec {
    /// Build a `PsNrQu` integrator with the given polynomial degree,
    /// quadrature rule and control-point scheme.
    ///
    /// Rejects `s > r`; pass through [`IntegratorSpec::with_control_points`]
    /// with the override to experiment outside that range.
    pub fn new(s: usize, rule: QuadratureRule, scheme: ControlScheme) -> Result<Self, Error> {
        let points = ControlPoints::new(s, scheme)?;
        Self::with_control_points(s, rule, points, false)
    }

    /// Shorthand: build from `(s, r, kind)` with equispaced control points
    /// and default solver settings.
    pub fn from_srk(s: usize, r: usize, kind: QuadratureKind) -> Result<Self, Error> {
        Self::new(s, QuadratureRule::new(kind, r)?, ControlScheme::Equispaced)
    }

    /// Fully explicit constructor. `allow_s_gt_r` lifts the `s <= r`
    /// validation; the resulting scheme has no uniqueness guarantee for its
    /// stage equations.
    pub fn with_control_points(
        s: usize,
        rule: QuadratureRule,
        points: ControlPoints,
        allow_s_gt_r: bool,
    ) -> Result<Self, Error> {
        if points.degree() != s {
            return Err(Error::Validation(format!(
                "control points have degree {}, expected {s}",
                points.degree()
            )));
        }
        let r = rule.len();
        if s > r && !allow_s_gt_r {
            return Err(Error::Validation(format!(
                "polynomial degree s = {s} exceeds quadrature point count r = {r}; \
                 pass the override to force this combination"
            )));
        }
        // A quadrature order below 2s - 1 no longer guarantees a unique
        // solution of the internal stage equations; keep the spec usable but
        // flag it.
        let well_posed = rule.order() + 1 >= 2 * s;
        let name = format!("P{s}N{r}Q{}{}", rule.order(), rule.kind().tag());
        if !well_posed {
            log::warn!(
                "{name}: quadrature order {} is below 2s - 1 = {}; \
                 stage equations may not determine the step uniquely",
                rule.order(),
                2 * s - 1
            );
        }
        let tables = make_basis_tables(&points, &rule);
        Ok(IntegratorSpec {
            s,
            rule,
            points,
            tables,
            solver: SolverSettings::default(),
            well_posed,
            name,
        })
    }

    /// Canonical name, e.g. `P2N3Q4Lob`.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Polynomial degree `s`.
    pub fn s(&self) -> usize {
        self.s
    }

    /// Quadrature point count `r`.
    pub fn r(&self) -> usize {
        self.rule.len()
    }

    /// Quadrature order `u`.
    pub fn order_u(&self) -> usize {
        self.rule.order()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn control_points(&self) -> &ControlPoints {
        &self.points
    }

    pub fn tables(&self) -> &BasisTables {
        &self.tables
    }

    /// False when the quadrature order is below `2s - 1` (no uniqueness
    /// guarantee for the internal stage equations).
    pub fn is_well_posed(&self) -> bool {
        self.well_posed
    }

    /// True when both the quadrature rule and the control points are
    /// symmetric, which makes the scheme time-reversible. Generated rules
    /// are always symmetric; only explicit control-point overrides break it.
    pub fn is_symmetric(&self) -> bool {
        self.points.is_symmetric()
    }
}

/// The stage configurations of one macro step, flattened stage-major:
/// `[q^0_1..q^0_n, q^1_1..q^1_n, ...]`.
#[derive(Clone, Debug)]
pub struct Segment {
    /// Step index within its trajectory.
    pub k: usize,
    /// Step size.
    pub h: f64,
    stages: Vec<f64>,
    s: usize,
    dim: usize,
}

impl Segment {
    /// Assemble a segment from per-stage configuration vectors.
    pub fn from_stages(k: usize, h: f64, stages: &[Vec<f64>]) -> Result<Self, Error> {
        if stages.len() < 2 {
            return Err(Error::InvalidArgument(
                "a segment needs at least two stages".into(),
            ));
        }
        let dim = stages[0].len();
        if stages.iter().any(|q| q.len() != dim) {
            return Err(Error::InvalidArgument(
                "stage configurations have inconsistent dimensions".into(),
            ));
        }
        Ok(Segment {
            k,
            h,
            stages: stages.iter().flatten().copied().collect(),
            s: stages.len() - 1,
            dim,
        })
    }

    fn from_flat(k: usize, h: f64, stages: Vec<f64>, s: usize, dim: usize) -> Self {
        debug_assert_eq!(stages.len(), (s + 1) * dim);
        Segment {
            k,
            h,
            stages,
            s,
            dim,
        }
    }

    /// Polynomial degree (stage count minus one).
    pub fn degree(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stage configuration `q_k^nu`.
    pub fn stage(&self, nu: usize) -> &[f64] {
        &self.stages[nu * self.dim..(nu + 1) * self.dim]
    }

    /// Left endpoint `q_k^0`.
    pub fn start(&self) -> &[f64] {
        self.stage(0)
    }

    /// Right endpoint `q_k^s`.
    pub fn end(&self) -> &[f64] {
        self.stage(self.s)
    }
}

/// A computed discrete trajectory: the phase points `(q_k^0, p_k^0)` for
/// `k = 0..=N` plus the retained segments and per-step solver statistics.
#[derive(Debug)]
pub struct Trajectory {
    pub spec_name: String,
    pub h: f64,
    pub segments: Vec<Segment>,
    pub phase_points: Vec<PhasePoint>,
    pub reports: Vec<SolveReport>,
}

impl Trajectory {
    /// Number of macro steps.
    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    /// Time of the k-th phase point.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }
}

/// Interpolant values at quadrature node `i` of a segment: configuration and
/// velocity.
fn stage_values_at_node(
    spec: &IntegratorSpec,
    segment: &Segment,
    i: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = segment.dim;
    let l = &spec.tables.l[i];
    let ldot = &spec.tables.ldot[i];
    let mut q = vec![0.0; n];
    let mut qdot = vec![0.0; n];
    for nu in 0..=segment.s {
        let stage = segment.stage(nu);
        for j in 0..n {
            q[j] += stage[j] * l[nu];
            qdot[j] += stage[j] * ldot[nu];
        }
    }
    for x in &mut qdot {
        *x /= segment.h;
    }
    (q, qdot)
}

fn check_shapes(spec: &IntegratorSpec, system: &LagrangianSystem, segment: &Segment) -> Result<(), Error> {
    if segment.degree() != spec.s {
        return Err(Error::InvalidArgument(format!(
            "segment has degree {}, spec expects {}",
            segment.degree(),
            spec.s
        )));
    }
    if segment.dim() != system.dim() {
        return Err(Error::InvalidArgument(format!(
            "segment dimension {} does not match system dimension {}",
            segment.dim(),
            system.dim()
        )));
    }
    if segment.h == 0.0 || !segment.h.is_finite() {
        return Err(Error::InvalidArgument(
            "step size must be finite and nonzero".into(),
        ));
    }
    Ok(())
}

/// The discrete Lagrangian `L_d(q_k) = h sum_i b_i L(q_d(c_i h), qdot_d(c_i h))`.
pub fn discrete_lagrangian(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<f64, Error> {
    check_shapes(spec, system, segment)?;
    let mut sum = 0.0;
    for (i, &b) in spec.rule.weights().iter().enumerate() {
        let (q, qdot) = stage_values_at_node(spec, segment, i);
        sum += b * system.lagrangian(&q, &qdot)?;
    }
    Ok(segment.h * sum)
}

/// All stage derivatives of the discrete Lagrangian: entry `nu` holds
/// `D_{nu+1} L_d`, the gradient with respect to stage `q_k^nu`,
///
/// ```text
/// D_{nu+1} L_d = h sum_i b_i ( dL/dq(c_i) l_nu(c_i)
///                              + dL/dqdot(c_i) l'_nu(c_i) / h ).
/// ```
pub fn del_gradient(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<Vec<Vec<f64>>, Error> {
    check_shapes(spec, system, segment)?;
    let n = segment.dim;
    let h = segment.h;
    let mut grad = vec![vec![0.0; n]; spec.s + 1];
    for (i, &b) in spec.rule.weights().iter().enumerate() {
        let (q, qdot) = stage_values_at_node(spec, segment, i);
        let lq = system.grad_q(&q, &qdot)?;
        let lqdot = system.grad_qdot(&q, &qdot)?;
        let l = &spec.tables.l[i];
        let ldot = &spec.tables.ldot[i];
        for nu in 0..=spec.s {
            let g = &mut grad[nu];
            for j in 0..n {
                g[j] += h * b * lq[j] * l[nu] + b * lqdot[j] * ldot[nu];
            }
        }
    }
    Ok(grad)
}

/// The internal stage equations `D_i L_d = 0, i = 2..s`: the returned
/// vectors vanish at a solution. Empty for `s = 1`.
pub fn interior_residuals(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<Vec<Vec<f64>>, Error> {
    let mut grad = del_gradient(spec, system, segment)?;
    grad.pop();
    grad.remove(0);
    Ok(grad)
}

/// Left discrete Legendre transform: `(q_k^0, p_k^{0-})` with
/// `p_k^{0-} = -D_1 L_d`.
///
/// Logs a warning when the segment's interior residuals exceed the solver
/// tolerance, since the transform then refers to an unconverged segment.
pub fn legendre_minus(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<PhasePoint, Error> {
    let grad = del_gradient(spec, system, segment)?;
    warn_if_unconverged(spec, system, segment)?;
    let p = grad[0].iter().map(|&g| -g).collect();
    Ok(PhasePoint::new(segment.start().to_vec(), p))
}

/// Right discrete Legendre transform: `(q_k^s, p^{0+})` with
/// `p^{0+} = D_{s+1} L_d`, the momentum handed to the next step.
pub fn legendre_plus(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<PhasePoint, Error> {
    let grad = del_gradient(spec, system, segment)?;
    warn_if_unconverged(spec, system, segment)?;
    Ok(PhasePoint::new(segment.end().to_vec(), grad[spec.s].clone()))
}

fn warn_if_unconverged(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    segment: &Segment,
) -> Result<(), Error> {
    if spec.s < 2 {
        return Ok(());
    }
    let residual = interior_residuals(spec, system, segment)?
        .iter()
        .flatten()
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    if residual > spec.solver.residual_tol {
        log::warn!(
            "{}: discrete Legendre transform of a segment whose interior residual \
             {residual:.3e} exceeds the solver tolerance",
            spec.name
        );
    }
    Ok(())
}

/// Solve the stage system `{p_target + D_1 L_d = 0} U {D_i L_d = 0, i=2..s}`
/// for the unknown stages `q^1..q^s`, with `q^0` fixed.
fn solve_stages(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    k: usize,
    q0: &[f64],
    p_target: &[f64],
    h: f64,
    guess: Vec<f64>,
) -> Result<(Segment, SolveReport), Error> {
    let n = system.dim();
    let s = spec.s;
    let assemble = |unknowns: &[f64]| -> Segment {
        let mut stages = Vec::with_capacity((s + 1) * n);
        stages.extend_from_slice(q0);
        stages.extend_from_slice(unknowns);
        Segment::from_flat(k, h, stages, s, n)
    };
    let residual = |unknowns: &[f64]| -> Result<Vec<f64>, Error> {
        let segment = assemble(unknowns);
        let grad = del_gradient(spec, system, &segment)?;
        let mut res = Vec::with_capacity(s * n);
        for j in 0..n {
            res.push(p_target[j] + grad[0][j]);
        }
        for interior in grad.iter().take(s).skip(1) {
            res.extend_from_slice(interior);
        }
        Ok(res)
    };
    let (solution, report) = newton_solve(residual, &guess, &spec.solver)?;
    Ok((assemble(&solution), report))
}

/// Solve the first segment from an initial phase point: the coupling
/// equation is replaced by the left discrete Legendre transform,
/// `p(0) = -D_1 L_d(q_0^0, ..., q_0^s)`.
pub fn initial_step(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    start: &PhasePoint,
    h: f64,
) -> Result<(Segment, SolveReport), Error> {
    if start.dim() != system.dim() {
        return Err(Error::InvalidArgument(
            "initial point dimension does not match the system".into(),
        ));
    }
    if !start.is_finite() {
        return Err(Error::InvalidArgument("initial point must be finite".into()));
    }
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(
            "step size must be finite and nonzero".into(),
        ));
    }
    // Constant extrapolation of the start configuration for all stages.
    let guess: Vec<f64> = start
        .q
        .iter()
        .cycle()
        .take(spec.s * start.dim())
        .copied()
        .collect();
    solve_stages(spec, system, 0, &start.q, &start.p, h, guess)
}

/// Advance one macro step: the new segment shares its first stage with the
/// previous segment's last stage and satisfies the discrete Euler-Lagrange
/// equations across the junction.
pub fn step(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    previous: &Segment,
) -> Result<(Segment, SolveReport), Error> {
    check_shapes(spec, system, previous)?;
    let n = system.dim();
    // p_{k+1}^{0+} from the previous segment; constant during the solve.
    let p_plus = del_gradient(spec, system, previous)?[spec.s].clone();
    let q0 = previous.end().to_vec();
    // Warm start: previous stages shifted to the new anchor.
    let mut guess = Vec::with_capacity(spec.s * n);
    for nu in 1..=spec.s {
        let stage = previous.stage(nu);
        let prev_start = previous.start();
        for j in 0..n {
            guess.push(stage[j] + q0[j] - prev_start[j]);
        }
    }
    solve_stages(spec, system, previous.k + 1, &q0, &p_plus, previous.h, guess)
}

/// One step of the discrete Hamiltonian map: `(q, p) -> (q', p')`.
pub fn hamiltonian_map(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    point: &PhasePoint,
    h: f64,
) -> Result<(PhasePoint, SolveReport), Error> {
    let (segment, report) = initial_step(spec, system, point, h)?;
    let next = legendre_plus(spec, system, &segment)?;
    Ok((next, report))
}

/// Integrate `n` macro steps of size `h` from `start`.
///
/// On a solver failure the error carries the partial trajectory and the
/// failing step index.
pub fn integrate(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    start: &PhasePoint,
    h: f64,
    n: usize,
) -> Result<Trajectory, Error> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "need at least one integration step".into(),
        ));
    }
    let mut trajectory = Trajectory {
        spec_name: spec.name.clone(),
        h,
        segments: Vec::with_capacity(n),
        phase_points: Vec::with_capacity(n + 1),
        reports: Vec::with_capacity(n),
    };
    trajectory.phase_points.push(start.clone());

    let mut record = |trajectory: &mut Trajectory,
                      segment: Segment,
                      report: SolveReport|
     -> Result<(), Error> {
        let next = legendre_plus(spec, system, &segment)?;
        trajectory.segments.push(segment);
        trajectory.phase_points.push(next);
        trajectory.reports.push(report);
        Ok(())
    };

    match initial_step(spec, system, start, h) {
        Ok((segment, report)) => record(&mut trajectory, segment, report)?,
        Err(err) => {
            return Err(Error::StepFailed {
                step: 0,
                partial: Box::new(trajectory),
                source: Box::new(err),
            })
        }
    }
    for k in 1..n {
        let previous = trajectory.segments.last().expect("at least one segment");
        match step(spec, system, previous) {
            Ok((segment, report)) => record(&mut trajectory, segment, report)?,
            Err(err) => {
                return Err(Error::StepFailed {
                    step: k,
                    partial: Box::new(trajectory),
                    source: Box::new(err),
                })
            }
        }
    }
    Ok(trajectory)
}
