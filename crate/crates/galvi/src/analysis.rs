//! Convergence-order estimation, conservation diagnostics, reversibility
//! defect, and linear stability.
//!
//! The linear stability analysis applies one step of the scheme to the
//! scalar harmonic oscillator in the scaled coordinates `(p, w q)`, where the
//! discrete Hamiltonian map is an exact 2x2 linear map `M` depending on `h`
//! and `w` only through the product `x = h w`. The stage systems are linear
//! and solved directly (no Newton iteration), keeping the assembled map
//! accurate to rounding so that orthogonality and determinant checks are
//! meaningful at the 1e-10 level.

use nalgebra::{DMatrix, DVector};

use crate::galerkin::{hamiltonian_map, IntegratorSpec, Trajectory};
use crate::models::{angular_momentum, LagrangianSystem, PhasePoint};
use crate::Error;

/// Default noise floor for order fits: solver and rounding noise keep
/// errors from decreasing much below this level, and fitting through the
/// floor corrupts the slope.
pub const ORDER_FIT_FLOOR: f64 = 1e-10;

/// Phase-space step of the central finite differences used for the
/// symplecticity check.
pub const SYMPLECTICITY_FD_STEP: f64 = 1e-6;

/// Instability threshold on the eigenvalue modulus: inside the stability
/// region the eigenvalues sit exactly on the unit circle, so a strict
/// `<= 1` test would be numerically fragile.
pub const STABILITY_MODULUS_TOL: f64 = 1e-12;

/// Result of a log-log least-squares order fit.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct OrderFit {
    /// Fitted slope of `log(error)` versus `log(h)`.
    pub order: f64,
    /// Number of points above the noise floor that entered the fit.
    pub points_used: usize,
    /// False when fewer than three points were usable or the slope shows no
    /// convergence.
    pub reliable: bool,
}

/// Per-integrator convergence study over a step-size sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConvergenceReport {
    pub spec_name: String,
    pub step_sizes: Vec<f64>,
    pub errors_q: Vec<f64>,
    pub errors_p: Vec<f64>,
    pub fitted_order_q: OrderFit,
    pub fitted_order_p: OrderFit,
}

impl ConvergenceReport {
    pub fn new(
        spec_name: String,
        step_sizes: Vec<f64>,
        errors_q: Vec<f64>,
        errors_p: Vec<f64>,
    ) -> Self {
        let fitted_order_q = fit_order(&step_sizes, &errors_q, ORDER_FIT_FLOOR);
        let fitted_order_p = fit_order(&step_sizes, &errors_p, ORDER_FIT_FLOOR);
        ConvergenceReport {
            spec_name,
            step_sizes,
            errors_q,
            errors_p,
            fitted_order_q,
            fitted_order_p,
        }
    }
}

/// Componentwise max-norm global errors of a trajectory against an exact
/// reference, separately for configurations and momenta.
pub fn global_error<F>(trajectory: &Trajectory, exact: F) -> (f64, f64)
where
    F: Fn(f64) -> PhasePoint,
{
    let mut err_q = 0.0f64;
    let mut err_p = 0.0f64;
    for (k, point) in trajectory.phase_points.iter().enumerate() {
        let reference = exact(trajectory.time(k));
        for (a, b) in point.q.iter().zip(&reference.q) {
            err_q = err_q.max((a - b).abs());
        }
        for (a, b) in point.p.iter().zip(&reference.p) {
            err_p = err_p.max((a - b).abs());
        }
    }
    (err_q, err_p)
}

/// Max-norm difference between the final phase point and `start`; the error
/// measure for periodic orbits integrated over whole periods.
pub fn return_error(trajectory: &Trajectory, start: &PhasePoint) -> (f64, f64) {
    let last = trajectory
        .phase_points
        .last()
        .expect("trajectory has at least the initial point");
    let err_q = last
        .q
        .iter()
        .zip(&start.q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let err_p = last
        .p
        .iter()
        .zip(&start.p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (err_q, err_p)
}

/// Least-squares slope of `log(error)` versus `log(h)` over the points whose
/// error exceeds `floor`. Needs at least three usable points to be reliable.
pub fn fit_order(step_sizes: &[f64], errors: &[f64], floor: f64) -> OrderFit {
    assert_eq!(step_sizes.len(), errors.len());
    let usable: Vec<(f64, f64)> = step_sizes
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > floor)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let points_used = usable.len();
    if points_used < 2 {
        return OrderFit {
            order: f64::NAN,
            points_used,
            reliable: false,
        };
    }
    let n = points_used as f64;
    let mean_x: f64 = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y: f64 = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = usable
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let order = sxy / sxx;
    OrderFit {
        order,
        points_used,
        // A slope near zero means the sweep shows no convergence at all.
        reliable: points_used >= 3 && order > 0.25,
    }
}

/// Conserved quantity tracked by [`conservation_series`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConservedQuantity {
    Energy,
    AngularMomentum,
}

/// Absolute deviation `|Q(q_k, p_k) - Q(q_0, p_0)|` of a conserved quantity
/// along a trajectory, one entry per phase point.
pub fn conservation_series(
    trajectory: &Trajectory,
    system: &LagrangianSystem,
    quantity: ConservedQuantity,
) -> Result<Vec<f64>, Error> {
    let eval = |point: &PhasePoint| -> Result<f64, Error> {
        match quantity {
            ConservedQuantity::Energy => system.energy(&point.q, &point.p),
            ConservedQuantity::AngularMomentum => angular_momentum(point),
        }
    };
    let initial = eval(&trajectory.phase_points[0])?;
    trajectory
        .phase_points
        .iter()
        .map(|point| Ok((eval(point)? - initial).abs()))
        .collect()
}

/// Max-norm defect of a forward step followed by a backward step,
/// `Phi^{-h}(Phi^{h}(point)) - point`. Zero (to solver accuracy) for
/// time-reversible schemes.
pub fn reversibility_defect(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    point: &PhasePoint,
    h: f64,
) -> Result<f64, Error> {
    let (forward, _) = hamiltonian_map(spec, system, point, h)?;
    let (back, _) = hamiltonian_map(spec, system, &forward, -h)?;
    Ok(back.max_distance(point))
}

/// Jacobian of the one-step discrete Hamiltonian map at `point`, by central
/// finite differences in phase space with the given step. Layout:
/// the differentiated coordinates are `(q_1..q_n, p_1..p_n)`.
pub fn step_jacobian(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    point: &PhasePoint,
    h: f64,
    fd_step: f64,
) -> Result<DMatrix<f64>, Error> {
    let n = point.dim();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let mut plus = point.clone();
        let mut minus = point.clone();
        if col < n {
            plus.q[col] += fd_step;
            minus.q[col] -= fd_step;
        } else {
            plus.p[col - n] += fd_step;
            minus.p[col - n] -= fd_step;
        }
        let (fp, _) = hamiltonian_map(spec, system, &plus, h)?;
        let (fm, _) = hamiltonian_map(spec, system, &minus, h)?;
        for row in 0..2 * n {
            let (a, b) = if row < n {
                (fp.q[row], fm.q[row])
            } else {
                (fp.p[row - n], fm.p[row - n])
            };
            jac[(row, col)] = (a - b) / (2.0 * fd_step);
        }
    }
    Ok(jac)
}

/// `max |(J^T W J - W)_{ij}|` with `W` the canonical symplectic matrix and
/// `J` the finite-difference step Jacobian: zero for an exactly symplectic
/// map.
pub fn symplecticity_defect(
    spec: &IntegratorSpec,
    system: &LagrangianSystem,
    point: &PhasePoint,
    h: f64,
) -> Result<f64, Error> {
    let n = point.dim();
    let jac = step_jacobian(spec, system, point, h, SYMPLECTICITY_FD_STEP)?;
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        omega[(j, n + j)] = 1.0;
        omega[(n + j, j)] = -1.0;
    }
    let defect = jac.transpose() * &omega * &jac - omega;
    Ok(defect.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

/// The 2x2 iteration matrix advancing `(p, w q)` by one step of the scheme
/// applied to the scalar harmonic oscillator, as a function of `x = h w`.
///
/// The stage unknowns solve a linear system assembled from the quadrature
/// and basis tables; one round of iterative refinement keeps the entries
/// accurate near rounding even for stiff `x`.
pub fn stability_matrix(spec: &IntegratorSpec, h_omega: f64) -> Result<[[f64; 2]; 2], Error> {
    if !(h_omega > 0.0) || !h_omega.is_finite() {
        return Err(Error::InvalidArgument(
            "the scaled step h*w must be positive and finite".into(),
        ));
    }
    let s = spec.s();
    let tables = spec.tables();
    let weights = spec.rule().weights();
    let x = h_omega;

    // A_{mu nu} = K_{mu nu} - x^2 M_{mu nu} with the velocity and value Gram
    // matrices of the basis under the quadrature rule; the stage equations
    // scaled by h*w read  sum_nu A_{mu nu} y^nu = -x p_0 delta_{mu 0}  for
    // mu = 0..s-1, unknowns y^nu = w q^nu, nu = 1..s.
    let mut a = DMatrix::zeros(s + 1, s + 1);
    for mu in 0..=s {
        for nu in 0..=s {
            let mut k = 0.0;
            let mut m = 0.0;
            for (i, &b) in weights.iter().enumerate() {
                k += b * tables.ldot[i][mu] * tables.ldot[i][nu];
                m += b * tables.l[i][mu] * tables.l[i][nu];
            }
            a[(mu, nu)] = k - x * x * m;
        }
    }
    let system = DMatrix::from_fn(s, s, |row, col| a[(row, col + 1)]);
    let lu = system.clone().lu();

    let mut propagate = |p0: f64, y0: f64| -> Result<(f64, f64), Error> {
        let rhs = DVector::from_fn(s, |row, _| {
            let coupling = if row == 0 { -x * p0 } else { 0.0 };
            coupling - a[(row, 0)] * y0
        });
        let Some(mut z) = lu.solve(&rhs) else {
            return Err(Error::SingularSystem(format!(
                "{} at h*w = {x}",
                spec.name()
            )));
        };
        // One step of iterative refinement.
        let residual = &rhs - &system * &z;
        if let Some(correction) = lu.solve(&residual) {
            z += correction;
        }
        let mut p1 = a[(s, 0)] * y0;
        for nu in 1..=s {
            p1 += a[(s, nu)] * z[nu - 1];
        }
        Ok((p1 / x, z[s - 1]))
    };

    let (m11, m21) = propagate(1.0, 0.0)?;
    let (m12, m22) = propagate(0.0, 1.0)?;
    Ok([[m11, m12], [m21, m22]])
}

/// Eigenvalue moduli of a real 2x2 matrix, largest first.
pub fn eigenvalue_moduli(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = trace * trace - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        let l1 = 0.5 * (trace + root);
        let l2 = 0.5 * (trace - root);
        let (a, b) = (l1.abs(), l2.abs());
        (a.max(b), a.min(b))
    } else {
        // Complex conjugate pair: |lambda|^2 = det.
        let modulus = det.max(0.0).sqrt();
        (modulus, modulus)
    }
}

/// Largest eigenvalue modulus of the iteration matrix per grid point, with
/// the first stability boundary (when one exists in the grid range).
#[derive(Clone, Debug, serde::Serialize)]
pub struct StabilityGrid {
    pub spec_name: String,
    pub h_omega: Vec<f64>,
    pub max_modulus: Vec<f64>,
    /// Largest `h w` below which the scheme is stable, `None` when no
    /// instability was found in the grid range.
    pub boundary: Option<f64>,
}

/// Scan the iteration-matrix spectrum over a positive increasing grid of
/// `h w` values; the boundary is located by bisection to 1e-8.
pub fn stability_scan(spec: &IntegratorSpec, grid: &[f64]) -> Result<StabilityGrid, Error> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "stability grid must be positive and strictly increasing".into(),
        ));
    }
    let stable = |x: f64| -> Result<bool, Error> {
        let m = stability_matrix(spec, x)?;
        Ok(eigenvalue_moduli(&m).0 <= 1.0 + STABILITY_MODULUS_TOL)
    };
    let mut max_modulus = Vec::with_capacity(grid.len());
    let mut first_unstable = None;
    for (idx, &x) in grid.iter().enumerate() {
        let m = stability_matrix(spec, x)?;
        let modulus = eigenvalue_moduli(&m).0;
        if first_unstable.is_none() && modulus > 1.0 + STABILITY_MODULUS_TOL {
            first_unstable = Some(idx);
        }
        max_modulus.push(modulus);
    }
    let boundary = match first_unstable {
        None => None,
        Some(idx) => {
            let mut hi = grid[idx];
            let mut lo = if idx > 0 { grid[idx - 1] } else { hi / 1024.0 };
            while hi - lo > 1e-8 {
                let mid = 0.5 * (lo + hi);
                if stable(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        }
    };
    Ok(StabilityGrid {
        spec_name: spec.name().to_string(),
        h_omega: grid.to_vec(),
        max_modulus,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::integrate;
    use crate::quadrature::QuadratureKind;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec(s: usize, r: usize, kind: QuadratureKind) -> IntegratorSpec {
        IntegratorSpec::from_srk(s, r, kind).unwrap()
    }

    #[test]
    fn fit_order_recovers_synthetic_powers() {
        let hs = [1.0, 0.5, 0.25, 0.125, 0.0625];
        for p in [1.0, 2.0, 4.5, 6.0] {
            let errors: Vec<f64> = hs.iter().map(|h| 0.3 * h.powf(p)).collect();
            let fit = fit_order(&hs, &errors, 1e-10);
            assert!(fit.reliable);
            assert_eq!(fit.points_used, 5);
            assert_abs_diff_eq!(fit.order, p, epsilon = 1e-10);
        }
    }

    #[test]
    fn fit_order_drops_points_below_floor() {
        let hs = [1.0, 0.5, 0.25, 0.125, 0.0625];
        let errors: Vec<f64> = hs
            .iter()
            .map(|h| (2.0 * h.powi(6)).max(1e-13))
            .collect();
        // The last two sweeps are saturated below the floor.
        let fit = fit_order(&hs, &errors, 1e-10);
        assert_eq!(fit.points_used, 3);
        assert!(fit.reliable);
        assert_abs_diff_eq!(fit.order, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_order_flags_unreliable_cases() {
        let hs = [1.0, 0.5, 0.25, 0.125];
        // Constant errors: slope about zero.
        let fit = fit_order(&hs, &[0.5; 4], 1e-10);
        assert!(!fit.reliable);
        assert!(fit.order.abs() <= 1e-12);
        // Too few usable points.
        let fit = fit_order(&hs, &[1e-3, 1e-12, 1e-12, 1e-12], 1e-10);
        assert_eq!(fit.points_used, 1);
        assert!(!fit.reliable);
        assert!(fit.order.is_nan());
    }

    #[test]
    fn global_error_of_exact_samples_is_zero() {
        let sys = LagrangianSystem::harmonic_oscillator(2, 1.0).unwrap();
        let start = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let h = 0.2;
        let points: Vec<PhasePoint> = (0..=10)
            .map(|k| sys.exact_flow(&start, k as f64 * h).unwrap())
            .collect();
        let traj = Trajectory {
            spec_name: "exact".into(),
            h,
            segments: vec![],
            phase_points: points,
            reports: vec![],
        };
        let (eq, ep) = global_error(&traj, |t| sys.exact_flow(&start, t).unwrap());
        assert_eq!(eq, 0.0);
        assert_eq!(ep, 0.0);
        let (rq, rp) = return_error(&traj, &traj.phase_points[0].clone());
        assert!(rq > 0.0 || rp > 0.0); // 10 h = 2 is not a full period
    }

    #[test]
    fn conservation_series_requires_dim_two_for_angular_momentum() {
        let sys = LagrangianSystem::harmonic_oscillator(1, 1.0).unwrap();
        let spec = spec(1, 1, QuadratureKind::Gauss);
        let start = PhasePoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&spec, &sys, &start, 0.1, 5).unwrap();
        assert!(conservation_series(&traj, &sys, ConservedQuantity::AngularMomentum).is_err());
        let energy = conservation_series(&traj, &sys, ConservedQuantity::Energy).unwrap();
        assert_eq!(energy.len(), 6);
        assert_eq!(energy[0], 0.0);
    }

    #[test]
    fn midpoint_reversibility_is_at_solver_accuracy() {
        let spec = spec(1, 1, QuadratureKind::Gauss);
        let sys = LagrangianSystem::harmonic_oscillator(2, 1.0).unwrap();
        let point = PhasePoint::new(vec![0.7, -0.2], vec![0.4, 1.1]);
        let defect = reversibility_defect(&spec, &sys, &point, 0.1).unwrap();
        assert!(defect <= 1e-11, "defect {defect:.3e}");
    }

    #[test]
    fn midpoint_stability_matrix_at_two() {
        let spec = spec(1, 1, QuadratureKind::Gauss);
        let m = stability_matrix(&spec, 2.0).unwrap();
        let expected = [[0.0, -1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m[i][j], expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn verlet_stability_matrix_at_one() {
        let spec = spec(1, 2, QuadratureKind::Lobatto);
        let m = stability_matrix(&spec, 1.0).unwrap();
        let expected = [[0.5, -0.75], [1.0, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m[i][j], expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn two_stage_gauss_matrix_is_orthogonal() {
        let spec = spec(2, 2, QuadratureKind::Gauss);
        for x in [0.1, 1.0, 3.7, 25.0] {
            let m = stability_matrix(&spec, x).unwrap();
            let mtm = [
                m[0][0] * m[0][0] + m[1][0] * m[1][0],
                m[0][0] * m[0][1] + m[1][0] * m[1][1],
                m[0][1] * m[0][1] + m[1][1] * m[1][1],
            ];
            assert_abs_diff_eq!(mtm[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(mtm[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(mtm[2], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn iteration_matrices_have_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (s, r, kind) in [
            (1, 1, QuadratureKind::Gauss),
            (1, 2, QuadratureKind::Lobatto),
            (2, 3, QuadratureKind::Lobatto),
            (3, 3, QuadratureKind::Gauss),
            (3, 4, QuadratureKind::Lobatto),
            (4, 5, QuadratureKind::Lobatto),
            (5, 5, QuadratureKind::Gauss),
        ] {
            let spec = spec(s, r, kind);
            for _ in 0..20 {
                let x: f64 = rng.random_range(0.01..10.0);
                let m = stability_matrix(&spec, x).unwrap();
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                assert!(
                    (det - 1.0).abs() <= 1e-10,
                    "{} at x = {x}: det = {det}",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn consistency_with_exact_rotation_for_small_steps() {
        // Every scheme must approximate the exact flow: M ~ [[cos, -sin],[sin, cos]].
        for (s, r, kind) in [
            (1, 1, QuadratureKind::Gauss),
            (1, 2, QuadratureKind::Lobatto),
            (2, 3, QuadratureKind::Lobatto),
            (3, 4, QuadratureKind::Lobatto),
        ] {
            let spec = spec(s, r, kind);
            let x = 1e-3;
            let m = stability_matrix(&spec, x).unwrap();
            assert_abs_diff_eq!(m[0][0], x.cos(), epsilon = 1e-6);
            assert_abs_diff_eq!(m[0][1], -x.sin(), epsilon = 1e-6);
            assert_abs_diff_eq!(m[1][0], x.sin(), epsilon = 1e-6);
            assert_abs_diff_eq!(m[1][1], x.cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn verlet_boundary_at_two() {
        let spec = spec(1, 2, QuadratureKind::Lobatto);
        let grid: Vec<f64> = (1..=500).map(|i| i as f64 * 0.01).collect();
        let scan = stability_scan(&spec, &grid).unwrap();
        let boundary = scan.boundary.expect("Verlet has a stability boundary");
        assert_abs_diff_eq!(boundary, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn midpoint_has_no_boundary() {
        let spec = spec(1, 1, QuadratureKind::Gauss);
        let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
        let scan = stability_scan(&spec, &grid).unwrap();
        assert!(scan.boundary.is_none());
        assert!(scan.max_modulus.iter().all(|&m| m <= 1.0 + 1e-10));
    }

    #[test]
    fn stability_scan_rejects_bad_grids() {
        let spec = spec(1, 1, QuadratureKind::Gauss);
        assert!(stability_scan(&spec, &[]).is_err());
        assert!(stability_scan(&spec, &[0.0, 1.0]).is_err());
        assert!(stability_scan(&spec, &[1.0, 0.5]).is_err());
        assert!(stability_matrix(&spec, 0.0).is_err());
    }

    #[test]
    fn symplecticity_defect_small_for_variational_step() {
        let spec = spec(2, 3, QuadratureKind::Lobatto);
        let mut tight = spec.clone();
        tight.solver.residual_tol = 1e-13;
        let sys = LagrangianSystem::harmonic_oscillator(1, 1.0).unwrap();
        let point = PhasePoint::new(vec![0.9], vec![-0.4]);
        let defect = symplecticity_defect(&tight, &sys, &point, 0.2).unwrap();
        assert!(defect <= 1e-6, "defect {defect:.3e}");
    }
}
