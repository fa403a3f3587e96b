//! Lagrangian test systems with analytic derivatives and conserved
//! quantities.
//!
//! The two built-in systems are the harmonic oscillator and the planar
//! Kepler problem. User-defined Lagrangians are accepted through the same
//! interface with central finite-difference gradients.

use std::sync::Arc;

use crate::Error;

/// A point `(q, p)` of phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same dimension");
        PhasePoint { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Componentwise max-norm distance to another point.
    pub fn max_distance(&self, other: &PhasePoint) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

type ScalarFn = dyn Fn(&[f64], &[f64]) -> Result<f64, Error> + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>, Error> + Send + Sync;
type FlowFn = dyn Fn(&PhasePoint, f64) -> PhasePoint + Send + Sync;

/// A Lagrangian system `L(q, qdot)` with its gradients, the corresponding
/// Hamiltonian `H(q, p)`, and (when available) the exact flow.
#[derive(Clone)]
pub struct LagrangianSystem {
    name: String,
    dim: usize,
    lag: Arc<ScalarFn>,
    grad_q: Arc<GradFn>,
    grad_qdot: Arc<GradFn>,
    ham: Arc<ScalarFn>,
    exact: Option<Arc<FlowFn>>,
}

impl std::fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl LagrangianSystem {
    /// Harmonic oscillator `L = 1/2 qdot^T qdot - 1/2 w^2 q^T q` in one or
    /// two dimensions, with the exact rotational flow attached.
    pub fn harmonic_oscillator(dim: usize, omega: f64) -> Result<Self, Error> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(
                "harmonic oscillator supports dimension 1 or 2".into(),
            ));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument("frequency must be positive".into()));
        }
        let w2 = omega * omega;
        Ok(LagrangianSystem {
            name: format!("harmonic(dim={dim},omega={omega})"),
            dim,
            lag: Arc::new(move |q, qdot| {
                Ok(0.5 * dot(qdot, qdot) - 0.5 * w2 * dot(q, q))
            }),
            grad_q: Arc::new(move |q, _| Ok(q.iter().map(|&x| -w2 * x).collect())),
            grad_qdot: Arc::new(|_, qdot| Ok(qdot.to_vec())),
            ham: Arc::new(move |q, p| Ok(0.5 * dot(p, p) + 0.5 * w2 * dot(q, q))),
            exact: Some(Arc::new(move |start: &PhasePoint, t: f64| {
                let (sin, cos) = (omega * t).sin_cos();
                let q = start
                    .q
                    .iter()
                    .zip(&start.p)
                    .map(|(&q0, &p0)| q0 * cos + p0 * sin / omega)
                    .collect();
                let p = start
                    .q
                    .iter()
                    .zip(&start.p)
                    .map(|(&q0, &p0)| p0 * cos - omega * q0 * sin)
                    .collect();
                PhasePoint::new(q, p)
            })),
        })
    }

    /// Planar Kepler problem `L = 1/2 qdot^T qdot + k / |q|`.
    ///
    /// Evaluation at the origin reports a singularity error.
    pub fn kepler(k: f64) -> Result<Self, Error> {
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(
                "force constant must be positive".into(),
            ));
        }
        let radius = |q: &[f64]| -> Result<f64, Error> {
            let r2 = dot(q, q);
            if r2 == 0.0 {
                return Err(Error::Singularity(
                    "Kepler potential evaluated at the origin".into(),
                ));
            }
            Ok(r2.sqrt())
        };
        Ok(LagrangianSystem {
            name: format!("kepler(k={k})"),
            dim: 2,
            lag: Arc::new(move |q, qdot| Ok(0.5 * dot(qdot, qdot) + k / radius(q)?)),
            grad_q: Arc::new(move |q, _| {
                let r = radius(q)?;
                let factor = -k / (r * r * r);
                Ok(q.iter().map(|&x| factor * x).collect())
            }),
            grad_qdot: Arc::new(|_, qdot| Ok(qdot.to_vec())),
            ham: Arc::new(move |q, p| Ok(0.5 * dot(p, p) - k / radius(q)?)),
            exact: None,
        })
    }

    /// A user-defined system. Gradients are taken by central finite
    /// differences of the Lagrangian with step `sqrt(eps) * (1 + |x|)`.
    pub fn custom<L, H>(name: &str, dim: usize, lagrangian: L, hamiltonian: H) -> Self
    where
        L: Fn(&[f64], &[f64]) -> Result<f64, Error> + Send + Sync + 'static,
        H: Fn(&[f64], &[f64]) -> Result<f64, Error> + Send + Sync + 'static,
    {
        let lag: Arc<ScalarFn> = Arc::new(lagrangian);
        let lag_q = Arc::clone(&lag);
        let lag_qdot = Arc::clone(&lag);
        LagrangianSystem {
            name: name.to_string(),
            dim,
            lag,
            grad_q: Arc::new(move |q, qdot| {
                central_gradient(|x| lag_q(x, qdot), q)
            }),
            grad_qdot: Arc::new(move |q, qdot| {
                central_gradient(|x| lag_qdot(q, x), qdot)
            }),
            ham: Arc::new(hamiltonian),
            exact: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Configuration dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `L(q, qdot)`.
    pub fn lagrangian(&self, q: &[f64], qdot: &[f64]) -> Result<f64, Error> {
        (self.lag)(q, qdot)
    }

    /// `dL/dq`.
    pub fn grad_q(&self, q: &[f64], qdot: &[f64]) -> Result<Vec<f64>, Error> {
        (self.grad_q)(q, qdot)
    }

    /// `dL/dqdot`.
    pub fn grad_qdot(&self, q: &[f64], qdot: &[f64]) -> Result<Vec<f64>, Error> {
        (self.grad_qdot)(q, qdot)
    }

    /// Total energy `H(q, p)`.
    pub fn energy(&self, q: &[f64], p: &[f64]) -> Result<f64, Error> {
        (self.ham)(q, p)
    }

    /// Exact flow from `start` over time `t`, when the system provides one.
    pub fn exact_flow(&self, start: &PhasePoint, t: f64) -> Option<PhasePoint> {
        self.exact.as_ref().map(|f| f(start, t))
    }

    pub fn has_exact_flow(&self) -> bool {
        self.exact.is_some()
    }
}

/// z-component of the angular momentum, `I(q, p) = -p_1 q_2 + p_2 q_1`.
pub fn angular_momentum(point: &PhasePoint) -> Result<f64, Error> {
    if point.dim() != 2 {
        return Err(Error::InvalidArgument(
            "angular momentum is defined for two-dimensional configurations".into(),
        ));
    }
    Ok(-point.p[0] * point.q[1] + point.p[1] * point.q[0])
}

/// One classical fourth-order Runge-Kutta step of the canonical equations
/// `qdot = p`, `pdot = dL/dq(q, p)`.
///
/// Serves as the non-symplectic baseline; assumes a Lagrangian of natural
/// form with identity mass matrix, which holds for both built-in systems.
pub fn rk4_step(system: &LagrangianSystem, point: &PhasePoint, h: f64) -> Result<PhasePoint, Error> {
    let n = point.dim();
    let field = |q: &[f64], p: &[f64]| -> Result<(Vec<f64>, Vec<f64>), Error> {
        Ok((p.to_vec(), system.grad_q(q, p)?))
    };
    let shift = |base: &[f64], dir: &[f64], a: f64| -> Vec<f64> {
        base.iter().zip(dir).map(|(&x, &d)| x + a * d).collect()
    };
    let (k1q, k1p) = field(&point.q, &point.p)?;
    let (k2q, k2p) = field(
        &shift(&point.q, &k1q, 0.5 * h),
        &shift(&point.p, &k1p, 0.5 * h),
    )?;
    let (k3q, k3p) = field(
        &shift(&point.q, &k2q, 0.5 * h),
        &shift(&point.p, &k2p, 0.5 * h),
    )?;
    let (k4q, k4p) = field(&shift(&point.q, &k3q, h), &shift(&point.p, &k3p, h))?;
    let mut q = point.q.clone();
    let mut p = point.p.clone();
    for j in 0..n {
        q[j] += h / 6.0 * (k1q[j] + 2.0 * k2q[j] + 2.0 * k3q[j] + k4q[j]);
        p[j] += h / 6.0 * (k1p[j] + 2.0 * k2p[j] + 2.0 * k3p[j] + k4p[j]);
    }
    Ok(PhasePoint::new(q, p))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central finite-difference gradient with step `sqrt(eps) * (1 + |x_j|)`.
fn central_gradient<F>(f: F, x: &[f64]) -> Result<Vec<f64>, Error>
where
    F: Fn(&[f64]) -> Result<f64, Error>,
{
    let step_scale = f64::EPSILON.sqrt();
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let delta = step_scale * (1.0 + x[j].abs());
        probe[j] = x[j] + delta;
        let f_plus = f(&probe)?;
        probe[j] = x[j] - delta;
        let f_minus = f(&probe)?;
        probe[j] = x[j];
        grad[j] = (f_plus - f_minus) / (2.0 * delta);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const KEPLER_K: f64 = 1.016895192894334e3;

    #[test]
    fn harmonic_direct_evaluations() {
        let sys = LagrangianSystem::harmonic_oscillator(1, 1.0).unwrap();
        assert_abs_diff_eq!(
            sys.lagrangian(&[1.0], &[0.0]).unwrap(),
            -0.5,
            epsilon = 1e-15
        );
        let sys2 = LagrangianSystem::harmonic_oscillator(2, 1.0).unwrap();
        assert_abs_diff_eq!(
            sys2.energy(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn harmonic_rejects_bad_parameters() {
        assert!(LagrangianSystem::harmonic_oscillator(0, 1.0).is_err());
        assert!(LagrangianSystem::harmonic_oscillator(3, 1.0).is_err());
        assert!(LagrangianSystem::harmonic_oscillator(1, 0.0).is_err());
    }

    #[test]
    fn harmonic_exact_flow_is_a_rotation() {
        let omega = 1.7;
        let sys = LagrangianSystem::harmonic_oscillator(1, omega).unwrap();
        let start = PhasePoint::new(vec![0.4], vec![-1.1]);
        for t in [0.0, 0.3, 2.0, -1.5] {
            let end = sys.exact_flow(&start, t).unwrap();
            // (p, w q) rotates by angle w t with unit determinant
            let angle = omega * t;
            let expect_p = start.p[0] * angle.cos() - omega * start.q[0] * angle.sin();
            let expect_wq = start.p[0] * angle.sin() + omega * start.q[0] * angle.cos();
            assert_abs_diff_eq!(end.p[0], expect_p, epsilon = 1e-14);
            assert_abs_diff_eq!(omega * end.q[0], expect_wq, epsilon = 1e-14);
            let r0 = start.p[0].powi(2) + (omega * start.q[0]).powi(2);
            let r1 = end.p[0].powi(2) + (omega * end.q[0]).powi(2);
            assert_abs_diff_eq!(r0, r1, epsilon = 1e-13);
        }
    }

    #[test]
    fn kepler_reference_values() {
        let sys = LagrangianSystem::kepler(KEPLER_K).unwrap();
        let h0 = sys.energy(&[5.0, 0.0], &[0.0, 17.0]).unwrap();
        assert_abs_diff_eq!(h0, 144.5 - KEPLER_K / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h0, -58.87903857886682, epsilon = 1e-10);
        let g = sys.grad_q(&[5.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], -KEPLER_K / 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kepler_origin_is_singular() {
        let sys = LagrangianSystem::kepler(1.0).unwrap();
        assert!(matches!(
            sys.lagrangian(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            sys.grad_q(&[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn angular_momentum_values() {
        let i = angular_momentum(&PhasePoint::new(vec![5.0, 0.0], vec![0.0, 17.0])).unwrap();
        assert_abs_diff_eq!(i, 85.0, epsilon = 1e-15);
        let i = angular_momentum(&PhasePoint::new(vec![1.0, 0.0], vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(i, 0.0, epsilon = 1e-15);
        let i = angular_momentum(&PhasePoint::new(vec![0.0, 1.0], vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(i, -1.0, epsilon = 1e-15);
        assert!(angular_momentum(&PhasePoint::new(vec![1.0], vec![1.0])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let harmonic = LagrangianSystem::harmonic_oscillator(2, 1.3).unwrap();
        let kepler = LagrangianSystem::kepler(KEPLER_K).unwrap();
        for sys in [&harmonic, &kepler] {
            for _ in 0..100 {
                let q: Vec<f64> = (0..2).map(|_| rng.random_range(1.0..6.0)).collect();
                let qdot: Vec<f64> = (0..2).map(|_| rng.random_range(-8.0..8.0)).collect();
                let fd_q = central_gradient(|x| sys.lagrangian(x, &qdot), &q).unwrap();
                let fd_qdot = central_gradient(|x| sys.lagrangian(&q, x), &qdot).unwrap();
                let an_q = sys.grad_q(&q, &qdot).unwrap();
                let an_qdot = sys.grad_qdot(&q, &qdot).unwrap();
                for j in 0..2 {
                    assert!((fd_q[j] - an_q[j]).abs() <= 1e-6, "{}", sys.name());
                    assert!((fd_qdot[j] - an_qdot[j]).abs() <= 1e-6, "{}", sys.name());
                }
            }
        }
    }

    #[test]
    fn custom_system_uses_finite_difference_gradients() {
        // Quartic oscillator
        let sys = LagrangianSystem::custom(
            "quartic",
            1,
            |q, qdot| Ok(0.5 * qdot[0] * qdot[0] - 0.25 * q[0].powi(4)),
            |q, p| Ok(0.5 * p[0] * p[0] + 0.25 * q[0].powi(4)),
        );
        let g = sys.grad_q(&[1.5], &[0.0]).unwrap();
        assert_abs_diff_eq!(g[0], -1.5f64.powi(3), epsilon = 1e-6);
        let g = sys.grad_qdot(&[0.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-7);
    }

    #[test]
    fn rk4_single_step_accuracy() {
        let sys = LagrangianSystem::harmonic_oscillator(1, 1.0).unwrap();
        let start = PhasePoint::new(vec![1.0], vec![0.0]);
        let end = rk4_step(&sys, &start, 0.1).unwrap();
        // local truncation error of a fourth-order method is O(h^5)
        assert!((end.q[0] - 0.1f64.cos()).abs() <= 1e-7);
        assert!((end.p[0] + 0.1f64.sin()).abs() <= 1e-7);
    }

    #[test]
    fn rk4_zero_step_is_identity() {
        let sys = LagrangianSystem::harmonic_oscillator(2, 1.0).unwrap();
        let start = PhasePoint::new(vec![1.0, -0.5], vec![0.25, 2.0]);
        let end = rk4_step(&sys, &start, 0.0).unwrap();
        assert_eq!(end, start);
    }

    #[test]
    fn rk4_kepler_energy_drifts() {
        let sys = LagrangianSystem::kepler(KEPLER_K).unwrap();
        let mut point = PhasePoint::new(vec![5.0, 0.0], vec![0.0, 17.0]);
        let e0 = sys.energy(&point.q, &point.p).unwrap();
        let h = 0.01;
        let mut max_dev_first = 0.0f64;
        let mut max_dev_second = 0.0f64;
        let steps = 5000;
        for k in 0..steps {
            point = rk4_step(&sys, &point, h).unwrap();
            let dev = (sys.energy(&point.q, &point.p).unwrap() - e0).abs();
            if k < steps / 2 {
                max_dev_first = max_dev_first.max(dev);
            } else {
                max_dev_second = max_dev_second.max(dev);
            }
        }
        assert!(
            max_dev_second > 2.0 * max_dev_first,
            "expected monotone energy drift: first half {max_dev_first:.3e}, \
             second half {max_dev_second:.3e}"
        );
    }
}
