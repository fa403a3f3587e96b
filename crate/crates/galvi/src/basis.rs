//! Lagrange interpolation basis over `s + 1` control points on `[0, 1]`.
//!
//! The basis polynomial `l_nu(tau) = prod_{i != nu} (tau - d_i)/(d_nu - d_i)`
//! is evaluated in barycentric form with precomputed weights; its derivative
//! uses the differentiation-matrix formula at the control points and the
//! logarithmic-derivative identity elsewhere. Control-point sets are pinned
//! to `d_0 = 0`, `d_s = 1` and mirrored so that `d_i = 1 - d_{s-i}` holds
//! bit-exactly.

use crate::quadrature::QuadratureRule;
use crate::Error;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 10;

/// Evaluation points this close to a control point snap onto it, avoiding
/// division by a vanishing factor in the barycentric form.
const NODE_SNAP: f64 = 10.0 * f64::EPSILON;

/// Placement scheme for the interior control points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ControlScheme {
    /// `d_i = i / s`.
    Equispaced,
    /// `d_i = (1 - cos(i pi / s)) / 2`.
    ChebyshevLobatto,
}

/// `s + 1` interpolation abscissae `0 = d_0 < d_1 < ... < d_s = 1` together
/// with their barycentric weights.
#[derive(Clone, Debug)]
pub struct ControlPoints {
    d: Vec<f64>,
    bary: Vec<f64>,
    symmetric: bool,
}

impl ControlPoints {
    /// Build a symmetric control-point set of degree `s` for the given
    /// scheme.
    pub fn new(s: usize, scheme: ControlScheme) -> Result<Self, Error> {
        if s == 0 {
            return Err(Error::InvalidArgument(
                "polynomial degree must be at least 1".into(),
            ));
        }
        if s > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {s} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let mut d = vec![0.0; s + 1];
        for i in 0..=s / 2 {
            let x = match scheme {
                ControlScheme::Equispaced => i as f64 / s as f64,
                ControlScheme::ChebyshevLobatto => {
                    0.5 * (1.0 - (std::f64::consts::PI * i as f64 / s as f64).cos())
                }
            };
            d[i] = x;
            d[s - i] = 1.0 - x;
        }
        d[0] = 0.0;
        d[s] = 1.0;
        if s % 2 == 0 {
            d[s / 2] = 0.5;
        }
        Ok(Self::from_validated(d, true))
    }

    /// Build from explicit points. Asymmetric sets break time reversibility
    /// and are only accepted with `allow_asymmetric` (used by test fixtures).
    pub fn from_points(d: Vec<f64>, allow_asymmetric: bool) -> Result<Self, Error> {
        if d.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two control points".into(),
            ));
        }
        let s = d.len() - 1;
        if s > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {s} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if d[0] != 0.0 || d[s] != 1.0 {
            return Err(Error::Validation(
                "control points must start at 0 and end at 1".into(),
            ));
        }
        if d.windows(2).any(|w| !(w[1] > w[0])) || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(
                "control points must be finite and strictly increasing".into(),
            ));
        }
        let symmetric = (0..=s).all(|i| (d[i] + d[s - i] - 1.0).abs() <= 1e-12);
        if !symmetric && !allow_asymmetric {
            return Err(Error::Validation(
                "control points are not symmetric; pass the asymmetric override to force them"
                    .into(),
            ));
        }
        Ok(Self::from_validated(d, symmetric))
    }

    fn from_validated(d: Vec<f64>, symmetric: bool) -> Self {
        let s = d.len() - 1;
        let bary = (0..=s)
            .map(|nu| {
                let prod: f64 = (0..=s)
                    .filter(|&i| i != nu)
                    .map(|i| d[nu] - d[i])
                    .product();
                1.0 / prod
            })
            .collect();
        ControlPoints { d, bary, symmetric }
    }

    /// Polynomial degree `s`.
    pub fn degree(&self) -> usize {
        self.d.len() - 1
    }

    /// The abscissae `d_0, ..., d_s`.
    pub fn points(&self) -> &[f64] {
        &self.d
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn snap(&self, tau: f64) -> Option<usize> {
        self.d.iter().position(|&di| (tau - di).abs() <= NODE_SNAP)
    }

    /// Value of the `nu`-th Lagrange basis polynomial at `tau`.
    ///
    /// `tau` outside `[0, 1]` is permitted (extrapolation).
    pub fn eval(&self, nu: usize, tau: f64) -> f64 {
        let s = self.degree();
        assert!(nu <= s, "basis index {nu} out of range 0..={s}");
        if let Some(j) = self.snap(tau) {
            return if j == nu { 1.0 } else { 0.0 };
        }
        let ell: f64 = self.d.iter().map(|&di| tau - di).product();
        ell * self.bary[nu] / (tau - self.d[nu])
    }

    /// Derivative of the `nu`-th Lagrange basis polynomial with respect to
    /// `tau`. The `1/h` factor of a time-scaled interpolant is applied by
    /// callers.
    pub fn deriv(&self, nu: usize, tau: f64) -> f64 {
        let s = self.degree();
        assert!(nu <= s, "basis index {nu} out of range 0..={s}");
        if let Some(j) = self.snap(tau) {
            return if j == nu {
                (0..=s)
                    .filter(|&i| i != nu)
                    .map(|i| 1.0 / (self.d[nu] - self.d[i]))
                    .sum()
            } else {
                self.bary[nu] / (self.bary[j] * (self.d[j] - self.d[nu]))
            };
        }
        let value = self.eval(nu, tau);
        let log_deriv: f64 = (0..=s)
            .filter(|&i| i != nu)
            .map(|i| 1.0 / (tau - self.d[i]))
            .sum();
        value * log_deriv
    }
}

/// Basis values and derivatives precomputed at the nodes of a quadrature
/// rule, plus the endpoint rows at `tau = 0` and `tau = 1`.
///
/// `l[i][nu]` holds `l_nu(c_i)` and `ldot[i][nu]` holds `l'_nu(c_i)`.
#[derive(Clone, Debug)]
pub struct BasisTables {
    pub l: Vec<Vec<f64>>,
    pub ldot: Vec<Vec<f64>>,
    pub l_start: Vec<f64>,
    pub l_end: Vec<f64>,
    pub ldot_start: Vec<f64>,
    pub ldot_end: Vec<f64>,
}

/// Evaluate the basis (values and derivatives) at every quadrature node.
pub fn make_basis_tables(points: &ControlPoints, rule: &QuadratureRule) -> BasisTables {
    let s = points.degree();
    let row = |tau: f64| -> (Vec<f64>, Vec<f64>) {
        (
            (0..=s).map(|nu| points.eval(nu, tau)).collect(),
            (0..=s).map(|nu| points.deriv(nu, tau)).collect(),
        )
    };
    let mut l = Vec::with_capacity(rule.len());
    let mut ldot = Vec::with_capacity(rule.len());
    for &c in rule.nodes() {
        let (v, dv) = row(c);
        l.push(v);
        ldot.push(dv);
    }
    let (l_start, ldot_start) = row(0.0);
    let (l_end, ldot_end) = row(1.0);
    BasisTables {
        l,
        ldot,
        l_start,
        l_end,
        ldot_start,
        ldot_end,
    }
}

/// Evaluate the interpolant through `values` (one configuration vector per
/// control point) at parameter `tau` of a step of size `h`.
///
/// Returns the configuration and the velocity `(1/h) sum_nu q^nu l'_nu(tau)`.
pub fn interpolate(
    values: &[Vec<f64>],
    points: &ControlPoints,
    tau: f64,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let s = points.degree();
    if values.len() != s + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} stage values, got {}",
            s + 1,
            values.len()
        )));
    }
    if h == 0.0 {
        return Err(Error::InvalidArgument("step size must be nonzero".into()));
    }
    let dim = values[0].len();
    if values.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument(
            "stage values have inconsistent dimensions".into(),
        ));
    }
    let mut q = vec![0.0; dim];
    let mut qdot = vec![0.0; dim];
    for (nu, value) in values.iter().enumerate() {
        let lv = points.eval(nu, tau);
        let ld = points.deriv(nu, tau);
        for j in 0..dim {
            q[j] += value[j] * lv;
            qdot[j] += value[j] * ld;
        }
    }
    for x in &mut qdot {
        *x /= h;
    }
    Ok((q, qdot))
}
