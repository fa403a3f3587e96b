//! Gauss-Legendre and Gauss-Lobatto quadrature rules on `[0, 1]`.
//!
//! Nodes are computed by Newton iteration on the Legendre polynomial (Gauss)
//! or on the derivative of the Legendre polynomial of degree `r - 1`
//! (Lobatto), starting from Chebyshev initial guesses, then mapped from
//! `[-1, 1]` to `[0, 1]` via `c = (x + 1)/2`, `b = w/2`. The rules are
//! symmetrized afterwards so that `c_i + c_{r+1-i} = 1` and
//! `b_i = b_{r+1-i}` hold bit-exactly; the time-reversibility of the
//! integrators built on top relies on that exact symmetry.

use crate::Error;

/// Largest supported point count. Double-precision root-finding is
/// comfortably accurate in this range.
pub const MAX_POINTS: usize = 12;

/// Convergence tolerance of the Newton node iteration.
const NEWTON_TOL: f64 = 1e-15;

/// Quadrature family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum QuadratureKind {
    Gauss,
    Lobatto,
}

impl QuadratureKind {
    /// Three-letter tag used in integrator names, e.g. `P2N3Q4Lob`.
    pub fn tag(&self) -> &'static str {
        match self {
            QuadratureKind::Gauss => "Gau",
            QuadratureKind::Lobatto => "Lob",
        }
    }
}

/// A quadrature rule `(b_i, c_i)_{i=1}^r` on `[0, 1]`.
///
/// `order` is the polynomial exactness order `u`: every polynomial of degree
/// `< u` is integrated exactly (`u = 2r` for Gauss, `u = 2r - 2` for
/// Lobatto), and degree `u` is not.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// Gauss-Legendre rule with `r` points, order `2r`.
    pub fn gauss_legendre(r: usize) -> Result<Self, Error> {
        if r == 0 {
            return Err(Error::InvalidArgument(
                "Gauss rule needs at least one point".into(),
            ));
        }
        if r > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "point count {r} exceeds the supported maximum {MAX_POINTS}"
            )));
        }
        let mut nodes = Vec::with_capacity(r);
        let mut weights = Vec::with_capacity(r);
        for i in 0..r {
            // Chebyshev-like initial guess for the i-th root (ascending).
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (r as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(r, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(r, x);
            // w = 2 / ((1 - x^2) P'_r(x)^2) on [-1, 1]; halved by the map.
            nodes.push(0.5 * (x + 1.0));
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        let mut rule = QuadratureRule {
            kind: QuadratureKind::Gauss,
            nodes,
            weights,
            order: 2 * r,
        };
        rule.symmetrize();
        Ok(rule)
    }

    /// Gauss-Lobatto rule with `r` points (both endpoints included),
    /// order `2r - 2`.
    pub fn gauss_lobatto(r: usize) -> Result<Self, Error> {
        if r < 2 {
            return Err(Error::InvalidArgument(
                "Lobatto rule needs both endpoints, so at least two points".into(),
            ));
        }
        if r > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "point count {r} exceeds the supported maximum {MAX_POINTS}"
            )));
        }
        let n = r - 1; // interior nodes are the roots of P'_n
        let endpoint_weight = 2.0 / (r as f64 * n as f64);
        let mut nodes = vec![0.0];
        let mut weights = vec![0.5 * endpoint_weight];
        for i in 1..n {
            // Roots of P'_n interlace the Chebyshev-Lobatto points.
            let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(n, x);
                // (1 - x^2) P''_n = 2x P'_n - n(n+1) P_n
                let ddp = (2.0 * x * dp - (n * (n + 1)) as f64 * p) / (1.0 - x * x);
                let dx = dp / ddp;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    break;
                }
            }
            let (p, _) = legendre_and_derivative(n, x);
            nodes.push(0.5 * (x + 1.0));
            weights.push(0.5 * 2.0 / (r as f64 * n as f64 * p * p));
        }
        nodes.push(1.0);
        weights.push(0.5 * endpoint_weight);
        let mut rule = QuadratureRule {
            kind: QuadratureKind::Lobatto,
            nodes,
            weights,
            order: 2 * r - 2,
        };
        rule.symmetrize();
        Ok(rule)
    }

    /// Build a rule of the given kind.
    pub fn new(kind: QuadratureKind, r: usize) -> Result<Self, Error> {
        match kind {
            QuadratureKind::Gauss => Self::gauss_legendre(r),
            QuadratureKind::Lobatto => Self::gauss_lobatto(r),
        }
    }

    /// Average mirrored node/weight pairs and pin the upper half to the exact
    /// reflection of the lower half, so the symmetry relations hold
    /// bit-exactly. The middle node of an odd rule is exactly 1/2.
    fn symmetrize(&mut self) {
        let r = self.nodes.len();
        for i in 0..r / 2 {
            let j = r - 1 - i;
            let c = 0.5 * (self.nodes[i] + 1.0 - self.nodes[j]);
            self.nodes[i] = c;
            self.nodes[j] = 1.0 - c;
            let b = 0.5 * (self.weights[i] + self.weights[j]);
            self.weights[i] = b;
            self.weights[j] = b;
        }
        if r % 2 == 1 {
            self.nodes[r / 2] = 0.5;
        }
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    /// Number of quadrature points `r`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes `c_i`, strictly increasing in `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `b_i`, positive, summing to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Polynomial exactness order `u`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `sum_i b_i c_i^k`, the rule applied to the monomial `tau^k`.
    pub fn integrate_monomial(&self, k: usize) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&c, &b)| b * c.powi(k as i32))
            .sum()
    }

    /// Certify the declared order: every monomial of degree `k < u` must be
    /// integrated to within 1e-13 of `1/(k+1)`, and the residual at `k = u`
    /// must exceed 1e-6 so that the order is tight.
    pub fn verify_exactness(&self) -> bool {
        for k in 0..self.order {
            let exact = 1.0 / (k as f64 + 1.0);
            if (self.integrate_monomial(k) - exact).abs() > 1e-13 {
                return false;
            }
        }
        let exact = 1.0 / (self.order as f64 + 1.0);
        (self.integrate_monomial(self.order) - exact).abs() > 1e-6
    }
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence. The derivative formula divides by `x^2 - 1` and is only used
/// at interior points.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Point counts for which the fixed 1e-6 tightness threshold in
    /// `verify_exactness` is attainable: the quadrature error constant at the
    /// first inexact monomial decays factorially and drops below 1e-6 for
    /// larger rules.
    fn certified_range(kind: QuadratureKind) -> std::ops::RangeInclusive<usize> {
        match kind {
            QuadratureKind::Gauss => 1..=5,
            QuadratureKind::Lobatto => 2..=6,
        }
    }

    #[test]
    fn gauss_one_point_is_midpoint() {
        let rule = QuadratureRule::gauss_legendre(1).unwrap();
        assert_eq!(rule.nodes(), &[0.5]);
        assert_eq!(rule.weights(), &[1.0]);
        assert_eq!(rule.order(), 2);
    }

    #[test]
    fn gauss_two_point_nodes() {
        let rule = QuadratureRule::gauss_legendre(2).unwrap();
        let offset = 3.0_f64.sqrt() / 6.0;
        assert_abs_diff_eq!(rule.nodes()[0], 0.5 - offset, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.nodes()[1], 0.5 + offset, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-15);
        // Cross-check: exact on monomials up to degree 3.
        for k in 0..4 {
            assert_abs_diff_eq!(
                rule.integrate_monomial(k),
                1.0 / (k as f64 + 1.0),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn lobatto_two_point_is_trapezoid() {
        let rule = QuadratureRule::gauss_lobatto(2).unwrap();
        assert_eq!(rule.nodes(), &[0.0, 1.0]);
        assert_eq!(rule.weights(), &[0.5, 0.5]);
        assert_eq!(rule.order(), 2);
    }

    #[test]
    fn lobatto_three_point_is_simpson() {
        let rule = QuadratureRule::gauss_lobatto(3).unwrap();
        assert_eq!(rule.nodes(), &[0.0, 0.5, 1.0]);
        assert_abs_diff_eq!(rule.weights()[0], 1.0 / 6.0, epsilon = 1e-16);
        assert_abs_diff_eq!(rule.weights()[1], 2.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(rule.weights()[2], 1.0 / 6.0, epsilon = 1e-16);
        assert_eq!(rule.order(), 4);
    }

    #[test]
    fn lobatto_four_point_nodes_and_weights() {
        let rule = QuadratureRule::gauss_lobatto(4).unwrap();
        let offset = 5.0_f64.sqrt() / 10.0;
        let expected_nodes = [0.0, 0.5 - offset, 0.5 + offset, 1.0];
        let expected_weights = [1.0 / 12.0, 5.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0];
        for i in 0..4 {
            assert_abs_diff_eq!(rule.nodes()[i], expected_nodes[i], epsilon = 1e-15);
            assert_abs_diff_eq!(rule.weights()[i], expected_weights[i], epsilon = 1e-15);
        }
        // Cross-check: exact on monomials up to degree 5.
        for k in 0..6 {
            assert_abs_diff_eq!(
                rule.integrate_monomial(k),
                1.0 / (k as f64 + 1.0),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn invalid_point_counts_are_rejected() {
        assert!(QuadratureRule::gauss_legendre(0).is_err());
        assert!(QuadratureRule::gauss_lobatto(0).is_err());
        assert!(QuadratureRule::gauss_lobatto(1).is_err());
        assert!(QuadratureRule::gauss_legendre(MAX_POINTS + 1).is_err());
        assert!(QuadratureRule::gauss_lobatto(MAX_POINTS + 1).is_err());
    }

    #[test]
    fn weights_sum_to_one_and_are_positive() {
        for r in 1..=MAX_POINTS {
            for rule in [
                Some(QuadratureRule::gauss_legendre(r).unwrap()),
                (r >= 2).then(|| QuadratureRule::gauss_lobatto(r).unwrap()),
            ]
            .into_iter()
            .flatten()
            {
                let sum: f64 = rule.weights().iter().sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-14,
                    "{:?} r={r}: weight sum {sum}",
                    rule.kind()
                );
                assert!(rule.weights().iter().all(|&b| b > 0.0));
            }
        }
    }

    #[test]
    fn nodes_strictly_increasing_and_symmetric_bit_exact() {
        for r in 1..=MAX_POINTS {
            for rule in [
                Some(QuadratureRule::gauss_legendre(r).unwrap()),
                (r >= 2).then(|| QuadratureRule::gauss_lobatto(r).unwrap()),
            ]
            .into_iter()
            .flatten()
            {
                let c = rule.nodes();
                let b = rule.weights();
                for i in 1..r {
                    assert!(c[i] > c[i - 1]);
                }
                for i in 0..r {
                    assert_eq!(c[i] + c[r - 1 - i], 1.0, "node symmetry must be exact");
                    assert_eq!(b[i], b[r - 1 - i], "weight symmetry must be exact");
                }
            }
        }
    }

    #[test]
    fn lobatto_includes_endpoints() {
        for r in 2..=MAX_POINTS {
            let rule = QuadratureRule::gauss_lobatto(r).unwrap();
            assert_eq!(rule.nodes()[0], 0.0);
            assert_eq!(rule.nodes()[r - 1], 1.0);
        }
    }

    #[test]
    fn generated_rules_verify_exactness() {
        for kind in [QuadratureKind::Gauss, QuadratureKind::Lobatto] {
            for r in certified_range(kind) {
                let rule = QuadratureRule::new(kind, r).unwrap();
                assert!(rule.verify_exactness(), "{kind:?} r={r}");
            }
        }
    }

    #[test]
    fn large_rules_are_still_exact_below_their_order() {
        // Beyond the certified range the tightness margin at k = u falls
        // under 1e-6, but exactness for k < u must keep holding.
        for r in 6..=MAX_POINTS {
            let rule = QuadratureRule::gauss_legendre(r).unwrap();
            for k in 0..rule.order() {
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((rule.integrate_monomial(k) - exact).abs() <= 1e-13);
            }
        }
        for r in 7..=MAX_POINTS {
            let rule = QuadratureRule::gauss_lobatto(r).unwrap();
            for k in 0..rule.order() {
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((rule.integrate_monomial(k) - exact).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn midpoint_is_inexact_at_degree_two() {
        let rule = QuadratureRule::gauss_legendre(1).unwrap();
        // integral of tau^2 is 1/3, midpoint gives 1/4
        assert_abs_diff_eq!(rule.integrate_monomial(2), 0.25, epsilon = 1e-16);
        assert!(rule.verify_exactness());
    }

    #[test]
    fn perturbed_weight_fails_verification() {
        let mut rule = QuadratureRule::gauss_lobatto(3).unwrap();
        rule.weights[0] += 1e-3;
        assert!(!rule.verify_exactness());
    }

    proptest! {
        #[test]
        fn rules_integrate_random_polynomials_of_certified_degree(
            r in 1usize..=6,
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..8),
        ) {
            let rule = QuadratureRule::gauss_legendre(r).unwrap();
            let degree = (coeffs.len() - 1).min(rule.order() - 1);
            let coeffs = &coeffs[..=degree];
            let applied: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(&c, &b)| {
                    b * coeffs.iter().rev().fold(0.0, |acc, &a| acc * c + a)
                })
                .sum();
            let exact: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, &a)| a / (k as f64 + 1.0))
                .sum();
            prop_assert!((applied - exact).abs() <= 1e-12);
        }
    }
}
