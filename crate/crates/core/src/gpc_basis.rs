//! Orthogonal polynomial bases for the random input.
//!
//! A [`GpcBasis`] couples a Wiener–Askey polynomial family with the Gauss rule
//! of its probability density. Coefficients are stored in the *normalized*
//! convention
//!
//! ```text
//! c_h = E[f Φ_h] / ‖Φ_h‖²,      f(θ) ≈ Σ_h c_h Φ_h(θ)
//! ```
//!
//! so that reconstruction is the plain sum and the mean is `c_0`.
//!
//! The solver never touches polynomials directly: it only needs nodes, weights,
//! the table of basis values at the nodes and the squared norms. That view is
//! captured by [`GpcSpace`], implemented by the one-dimensional basis and by the
//! tensorized [`TensorBasis2D`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Probability law of the random input and its orthogonal polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[non_exhaustive]
pub enum PolynomialFamily {
    /// Uniform law on [-1, 1], Legendre polynomials `P_n`.
    Legendre,
    /// Standard Gaussian law, probabilists' Hermite polynomials `He_n`.
    Hermite,
}

impl PolynomialFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PolynomialFamily::Legendre => "legendre",
            PolynomialFamily::Hermite => "hermite",
        }
    }

    /// Support of the density.
    pub fn support(&self) -> (f64, f64) {
        match self {
            PolynomialFamily::Legendre => (-1.0, 1.0),
            PolynomialFamily::Hermite => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Probability density of the random input.
    pub fn density(&self, theta: f64) -> f64 {
        match self {
            PolynomialFamily::Legendre => {
                if (-1.0..=1.0).contains(&theta) {
                    0.5
                } else {
                    0.0
                }
            }
            PolynomialFamily::Hermite => (-0.5 * theta * theta).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Midpoint of the support (also the mean of both laws).
    pub fn center(&self) -> f64 {
        0.0
    }

    /// `‖Φ_n‖²` under the probability measure.
    pub fn sq_norm(&self, n: usize) -> f64 {
        match self {
            PolynomialFamily::Legendre => 1.0 / (2 * n + 1) as f64,
            PolynomialFamily::Hermite => (1..=n).map(|k| k as f64).product(),
        }
    }

    /// Recurrence coefficient `β_n` of the monic orthogonal polynomials
    /// (`α_n = 0` for both symmetric laws).
    fn monic_beta(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            PolynomialFamily::Legendre => n * n / (4.0 * n * n - 1.0),
            PolynomialFamily::Hermite => n,
        }
    }

    /// Fills `out[h] = Φ_h(θ)` for `h = 0..out.len()` by three-term recurrence.
    pub fn eval_into(&self, theta: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = theta;
        for n in 1..out.len() - 1 {
            let nf = n as f64;
            out[n + 1] = match self {
                PolynomialFamily::Legendre => ((2.0 * nf + 1.0) * theta * out[n] - nf * out[n - 1]) / (nf + 1.0),
                PolynomialFamily::Hermite => theta * out[n] - nf * out[n - 1],
            };
        }
    }

    /// Gauss rule with `points` nodes for the probability measure, sorted by node.
    ///
    /// Golub–Welsch for the initial nodes, then Newton polishing on the
    /// orthonormal recurrence; weights from the Christoffel function.
    pub fn gauss_rule(&self, points: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(points > 0, "gauss rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(points, points);
        for n in 1..points {
            let off = self.monic_beta(n).sqrt();
            jacobi[(n, n - 1)] = off;
            jacobi[(n - 1, n)] = off;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let weights = nodes
            .iter_mut()
            .map(|node| {
                for _ in 0..3 {
                    let (p, dp, _) = self.orthonormal_eval(*node, points);
                    if dp != 0.0 {
                        *node -= p / dp;
                    }
                }
                let (_, _, christoffel) = self.orthonormal_eval(*node, points);
                1.0 / christoffel
            })
            .collect();
        (nodes, weights)
    }

    /// Orthonormal recurrence up to degree `degree`: returns
    /// `(p_degree(θ), p'_degree(θ), Σ_{n<degree} p_n(θ)²)`.
    fn orthonormal_eval(&self, theta: f64, degree: usize) -> (f64, f64, f64) {
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        let mut sum_sq = 0.0;
        for n in 0..degree {
            sum_sq += p * p;
            let b_next = self.monic_beta(n + 1).sqrt();
            let b_cur = if n == 0 { 0.0 } else { self.monic_beta(n).sqrt() };
            let p_next = (theta * p - b_cur * p_prev) / b_next;
            let d_next = (p + theta * d - b_cur * d_prev) / b_next;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d, sum_sq)
    }
}

impl fmt::Display for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolynomialFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "legendre" | "uniform" => Ok(PolynomialFamily::Legendre),
            "hermite" | "gaussian" | "normal" => Ok(PolynomialFamily::Hermite),
            other @ ("jacobi" | "beta" | "laguerre" | "gamma" | "charlier" | "poisson") => {
                Err(Error::UnsupportedFamily(other.to_string()))
            }
            other => Err(Error::config(format!("unknown polynomial family `{other}`"))),
        }
    }
}

/// Node/weight/value view of a gPC basis, as consumed by the solver.
///
/// Mode and node indices are flat; for tensor bases they are row-major over
/// `(first, second)`.
pub trait GpcSpace: Send + Sync {
    fn n_modes(&self) -> usize;
    fn n_nodes(&self) -> usize;
    /// Quadrature weights, summing to one.
    fn weights(&self) -> &[f64];
    fn sq_norms(&self) -> &[f64];
    /// Basis values `Φ_h(θ_q)` for all modes `h` at node `q`.
    fn node_values(&self, q: usize) -> &[f64];
    /// Random-input values seen at node `q` by the alignment parameters and
    /// by the potential parameters respectively. Identical for a 1D basis.
    fn node_params(&self, q: usize) -> (f64, f64);
    /// Basis values at the center of the support.
    fn center_values(&self) -> Vec<f64>;
    /// Short label for metadata (`legendre`, `legendre x hermite`, ...).
    fn label(&self) -> String;
    /// Order label for metadata (`5`, `4x4`).
    fn order_label(&self) -> String;

    /// Normalized projection of values sampled at the nodes.
    fn project_nodes(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n_nodes() {
            return Err(Error::Dimension { expected: self.n_nodes(), got: samples.len() });
        }
        let mut coeffs = vec![0.0; self.n_modes()];
        for (q, (&w, &f)) in self.weights().iter().zip(samples).enumerate() {
            for (c, &phi) in coeffs.iter_mut().zip(self.node_values(q)) {
                *c += w * f * phi;
            }
        }
        for (c, &norm) in coeffs.iter_mut().zip(self.sq_norms()) {
            *c /= norm;
        }
        Ok(coeffs)
    }

    /// `Σ_h coeffs[h] Φ_h(θ_q)`.
    fn reconstruct_node(&self, coeffs: &[f64], q: usize) -> f64 {
        dot(coeffs, self.node_values(q))
    }

    /// Mean `c_0` and variance `Σ_{h≥1} c_h² ‖Φ_h‖²`.
    fn mean_and_variance(&self, coeffs: &[f64]) -> (f64, f64) {
        let mean = coeffs.first().copied().unwrap_or(0.0);
        let var = coeffs.iter().zip(self.sq_norms()).skip(1).map(|(c, n)| c * c * n).sum();
        (mean, var)
    }
}

/// A gPC space that can also be evaluated away from its nodes.
pub trait PointwiseBasis: GpcSpace {
    type Point: Copy;
    fn values_at(&self, point: Self::Point) -> Vec<f64>;
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-dimensional gPC basis of order `M` with its Gauss rule.
#[derive(Debug, Clone)]
pub struct GpcBasis {
    family: PolynomialFamily,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Node-major: `table[q * (order + 1) + h] = Φ_h(θ_q)`.
    table: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl GpcBasis {
    pub fn new(family: PolynomialFamily, order: usize, quad_points: usize) -> Result<Self> {
        if quad_points < order + 1 {
            return Err(Error::QuadratureInsufficient { order, points: quad_points });
        }
        let modes = order + 1;
        let (nodes, weights) = family.gauss_rule(quad_points);
        let mut table = vec![0.0; quad_points * modes];
        for (q, &theta) in nodes.iter().enumerate() {
            family.eval_into(theta, &mut table[q * modes..(q + 1) * modes]);
        }
        let sq_norms = (0..modes).map(|h| family.sq_norm(h)).collect();
        Ok(GpcBasis { family, order, nodes, weights, table, sq_norms })
    }

    /// Basis with the default `Q = 2(M + 1)` quadrature nodes.
    pub fn with_default_quadrature(family: PolynomialFamily, order: usize) -> Result<Self> {
        Self::new(family, order, default_quad_points(order))
    }

    pub fn family(&self) -> PolynomialFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn phi(&self, h: usize, q: usize) -> f64 {
        self.table[q * (self.order + 1) + h]
    }

    pub fn eval_polys(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.order + 1];
        self.family.eval_into(theta, &mut out);
        out
    }

    /// Normalized Galerkin projection of a function sampled at the nodes.
    pub fn project(&self, samples_at_nodes: &[f64]) -> Result<Vec<f64>> {
        self.project_nodes(samples_at_nodes)
    }

    /// Projection of a closure evaluated at the nodes.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let samples: Vec<f64> = self.nodes.iter().map(|&t| f(t)).collect();
        self.project_nodes(&samples).expect("sample count matches node count")
    }

    pub fn reconstruct_at(&self, coeffs: &[f64], theta: f64) -> Result<f64> {
        if coeffs.len() != self.order + 1 {
            return Err(Error::Dimension { expected: self.order + 1, got: coeffs.len() });
        }
        Ok(dot(coeffs, &self.eval_polys(theta)))
    }

    pub fn expectation_and_variance(&self, coeffs: &[f64]) -> (f64, f64) {
        self.mean_and_variance(coeffs)
    }

    /// Largest `|Σ_q w_q Φ_h Φ_k − ‖Φ_h‖² δ_hk|`, scaled by `‖Φ_h‖ ‖Φ_k‖`.
    pub fn orthogonality_residual(&self) -> f64 {
        let m = self.order + 1;
        let mut worst: f64 = 0.0;
        for h in 0..m {
            for k in 0..m {
                let gram: f64 = (0..self.nodes.len()).map(|q| self.weights[q] * self.phi(h, q) * self.phi(k, q)).sum();
                let target = if h == k { self.sq_norms[h] } else { 0.0 };
                let scale = (self.sq_norms[h] * self.sq_norms[k]).sqrt();
                worst = worst.max((gram - target).abs() / scale);
            }
        }
        worst
    }
}

pub fn default_quad_points(order: usize) -> usize {
    2 * (order + 1)
}

impl GpcSpace for GpcBasis {
    fn n_modes(&self) -> usize {
        self.order + 1
    }

    fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    fn node_values(&self, q: usize) -> &[f64] {
        let m = self.order + 1;
        &self.table[q * m..(q + 1) * m]
    }

    fn node_params(&self, q: usize) -> (f64, f64) {
        (self.nodes[q], self.nodes[q])
    }

    fn center_values(&self) -> Vec<f64> {
        self.eval_polys(self.family.center())
    }

    fn label(&self) -> String {
        self.family.name().to_string()
    }

    fn order_label(&self) -> String {
        self.order.to_string()
    }
}

impl PointwiseBasis for GpcBasis {
    type Point = f64;

    fn values_at(&self, theta: f64) -> Vec<f64> {
        self.eval_polys(theta)
    }
}

/// Product basis `Φ_k(θ₁) Ψ_h(θ₂)` for two independent random inputs.
///
/// Flat mode index is `k * (M₂ + 1) + h`, flat node index `q₁ * Q₂ + q₂`.
#[derive(Debug, Clone)]
pub struct TensorBasis2D {
    basis1: GpcBasis,
    basis2: GpcBasis,
    weights: Vec<f64>,
    table: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl TensorBasis2D {
    pub fn new(basis1: GpcBasis, basis2: GpcBasis) -> Self {
        let (m1, m2) = (basis1.n_modes(), basis2.n_modes());
        let (q1n, q2n) = (basis1.n_nodes(), basis2.n_nodes());
        let modes = m1 * m2;
        let mut weights = Vec::with_capacity(q1n * q2n);
        let mut table = vec![0.0; q1n * q2n * modes];
        for q1 in 0..q1n {
            for q2 in 0..q2n {
                let q = q1 * q2n + q2;
                weights.push(basis1.weights()[q1] * basis2.weights()[q2]);
                let row = &mut table[q * modes..(q + 1) * modes];
                for k in 0..m1 {
                    for h in 0..m2 {
                        row[k * m2 + h] = basis1.phi(k, q1) * basis2.phi(h, q2);
                    }
                }
            }
        }
        let mut sq_norms = Vec::with_capacity(modes);
        for k in 0..m1 {
            for h in 0..m2 {
                sq_norms.push(basis1.sq_norms()[k] * basis2.sq_norms()[h]);
            }
        }
        TensorBasis2D { basis1, basis2, weights, table, sq_norms }
    }

    pub fn basis1(&self) -> &GpcBasis {
        &self.basis1
    }

    pub fn basis2(&self) -> &GpcBasis {
        &self.basis2
    }

    pub fn mode_index(&self, k: usize, h: usize) -> usize {
        k * self.basis2.n_modes() + h
    }

    /// Splits a flat mode index into `(k, h)`.
    pub fn mode_pair(&self, mode: usize) -> (usize, usize) {
        let m2 = self.basis2.n_modes();
        (mode / m2, mode % m2)
    }
}

impl GpcSpace for TensorBasis2D {
    fn n_modes(&self) -> usize {
        self.sq_norms.len()
    }

    fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    fn node_values(&self, q: usize) -> &[f64] {
        let m = self.sq_norms.len();
        &self.table[q * m..(q + 1) * m]
    }

    fn node_params(&self, q: usize) -> (f64, f64) {
        let q2n = self.basis2.n_nodes();
        (self.basis1.nodes()[q / q2n], self.basis2.nodes()[q % q2n])
    }

    fn center_values(&self) -> Vec<f64> {
        self.values_at((self.basis1.family().center(), self.basis2.family().center()))
    }

    fn label(&self) -> String {
        format!("{} x {}", self.basis1.family(), self.basis2.family())
    }

    fn order_label(&self) -> String {
        format!("{}x{}", self.basis1.order(), self.basis2.order())
    }
}

impl PointwiseBasis for TensorBasis2D {
    type Point = (f64, f64);

    fn values_at(&self, (t1, t2): (f64, f64)) -> Vec<f64> {
        let a = self.basis1.eval_polys(t1);
        let b = self.basis2.eval_polys(t2);
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    }
}

/// Random-input model of a simulation: one scalar input, or two independent ones.
#[derive(Debug, Clone)]
pub enum Uncertainty {
    OneD(GpcBasis),
    /// Alignment parameters depend on the first input, potential strengths
    /// on the second.
    TwoD(TensorBasis2D),
}

impl Uncertainty {
    pub fn space(&self) -> &dyn GpcSpace {
        match self {
            Uncertainty::OneD(b) => b,
            Uncertainty::TwoD(t) => t,
        }
    }

    /// Nodes seen by the alignment parameters.
    pub fn alignment_nodes(&self) -> &[f64] {
        match self {
            Uncertainty::OneD(b) => b.nodes(),
            Uncertainty::TwoD(t) => t.basis1().nodes(),
        }
    }

    /// Nodes seen by the potential parameters.
    pub fn potential_nodes(&self) -> &[f64] {
        match self {
            Uncertainty::OneD(b) => b.nodes(),
            Uncertainty::TwoD(t) => t.basis2().nodes(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Composite Simpson on [-1, 1] against the uniform density; independent of Gauss rules.
    fn uniform_expectation(f: impl Fn(f64) -> f64) -> f64 {
        let n = 20_000;
        let h = 2.0 / n as f64;
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0 * 0.5
    }

    /// Simpson on [-12, 12] against the standard normal density.
    fn gaussian_expectation(f: impl Fn(f64) -> f64) -> f64 {
        let n = 40_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let g = |x: f64| f(x) * PolynomialFamily::Hermite.density(x);
        let mut s = g(a) + g(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        s * h / 3.0
    }

    #[test]
    fn constant_basis() {
        let b = GpcBasis::new(PolynomialFamily::Legendre, 0, 1).unwrap();
        assert_eq!(b.sq_norms(), &[1.0]);
        assert_abs_diff_eq!(b.reconstruct_at(&[3.5], 0.77).unwrap(), 3.5);
        assert_abs_diff_eq!(b.weights()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_norms_match_quadrature_oracle() {
        let b = GpcBasis::new(PolynomialFamily::Legendre, 3, 8).unwrap();
        let expected = [1.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0];
        for (h, &e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(b.sq_norms()[h], e, epsilon = 1e-15);
            let oracle = uniform_expectation(|t| b.eval_polys(t)[h].powi(2));
            assert_abs_diff_eq!(oracle, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn hermite_norms_match_quadrature_oracle() {
        let b = GpcBasis::new(PolynomialFamily::Hermite, 2, 6).unwrap();
        assert_eq!(b.sq_norms(), &[1.0, 1.0, 2.0]);
        for h in 0..3 {
            let oracle = gaussian_expectation(|t| b.eval_polys(t)[h].powi(2));
            assert_abs_diff_eq!(oracle, b.sq_norms()[h], epsilon = 1e-9);
        }
    }

    #[test]
    fn weights_sum_to_one_and_orthogonality_holds() {
        for family in [PolynomialFamily::Legendre, PolynomialFamily::Hermite] {
            for order in [0, 1, 4, 10, 20] {
                let b = GpcBasis::with_default_quadrature(family, order).unwrap();
                let total: f64 = b.weights().iter().sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                assert!(b.weights().iter().all(|&w| w >= 0.0));
                assert!(b.orthogonality_residual() < 1e-10, "{family} M={order}");
            }
        }
    }

    #[test]
    fn gauss_rule_is_exact_to_degree_2q_minus_1() {
        let (nodes, weights) = PolynomialFamily::Legendre.gauss_rule(5);
        for deg in 0..10 {
            let quad: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * t.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 1.0 / (deg as f64 + 1.0) };
            assert_abs_diff_eq!(quad, exact, epsilon = 1e-14);
        }
        let (nodes, weights) = PolynomialFamily::Hermite.gauss_rule(4);
        // E[θ^6] = 15 for a standard normal
        let m6: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * t.powi(6)).sum();
        assert_abs_diff_eq!(m6, 15.0, epsilon = 1e-11);
    }

    #[test]
    fn insufficient_quadrature_is_rejected() {
        let err = GpcBasis::new(PolynomialFamily::Legendre, 4, 4).unwrap_err();
        assert!(matches!(err, Error::QuadratureInsufficient { order: 4, points: 4 }));
    }

    #[test]
    fn unsupported_families() {
        assert!(matches!("jacobi".parse::<PolynomialFamily>(), Err(Error::UnsupportedFamily(_))));
        assert!(matches!("charlier".parse::<PolynomialFamily>(), Err(Error::UnsupportedFamily(_))));
        assert!(matches!("spline".parse::<PolynomialFamily>(), Err(Error::Config(_))));
        assert_eq!("Uniform".parse::<PolynomialFamily>().unwrap(), PolynomialFamily::Legendre);
    }

    #[test]
    fn projection_examples() {
        let b1 = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 1).unwrap();
        let c = b1.project_fn(|t| t);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-14);

        let b2 = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 2).unwrap();
        let c = b2.project_fn(|t| t * t);
        // oracle: E[θ²] and E[θ² P₂]/‖P₂‖² by Simpson
        let c0 = uniform_expectation(|t| t * t);
        let c2 = uniform_expectation(|t| t * t * 0.5 * (3.0 * t * t - 1.0)) * 5.0;
        assert_abs_diff_eq!(c[0], c0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[2], c2, epsilon = 1e-10);
        assert_abs_diff_eq!(c[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[2], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b2.reconstruct_at(&c, 0.5).unwrap(), 0.25, epsilon = 1e-14);

        let bh = GpcBasis::with_default_quadrature(PolynomialFamily::Hermite, 4).unwrap();
        let c = bh.project_fn(|_| 2.5);
        assert_abs_diff_eq!(c[0], 2.5, epsilon = 1e-13);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn projection_length_mismatch() {
        let b = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 2).unwrap();
        assert!(matches!(b.project(&[1.0, 2.0]), Err(Error::Dimension { expected: 6, got: 2 })));
        assert!(matches!(b.reconstruct_at(&[1.0], 0.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn moments_examples() {
        let b = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 2).unwrap();
        assert_eq!(b.expectation_and_variance(&[5.0, 0.0, 0.0]), (5.0, 0.0));
        let bl = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 1).unwrap();
        let (m, v) = bl.expectation_and_variance(&[0.0, 1.0]);
        assert_eq!(m, 0.0);
        assert_abs_diff_eq!(v, uniform_expectation(|t| t * t), epsilon = 1e-10);
        let bh = GpcBasis::with_default_quadrature(PolynomialFamily::Hermite, 1).unwrap();
        let (m, v) = bh.expectation_and_variance(&[1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_abs_diff_eq!(v, gaussian_expectation(|t| t * t), epsilon = 1e-9);
    }

    #[test]
    fn tensor_basis_layout() {
        let b1 = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 2).unwrap();
        let b2 = GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, 3).unwrap();
        let t = TensorBasis2D::new(b1.clone(), b2.clone());
        assert_eq!(t.n_modes(), 12);
        assert_eq!(t.n_nodes(), b1.n_nodes() * b2.n_nodes());
        assert_abs_diff_eq!(t.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let mode = t.mode_index(2, 1);
        assert_eq!(t.mode_pair(mode), (2, 1));
        assert_abs_diff_eq!(t.sq_norms()[mode], 1.0 / 5.0 / 3.0, epsilon = 1e-15);
        // θ₁ θ₂ projects onto the single mode (1, 1)
        let samples: Vec<f64> = (0..t.n_nodes())
            .map(|q| {
                let (a, b) = t.node_params(q);
                a * b
            })
            .collect();
        let c = t.project_nodes(&samples).unwrap();
        for (m, v) in c.iter().enumerate() {
            let expected = if m == t.mode_index(1, 1) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-13);
        }
    }
}
