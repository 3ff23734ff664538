//! Uncertain parameters, swarming force laws and analytic flocking criteria.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A model parameter as a function of the random input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UncertainScalar {
    Constant(f64),
    /// `c0 + c1 θ`
    Affine {
        c0: f64,
        c1: f64,
    },
}

impl UncertainScalar {
    pub fn affine(c0: f64, c1: f64) -> Self {
        if c1 == 0.0 {
            UncertainScalar::Constant(c0)
        } else {
            UncertainScalar::Affine { c0, c1 }
        }
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            UncertainScalar::Constant(c) => c,
            UncertainScalar::Affine { c0, c1 } => c0 + c1 * theta,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, UncertainScalar::Constant(_))
    }

    /// Expected value under a law with zero mean.
    pub fn mean(&self) -> f64 {
        match *self {
            UncertainScalar::Constant(c) => c,
            UncertainScalar::Affine { c0, .. } => c0,
        }
    }

    pub fn min_over(&self, nodes: &[f64]) -> f64 {
        nodes.iter().map(|&t| self.eval(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_over(&self, nodes: &[f64]) -> f64 {
        nodes.iter().map(|&t| self.eval(t)).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<f64> for UncertainScalar {
    fn from(c: f64) -> Self {
        UncertainScalar::Constant(c)
    }
}

impl fmt::Display for UncertainScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UncertainScalar::Constant(c) => write!(f, "{c:?}"),
            UncertainScalar::Affine { c0, c1 } if c1 < 0.0 => write!(f, "{c0:?} - {:?}*theta", -c1),
            UncertainScalar::Affine { c0, c1 } => write!(f, "{c0:?} + {c1:?}*theta"),
        }
    }
}

/// Parses affine expressions such as `1.0 + 0.25*theta`, `30+theta`,
/// `-0.5θ + 2` or a bare number.
impl FromStr for UncertainScalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::config(format!("cannot parse uncertain scalar `{s}`: {why}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad("empty expression"));
        }

        // split into signed terms, keeping exponent signs (1e-3) attached
        let chars: Vec<char> = compact.chars().collect();
        let mut terms = Vec::new();
        let mut start = 0;
        for idx in 1..chars.len() {
            if (chars[idx] == '+' || chars[idx] == '-') && !matches!(chars[idx - 1], 'e' | 'E' | '*' | '+' | '-') {
                terms.push(chars[start..idx].iter().collect::<String>());
                start = idx;
            }
        }
        terms.push(chars[start..].iter().collect::<String>());

        let (mut c0, mut c1) = (0.0, 0.0);
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, term.strip_prefix('+').unwrap_or(&term)),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let body = body.replace('θ', "theta");
            if body.contains("theta") {
                let factor = body.replace("theta", "");
                let factor = factor.trim_matches('*');
                let value = if factor.is_empty() {
                    1.0
                } else if factor.contains('*') {
                    return Err(bad("only affine expressions in theta are supported"));
                } else {
                    factor.parse::<f64>().map_err(|_| bad("invalid coefficient"))?
                };
                if body.matches("theta").count() > 1 {
                    return Err(bad("only affine expressions in theta are supported"));
                }
                c1 += sign * value;
            } else {
                c0 += sign * body.parse::<f64>().map_err(|_| bad("invalid number"))?;
            }
        }
        if !c0.is_finite() || !c1.is_finite() {
            return Err(bad("non-finite coefficient"));
        }
        Ok(UncertainScalar::affine(c0, c1))
    }
}

/// Cucker–Smale alignment strength `K(θ)` and decay exponent `γ(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuckerSmaleParams {
    pub k: UncertainScalar,
    pub gamma: UncertainScalar,
}

impl CuckerSmaleParams {
    /// Checks `K > 0` and `γ ≥ 0` at every node of the random input.
    pub fn new(k: UncertainScalar, gamma: UncertainScalar, nodes: &[f64]) -> Result<Self> {
        if let Some(&t) = nodes.iter().find(|&&t| !(k.eval(t) > 0.0)) {
            return Err(Error::config(format!(
                "alignment strength K must be positive on the support, K({t}) = {}",
                k.eval(t)
            )));
        }
        if let Some(&t) = nodes.iter().find(|&&t| !(gamma.eval(t) >= 0.0)) {
            return Err(Error::config(format!(
                "kernel exponent gamma must be nonnegative, gamma({t}) = {}",
                gamma.eval(t)
            )));
        }
        Ok(CuckerSmaleParams { k, gamma })
    }

    /// `K(θ) / (1 + r²)^γ(θ)`.
    #[inline]
    pub fn kernel(&self, theta: f64, r_sq: f64) -> f64 {
        cs_kernel_value(self.k.eval(theta), self.gamma.eval(theta), r_sq)
    }

    /// True when the kernel does not depend on positions at all (`γ ≡ 0`).
    pub fn is_position_independent(&self) -> bool {
        self.gamma == UncertainScalar::Constant(0.0)
    }
}

#[inline]
pub(crate) fn cs_kernel_value(k: f64, gamma: f64, r_sq: f64) -> f64 {
    if gamma == 0.0 {
        k
    } else {
        k * (1.0 + r_sq).powf(-gamma)
    }
}

/// D'Orsogna–Bertozzi self-propulsion and Morse-potential parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseSwarmParams {
    pub a: f64,
    pub b: f64,
    pub c_a: UncertainScalar,
    pub c_r: UncertainScalar,
    pub ell_a: f64,
    pub ell_r: f64,
}

impl MorseSwarmParams {
    pub fn new(a: f64, b: f64, c_a: UncertainScalar, c_r: UncertainScalar, ell_a: f64, ell_r: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::config(format!("self-propulsion a={a} and friction b={b} must be >= 0")));
        }
        if !(ell_a > 0.0 && ell_r > 0.0) {
            return Err(Error::config(format!(
                "attraction/repulsion lengths must be positive (ell_a={ell_a}, ell_r={ell_r})"
            )));
        }
        Ok(MorseSwarmParams { a, b, c_a, c_r, ell_a, ell_r })
    }

    /// `U(θ; r) = −C_A e^{−r/ℓ_A} + C_R e^{−r/ℓ_R}`.
    pub fn potential(&self, theta: f64, r: f64) -> f64 {
        -self.c_a.eval(theta) * (-r / self.ell_a).exp() + self.c_r.eval(theta) * (-r / self.ell_r).exp()
    }

    /// `∂U/∂r`.
    pub fn potential_derivative(&self, theta: f64, r: f64) -> f64 {
        morse_derivative(self.c_a.eval(theta), self.c_r.eval(theta), self.ell_a, self.ell_r, r)
    }

    /// Force on particle `i` from particle `j`, `−∇_{x_i} U(θ; |dx|)` with
    /// `dx = x_i − x_j`. Zero at coincident positions.
    pub fn force(&self, theta: f64, dx: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; dx.len()];
        morse_force_into(self.c_a.eval(theta), self.c_r.eval(theta), self.ell_a, self.ell_r, dx, &mut out);
        out
    }

    /// `(a − b|v|²) v`.
    pub fn self_propulsion(&self, v: &[f64]) -> Vec<f64> {
        let speed_sq: f64 = v.iter().map(|x| x * x).sum();
        v.iter().map(|x| (self.a - self.b * speed_sq) * x).collect()
    }

    /// `C(θ) = C_R(θ) / C_A(θ)`.
    pub fn strength_ratio(&self, theta: f64) -> f64 {
        self.c_r.eval(theta) / self.c_a.eval(theta)
    }

    /// `ℓ = ℓ_R / ℓ_A`.
    pub fn length_ratio(&self) -> f64 {
        self.ell_r / self.ell_a
    }

    /// `C(θ) ℓ^{2d} < 1`: mills rather than crystalline equilibria.
    pub fn mill_regime(&self, theta: f64, dim: usize) -> bool {
        self.strength_ratio(theta) * self.length_ratio().powi(2 * dim as i32) < 1.0
    }

    /// Asymptotic cruising speed `√(a/b)`, if friction is present.
    pub fn cruise_speed(&self) -> Option<f64> {
        (self.b > 0.0).then(|| (self.a / self.b).sqrt())
    }
}

#[inline]
pub(crate) fn morse_derivative(c_a: f64, c_r: f64, ell_a: f64, ell_r: f64, r: f64) -> f64 {
    c_a / ell_a * (-r / ell_a).exp() - c_r / ell_r * (-r / ell_r).exp()
}

#[inline]
pub(crate) fn morse_force_into(c_a: f64, c_r: f64, ell_a: f64, ell_r: f64, dx: &[f64], out: &mut [f64]) {
    let r = dx.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let scale = -morse_derivative(c_a, c_r, ell_a, ell_r, r) / r;
    for (o, x) in out.iter_mut().zip(dx) {
        *o = scale * x;
    }
}

/// Outcome of the deterministic Cucker–Smale flocking theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlockingVerdict {
    /// `γ ≤ 1/2`: flocking for every initial configuration.
    Unconditional,
    /// `γ > 1/2` and the initial-data condition holds. `already_aligned` flags
    /// the degenerate case of identical initial velocities.
    ConditionalSatisfied {
        already_aligned: bool,
    },
    ConditionalViolated,
}

/// Evaluates the flocking condition for `γ > 1/2`
///
/// ```text
/// [(1/2γ)^{1/(2γ−1)} − (1/2γ)^{2γ/(2γ−1)}] (K² / (8 N² Λ₀))^{1/(2γ−1)} > 2 Γ₀ + 1
/// ```
///
/// with `Γ₀ = ½ Σ_{i≠j} |x_i − x_j|²` and `Λ₀ = ½ Σ_{i≠j} |v_i − v_j|²`.
pub fn flocking_criterion(gamma: f64, k: f64, n: usize, gamma0: f64, lambda0: f64) -> Result<FlockingVerdict> {
    if !(k > 0.0) || n < 2 || !(gamma0 >= 0.0) || !(lambda0 >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::config(format!(
            "flocking criterion needs K>0, N>=2, Gamma0>=0, Lambda0>=0, gamma>=0 \
             (got K={k}, N={n}, Gamma0={gamma0}, Lambda0={lambda0}, gamma={gamma})"
        )));
    }
    if gamma <= 0.5 {
        return Ok(FlockingVerdict::Unconditional);
    }
    if lambda0 == 0.0 {
        return Ok(FlockingVerdict::ConditionalSatisfied { already_aligned: true });
    }
    let expo = 1.0 / (2.0 * gamma - 1.0);
    let base = 1.0 / (2.0 * gamma);
    let prefactor = base.powf(expo) - base.powf(2.0 * gamma * expo);
    let nf = n as f64;
    let lhs = prefactor * (k * k / (8.0 * nf * nf * lambda0)).powf(expo);
    Ok(if lhs > 2.0 * gamma0 + 1.0 {
        FlockingVerdict::ConditionalSatisfied { already_aligned: false }
    } else {
        FlockingVerdict::ConditionalViolated
    })
}

/// Sufficient condition for unconditional flocking of the kernel linearized
/// around a deterministic exponent `γ₀ ≤ 1/2`: `γ(θ) < γ₀` at every node.
///
/// Returns `false` when `γ₀ > 1/2`, where the linearization argument does not apply.
pub fn linearized_flocking_check(gamma: &UncertainScalar, gamma0: f64, nodes: &[f64]) -> bool {
    gamma0 <= 0.5 && nodes.iter().all(|&t| gamma.eval(t) < gamma0)
}
