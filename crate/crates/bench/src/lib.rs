//! Shared fixtures for the benchmarks.

use mcgpc_core::{
    sample_initial, CuckerSmaleParams, GpcBasis, GpcEnsemble, InitialCondition, ModelSpec, MorseSwarmParams,
    PolynomialFamily, UncertainScalar, Uncertainty,
};

pub fn legendre(order: usize) -> GpcBasis {
    GpcBasis::with_default_quadrature(PolynomialFamily::Legendre, order).expect("valid order")
}

/// 1D alignment model with `K = 1 + 0.5θ` and the given `γ`.
pub fn alignment_1d(order: usize, gamma: UncertainScalar) -> ModelSpec {
    let basis = legendre(order);
    let cs = CuckerSmaleParams::new(UncertainScalar::affine(1.0, 0.5), gamma, basis.nodes()).expect("valid kernel");
    ModelSpec::new(Some(cs), None, Uncertainty::OneD(basis)).expect("valid model")
}

/// 2D attraction-repulsion swarm with random strengths.
pub fn mill_2d(order: usize) -> ModelSpec {
    let morse = MorseSwarmParams::new(
        1.4,
        1.0,
        UncertainScalar::affine(30.0, 1.0),
        UncertainScalar::affine(10.0, 1.0),
        100.0,
        3.0,
    )
    .expect("valid potential");
    ModelSpec::new(None, Some(morse), Uncertainty::OneD(legendre(order))).expect("valid model")
}

pub fn initial(ic: &InitialCondition, n: usize, spec: &ModelSpec) -> GpcEnsemble {
    sample_initial(ic, n, 1, spec.space().n_modes()).expect("valid initial condition")
}
