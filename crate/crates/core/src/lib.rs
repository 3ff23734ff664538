//! Monte Carlo generalized polynomial chaos (MC-gPC) simulation of swarming
//! models with random inputs.
//!
//! Each particle's position and velocity are expanded in a gPC basis of the
//! random input; interactions are evaluated against a random subsample of
//! partners per step. See [`solver`] for the time integration,
//! [`pde_oracle`] for the mean-field reference solver and [`diagnostics`]
//! for the observables.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod gpc_basis;
pub mod models;
pub mod pde_oracle;
pub mod solver;

pub use diagnostics::{
    compute_stats, convergence_error, expected_temperature, flocking_spreads, observable_uq,
    reconstruct_expected_density, velocity_field, write_stats_csv, Axis, DensityGrid, DensityKind, ErrorMode,
    StatRecord, VelocityField,
};
pub use ensemble::{sample_initial, GpcEnsemble, InitialCondition, SnapshotMeta};
pub use error::{Error, Result};
pub use gpc_basis::{
    default_quad_points, GpcBasis, GpcSpace, PointwiseBasis, PolynomialFamily, TensorBasis2D, Uncertainty,
};
pub use models::{
    flocking_criterion, linearized_flocking_check, CuckerSmaleParams, FlockingVerdict, MorseSwarmParams,
    UncertainScalar,
};
pub use pde_oracle::{
    oracle_expected_temperature, sg_homogeneous_solve, sg_homogeneous_solve_with, SgDensity, SgOptions, VelocityGrid,
};
pub use solver::{
    interaction_coeffs, mcgpc_velocity_rhs, run, run_from, step, Integrator, ModelSpec, Observer, ResamplePolicy,
    Solver, SolverConfig,
};
