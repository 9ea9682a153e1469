//! Simulation and verification of gradient estimates for the nonlinear diffusion
//! equation `u_t = ΔF(u)` on model geometries.
//!
//! The crate is organised bottom-up:
//!
//! * [`nonlinearity`]: `F`, the potential `G`, and the admissibility constants.
//! * [`matrix_lemma`]: the symmetric-matrix inequality behind the coefficient bound.
//! * [`geometry`]: 1D and radial constant-curvature grids with a discrete Laplacian.
//! * [`solver`]: implicit time stepping and exact reference solutions.
//! * [`estimates`]: the Harnack quantity, the differential inequality, the
//!   localized bound ratios and the Liouville sweep.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod geometry;
pub mod matrix_lemma;
pub mod nonlinearity;
pub mod solver;

pub use error::{Error, Result};
pub use estimates::{
    EstimateReport, HarnackFields, InequalityResidualReport, SweepRow, SweepSchedule, SweepTable, Window,
};
pub use geometry::{Cutoff, Field, GeometryKind, ModelGeometry};
pub use matrix_lemma::SymMatrix;
pub use nonlinearity::{ConditionReport, Nonlinearity, PinchReport, ValueRange};
pub use solver::{BoundaryCondition, ExactSolution, SolverConfig, Trajectory};
