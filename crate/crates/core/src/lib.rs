//! Numerical laboratory for the Dirichlet fractional p-Laplacian with a
//! concave-convex right-hand side λ|u|^{q-2}u + |u|^{p*-2}u on bounded
//! interval/rectangle domains.
//!
//! The crate discretizes the Gagliardo double integral on cell-centered
//! uniform grids (exterior handled through analytic/polar tail weights),
//! evaluates the associated variational energies, and drives the solver
//! stack built on top of them: torsion function, first eigenpair, the purely
//! concave problem, monotone sub/supersolution iteration, minimal positive
//! solutions, extremal-parameter bracketing, mountain-pass paths and levels,
//! and genus-based minimax upper bounds.
//!
//! Layout follows the pipeline:
//!
//! - [`grid`]: domains, grids, grid functions, quadrature and norms;
//! - [`kernel`]: the discrete nonlocal form, tail weights, radial reduction;
//! - [`bubbles`]: the extremal profile, its rescalings and truncations;
//! - [`energy`]: all energy functionals, gradients and diagnostics;
//! - [`solvers`]: descent solvers, iteration schemes and minimax machinery;
//! - [`verify`]: standalone numerical checks of the elementary inequalities.

pub mod bubbles;
pub mod energy;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Domain, Grid, GridFunction, ProblemParams};
