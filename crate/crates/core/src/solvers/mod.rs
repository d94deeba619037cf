//! Variational solvers: torsion function, first eigenpair, the purely
//! concave problem, monotone sub/supersolution iteration, minimal positive
//! solutions, extremal-parameter bracketing, mountain-pass machinery and
//! genus minimax upper bounds.
//!
//! Every solver is a single-threaded deterministic state machine; two solver
//! instances never share mutable state. The inner minimizer is gradient
//! descent with a Barzilai-Borwein step and Armijo backtracking on the
//! integrated nodal gradient.

mod descent;
mod elliptic;
mod genus;
mod lambda;
mod monotone;
mod path;

pub use elliptic::{first_eigenpair, solve_dirichlet, solve_dirichlet_from, solve_q, torsion};
pub use genus::{genus_diagnostics, genus_level_upper, genus_levels_upper, GenusLevel};
pub use lambda::{estimate_lambda, LambdaBracket, ProbeClass};
pub use monotone::{minimal_solution, monotone_iteration, newton_polish, polish_critical};
pub use path::{mountain_pass_solve, path_csv, path_profile, PathProfile};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::GridFunction;

/// Termination classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
    /// Iterates crossed the blow-up threshold.
    Diverged,
    /// Budget exhausted while the iterates were still growing.
    Inconclusive,
    /// Mountain-pass path collapsed onto the starting local minimizer.
    NoSecondSolution,
}

/// Outcome of a solver run. `converged` implies the reported `grad_norm`
/// met the configured tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    pub iterations: usize,
    pub grad_norm: f64,
    pub energy: f64,
    pub converged: bool,
    pub status: SolveStatus,
    pub diagnostics: BTreeMap<String, f64>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_else(|_| "{}".into())
    }
}

/// Shared solver configuration. Tolerances are relative to a per-problem
/// residual scale; budgets bound iteration counts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// Relative gradient tolerance of the inner minimizer.
    pub tol_rel: f64,
    /// Inner iteration budget.
    pub max_inner: usize,
    /// Outer (monotone) iteration budget.
    pub max_outer: usize,
    /// Outer fixed-point tolerance on sup|u_{j+1} - u_j| relative to sup|u|.
    pub outer_tol: f64,
    /// Iterates are declared divergent when their weighted sup norm exceeds
    /// this multiple of the torsion-function scale.
    pub blowup_factor: f64,
    /// Number of discrete points on the mountain-pass path.
    pub path_points: usize,
    /// Mountain-pass sweep budget.
    pub max_sweeps: usize,
    /// Mountain-pass gradient tolerance (relative to 1 + |energy|).
    pub mp_tol: f64,
    /// Sampling seed for the stochastic verifiers and the genus sphere sets.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            max_inner: 100_000,
            max_outer: 200,
            outer_tol: 1e-11,
            blowup_factor: 1e3,
            path_points: 33,
            max_sweeps: 20_000,
            mp_tol: 1e-6,
            seed: 0x5eed,
        }
    }
}
