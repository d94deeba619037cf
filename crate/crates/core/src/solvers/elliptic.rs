//! Single-equation solvers: the Dirichlet problem with a fixed right-hand
//! side (torsion function as the special case f ≡ 1), the first eigenpair by
//! projected descent, and the purely concave problem.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::energy::Problem;
use crate::error::Result;
use crate::grid::GridFunction;
use crate::kernel::j_map;

use super::descent::{minimize, FnObjective};
use super::{SolveReport, SolveStatus, SolverOptions};

/// Minimize (1/p)‖u‖^p - ∫ f u, i.e. solve the weak equation with right-hand
/// side f, starting from zero.
pub fn solve_dirichlet(pr: &Problem, f: &GridFunction, opts: &SolverOptions) -> Result<SolveReport> {
    let zero = GridFunction::zeros(Arc::clone(&pr.grid));
    solve_dirichlet_from(pr, f, &zero, opts)
}

/// Same as [`solve_dirichlet`] but warm-started from `u0`.
pub fn solve_dirichlet_from(
    pr: &Problem,
    f: &GridFunction,
    u0: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if !f.same_grid(u0) {
        return Err(crate::error::Error::GridMismatch);
    }
    let w = pr.grid.weight();
    let fvals: Vec<f64> = f.values().to_vec();
    let p = pr.params.p;
    let kernel = &pr.kernel;
    let grid = Arc::clone(&pr.grid);
    let grid_g = Arc::clone(&pr.grid);
    let fv = fvals.clone();
    let obj = FnObjective {
        value_fn: move |x: &[f64]| {
            let u = GridFunction::from_values(Arc::clone(&grid), x.to_vec()).unwrap();
            let mut lin = 0.0;
            for (xi, fi) in x.iter().zip(&fvals) {
                lin += w * fi * xi;
            }
            kernel.gagliardo_p(&u) / p - lin
        },
        grad_fn: move |x: &[f64]| {
            let u = GridFunction::from_values(Arc::clone(&grid_g), x.to_vec()).unwrap();
            let mut g = kernel.operator_gradient(&u);
            for (gi, fi) in g.values_mut().iter_mut().zip(&fv) {
                *gi -= w * fi;
            }
            g.values().to_vec()
        },
    };
    let f_norm = f.lr_norm(2.0)?;
    let tol_abs = opts.tol_rel * f_norm.max(1e-300);
    // step scale from the quadratic Gershgorin curvature bound, adjusted for
    // the p-homogeneous growth at the expected solution amplitude
    let step0 = initial_step(pr, f_norm.max(1e-300));
    let out = minimize(&obj, u0.values().to_vec(), w, tol_abs, opts.max_inner, step0);
    let solution = GridFunction::from_values(Arc::clone(&pr.grid), out.x)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("min_value".into(), solution.min_value());
    diagnostics.insert("max_value".into(), solution.max_value());
    diagnostics.insert("rhs_l2".into(), f_norm);
    Ok(SolveReport {
        solution,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        energy: out.value,
        converged: out.converged,
        status: if out.converged { SolveStatus::Converged } else { SolveStatus::BudgetExhausted },
        diagnostics,
    })
}

/// Stable explicit step 1/λ_max for the quadratic proxy of the energy
/// Hessian, rescaled by the p-growth at amplitude `scale^{1/(p-1)}`.
fn initial_step(pr: &Problem, rhs_scale: f64) -> f64 {
    let bound = pr.kernel.quad_gershgorin_bound();
    let p = pr.params.p;
    if p == 2.0 {
        1.0 / bound
    } else {
        // amplitude at which the p-Laplacian balances the right-hand side
        let amp = rhs_scale.powf(1.0 / (p - 1.0)).max(1e-12);
        1.0 / (bound * (p - 1.0) * amp.powf(p - 2.0))
    }
}

/// Torsion function: the solution for f ≡ 1, cached on the problem since it
/// serves as the universal supersolution scale.
pub fn torsion<'a>(pr: &'a Problem, opts: &SolverOptions) -> &'a GridFunction {
    pr.torsion_cache.get_or_init(|| {
        let one = GridFunction::constant(Arc::clone(&pr.grid), 1.0);
        solve_dirichlet(pr, &one, opts)
            .map(|rep| rep.solution)
            .unwrap_or_else(|_| GridFunction::zeros(Arc::clone(&pr.grid)))
    })
}

/// First eigenpair of the operator: minimize ‖u‖^p over |u|_p = 1 by
/// projected descent with positivity projection; the eigenfunction is
/// rescaled to unit sup norm.
pub fn first_eigenpair(pr: &Problem, opts: &SolverOptions) -> (f64, SolveReport) {
    let p = pr.params.p;
    let s = pr.params.s;
    let w = pr.grid.weight();
    // positive initial shape with the right boundary decay
    let mut u = GridFunction::from_fn(Arc::clone(&pr.grid), |x| {
        pr.grid.domain().boundary_distance(x).powf(s)
    });
    let normalize = |u: &GridFunction| {
        let n = u.lr_norm(p).expect("p >= 1");
        u.scale(1.0 / n)
    };
    u = normalize(&u);

    let rayleigh = |u: &GridFunction| pr.kernel.gagliardo_p(u); // |u|_p = 1
    let mut lam = rayleigh(&u);
    let mut alpha = 1.0 / pr.kernel.quad_gershgorin_bound();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0usize;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < opts.max_inner {
        let g_semi = pr.kernel.operator_gradient(&u);
        let residual: Vec<f64> = g_semi
            .values()
            .iter()
            .zip(u.values())
            .map(|(&g, &v)| g - lam * w * j_map(v, p))
            .collect();
        grad_norm = (residual.iter().map(|r| r * r / w).sum::<f64>()).sqrt();
        let tol_abs = opts.tol_rel * lam.max(1e-300);
        if grad_norm <= tol_abs {
            converged = true;
            break;
        }
        if let Some((px, pres)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..residual.len() {
                let sv = u.values()[i] - px[i];
                let yv = residual[i] - pres[i];
                ss += sv * sv;
                sy += sv * yv;
            }
            if sy > 0.0 {
                alpha = (ss / sy).clamp(1e-300, 1e300);
            }
        }
        let mut step = alpha;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = GridFunction::from_values(
                Arc::clone(&pr.grid),
                u.values()
                    .iter()
                    .zip(&residual)
                    .map(|(&v, &r)| (v - step * r).abs())
                    .collect(),
            )
            .unwrap();
            let trial = normalize(&trial);
            let lam_trial = rayleigh(&trial);
            if lam_trial <= lam * (1.0 + 1e-14) {
                prev = Some((u.values().to_vec(), residual.clone()));
                u = trial;
                lam = lam_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }

    // rescale to unit sup norm; the quotient is scale invariant
    let sup = u.sup_abs();
    let phi = u.scale(1.0 / sup);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("lambda1".into(), lam);
    diagnostics.insert("min_value".into(), phi.min_value());
    diagnostics.insert("max_value".into(), phi.max_value());
    let report = SolveReport {
        solution: phi,
        iterations,
        grad_norm,
        energy: lam,
        converged,
        status: if converged { SolveStatus::Converged } else { SolveStatus::BudgetExhausted },
        diagnostics,
    };
    (lam, report)
}

/// Global minimizer of the purely concave energy from a positive initial
/// guess; the unique positive solution of the λ u^{q-1} problem.
pub fn solve_q(pr: &Problem, lambda: f64, opts: &SolverOptions) -> Result<SolveReport> {
    if !(lambda > 0.0) {
        return Err(crate::error::Error::InvalidParameter(
            "the concave problem needs lambda > 0".into(),
        ));
    }
    let (p, q) = (pr.params.p, pr.params.q);
    let w = pr.grid.weight();
    let e = torsion(pr, opts);
    // the exact solution scales like λ^{1/(p-q)}
    let amp = lambda.powf(1.0 / (p - q));
    let u0 = e.scale(amp / e.sup_abs().max(1e-300));

    let kernel = &pr.kernel;
    let grid_v = Arc::clone(&pr.grid);
    let grid_g = Arc::clone(&pr.grid);
    let obj = FnObjective {
        value_fn: move |x: &[f64]| {
            let u = GridFunction::from_values(Arc::clone(&grid_v), x.to_vec()).unwrap();
            let concave: f64 = x
                .iter()
                .map(|&v| {
                    let t = v.max(0.0);
                    if t == 0.0 {
                        0.0
                    } else {
                        w * t.powf(q)
                    }
                })
                .sum();
            kernel.gagliardo_p(&u) / p - lambda / q * concave
        },
        grad_fn: move |x: &[f64]| {
            let u = GridFunction::from_values(Arc::clone(&grid_g), x.to_vec()).unwrap();
            let mut g = kernel.operator_gradient(&u);
            for (gi, &v) in g.values_mut().iter_mut().zip(x) {
                let t = v.max(0.0);
                if t > 0.0 {
                    *gi -= w * lambda * t.powf(q - 1.0);
                }
            }
            g.values().to_vec()
        },
    };
    let rhs_scale = (u0
        .values()
        .iter()
        .map(|&v| {
            let t = v.max(0.0);
            w * (lambda * t.powf(q - 1.0)).powi(2)
        })
        .sum::<f64>())
    .sqrt();
    let tol_abs = opts.tol_rel * rhs_scale.max(1e-300);
    let step0 = initial_step(pr, rhs_scale.max(1e-300));
    let out = minimize(&obj, u0.values().to_vec(), w, tol_abs, opts.max_inner, step0);
    let solution = GridFunction::from_values(Arc::clone(&pr.grid), out.x)?;
    let energy_q = pr.energy_q(&solution, lambda).value;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("min_value".into(), solution.min_value());
    diagnostics.insert("max_value".into(), solution.max_value());
    diagnostics.insert("energy_q".into(), energy_q);
    Ok(SolveReport {
        solution,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        energy: energy_q,
        converged: out.converged,
        status: if out.converged { SolveStatus::Converged } else { SolveStatus::BudgetExhausted },
        diagnostics,
    })
}
