//! Mountain-pass machinery: the special path from the minimal solution to a
//! low-energy endpoint through the truncated bubble, the sup over the bubble
//! ray, and a deterministic descent-deformation solver for the saddle.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::bubbles::{cutoff_eta_delta, TruncatedBubble};
use crate::energy::{Problem, SobolevEstimate};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

use super::monotone::polish_critical;
use super::{SolveReport, SolveStatus, SolverOptions};

/// Energies along the special mountain-pass path together with the ray
/// supremum and the compactness-threshold comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PathProfile {
    pub ts: Vec<f64>,
    pub energies: Vec<f64>,
    /// Path samples as nodal vectors (first = minimal solution, last = e).
    #[serde(skip)]
    pub points: Vec<GridFunction>,
    /// Bubble multiplier of the endpoint e.
    pub t0: f64,
    /// Energy at the starting minimal solution.
    pub base_energy: f64,
    pub endpoint_energy: f64,
    pub max_energy: f64,
    pub argmax_t: f64,
    /// sup_{R >= 0} of the energy along the bubble ray through η_δ u_λ.
    pub ray_sup: f64,
    pub ray_argmax: f64,
    pub critical_level: f64,
    pub ray_below_critical: bool,
    pub ray_positive: bool,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
}

/// Build the two-legged path t ↦ η_{2tδ} u_λ (first half) and
/// t ↦ η_δ u_λ + (2t-1) t₀ u_{ε,δ} (second half), sample its energies and
/// locate the supremum over the bubble ray by scan plus golden refinement.
///
/// The endpoint multiplier t₀ doubles until the endpoint energy sits
/// strictly below the starting energy (margin 0.1 |Ĩ(u_λ)|), capped at 1e6.
pub fn path_profile(
    pr: &Problem,
    lambda: f64,
    u_min: &GridFunction,
    bubble: &TruncatedBubble,
    samples: usize,
    s_est: &SobolevEstimate,
    _opts: &SolverOptions,
) -> Result<PathProfile> {
    let theta = bubble.theta;
    let delta = bubble.delta;
    if !pr.grid.domain().contains_origin_ball(5.0 * theta * delta) {
        return Err(Error::BallNotContained { radius: 5.0 * theta * delta });
    }
    if samples < 5 {
        return Err(Error::InvalidParameter("need at least 5 path samples".into()));
    }
    let radius = |x: [f64; 2]| (x[0] * x[0] + x[1] * x[1]).sqrt();
    let bubble_nodal = GridFunction::from_fn(Arc::clone(&pr.grid), |x| bubble.eval(radius(x)));
    let cut_u = |d: f64| -> GridFunction {
        GridFunction::from_values(
            Arc::clone(&pr.grid),
            u_min
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| v * cutoff_eta_delta(radius(pr.grid.node(i)), d, theta))
                .collect(),
        )
        .expect("same grid")
    };
    let base = cut_u(delta);
    let base_energy = pr.energy_tilde(u_min, lambda).value;

    // endpoint: double t0 until the energy drops below the start, then
    // bisect back so the endpoint sits just past the drop instead of far
    // down the unbounded direction (keeps the discrete path well sampled)
    let mut t0 = 1.0_f64;
    let target = base_energy - 0.1 * base_energy.abs();
    let ray_energy = |r: f64| -> f64 {
        let u = base.axpy(r, &bubble_nodal).expect("same grid");
        pr.energy_tilde(&u, lambda).value
    };
    let mut guard = 0usize;
    while ray_energy(t0) >= target {
        t0 *= 2.0;
        guard += 1;
        if t0 > 1e6 {
            return Err(Error::SearchExhausted(
                "endpoint multiplier exceeded 1e6 without an energy drop".into(),
            ));
        }
        if guard > 64 {
            break;
        }
    }
    if t0 > 1.0 {
        let (mut lo, mut hi) = (0.5 * t0, t0);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if ray_energy(mid) < target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        t0 = hi * 1.05;
    }

    // sample the two-legged path
    let mut ts = Vec::with_capacity(samples);
    let mut energies = Vec::with_capacity(samples);
    let mut points = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let point = if t == 0.0 {
            u_min.clone()
        } else if t <= 0.5 {
            cut_u(2.0 * t * delta)
        } else {
            base.axpy((2.0 * t - 1.0) * t0, &bubble_nodal).expect("same grid")
        };
        let e = pr.energy_tilde(&point, lambda).value;
        ts.push(t);
        energies.push(e);
        points.push(point);
    }
    let (argmax_idx, &max_energy) = energies
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty");
    let endpoint_energy = *energies.last().unwrap();

    // ray supremum by scan + golden refinement
    let scan_n = 240;
    let mut best_r = 0.0_f64;
    let mut best_v = ray_energy(0.0);
    for k in 1..=scan_n {
        let r = t0 * (k as f64 / scan_n as f64).powi(2); // denser near 0
        let v = ray_energy(r);
        if v > best_v {
            best_v = v;
            best_r = r;
        }
    }
    let lo = (best_r - t0 / scan_n as f64).max(0.0);
    let hi = best_r + t0 / scan_n as f64;
    let (ray_argmax, ray_sup) = golden_max(&ray_energy, lo, hi, 200);
    let ray_sup = ray_sup.max(best_v);

    let critical_level = pr.critical_level(lambda, u_min, Some(s_est))?;
    Ok(PathProfile {
        ts,
        energies,
        points,
        t0,
        base_energy,
        endpoint_energy,
        max_energy,
        argmax_t: argmax_idx as f64 / (samples - 1) as f64,
        ray_sup,
        ray_argmax,
        critical_level,
        ray_below_critical: ray_sup < critical_level,
        ray_positive: ray_sup > 0.0,
        lambda,
        eps: bubble.eps,
        delta,
        theta,
    })
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// CSV of the sampled path energies: t, energy.
pub fn path_csv(profile: &PathProfile) -> String {
    use crate::grid::fmt_float as ff;
    let mut out = String::from("t,energy\n");
    for (t, e) in profile.ts.iter().zip(&profile.energies) {
        out.push_str(&format!("{},{}\n", ff(*t), ff(*e)));
    }
    out
}

/// Deform a discrete path by steepest descent at its maximum-energy interior
/// point (endpoints fixed) with periodic re-equidistribution by
/// energy-arclength; the limiting max point is the mountain-pass candidate,
/// polished to stationarity by residual minimization.
pub fn mountain_pass_solve(
    pr: &Problem,
    lambda: f64,
    profile: &PathProfile,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let n_pts = opts.path_points.max(5);
    let mut path = resample_by_index(&profile.points, n_pts);
    let mut energies: Vec<f64> =
        path.iter().map(|u| pr.energy_tilde(u, lambda).value).collect();
    let base_energy = profile.base_energy;
    let collapse_floor = base_energy + 1e-12 * (1.0 + base_energy.abs());

    let bound = pr.kernel.quad_gershgorin_bound();
    let mut status = SolveStatus::BudgetExhausted;
    let mut sweeps = 0usize;
    let mut grad_norm;
    let mut kmax = 1usize;
    let mut stagnant = 0usize;
    let mut last_max = f64::INFINITY;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        kmax = 1;
        for k in 2..n_pts - 1 {
            if energies[k] > energies[kmax] {
                kmax = k;
            }
        }
        // once the max level freezes the saddle sits between samples; hand
        // over to the Newton polish instead of micro-stepping forever
        if energies[kmax] >= last_max - 1e-10 * (1.0 + energies[kmax].abs()) {
            stagnant += 1;
            if stagnant > 60 {
                break;
            }
        } else {
            stagnant = 0;
        }
        last_max = energies[kmax];
        let u = &path[kmax];
        let g = pr.grad_tilde(u, lambda);
        grad_norm = pr.kernel.grad_norm(&g);
        let scale = 1.0 + energies[kmax].abs();
        if grad_norm <= opts.mp_tol * scale {
            status = SolveStatus::Converged;
            break;
        }
        if energies[kmax] <= collapse_floor {
            status = SolveStatus::NoSecondSolution;
            break;
        }
        // descend at the max point transverse to the path: projecting out
        // the tangential component keeps the point on the ridge instead of
        // letting it slide down either slope
        let tangent = path[kmax + 1].sub(&path[kmax - 1]).expect("same grid");
        let tt: f64 = tangent.values().iter().map(|v| v * v).sum();
        let gt: f64 = g.values().iter().zip(tangent.values()).map(|(a, b)| a * b).sum();
        let dir = if tt > 0.0 {
            g.axpy(-gt / tt, &tangent).expect("same grid")
        } else {
            g.clone()
        };
        let p = pr.params.p;
        let amp = u.sup_abs().max(1e-300);
        let mut step = if p == 2.0 {
            1.0 / bound
        } else {
            1.0 / (bound * (p - 1.0) * amp.powf(p - 2.0))
        };
        let mut moved = false;
        for _ in 0..50 {
            let trial = u.axpy(-step, &dir).expect("same grid");
            let e_trial = pr.energy_tilde(&trial, lambda).value;
            if e_trial < energies[kmax] {
                path[kmax] = trial;
                energies[kmax] = e_trial;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            // cannot lower the max point further at this arithmetic scale
            status = SolveStatus::Converged;
            break;
        }
        if sweeps % 10 == 0 {
            path = redistribute(&path, &energies);
            for (k, u) in path.iter().enumerate() {
                energies[k] = pr.energy_tilde(u, lambda).value;
            }
        }
    }

    // polish the saddle candidate to stationarity: damped Newton with a
    // dense Jacobian at desk scale, residual descent as the fallback
    let candidate = path[kmax].clone();
    let scale = 1.0 + energies[kmax].abs();
    let tol_abs = opts.mp_tol * scale;
    let (mut solution, mut gn, polish_iters, mut polished) = if pr.grid.len() <= 1536 {
        super::monotone::newton_polish(pr, lambda, &candidate, tol_abs, 200)
    } else {
        polish_critical(pr, lambda, &candidate, tol_abs, 2_000)
    };
    if !polished {
        let (sol2, gn2, _, ok2) = polish_critical(pr, lambda, &solution, tol_abs, 2_000);
        if gn2 < gn {
            solution = sol2;
            gn = gn2;
            polished = ok2;
        }
    }
    grad_norm = gn;
    if polished && status == SolveStatus::BudgetExhausted {
        status = SolveStatus::Converged;
    }

    let energy = pr.energy_tilde(&solution, lambda).value;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("sweeps".into(), sweeps as f64);
    diagnostics.insert("polish_iterations".into(), polish_iters as f64);
    diagnostics.insert("min_value".into(), solution.min_value());
    diagnostics.insert("max_value".into(), solution.max_value());
    diagnostics.insert("nehari_residual".into(), pr.nehari_residual(&solution, lambda));
    diagnostics.insert("level".into(), energy);
    diagnostics.insert("critical_level".into(), profile.critical_level);
    diagnostics.insert("base_energy".into(), base_energy);
    let converged = status == SolveStatus::Converged && grad_norm <= tol_abs;
    Ok(SolveReport {
        solution,
        iterations: sweeps,
        grad_norm,
        energy,
        converged,
        status,
        diagnostics,
    })
}

fn resample_by_index(points: &[GridFunction], n_out: usize) -> Vec<GridFunction> {
    let n_in = points.len();
    (0..n_out)
        .map(|k| {
            let pos = k as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 || lo + 1 >= n_in {
                points[lo].clone()
            } else {
                points[lo].scale(1.0 - frac).axpy(frac, &points[lo + 1]).expect("same grid")
            }
        })
        .collect()
}

/// Re-parametrize the discrete path uniformly in energy-arclength
/// sqrt((‖Δu‖₂/D_u)² + (ΔE/D_E)²), with both components normalized by
/// their total range so neither term degenerates the metric; endpoints stay
/// fixed.
fn redistribute(path: &[GridFunction], energies: &[f64]) -> Vec<GridFunction> {
    let n = path.len();
    let mut d_u = 0.0_f64;
    let mut d_e = 0.0_f64;
    for k in 1..n {
        let du = path[k].sub(&path[k - 1]).expect("same grid");
        d_u += du.lr_norm(2.0).unwrap_or(0.0);
        d_e += (energies[k] - energies[k - 1]).abs();
    }
    let d_u = d_u.max(1e-300);
    let d_e = d_e.max(1e-300);
    let mut cum = vec![0.0_f64; n];
    for k in 1..n {
        let du = path[k].sub(&path[k - 1]).expect("same grid");
        let dl2 = du.lr_norm(2.0).unwrap_or(0.0) / d_u;
        let de = (energies[k] - energies[k - 1]).abs() / d_e;
        cum[k] = cum[k - 1] + (dl2 * dl2 + de * de).sqrt().max(1e-300);
    }
    let total = cum[n - 1];
    let mut out = Vec::with_capacity(n);
    out.push(path[0].clone());
    let mut seg = 0usize;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 1 < n - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = (cum[seg + 1] - cum[seg]).max(1e-300);
        let frac = ((target - cum[seg]) / span).clamp(0.0, 1.0);
        out.push(
            path[seg]
                .scale(1.0 - frac)
                .axpy(frac, &path[seg + 1])
                .expect("same grid"),
        );
    }
    out.push(path[n - 1].clone());
    out
}
