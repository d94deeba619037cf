//! Experiment execution: each experiment builds the problem, runs its solver
//! pipeline, writes CSV/JSON artifacts under the output directory and
//! returns the list of failed assertions (empty = pass).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

use fracp_core::bubbles::{
    bubble_estimates, bubble_estimates_csv, BubbleProfile, TruncatedBubble,
};
use fracp_core::energy::{sobolev_constant, Problem, SobolevEstimate, SobolevOptions};
use fracp_core::grid::{fmt_float, Grid, GridFunction};
use fracp_core::solvers::{self, SolveStatus, SolverOptions};
use fracp_core::verify;

use crate::config::{Experiment, ExperimentConfig};

pub struct RunOutcome {
    pub failures: Vec<String>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

fn write_manifest(dir: &Path, config: &ExperimentConfig, wall_time: Option<f64>) -> Result<()> {
    let manifest = json!({
        "config_hash": config_hash(config),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment,
        "wall_time_seconds": wall_time,
    });
    write_file(dir, "manifest.json", &serde_json::to_string_pretty(&manifest)?)
}

fn sobolev(config: &ExperimentConfig) -> Result<SobolevEstimate> {
    let opts = SobolevOptions { rmax: config.sobolev_rmax, ..SobolevOptions::default() };
    Ok(sobolev_constant(&config.params, opts)?)
}

fn build_bubble(config: &ExperimentConfig) -> Result<(TruncatedBubble, f64)> {
    let profile = BubbleProfile::new(&config.params);
    let theta = profile.find_theta()?;
    let delta = config.bubble.delta;
    let eps = match (config.bubble.eps, config.bubble.k) {
        (Some(e), _) => e,
        (None, Some(k)) => delta.powf(k + 1.0),
        (None, None) => {
            let window = verify::k_window(&config.params)?;
            let (lo, hi) = window.ok_or_else(|| {
                anyhow::anyhow!("k-window is empty for these parameters; set bubble.k or bubble.eps")
            })?;
            delta.powf(0.5 * (lo + hi) + 1.0)
        }
    };
    Ok((TruncatedBubble::new(profile, eps, delta, theta)?, theta))
}

/// Run the configured experiment. The manifest is written before any heavy
/// computation so aborted runs remain diagnosable.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_manifest(&dir, config, None)?;
    let started = Instant::now();

    let grid = Grid::build(config.domain, config.grid_n)?;
    let problem = Problem::new(Arc::clone(&grid), config.params)?;
    let opts = config.solver_options();
    let mut failures = Vec::new();

    match config.experiment {
        Experiment::Torsion => torsion(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::Eigen => eigen(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::Qproblem => qproblem(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::Minimal => minimal(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::LambdaSweep => lambda_sweep(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::LambdaBracket => lambda_bracket(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::Bubbles => bubbles(config, &dir, &mut failures)?,
        Experiment::Path => path(config, &problem, &opts, &dir, &mut failures, false)?,
        Experiment::MountainPass => path(config, &problem, &opts, &dir, &mut failures, true)?,
        Experiment::Genus => genus(config, &problem, &opts, &dir, &mut failures)?,
        Experiment::VerifyAll => verify_all(config, &problem, &opts, &dir, &mut failures)?,
    }

    write_manifest(&dir, config, Some(started.elapsed().as_secs_f64()))?;
    Ok(RunOutcome { failures })
}

fn torsion(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let one = GridFunction::constant(Arc::clone(&pr.grid), 1.0);
    let rep = solvers::solve_dirichlet(pr, &one, opts)?;
    write_file(dir, "torsion.csv", &rep.solution.to_csv())?;
    let decay = verify::boundary_decay_fit(&rep.solution, config.params.s);
    let report = json!({
        "solve": rep,
        "grid": serde_json::from_str::<serde_json::Value>(&pr.grid.manifest_json())?,
        "boundary_decay": decay.as_ref().ok(),
    });
    write_file(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    if !rep.converged {
        failures.push("torsion solve did not converge".into());
    }
    if rep.solution.min_value() <= 0.0 {
        failures.push("torsion solution is not strictly positive".into());
    }
    Ok(())
}

fn eigen(
    _config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let (lambda1, rep) = solvers::first_eigenpair(pr, opts);
    write_file(dir, "eigen.csv", &rep.solution.to_csv())?;
    let report = json!({ "lambda1": lambda1, "solve": rep });
    write_file(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    if !rep.converged {
        failures.push("eigen solve did not converge".into());
    }
    if rep.solution.min_value() <= 0.0 {
        failures.push("first eigenfunction is not positive".into());
    }
    if (rep.solution.max_value() - 1.0).abs() > 1e-12 {
        failures.push("eigenfunction is not sup-normalized".into());
    }
    Ok(())
}

fn qproblem(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let rep = solvers::solve_q(pr, config.params.lambda, opts)?;
    write_file(dir, "qsolution.csv", &rep.solution.to_csv())?;
    write_file(dir, "report.json", &rep.to_json())?;
    if !rep.converged {
        failures.push("concave-problem solve did not converge".into());
    }
    if rep.energy >= 0.0 {
        failures.push("concave energy at the minimizer is not negative".into());
    }
    if rep.solution.min_value() <= 0.0 {
        failures.push("concave-problem solution is not positive".into());
    }
    Ok(())
}

fn minimal(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let rep = solvers::minimal_solution(pr, config.params.lambda, opts)?;
    write_file(dir, "minimal.csv", &rep.solution.to_csv())?;
    write_file(dir, "report.json", &rep.to_json())?;
    match rep.status {
        SolveStatus::Converged => {
            let rel = rep.diagnostics["nehari_residual"].abs()
                / rep.diagnostics["seminorm_p"].max(1e-300);
            if rel > 1e-4 {
                failures.push(format!("relative Nehari residual {rel:.3e} above 1e-4"));
            }
            if rep.energy >= 0.0 {
                failures.push("minimal-solution energy is not negative".into());
            }
        }
        SolveStatus::Diverged => {
            // above the existence range: legitimate outcome, recorded as such
        }
        other => failures.push(format!("minimal solution ended with status {other:?}")),
    }
    Ok(())
}

fn lambda_sweep(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let mut csv = String::from("lambda,seminorm,cs0_norm,energy,status\n");
    let mut seminorms = Vec::new();
    for &lam in &config.sweep.lambdas {
        let rep = solvers::minimal_solution(pr, lam, opts)?;
        let semi = pr.kernel.gagliardo_p(&rep.solution).powf(1.0 / config.params.p);
        let cs0 = rep.solution.cs0_norm(config.params.s);
        let _ = writeln!(
            csv,
            "{},{},{},{},{:?}",
            fmt_float(lam),
            fmt_float(semi),
            fmt_float(cs0),
            fmt_float(rep.energy),
            rep.status
        );
        if rep.status == SolveStatus::Converged {
            seminorms.push((lam, semi));
        }
        write_file(dir, &format!("minimal_{lam:.6}.csv"), &rep.solution.to_csv())?;
    }
    write_file(dir, "bifurcation.csv", &csv)?;
    let mut sorted = seminorms.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if sorted.windows(2).any(|w| w[1].1 < w[0].1 * (1.0 - 1e-10)) {
        failures.push("seminorm column is not monotone along the sweep".into());
    }
    Ok(())
}

fn lambda_bracket(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let (lo, hi) = config.sweep.bracket.expect("validated");
    let bracket = solvers::estimate_lambda(pr, lo, hi, config.sweep.bracket_tol.max(1e-6), opts)?;
    let mut csv = String::from("lambda,class\n");
    for (lam, class) in &bracket.probes {
        let _ = writeln!(csv, "{},{class:?}", fmt_float(*lam));
    }
    write_file(dir, "probes.csv", &csv)?;
    write_file(dir, "bracket.json", &serde_json::to_string_pretty(&bracket)?)?;
    if !bracket.classification_monotone() {
        failures.push("probe classification is not monotone in lambda".into());
    }
    if bracket.stalled {
        failures.push("bisection stalled on inconclusive probes".into());
    }
    Ok(())
}

fn bubbles(config: &ExperimentConfig, dir: &Path, failures: &mut Vec<String>) -> Result<()> {
    let (bubble, theta) = build_bubble(config)?;
    let s_est = sobolev(config)?;
    let est = bubble_estimates(
        &config.params,
        theta,
        bubble.delta,
        &config.ratios(),
        s_est.value,
        fracp_core::kernel::RadialQuadOptions::default(),
    )?;
    write_file(dir, "bubbles.csv", &bubble_estimates_csv(&est))?;
    let report = json!({ "sobolev": s_est, "estimates": est });
    write_file(dir, "fits.json", &serde_json::to_string_pretty(&report)?)?;
    if est.quadrature_flag {
        failures.push("bubble quadrature did not converge under refinement".into());
    }
    for row in &est.rows {
        let b = TruncatedBubble::new(
            BubbleProfile::new(&config.params),
            row.eps,
            row.delta,
            theta,
        )?;
        if !(b.m() > 1.0 && b.m() <= 2.0) {
            failures.push(format!("truncation slope {} outside (1, 2] at eps {}", b.m(), row.eps));
        }
    }
    Ok(())
}

fn path(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
    solve_mp: bool,
) -> Result<()> {
    let (bubble, _theta) = build_bubble(config)?;
    let s_est = sobolev(config)?;
    let lambda = config.params.lambda;
    let u_min = solvers::minimal_solution(pr, lambda, opts)?;
    if u_min.status != SolveStatus::Converged {
        failures.push(format!("minimal solution status {:?}", u_min.status));
        return Ok(());
    }
    let profile = solvers::path_profile(
        pr,
        lambda,
        &u_min.solution,
        &bubble,
        config.path_samples,
        &s_est,
        opts,
    )?;
    write_file(dir, "path.csv", &solvers::path_csv(&profile))?;
    write_file(dir, "path.json", &serde_json::to_string_pretty(&profile)?)?;
    if (profile.energies[0] - profile.base_energy).abs()
        > 1e-12 * profile.base_energy.abs().max(1e-300)
    {
        failures.push("path does not start at the minimal-solution energy".into());
    }
    if !(profile.endpoint_energy < profile.base_energy) {
        failures.push("endpoint energy does not drop below the start".into());
    }
    if !profile.ray_positive {
        failures.push("ray supremum is not positive".into());
    }
    if solve_mp {
        let mp = solvers::mountain_pass_solve(pr, lambda, &profile, opts)?;
        write_file(dir, "wlambda.csv", &mp.solution.to_csv())?;
        write_file(dir, "mp_report.json", &mp.to_json())?;
        if !mp.converged {
            failures.push(format!("mountain pass did not converge: {:?}", mp.status));
        }
        let scale = 1.0 + mp.solution.sup_abs();
        if mp.solution.min_value() < -1e-8 * scale {
            failures.push("mountain-pass candidate has a negative part".into());
        }
        let dist =
            pr.kernel.gagliardo_p(&mp.solution.sub(&u_min.solution)?).powf(1.0 / config.params.p);
        let floor = 0.1
            * pr.kernel
                .gagliardo_p(&u_min.solution)
                .powf(1.0 / config.params.p)
                .max(pr.grid.spacing().sqrt());
        if dist <= floor {
            failures.push(format!("candidate is not distinct: distance {dist:.3e} <= {floor:.3e}"));
        }
    }
    Ok(())
}

fn genus(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let s_est = sobolev(config)?;
    let n = config.params.n as f64;
    let small_ball = 0.5 * s_est.value.powf(n / (config.params.sp() * config.params.p));
    let radius = config.sweep.genus_radius.unwrap_or(0.4 * small_ball * 2.0);
    let levels = solvers::genus_levels_upper(
        pr,
        config.params.lambda,
        radius,
        config.sweep.j_max,
        &s_est,
        opts,
    )?;
    let mut csv = String::from("j,level,eps\n");
    for lv in &levels {
        let _ = writeln!(csv, "{},{},{}", lv.j, fmt_float(lv.level), fmt_float(lv.eps_at_min));
    }
    write_file(dir, "genus.csv", &csv)?;
    let report = json!({
        "radius": radius,
        "small_ball_bound": small_ball,
        "levels": levels,
        "diagnostics": solvers::genus_diagnostics(&levels),
    });
    write_file(dir, "report.json", &serde_json::to_string_pretty(&report)?)?;
    if levels.iter().any(|lv| lv.flagged || lv.level >= 0.0) {
        failures.push("some genus level is not negative".into());
    }
    if levels.windows(2).any(|w| w[1].level < w[0].level) {
        failures.push("genus levels are not nondecreasing in j".into());
    }
    Ok(())
}

fn verify_all(
    config: &ExperimentConfig,
    pr: &Problem,
    opts: &SolverOptions,
    dir: &Path,
    failures: &mut Vec<String>,
) -> Result<()> {
    let params = &config.params;
    let lambda = params.lambda.max(0.05);
    let beta = verify::beta0(params, lambda, 2.0 * lambda, 2.0)?;
    if beta.flagged || beta.beta0 <= 1.0 {
        failures.push("beta0 search found no beta above one".into());
    }
    let mut elementary = Vec::new();
    for &p in &[2.0f64, 3.0] {
        for &gamma in &[1.0f64, 2.0] {
            let rep = verify::elementary_c(p, gamma, config.seed)?;
            if !rep.verified {
                failures.push(format!(
                    "elementary inequality violated for p={p}, gamma={gamma}: {:?}",
                    rep.witness
                ));
            }
            elementary.push(json!({ "p": p, "gamma": gamma, "result": rep }));
        }
    }
    // comparison principle on the torsion homogeneity pair
    let one = GridFunction::constant(Arc::clone(&pr.grid), 1.0);
    let scaled = GridFunction::constant(
        Arc::clone(&pr.grid),
        2.0f64.powf(params.p - 1.0),
    );
    let v = solvers::solve_dirichlet(pr, &one, opts)?;
    let u = solvers::solve_dirichlet(pr, &scaled, opts)?;
    let comparison = verify::check_comparison(&pr.kernel, &u.solution, &v.solution)?;
    if !comparison.hypothesis_holds || !comparison.conclusion_holds {
        failures.push("comparison principle check failed on the torsion pair".into());
    }
    let window = verify::k_window(params).ok().flatten();
    let report = json!({
        "beta0": beta,
        "elementary": elementary,
        "comparison": comparison,
        "k_window": window,
        "k_window_threshold": verify::k_window_threshold(params),
    });
    write_file(dir, "verdicts.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}
