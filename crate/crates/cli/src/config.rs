//! Experiment configuration: flat JSON file plus `--set key=value` command
//! line overrides. No environment-variable configuration; identical configs
//! must reproduce identical outputs.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fracp_core::grid::{Domain, ProblemParams};
use fracp_core::solvers::SolverOptions;
use fracp_core::verify;

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Torsion,
    Eigen,
    Qproblem,
    Minimal,
    LambdaSweep,
    LambdaBracket,
    Bubbles,
    Path,
    MountainPass,
    Genus,
    VerifyAll,
}

impl Experiment {
    pub fn all() -> &'static [(&'static str, &'static str)] {
        &[
            ("torsion", "solve the constant right-hand-side problem and fit the boundary decay"),
            ("eigen", "first eigenpair by projected descent"),
            ("qproblem", "unique solution of the purely concave problem"),
            ("minimal", "minimal positive solution by monotone iteration"),
            ("lambda-sweep", "minimal solutions across a list of couplings"),
            ("lambda-bracket", "bisect the existence/blow-up threshold"),
            ("bubbles", "truncated-bubble norms across an eps/delta sweep"),
            ("path", "mountain-pass path energies and the ray supremum"),
            ("mountain-pass", "descent deformation toward the second solution"),
            ("genus", "genus minimax upper bounds in a small ball"),
            ("verify-all", "standalone inequality verifiers"),
        ]
    }
}

/// Solver tolerance block (subset of [`SolverOptions`]).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tol_rel: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub outer_tol: f64,
    pub blowup_factor: f64,
    pub path_points: usize,
    pub max_sweeps: usize,
    pub mp_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol_rel: d.tol_rel,
            max_inner: d.max_inner,
            max_outer: d.max_outer,
            outer_tol: d.outer_tol,
            blowup_factor: d.blowup_factor,
            path_points: d.path_points,
            max_sweeps: d.max_sweeps,
            mp_tol: d.mp_tol,
        }
    }
}

/// Sweep specifications for the sweep-type experiments.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SweepSpec {
    /// λ values for `lambda-sweep`.
    pub lambdas: Vec<f64>,
    /// ε/δ ratios for `bubbles` (defaults to 2^-2..2^-6).
    pub ratios: Vec<f64>,
    /// Initial bracket for `lambda-bracket`.
    pub bracket: Option<(f64, f64)>,
    /// Relative bracket width target.
    pub bracket_tol: f64,
    /// Largest genus index for `genus`.
    pub j_max: usize,
    /// Ball radius for `genus` (defaults to 40% of the small-ball bound).
    pub genus_radius: Option<f64>,
}

/// Bubble geometry for `bubbles`, `path` and `mountain-pass`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct BubbleSpec {
    pub delta: f64,
    /// Exponent k with ε = δ^{k+1}; defaults to the middle of the k-window.
    pub k: Option<f64>,
    /// Explicit ε (overrides k when set).
    pub eps: Option<f64>,
}

impl Default for BubbleSpec {
    fn default() -> Self {
        Self { delta: 0.05, k: None, eps: None }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ProblemParams,
    pub domain: Domain,
    pub grid_n: usize,
    pub output_dir: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub bubble: BubbleSpec,
    #[serde(default = "default_path_samples")]
    pub path_samples: usize,
    #[serde(default = "default_sobolev_rmax")]
    pub sobolev_rmax: f64,
}

fn default_seed() -> u64 {
    0x5eed
}
fn default_threads() -> usize {
    1
}
fn default_path_samples() -> usize {
    65
}
fn default_sobolev_rmax() -> f64 {
    400.0
}

impl ExperimentConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol_rel: self.tolerances.tol_rel,
            max_inner: self.tolerances.max_inner,
            max_outer: self.tolerances.max_outer,
            outer_tol: self.tolerances.outer_tol,
            blowup_factor: self.tolerances.blowup_factor,
            path_points: self.tolerances.path_points,
            max_sweeps: self.tolerances.max_sweeps,
            mp_tol: self.tolerances.mp_tol,
            seed: self.seed,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        if self.sweep.ratios.is_empty() {
            (2..=6).map(|k| 0.5f64.powi(k)).collect()
        } else {
            self.sweep.ratios.clone()
        }
    }
}

/// Load a config file, apply `--set` overrides (dotted JSON paths) and
/// deserialize. Errors carry the offending key.
pub fn load_config(path: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
    for entry in overrides {
        let Some((key, raw)) = entry.split_once('=') else {
            bail!("override '{entry}' is not of the form key=value");
        };
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cursor = &mut value;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            if depth + 1 == parts.len() {
                match cursor {
                    serde_json::Value::Object(map) => {
                        map.insert((*part).to_string(), parsed.clone());
                    }
                    _ => bail!("override path '{key}' does not land in an object"),
                }
            } else {
                cursor = cursor
                    .as_object_mut()
                    .and_then(|m| m.get_mut(*part))
                    .with_context(|| format!("override path '{key}': missing '{part}'"))?;
            }
        }
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).context("config does not match the expected schema")?;
    Ok(config)
}

/// Parameter-regime violations for the configured experiment; empty when the
/// configuration is admissible.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut violations = Vec::new();
    if let Err(e) = config.params.validate() {
        violations.push(e.to_string());
    }
    if let Err(e) = config.domain.validate() {
        violations.push(e.to_string());
    }
    if config.params.n != config.domain.dim() {
        violations.push(format!(
            "params dimension {} does not match domain dimension {}",
            config.params.n,
            config.domain.dim()
        ));
    }
    if config.grid_n < 4 {
        violations.push(format!("grid_n must be at least 4, got {}", config.grid_n));
    }
    if config.threads != 1 {
        violations.push(format!(
            "threads = {} unsupported: kernel sums currently run with one partition",
            config.threads
        ));
    }
    let p = &config.params;
    match config.experiment {
        Experiment::Qproblem | Experiment::Minimal => {
            if !(p.lambda > 0.0) {
                violations.push("lambda must be positive for this experiment".into());
            }
        }
        Experiment::LambdaSweep => {
            if config.sweep.lambdas.is_empty() {
                violations.push("lambda-sweep needs sweep.lambdas".into());
            }
            if config.sweep.lambdas.iter().any(|&l| l <= 0.0) {
                violations.push("sweep.lambdas must be positive".into());
            }
        }
        Experiment::LambdaBracket => match config.sweep.bracket {
            None => violations.push("lambda-bracket needs sweep.bracket = [lo, hi]".into()),
            Some((lo, hi)) => {
                if !(lo > 0.0 && hi > lo) {
                    violations.push(format!("bracket ({lo}, {hi}) must satisfy 0 < lo < hi"));
                }
            }
        },
        Experiment::Bubbles => {
            for &r in &config.ratios() {
                if !(r > 0.0 && r <= 0.5) {
                    violations.push(format!("bubble ratio {r} violates eps <= delta/2"));
                }
            }
        }
        Experiment::Path | Experiment::MountainPass => {
            if !(p.p >= 2.0) {
                violations.push(format!("mountain pass requires p >= 2, got {}", p.p));
            }
            if !(p.q > p.p - 1.0 && p.q < p.p) {
                violations.push(format!(
                    "mountain pass requires q in (p-1, p) = ({}, {}), got {}",
                    p.p - 1.0,
                    p.p,
                    p.q
                ));
            }
            if p.p >= 2.0 && p.q > p.p - 1.0 && p.q < p.p {
                let threshold = verify::k_window_threshold(p);
                if !(p.n as f64 > threshold) {
                    violations.push(format!(
                        "mountain pass requires n > sp(q+1)/(q+1-p) = {threshold:.4}, got n = {}",
                        p.n
                    ));
                }
            }
            if !config.domain.origin_interior() {
                violations.push("bubble constructions require the origin inside the domain".into());
            }
            if !(p.lambda > 0.0) {
                violations.push("lambda must be positive for this experiment".into());
            }
        }
        Experiment::Genus => {
            if config.sweep.j_max == 0 {
                violations.push("genus needs sweep.j_max >= 1".into());
            }
            if !(p.lambda > 0.0) {
                violations.push("lambda must be positive for this experiment".into());
            }
        }
        Experiment::Torsion | Experiment::Eigen | Experiment::VerifyAll => {}
    }
    violations
}
