//! Extremal-parameter bracketing: geometric bisection on λ driven by the
//! existence/divergence classification of the monotone iteration.

use serde::Serialize;

use crate::energy::Problem;
use crate::error::{Error, Result};

use super::elliptic::solve_q;
use super::monotone::monotone_iteration;
use super::{SolveStatus, SolverOptions};

/// Classification of a single λ probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeClass {
    /// Monotone iteration contracted below tolerance within budget.
    Exists,
    /// Iterates crossed the blow-up threshold.
    Diverged,
    /// Budget exhausted with a still-growing iterate.
    Inconclusive,
}

/// Verified bracket around the existence threshold: every probe at or below
/// `lo` converged, every probe at or above `hi` diverged.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaBracket {
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<(f64, ProbeClass)>,
    /// Set when an inconclusive streak stopped the bisection early.
    pub stalled: bool,
}

impl LambdaBracket {
    /// (hi - lo) / lo.
    pub fn relative_width(&self) -> f64 {
        (self.hi - self.lo) / self.lo
    }

    /// No convergent probe sits above any divergent probe.
    pub fn classification_monotone(&self) -> bool {
        let mut max_exists = f64::NEG_INFINITY;
        let mut min_diverged = f64::INFINITY;
        for &(lam, class) in &self.probes {
            match class {
                ProbeClass::Exists => max_exists = max_exists.max(lam),
                ProbeClass::Diverged => min_diverged = min_diverged.min(lam),
                ProbeClass::Inconclusive => {}
            }
        }
        max_exists < min_diverged
    }
}

fn classify(pr: &Problem, lambda: f64, opts: &SolverOptions) -> Result<ProbeClass> {
    let (q, ps) = (pr.params.q, pr.params.p_star());
    let qrep = solve_q(pr, lambda, opts)?;
    let rhs = move |_i: usize, t: f64| {
        let t = t.max(0.0);
        if t == 0.0 {
            0.0
        } else {
            lambda * t.powf(q - 1.0) + t.powf(ps - 1.0)
        }
    };
    let mono = monotone_iteration(pr, &qrep.solution, &rhs, None, opts)?;
    Ok(match mono.status {
        SolveStatus::Converged => ProbeClass::Exists,
        SolveStatus::Diverged => ProbeClass::Diverged,
        _ => ProbeClass::Inconclusive,
    })
}

/// Bisect (geometrically) on λ between a convergent and a divergent probe
/// until the bracket's relative width drops below `rel_tol`. Inconclusive
/// probes shrink the trust region by re-probing nearby; a persistent streak
/// stops the search with the bracket achieved so far.
pub fn estimate_lambda(
    pr: &Problem,
    lo0: f64,
    hi0: f64,
    rel_tol: f64,
    opts: &SolverOptions,
) -> Result<LambdaBracket> {
    if !(lo0 > 0.0 && hi0 > lo0) {
        return Err(Error::InvalidParameter("need 0 < lo < hi".into()));
    }
    let mut probes: Vec<(f64, ProbeClass)> = Vec::new();
    let lo_class = classify(pr, lo0, opts)?;
    probes.push((lo0, lo_class));
    let hi_class = classify(pr, hi0, opts)?;
    probes.push((hi0, hi_class));
    if lo_class != ProbeClass::Exists || hi_class != ProbeClass::Diverged {
        return Err(Error::SolverFailure(format!(
            "endpoints classify as {lo_class:?}/{hi_class:?}; need Exists/Diverged \
             (probes: {probes:?})"
        )));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    let mut stalled = false;
    while (hi - lo) / lo > rel_tol {
        // geometric midpoint plus two fallbacks on inconclusive results
        let candidates = [
            (lo * hi).sqrt(),
            ((lo * hi).sqrt() * hi).sqrt(),
            (lo * (lo * hi).sqrt()).sqrt(),
        ];
        let mut resolved = false;
        for &mid in &candidates {
            let class = classify(pr, mid, opts)?;
            probes.push((mid, class));
            match class {
                ProbeClass::Exists => {
                    lo = mid;
                    resolved = true;
                    break;
                }
                ProbeClass::Diverged => {
                    hi = mid;
                    resolved = true;
                    break;
                }
                ProbeClass::Inconclusive => {}
            }
        }
        if !resolved {
            stalled = true;
            break;
        }
    }
    Ok(LambdaBracket { lo, hi, probes, stalled })
}
