//! Extremal profile U, its rescalings U_ε, smooth cut-offs, the piecewise
//! truncation G and the compactly supported bubbles u_{ε,δ}, together with
//! quadrature verification of their integral estimates.
//!
//! For p = 2 the closed-form profile is the exact minimizer of the Sobolev
//! quotient; for p ≠ 2 it is the conjectured profile, and all exponent checks
//! run against it are heuristic (flagged in reports).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, ProblemParams};
use crate::kernel::{
    radial_gagliardo_p, radial_power_integral, KernelContext, RadialQuadOptions, RadialTail,
};
use crate::verify::{fit_power_law_accelerated, FitResult};

/// The radially nonincreasing profile U(r) = (1 + r^{p/(p-1)})^{-(n-sp)/p}
/// normalized so U(0) = 1.
#[derive(Debug, Clone, Copy)]
pub struct BubbleProfile {
    pub n: usize,
    pub s: f64,
    pub p: f64,
}

impl BubbleProfile {
    pub fn new(params: &ProblemParams) -> Self {
        Self { n: params.n, s: params.s, p: params.p }
    }

    /// U at radius r (or at a point through its norm).
    pub fn u(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let pp = self.p / (self.p - 1.0);
        (1.0 + r.abs().powf(pp)).powf(-(n - self.s * self.p) / self.p)
    }

    /// Rescaling U_ε(r) = ε^{-(n-sp)/p} U(r/ε), a minimizer for every ε > 0.
    pub fn u_eps(&self, eps: f64, r: f64) -> f64 {
        let n = self.n as f64;
        eps.powf(-(n - self.s * self.p) / self.p) * self.u(r / eps)
    }

    /// Asymptotic decay exponent (n - sp)/(p - 1) of U.
    pub fn decay_exponent(&self) -> f64 {
        (self.n as f64 - self.s * self.p) / (self.p - 1.0)
    }

    /// Doubling radius lower bound 2^{(p-1)/(n-sp)} forced by the r → ∞
    /// asymptote of 2U(θr) <= U(r).
    pub fn theta_lower_bound(&self) -> f64 {
        2.0_f64.powf(1.0 / self.decay_exponent())
    }

    /// Smallest lattice θ (step 0.01) with 2U(θr) <= U(r) on a dense sample
    /// of radii r >= 1, rounded up one lattice step.
    pub fn find_theta(&self) -> Result<f64> {
        let step = 0.01;
        let radii = sample_radii();
        let start = (self.theta_lower_bound() / step).floor() as usize;
        for k in start.max(100).. {
            if k > 1_000_000 {
                return Err(Error::SearchExhausted("doubling lattice exhausted".into()));
            }
            let theta = k as f64 * step;
            if theta <= 1.0 {
                continue;
            }
            if radii.iter().all(|&r| 2.0 * self.u(theta * r) <= self.u(r)) {
                return Ok((k + 1) as f64 * step);
            }
        }
        unreachable!()
    }
}

fn sample_radii() -> Vec<f64> {
    // log lattice on [1, 1e6] plus the left endpoint, which binds
    let mut radii = vec![1.0];
    let count = 4000;
    for k in 1..=count {
        radii.push(10f64.powf(6.0 * k as f64 / count as f64));
    }
    radii
}

/// Quintic C² ramp 6t⁵ - 15t⁴ + 10t³ on [0,1], clamped outside.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Cut-off η_δ(x) = η(x/δ): zero for |x| <= 2θδ, one for |x| >= 3θδ, with a
/// quintic C² ramp over the transition annulus. A polynomial ramp keeps every
/// run bit-for-bit reproducible; only boundedness of its seminorm is used.
pub fn cutoff_eta_delta(r: f64, delta: f64, theta: f64) -> f64 {
    let lo = 2.0 * theta * delta;
    let width = theta * delta;
    smoothstep((r.abs() - lo) / width)
}

/// Truncated bubble u_{ε,δ}(r) = G_{ε,δ}(U_ε(r)): equal to U_ε below δ,
/// vanishing beyond θδ.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedBubble {
    profile: BubbleProfile,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
    m: f64,
    ueps_delta: f64,
    ueps_theta_delta: f64,
}

impl TruncatedBubble {
    pub fn new(profile: BubbleProfile, eps: f64, delta: f64, theta: f64) -> Result<Self> {
        if eps <= 0.0 || delta <= 0.0 || theta <= 1.0 {
            return Err(Error::InvalidParameter(
                "bubble needs eps > 0, delta > 0, theta > 1".into(),
            ));
        }
        let ueps_delta = profile.u_eps(eps, delta);
        let ueps_theta_delta = profile.u_eps(eps, theta * delta);
        if !(ueps_delta > ueps_theta_delta) {
            return Err(Error::InvalidParameter(
                "profile not strictly decreasing between delta and theta*delta".into(),
            ));
        }
        let m = ueps_delta / (ueps_delta - ueps_theta_delta);
        Ok(Self { profile, eps, delta, theta, m, ueps_delta, ueps_theta_delta })
    }

    /// Truncation slope M_{ε,δ} = U_ε(δ) / (U_ε(δ) - U_ε(θδ)).
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Piecewise-linear truncation map G_{ε,δ}; rejects negative arguments.
    pub fn g(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter("G is defined for t >= 0".into()));
        }
        Ok(if t <= self.ueps_theta_delta {
            0.0
        } else if t <= self.ueps_delta {
            self.m * (t - self.ueps_theta_delta)
        } else {
            t
        })
    }

    /// u_{ε,δ}(r) = G(U_ε(r)).
    pub fn eval(&self, r: f64) -> f64 {
        self.g(self.profile.u_eps(self.eps, r)).expect("U_eps >= 0")
    }

    /// Support radius θδ.
    pub fn support_radius(&self) -> f64 {
        self.theta * self.delta
    }

    pub fn profile(&self) -> &BubbleProfile {
        &self.profile
    }
}

/// One row of the (ε/δ)-sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BubbleRow {
    pub eps: f64,
    pub delta: f64,
    pub ratio: f64,
    pub seminorm_p: f64,
    pub crit_norm: f64,
    pub p_norm: f64,
    pub q_norm: f64,
}

/// Sweep record with fitted exponents and deviations from S^{n/sp}.
#[derive(Debug, Clone, Serialize)]
pub struct BubbleEstimates {
    pub rows: Vec<BubbleRow>,
    /// Excess ‖u_{ε,δ}‖^p - S^{n/sp}, per row.
    pub seminorm_deviation: Vec<f64>,
    /// Deficit S^{n/sp} - |u_{ε,δ}|_{p*}^{p*}, per row.
    pub crit_deviation: Vec<f64>,
    /// Offset-free fit of the seminorm excess vs ε/δ; target (n-sp)/(p-1).
    pub seminorm_excess_fit: FitResult,
    /// Offset-free fit of the critical-norm deficit vs ε/δ; target n/(p-1).
    pub crit_deficit_fit: FitResult,
    /// log-log fit of |u|_q^q vs ε; target n - (n-sp)q/p.
    pub q_fit: FitResult,
    /// log-log fit of |u|_p^p vs ε; target sp.
    pub p_fit: FitResult,
    /// Reference value S_est^{n/sp}.
    pub s_ref: f64,
    /// True when the profile is exact (p = 2); otherwise the sweep is
    /// heuristic for the conjectured profile.
    pub exact_profile: bool,
    /// Set when refining the radial mesh moves the smallest-ratio seminorm
    /// by more than 1%.
    pub quadrature_flag: bool,
}

/// Evaluate the bubble norms across an (ε/δ)-sweep and fit the scaling
/// exponents that govern them.
///
/// The closed-form profile carries the U(0) = 1 normalization; comparisons
/// against S^{n/sp} require the quotient-critical amplitude c U with
/// c^{p*-p} = ‖U‖^p / |U|_{p*}^{p*}, so every reported row is rescaled by
/// the appropriate power of c. Exponent fits are amplitude-invariant and run
/// on Aitken-accelerated local slopes, which strips the pre-asymptotic
/// corrections that dominate the coarse end of the sweep.
pub fn bubble_estimates(
    params: &ProblemParams,
    theta: f64,
    delta: f64,
    ratios: &[f64],
    s_est: f64,
    opts: RadialQuadOptions,
) -> Result<BubbleEstimates> {
    params.validate()?;
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("empty ratio sweep".into()));
    }
    for &t in ratios {
        if !(t > 0.0 && t <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "sweep requires eps <= delta/2, got ratio {t}"
            )));
        }
    }
    let profile = BubbleProfile::new(params);
    let n = params.n;
    let sp = params.sp();
    let p = params.p;
    let p_star = params.p_star();
    let support = theta * delta;
    let rmax = 2.0 * support;

    // quotient-critical amplitude from the untruncated profile
    let full_quad = crate::kernel::RadialQuadOptions { h_cap: Some(2e-3), ..opts };
    let semi_u = crate::kernel::radial_gagliardo_full(&|r| profile.u(r), n, sp, p, 20.0, full_quad)?;
    let crit_u = crate::kernel::radial_power_full(&|r| profile.u(r), n, p_star, 20.0, full_quad);
    let amp = (semi_u / crit_u).powf(1.0 / (p_star - p));
    let amp_p = amp.powf(p);

    let mut raw_rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let eps = ratio * delta;
        let bubble = TruncatedBubble::new(profile, eps, delta, theta)?;
        let f = move |r: f64| bubble.eval(r);
        let knots = [delta, support];
        let seminorm_p = radial_gagliardo_p(
            &f,
            n,
            sp,
            p,
            rmax,
            &knots,
            RadialTail::Compact { support },
            opts,
        )?;
        let crit_norm = radial_power_integral(&f, n, p_star, support, &knots, opts);
        let p_norm = radial_power_integral(&f, n, p, support, &knots, opts);
        let q_norm = radial_power_integral(&f, n, params.q, support, &knots, opts);
        raw_rows.push(BubbleRow { eps, delta, ratio, seminorm_p, crit_norm, p_norm, q_norm });
    }

    // refinement check on the most concentrated bubble
    let quadrature_flag = {
        let row = raw_rows.last().unwrap();
        let bubble = TruncatedBubble::new(profile, row.eps, delta, theta)?;
        let f = move |r: f64| bubble.eval(r);
        let coarse = RadialQuadOptions { h_rel: 2.0 * opts.h_rel, ..opts };
        let alt = radial_gagliardo_p(
            &f,
            n,
            sp,
            p,
            rmax,
            &[delta, support],
            RadialTail::Compact { support },
            coarse,
        )?;
        (alt - row.seminorm_p).abs() > 0.01 * row.seminorm_p.abs()
    };

    // amplitude-invariant fits against the quadrature-consistent offsets
    let ratios_v: Vec<f64> = raw_rows.iter().map(|r| r.ratio).collect();
    let eps_v: Vec<f64> = raw_rows.iter().map(|r| r.eps).collect();
    let excess: Vec<f64> = raw_rows.iter().map(|r| r.seminorm_p - semi_u).collect();
    let deficit: Vec<f64> = raw_rows.iter().map(|r| crit_u - r.crit_norm).collect();
    let qs: Vec<f64> = raw_rows.iter().map(|r| r.q_norm).collect();
    let ps: Vec<f64> = raw_rows.iter().map(|r| r.p_norm).collect();
    let seminorm_excess_fit =
        fit_power_law_accelerated(&ratios_v, &excess, (n as f64 - sp) / (p - 1.0));
    let crit_deficit_fit = fit_power_law_accelerated(&ratios_v, &deficit, n as f64 / (p - 1.0));
    let q_fit =
        fit_power_law_accelerated(&eps_v, &qs, n as f64 - (n as f64 - sp) * params.q / p);
    let p_fit = fit_power_law_accelerated(&eps_v, &ps, sp);

    // rescale the reported rows to the critical amplitude
    let rows: Vec<BubbleRow> = raw_rows
        .iter()
        .map(|r| BubbleRow {
            eps: r.eps,
            delta: r.delta,
            ratio: r.ratio,
            seminorm_p: amp_p * r.seminorm_p,
            crit_norm: amp.powf(p_star) * r.crit_norm,
            p_norm: amp_p * r.p_norm,
            q_norm: amp.powf(params.q) * r.q_norm,
        })
        .collect();
    let nf = n as f64;
    let s_ref = s_est.powf(nf / sp);
    let seminorm_deviation: Vec<f64> = rows.iter().map(|r| r.seminorm_p - s_ref).collect();
    let crit_deviation: Vec<f64> = rows.iter().map(|r| s_ref - r.crit_norm).collect();

    Ok(BubbleEstimates {
        rows,
        seminorm_deviation,
        crit_deviation,
        seminorm_excess_fit,
        crit_deficit_fit,
        q_fit,
        p_fit,
        s_ref,
        exact_profile: p == 2.0,
        quadrature_flag,
    })
}

/// CSV serialization of the sweep: eps, delta, ratio, seminorm_p, crit_norm,
/// p_norm, q_norm.
pub fn bubble_estimates_csv(est: &BubbleEstimates) -> String {
    use crate::grid::fmt_float as ff;
    let mut out = String::from("eps,delta,ratio,seminorm_p,crit_norm,p_norm,q_norm\n");
    for r in &est.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            ff(r.eps),
            ff(r.delta),
            ff(r.ratio),
            ff(r.seminorm_p),
            ff(r.crit_norm),
            ff(r.p_norm),
            ff(r.q_norm)
        ));
    }
    out
}

/// δ-sweep record for the cut-off energy bound on grid functions.
#[derive(Debug, Clone, Serialize)]
pub struct CutoffEnergyBound {
    pub deltas: Vec<f64>,
    /// ‖v η_δ‖^p - ‖v‖^p per δ.
    pub excess: Vec<f64>,
    /// log-log fit of the excess vs δ; target n - sp.
    pub fit: FitResult,
    pub base_energy: f64,
}

/// Evaluate ‖v η_δ‖^p - ‖v‖^p over a δ-sweep on the grid and fit the decay
/// exponent against n - sp. Requires B_{5θδ}(0) ⊂ Ω for every δ.
pub fn cutoff_energy_bound(
    kc: &KernelContext,
    v: &GridFunction,
    deltas: &[f64],
    theta: f64,
) -> Result<CutoffEnergyBound> {
    let grid = kc.grid();
    let n = grid.dim() as f64;
    let sp = kc.sp();
    for &d in deltas {
        if !grid.domain().contains_origin_ball(5.0 * theta * d) {
            return Err(Error::BallNotContained { radius: 5.0 * theta * d });
        }
    }
    let base_energy = kc.gagliardo_p(v);
    let mut excess = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let cut = GridFunction::from_fn(std::sync::Arc::clone(grid), |x| {
            cutoff_eta_delta((x[0] * x[0] + x[1] * x[1]).sqrt(), d, theta)
        });
        let w = GridFunction::from_values(
            std::sync::Arc::clone(grid),
            v.values()
                .iter()
                .zip(cut.values())
                .map(|(&a, &b)| a * b)
                .collect(),
        )?;
        excess.push(kc.gagliardo_p(&w) - base_energy);
    }
    let fit = fit_power_law_accelerated(deltas, &excess, n - sp);
    Ok(CutoffEnergyBound { deltas: deltas.to_vec(), excess, fit, base_energy })
}
