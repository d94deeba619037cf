//! Variational energies of the concave-convex problem, their integrated
//! nodal gradients, residual diagnostics and the Sobolev-constant estimate.
//!
//! Gradient convention: all nodal gradients carry the quadrature weights
//! ("integrated" gradients), so pairing a gradient with nodal values of a
//! test function reproduces the corresponding weak form exactly and descent
//! steps stay mesh-consistent.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::bubbles::BubbleProfile;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, ProblemParams};
use crate::kernel::{
    pairwise_sum, radial_gagliardo_p, radial_power_integral, KernelContext, RadialQuadOptions,
    RadialTail,
};

/// Which functional a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnergyKind {
    /// (1/p)‖u‖^p - (λ/q)|u⁺|_q^q, the purely concave energy.
    EQ,
    /// (1/p)‖u‖^p - (λ/q)|u⁺|_q^q - (1/p*)|u⁺|_{p*}^{p*}.
    ITilde,
    /// (1/p)‖u‖^p - (λ/q)|u|_q^q - (1/p*)|u|_{p*}^{p*}, the even functional.
    IFull,
    /// (1/p)‖u‖^p - ∫ F̂ with the nonlinearity frozen above a cap.
    IHat,
}

/// Energy evaluation broken into its summands: `value` always equals
/// seminorm_p / p - lq_term - crit_term for the tagged functional, with the
/// λ/q and 1/p* coefficients folded into the respective terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyReport {
    /// Raw seminorm power ‖u‖^p.
    pub seminorm_p: f64,
    /// Weighted concave term (λ/q)|·|_q^q (or the capped primitive for IHat).
    pub lq_term: f64,
    /// Weighted critical term (1/p*)|·|_{p*}^{p*} (zero for EQ and IHat).
    pub crit_term: f64,
    pub value: f64,
    pub which: EnergyKind,
}

impl EnergyReport {
    fn assemble(seminorm_p: f64, p: f64, lq_term: f64, crit_term: f64, which: EnergyKind) -> Self {
        Self { seminorm_p, lq_term, crit_term, value: seminorm_p / p - lq_term - crit_term, which }
    }
}

/// A discretized problem instance: grid, parameters and the kernel data,
/// immutable after construction. The torsion function is cached lazily since
/// several solvers use it as a universal supersolution scale.
pub struct Problem {
    pub grid: Arc<Grid>,
    pub params: ProblemParams,
    pub kernel: KernelContext,
    pub(crate) torsion_cache: OnceLock<GridFunction>,
}

impl Problem {
    pub fn new(grid: Arc<Grid>, params: ProblemParams) -> Result<Self> {
        let kernel = KernelContext::new(Arc::clone(&grid), &params)?;
        Ok(Self { grid, params, kernel, torsion_cache: OnceLock::new() })
    }

    fn weighted_power(&self, u: &GridFunction, positive_part: bool, expo: f64) -> f64 {
        let w = self.grid.weight();
        pairwise_sum(
            u.values().iter().map(|&v| {
                let b = if positive_part { v.max(0.0) } else { v.abs() };
                if b == 0.0 {
                    0.0
                } else {
                    w * b.powf(expo)
                }
            }),
            u.len(),
        )
    }

    /// Energy of the purely concave problem: critical points solve the
    /// λ u^{q-1} equation.
    pub fn energy_q(&self, u: &GridFunction, lambda: f64) -> EnergyReport {
        let semi = self.kernel.gagliardo_p(u);
        let lq = lambda / self.params.q * self.weighted_power(u, true, self.params.q);
        EnergyReport::assemble(semi, self.params.p, lq, 0.0, EnergyKind::EQ)
    }

    /// Energy whose nontrivial critical points are the positive solutions.
    pub fn energy_tilde(&self, u: &GridFunction, lambda: f64) -> EnergyReport {
        let semi = self.kernel.gagliardo_p(u);
        let lq = lambda / self.params.q * self.weighted_power(u, true, self.params.q);
        let crit =
            self.weighted_power(u, true, self.params.p_star()) / self.params.p_star();
        EnergyReport::assemble(semi, self.params.p, lq, crit, EnergyKind::ITilde)
    }

    /// The even, sign-free energy used by the genus construction.
    pub fn energy_full(&self, u: &GridFunction, lambda: f64) -> EnergyReport {
        let semi = self.kernel.gagliardo_p(u);
        let lq = lambda / self.params.q * self.weighted_power(u, false, self.params.q);
        let crit =
            self.weighted_power(u, false, self.params.p_star()) / self.params.p_star();
        EnergyReport::assemble(semi, self.params.p, lq, crit, EnergyKind::IFull)
    }

    /// Energy with the nonlinearity frozen above the cap: below the cap the
    /// primitive is the usual λt^q/q + t^{p*}/p*, above it continues
    /// linearly with slope f_λ(cap).
    pub fn energy_hat(
        &self,
        u: &GridFunction,
        lambda: f64,
        cap: &GridFunction,
    ) -> Result<EnergyReport> {
        if !u.same_grid(cap) {
            return Err(Error::GridMismatch);
        }
        if cap.values().iter().any(|&c| c <= 0.0) {
            return Err(Error::InvalidParameter("cap must be positive on interior nodes".into()));
        }
        let semi = self.kernel.gagliardo_p(u);
        let (q, ps) = (self.params.q, self.params.p_star());
        let w = self.grid.weight();
        let primitive = pairwise_sum(
            u.values().iter().zip(cap.values()).map(|(&v, &c)| {
                let t = v.max(0.0);
                let val = if t <= c {
                    lambda * t.powf(q) / q + t.powf(ps) / ps
                } else {
                    lambda * c.powf(q) / q
                        + c.powf(ps) / ps
                        + (lambda * c.powf(q - 1.0) + c.powf(ps - 1.0)) * (t - c)
                };
                w * val
            }),
            u.len(),
        );
        Ok(EnergyReport::assemble(semi, self.params.p, primitive, 0.0, EnergyKind::IHat))
    }

    /// Integrated gradient of `energy_tilde`: pairing with nodal values of v
    /// gives ⟨(-Δ)_p^s u, v⟩ - λ∫(u⁺)^{q-1}v - ∫(u⁺)^{p*-1}v.
    pub fn grad_tilde(&self, u: &GridFunction, lambda: f64) -> GridFunction {
        let mut g = self.kernel.operator_gradient(u);
        let (q, ps) = (self.params.q, self.params.p_star());
        let w = self.grid.weight();
        for (gi, &v) in g.values_mut().iter_mut().zip(u.values()) {
            let t = v.max(0.0);
            if t > 0.0 {
                *gi -= w * (lambda * t.powf(q - 1.0) + t.powf(ps - 1.0));
            }
        }
        g
    }

    /// ‖u‖^p - λ|u⁺|_q^q - |u⁺|_{p*}^{p*}; vanishes at critical points and
    /// equals the pairing of `grad_tilde(u)` with u.
    pub fn nehari_residual(&self, u: &GridFunction, lambda: f64) -> f64 {
        let semi = self.kernel.gagliardo_p(u);
        semi - lambda * self.weighted_power(u, true, self.params.q)
            - self.weighted_power(u, true, self.params.p_star())
    }

    /// (p-1)‖u‖^p - (q-1)λ|u⁺|_q^q - (p*-1)|u⁺|_{p*}^{p*}; nonnegative (up
    /// to tolerance) at local minimizers.
    pub fn stability_margin(&self, u: &GridFunction, lambda: f64) -> f64 {
        let (p, q, ps) = (self.params.p, self.params.q, self.params.p_star());
        (p - 1.0) * self.kernel.gagliardo_p(u)
            - (q - 1.0) * lambda * self.weighted_power(u, true, q)
            - (ps - 1.0) * self.weighted_power(u, true, ps)
    }

    /// Threshold level Ĩ_λ(u_min) + (s/n) S^{n/(sp)} below which the
    /// compactness condition holds.
    pub fn critical_level(
        &self,
        lambda: f64,
        u_min: &GridFunction,
        s_est: Option<&SobolevEstimate>,
    ) -> Result<f64> {
        let est = s_est.ok_or_else(|| {
            Error::InvalidParameter("critical level needs a Sobolev estimate".into())
        })?;
        let n = self.params.n as f64;
        let sp = self.params.sp();
        Ok(self.energy_tilde(u_min, lambda).value + self.params.s / n * est.value.powf(n / sp))
    }
}

/// Estimate of the best Sobolev constant from the extremal-profile Rayleigh
/// quotient, truncated at `rmax` with Richardson extrapolation in rmax.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SobolevEstimate {
    /// Extrapolated estimate (falls back to the raw value when the
    /// extrapolation is not credible).
    pub value: f64,
    /// Raw quotient at the largest truncation radius.
    pub raw: f64,
    pub rmax: f64,
    pub grading: f64,
    /// Set when successive rmax estimates still differ by more than 5%.
    pub error_flag: bool,
}

/// Options controlling the Sobolev-constant quadrature.
#[derive(Debug, Clone, Copy)]
pub struct SobolevOptions {
    pub rmax: f64,
    pub quad: RadialQuadOptions,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        // the profile core lives at scale 1, so pin the finest cell there
        // regardless of how far the truncation radius goes
        Self {
            rmax: 400.0,
            quad: RadialQuadOptions { h_cap: Some(2e-3), ..RadialQuadOptions::default() },
        }
    }
}

/// Rayleigh quotient of the extremal profile: ‖U‖^p / |U|_{p*}^p.
///
/// The raw value truncates both integrals at `rmax`; the reported estimate
/// maps the exterior rays through ρ ↦ r_split/t instead, which removes the
/// slow R^{-(n-sp)/(p-1)} truncation tail entirely (the profile decays too
/// slowly for plain truncation to stabilize). The flag is raised when two
/// split radii still disagree by more than 5%.
pub fn sobolev_constant(params: &ProblemParams, opts: SobolevOptions) -> Result<SobolevEstimate> {
    params.validate()?;
    let profile = BubbleProfile::new(params);
    let n = params.n;
    let sp = params.sp();
    let p = params.p;
    let p_star = params.p_star();
    let u = |r: f64| profile.u(r);
    let full_quotient = |r_split: f64| -> Result<f64> {
        let semi = crate::kernel::radial_gagliardo_full(&u, n, sp, p, r_split, opts.quad)?;
        let lp = crate::kernel::radial_power_full(&u, n, p_star, r_split, opts.quad);
        Ok(semi / lp.powf(p / p_star))
    };
    let split = (opts.rmax / 20.0).max(5.0);
    let value = full_quotient(split)?;
    let check = full_quotient(0.5 * split)?;
    let error_flag = (value - check).abs() > 0.05 * value.abs();

    let raw_semi = radial_gagliardo_p(
        &u,
        n,
        sp,
        p,
        opts.rmax,
        &[],
        RadialTail::Truncate,
        opts.quad,
    )?;
    let raw_lp = radial_power_integral(&u, n, p_star, opts.rmax, &[], opts.quad);
    let raw = raw_semi / raw_lp.powf(p / p_star);
    Ok(SobolevEstimate { value, raw, rmax: opts.rmax, grading: opts.quad.grading, error_flag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n_cells: usize) -> Problem {
        let grid = Grid::build(Domain::interval(0.0, 1.0).unwrap(), n_cells).unwrap();
        let params = ProblemParams::new(1, 0.3, 2.0, 1.5, 0.1).unwrap();
        Problem::new(grid, params).unwrap()
    }

    fn random_u(pr: &Problem, seed: u64, lo: f64, hi: f64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_values(
            Arc::clone(&pr.grid),
            (0..pr.grid.len()).map(|_| rng.gen_range(lo..hi)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_energies() {
        let pr = problem(16);
        let zero = GridFunction::zeros(Arc::clone(&pr.grid));
        assert_eq!(pr.energy_q(&zero, 0.5).value, 0.0);
        assert_eq!(pr.energy_tilde(&zero, 0.5).value, 0.0);
        assert_eq!(pr.energy_full(&zero, 0.5).value, 0.0);
        assert_eq!(pr.nehari_residual(&zero, 0.5), 0.0);
        assert_eq!(pr.stability_margin(&zero, 0.5), 0.0);
    }

    #[test]
    fn report_value_is_term_combination() {
        let pr = problem(24);
        let u = random_u(&pr, 3, -1.0, 1.0);
        for rep in [
            pr.energy_q(&u, 0.3),
            pr.energy_tilde(&u, 0.3),
            pr.energy_full(&u, 0.3),
        ] {
            let recomputed = rep.seminorm_p / pr.params.p - rep.lq_term - rep.crit_term;
            assert!((rep.value - recomputed).abs() <= 1e-15 * rep.value.abs().max(1.0));
        }
    }

    #[test]
    fn nonpositive_functions() {
        let pr = problem(16);
        let neg = GridFunction::constant(Arc::clone(&pr.grid), -0.7);
        // u⁺ ≡ 0: only the seminorm survives
        let rep = pr.energy_q(&neg, 0.4);
        assert!(rep.value > 0.0);
        assert_eq!(rep.lq_term, 0.0);
        assert!(pr.nehari_residual(&neg, 0.4) > 0.0);
        // evenness of the full energy
        let u = random_u(&pr, 5, -1.0, 1.0);
        let a = pr.energy_full(&u, 0.4).value;
        let b = pr.energy_full(&u.scale(-1.0), 0.4).value;
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn energy_order_and_positive_case() {
        let pr = problem(24);
        let u = random_u(&pr, 9, -1.0, 1.0);
        let lam = 0.25;
        let full = pr.energy_full(&u, lam).value;
        let tilde = pr.energy_tilde(&u, lam).value;
        let upper = pr.kernel.gagliardo_p(&u) / pr.params.p;
        assert!(full <= tilde + 1e-14 * tilde.abs().max(1.0));
        assert!(tilde <= upper + 1e-14 * upper.abs().max(1.0));
        // equality for nonnegative u
        let pos = u.map(f64::abs);
        let a = pr.energy_full(&pos, lam).value;
        let b = pr.energy_tilde(&pos, lam).value;
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn hat_energy_truncation() {
        let pr = problem(16);
        let lam = 0.3;
        let cap = GridFunction::constant(Arc::clone(&pr.grid), 0.8);
        // below the cap the truncation is inactive
        let u = GridFunction::constant(Arc::clone(&pr.grid), 0.5);
        let hat = pr.energy_hat(&u, lam, &cap).unwrap();
        let tilde = pr.energy_tilde(&u, lam);
        assert!((hat.value - tilde.value).abs() <= 1e-13 * tilde.value.abs().max(1.0));
        // nonpositive u: only the seminorm
        let neg = GridFunction::constant(Arc::clone(&pr.grid), -0.5);
        let hat = pr.energy_hat(&neg, lam, &cap).unwrap();
        assert!((hat.value - pr.kernel.gagliardo_p(&neg) / pr.params.p).abs() < 1e-15);
        // u = 2 cap: frozen integrand F(cap) + f(cap)·cap per node
        let two_cap = cap.scale(2.0);
        let hat = pr.energy_hat(&two_cap, lam, &cap).unwrap();
        let c = 0.8_f64;
        let (q, ps) = (pr.params.q, pr.params.p_star());
        let per_node = lam * c.powf(q) / q
            + c.powf(ps) / ps
            + (lam * c.powf(q - 1.0) + c.powf(ps - 1.0)) * c;
        let expected = per_node * pr.grid.domain().measure();
        assert!((hat.lq_term - expected).abs() <= 1e-12 * expected);
        // nonpositive cap rejected
        let bad_cap = cap.map(|v| v - 1.0);
        assert!(pr.energy_hat(&u, lam, &bad_cap).is_err());
    }

    #[test]
    fn grad_tilde_finite_difference_and_nehari_pairing() {
        let pr = problem(64);
        let lam = 0.2;
        let zero = GridFunction::zeros(Arc::clone(&pr.grid));
        assert_eq!(pr.grad_tilde(&zero, lam).sup_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..10 {
            let u = random_u(&pr, 100 + trial, -0.5, 1.0);
            let v = GridFunction::from_values(
                Arc::clone(&pr.grid),
                (0..pr.grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let g = pr.grad_tilde(&u, lam);
            let dot: f64 = g.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
            let step = 2e-6;
            let ep = pr.energy_tilde(&u.axpy(step, &v).unwrap(), lam).value;
            let em = pr.energy_tilde(&u.axpy(-step, &v).unwrap(), lam).value;
            let fd = (ep - em) / (2.0 * step);
            assert!(
                (dot - fd).abs() <= 1e-6 * fd.abs().max(1e-9),
                "trial {trial}: {dot} vs {fd}"
            );
            // Nehari residual is the pairing of the gradient with u
            let pair: f64 = g.values().iter().zip(u.values()).map(|(a, b)| a * b).sum();
            let res = pr.nehari_residual(&u, lam);
            assert!((pair - res).abs() <= 1e-12 * res.abs().max(1.0));
        }
    }

    #[test]
    fn stability_margin_scaling() {
        let pr = problem(16);
        let u = random_u(&pr, 77, 0.1, 1.0);
        let lam = 0.3;
        let (p, q, ps) = (pr.params.p, pr.params.q, pr.params.p_star());
        let t = 1.7_f64;
        let semi = pr.kernel.gagliardo_p(&u);
        let lq = u.lr_power(q);
        let crit = u.lr_power(ps);
        let margin_t = pr.stability_margin(&u.scale(t), lam);
        let by_hand = (p - 1.0) * t.powf(p) * semi
            - (q - 1.0) * lam * t.powf(q) * lq
            - (ps - 1.0) * t.powf(ps) * crit;
        assert!((margin_t - by_hand).abs() <= 1e-11 * by_hand.abs().max(1.0));
    }

    #[test]
    fn critical_level_requires_estimate_and_dominates() {
        let pr = problem(16);
        let u = random_u(&pr, 4, 0.0, 0.3);
        assert!(pr.critical_level(0.1, &u, None).is_err());
        let est = SobolevEstimate { value: 1.3, raw: 1.3, rmax: 100.0, grading: 1.05, error_flag: false };
        let level = pr.critical_level(0.1, &u, Some(&est)).unwrap();
        assert!(level > pr.energy_tilde(&u, 0.1).value);
    }

    #[test]
    fn energy_report_serializes() {
        let pr = problem(16);
        let u = random_u(&pr, 1, -1.0, 1.0);
        let rep = pr.energy_tilde(&u, 0.1);
        let json = serde_json::to_string(&rep).unwrap();
        for key in ["seminorm_p", "lq_term", "crit_term", "value", "which"] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }
}
