//! Genus minimax upper bounds: finite-dimensional symmetric spheres spanned
//! by low-quotient grid modes, scaled into a small ball, give computable
//! upper bounds for the negative minimax levels of the even energy.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{Problem, SobolevEstimate};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

use super::SolverOptions;

/// Sampled min-max upper bound for one genus index.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenusLevel {
    pub j: usize,
    /// Upper bound on the level (a sampled min-max; exact up to the sphere
    /// sampling error).
    pub level: f64,
    /// Scale ε at which the minimum over (0, r] is attained.
    pub eps_at_min: f64,
    /// Set when no negative value was found within the sampling budget.
    pub flagged: bool,
}

/// Upper bounds for genus levels j = 1..=j_max at one λ, sharing nested
/// sphere samples so the bounds are nondecreasing in j by construction.
///
/// Requires the ball radius r to sit below the small-ball compactness
/// radius ½ S^{n/(sp²)}.
pub fn genus_levels_upper(
    pr: &Problem,
    lambda: f64,
    r: f64,
    j_max: usize,
    s_est: &SobolevEstimate,
    opts: &SolverOptions,
) -> Result<Vec<GenusLevel>> {
    if j_max < 1 {
        return Err(Error::InvalidParameter("need j >= 1".into()));
    }
    let n = pr.params.n as f64;
    let sp = pr.params.sp();
    let small_ball = 0.5 * s_est.value.powf(n / (sp * pr.params.p));
    if !(r > 0.0 && r < small_ball) {
        return Err(Error::InvalidParameter(format!(
            "radius {r} must lie in (0, {small_ball}) below the small-ball threshold"
        )));
    }
    let m = pr.grid.len();
    if j_max > m {
        return Err(Error::InvalidParameter("genus index exceeds grid dimension".into()));
    }

    // low-quotient orthogonal modes of the quadratic proxy form
    let a = DMatrix::from_row_slice(m, m, &pr.kernel.quadratic_form_matrix());
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let modes: Vec<Vec<f64>> = order
        .iter()
        .take(j_max)
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();

    let (p, q, ps) = (pr.params.p, pr.params.q, pr.params.p_star());
    let w = pr.grid.weight();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // nested antipodal direction sets: dimension j inherits every direction
    // of dimension j-1 (zero-padded), so the sampled max is monotone in j
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut levels = Vec::with_capacity(j_max);
    let base_per_dim = 1000usize;

    for j in 1..=j_max {
        let mut new_dirs: Vec<Vec<f64>> = Vec::new();
        if j == 1 {
            new_dirs.push(vec![1.0]);
            new_dirs.push(vec![-1.0]);
        } else {
            for dir in &mut directions {
                dir.push(0.0);
            }
            for _ in 0..base_per_dim {
                let mut c: Vec<f64> = (0..j)
                    .map(|_| {
                        // Box-Muller from the seeded stream
                        let u1: f64 = rng.gen_range(1e-12..1.0);
                        let u2: f64 = rng.gen_range(0.0..1.0);
                        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect();
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                for v in &mut c {
                    *v /= norm;
                }
                let anti: Vec<f64> = c.iter().map(|v| -v).collect();
                new_dirs.push(c);
                new_dirs.push(anti);
            }
        }
        directions.extend(new_dirs);

        // per-direction invariants of the seminorm-normalized combination
        let mut lq_crit: Vec<(f64, f64)> = Vec::with_capacity(directions.len());
        for c in &directions {
            let mut vals = vec![0.0_f64; m];
            for (ck, mode) in c.iter().zip(&modes) {
                if *ck != 0.0 {
                    for (vi, mi) in vals.iter_mut().zip(mode) {
                        *vi += ck * mi;
                    }
                }
            }
            let u = GridFunction::from_values(Arc::clone(&pr.grid), vals)?;
            let semi = pr.kernel.gagliardo_p(&u);
            let scale = semi.powf(1.0 / p);
            let u = u.scale(1.0 / scale);
            let lq: f64 = u.values().iter().map(|&v| w * v.abs().powf(q)).sum();
            let crit: f64 = u.values().iter().map(|&v| w * v.abs().powf(ps)).sum();
            lq_crit.push((lq, crit));
        }

        // sampled max over the sphere, minimized over the scale ε ∈ (0, r]
        let value_at = |eps: f64| -> f64 {
            let tp = eps.powf(p) / p;
            let tq = lambda * eps.powf(q) / q;
            let tc = eps.powf(ps) / ps;
            lq_crit
                .iter()
                .map(|&(lq, crit)| tp - tq * lq - tc * crit)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let scan = 700usize;
        let mut best_eps = r;
        let mut best = value_at(r);
        for k in 1..scan {
            let eps = r * 10f64.powf(-9.0 * (1.0 - k as f64 / scan as f64));
            let v = value_at(eps);
            if v < best {
                best = v;
                best_eps = eps;
            }
        }
        // golden refinement in log ε
        let llo = (best_eps.ln() - 0.1).max((r * 1e-9).ln());
        let lhi = (best_eps.ln() + 0.1).min(r.ln());
        let (le, lv) = golden_min(&|le: f64| value_at(le.exp()), llo, lhi, 120);
        if lv < best {
            best = lv;
            best_eps = le.exp();
        }
        levels.push(GenusLevel { j, level: best, eps_at_min: best_eps, flagged: best >= 0.0 });
    }
    Ok(levels)
}

/// Single-index wrapper around [`genus_levels_upper`].
pub fn genus_level_upper(
    pr: &Problem,
    lambda: f64,
    r: f64,
    j: usize,
    s_est: &SobolevEstimate,
    opts: &SolverOptions,
) -> Result<GenusLevel> {
    let levels = genus_levels_upper(pr, lambda, r, j, s_est, opts)?;
    Ok(*levels.last().expect("j >= 1"))
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 > f2 {
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
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Summary diagnostics for a batch of genus levels.
pub fn genus_diagnostics(levels: &[GenusLevel]) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for lv in levels {
        map.insert(format!("b_{}", lv.j), lv.level);
    }
    let monotone = levels.windows(2).all(|w| w[1].level >= w[0].level);
    map.insert("monotone_in_j".into(), if monotone { 1.0 } else { 0.0 });
    let all_negative = levels.iter().all(|lv| lv.level < 0.0);
    map.insert("all_negative".into(), if all_negative { 1.0 } else { 0.0 });
    map
}
