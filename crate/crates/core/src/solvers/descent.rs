//! Inner minimizer: gradient descent with a Barzilai-Borwein step and
//! nonmonotone Armijo backtracking, deterministic by construction.

/// Objective with separable value/gradient evaluation.
pub(crate) trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
}

pub(crate) struct FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub value_fn: V,
    pub grad_fn: G,
}

impl<V, G> Objective for FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value_fn)(x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_fn)(x)
    }
}

pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `obj` from `x0`. The gradient is integrated (carries quadrature
/// weights w), so the reported residual norm is sqrt(Σ g²/w) — the discrete
/// L² norm of the residual density.
pub(crate) fn minimize(
    obj: &dyn Objective,
    x0: Vec<f64>,
    w: f64,
    tol_abs: f64,
    max_iter: usize,
    step0: f64,
) -> DescentOutcome {
    let mut x = x0;
    let mut f = obj.value(&x);
    let mut g = obj.grad(&x);
    let mut history: Vec<f64> = vec![f];
    let mut alpha = step0.max(1e-300);
    let mut prev_x: Option<Vec<f64>> = None;
    let mut prev_g: Option<Vec<f64>> = None;

    let grad_norm = |g: &[f64]| (dot(g, g) / w).sqrt();
    let mut gn = grad_norm(&g);
    let mut iterations = 0;

    while iterations < max_iter {
        if gn <= tol_abs {
            return DescentOutcome { x, value: f, grad_norm: gn, iterations, converged: true };
        }
        // BB1 step from the previous accepted pair
        if let (Some(px), Some(pg)) = (&prev_x, &prev_g) {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..x.len() {
                let s = x[i] - px[i];
                let y = g[i] - pg[i];
                ss += s * s;
                sy += s * y;
            }
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-300, 1e300) } else { alpha * 2.0 };
        }
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gg = dot(&g, &g);
        let mut step = alpha;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = f;
        for _ in 0..70 {
            for i in 0..x.len() {
                x_new[i] = x[i] - step * g[i];
            }
            f_new = obj.value(&x_new);
            if f_new <= f_ref - 1e-4 * step * gg {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // step collapsed: residual is at the level the arithmetic allows
            return DescentOutcome { x, value: f, grad_norm: gn, iterations, converged: gn <= tol_abs };
        }
        prev_x = Some(std::mem::replace(&mut x, x_new));
        let g_new = obj.grad(&x);
        prev_g = Some(std::mem::replace(&mut g, g_new));
        f = f_new;
        gn = grad_norm(&g);
        history.push(f);
        if history.len() > 10 {
            history.remove(0);
        }
    }
    DescentOutcome { x, value: f, grad_norm: gn, iterations, converged: gn <= tol_abs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        // f(x) = ½ Σ c_i x_i², anisotropic
        let c: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let c2 = c.clone();
        let obj = FnObjective {
            value_fn: move |x: &[f64]| {
                0.5 * x.iter().zip(&c).map(|(v, ci)| ci * v * v).sum::<f64>()
            },
            grad_fn: move |x: &[f64]| x.iter().zip(&c2).map(|(v, ci)| ci * v).collect(),
        };
        let x0 = vec![1.0; 20];
        let out = minimize(&obj, x0, 1.0, 1e-10, 10_000, 0.05);
        assert!(out.converged, "grad norm {}", out.grad_norm);
        assert!(out.x.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn rosenbrock_like_descent_makes_progress() {
        let obj = FnObjective {
            value_fn: |x: &[f64]| {
                (1.0 - x[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2)
            },
            grad_fn: |x: &[f64]| {
                vec![
                    -2.0 * (1.0 - x[0]) - 40.0 * x[0] * (x[1] - x[0] * x[0]),
                    20.0 * (x[1] - x[0] * x[0]),
                ]
            },
        };
        let out = minimize(&obj, vec![-1.0, 1.0], 1.0, 1e-8, 50_000, 1e-2);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }
}
