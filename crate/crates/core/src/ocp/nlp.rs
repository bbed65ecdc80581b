//! Small dense nonlinear programs with box bounds and inequality constraints.
//!
//! The outer loop is a PHR augmented Lagrangian over `g(x) <= 0`; each
//! subproblem is minimized by a projected L-BFGS method that keeps the box
//! bounds feasible at every iterate.

use std::collections::VecDeque;

/// `min f(x)` subject to `g(x) <= 0`, with box bounds handled by the solver.
pub trait InequalityNlp {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Returns `f(x)` and fills `grad` (n), `cons` (m) and the row-major
    /// constraint Jacobian `jac` (m x n).
    fn evaluate(&self, x: &[f64], grad: &mut [f64], cons: &mut [f64], jac: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlSettings {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Constraint violation accepted as feasible.
    pub feas_tol: f64,
    /// Projected-gradient norm accepted as stationary.
    pub opt_tol: f64,
    pub rho_init: f64,
    pub rho_max: f64,
    pub memory: usize,
}

impl Default for AlSettings {
    fn default() -> Self {
        Self {
            max_outer: 50,
            max_inner: 200,
            feas_tol: 1e-6,
            opt_tol: 1e-4,
            rho_init: 100.0,
            rho_max: 1e8,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub projected_gradient: f64,
    pub multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
}

impl AlResult {
    pub fn is_finite(&self) -> bool {
        self.objective.is_finite() && self.x.iter().all(|v| v.is_finite()) && self.max_violation.is_finite()
    }
}

pub fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Infinity norm of `x - P(x - g)`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| (xi - (xi - gi).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub projected_gradient: f64,
    pub iterations: usize,
}

/// Projected L-BFGS for `min f(x)` over `lower <= x <= upper`.
///
/// `fun(x, grad)` returns `f(x)` and writes the gradient. Never returns a
/// point with a larger value than the (projected) start.
pub fn minimize_box(
    mut fun: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
    tol: f64,
    memory: usize,
) -> BoxResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut g = vec![0.0; n];
    let mut fx = fun(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut alpha_buf = vec![0.0; memory.max(1)];
    let mut iterations = 0;

    while iterations < max_iter {
        if !fx.is_finite() || projected_gradient_norm(&x, &g, lower, upper) <= tol {
            break;
        }
        iterations += 1;
        let active: Vec<bool> = (0..n)
            .map(|i| (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0))
            .collect();

        // Two-loop recursion on the gradient restricted to free variables.
        for i in 0..n {
            d[i] = if active[i] { 0.0 } else { g[i] };
        }
        for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            for i in 0..n {
                d[i] -= a * y[i];
            }
        }
        if let Some((s, y, _)) = hist.back() {
            let scale = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for (k, (s, y, rho)) in hist.iter().enumerate() {
            let b = rho * dot(y, &d);
            for i in 0..n {
                d[i] += s[i] * (alpha_buf[k] - b);
            }
        }
        for i in 0..n {
            d[i] = if active[i] { 0.0 } else { -d[i] };
        }
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            for i in 0..n {
                d[i] = if active[i] { 0.0 } else { -g[i] };
            }
        }

        // Backtracking along the projection arc.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = (x[i] + step * d[i]).clamp(lower[i], upper[i]);
            }
            let fnew = fun(&xn, &mut gn);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                accepted = Some(fnew);
                break;
            }
            step *= 0.5;
        }
        let Some(fnew) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        } else {
            // Negative curvature along the step: the model is stale.
            hist.clear();
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        let stalled = (fx - fnew).abs() <= 1e-15 * fx.abs().max(1.0);
        fx = fnew;
        if stalled && hist.is_empty() {
            break;
        }
    }
    let projected_gradient = projected_gradient_norm(&x, &g, lower, upper);
    BoxResult {
        x,
        value: fx,
        grad: g,
        projected_gradient,
        iterations,
    }
}

/// Augmented-Lagrangian solve of `nlp` from `x0`.
pub fn minimize_al(nlp: &impl InequalityNlp, x0: &[f64], lower: &[f64], upper: &[f64], settings: &AlSettings) -> AlResult {
    let n = nlp.num_vars();
    let m = nlp.num_constraints();
    let mut lambda = vec![0.0; m];
    let mut rho = settings.rho_init;
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);

    let mut cons = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    let mut grad = vec![0.0; n];
    let mut prev_violation = f64::INFINITY;
    let mut inner_total = 0;
    let mut outer = 0;
    let mut objective;
    let mut violation;
    let mut pgrad;

    // The objective is scaled to order one at the start so that the initial
    // penalty weight is meaningful whatever the cost magnitude.
    let f0 = nlp.evaluate(&x, &mut grad, &mut cons, &mut jac);
    let scale = if f0.is_finite() { 1.0 / f0.abs().max(1.0) } else { 1.0 };
    let mut best_feasible: Option<(Vec<f64>, f64)> = None;
    if cons.iter().all(|&c| c <= settings.feas_tol) && f0.is_finite() {
        best_feasible = Some((x.clone(), f0));
    }

    loop {
        outer += 1;
        let merit = |z: &[f64], gz: &mut [f64]| -> f64 {
            let mut c = vec![0.0; m];
            let mut j = vec![0.0; m * n];
            let f = nlp.evaluate(z, gz, &mut c, &mut j) * scale;
            gz.iter_mut().for_each(|v| *v *= scale);
            let mut value = f;
            for i in 0..m {
                let shifted = lambda[i] + rho * c[i];
                if shifted > 0.0 {
                    value += (shifted * shifted - lambda[i] * lambda[i]) / (2.0 * rho);
                    for (gk, jk) in gz.iter_mut().zip(&j[i * n..(i + 1) * n]) {
                        *gk += shifted * jk;
                    }
                } else {
                    value -= lambda[i] * lambda[i] / (2.0 * rho);
                }
            }
            value
        };
        let inner = minimize_box(merit, &x, lower, upper, settings.max_inner, settings.opt_tol, settings.memory);
        inner_total += inner.iterations;
        x = inner.x;

        objective = nlp.evaluate(&x, &mut grad, &mut cons, &mut jac);
        violation = cons.iter().fold(0.0f64, |acc, &c| acc.max(c));
        for i in 0..m {
            lambda[i] = (lambda[i] + rho * cons[i]).max(0.0);
        }
        if violation <= settings.feas_tol && best_feasible.as_ref().is_none_or(|b| objective < b.1) {
            best_feasible = Some((x.clone(), objective));
        }
        let mut lag_grad: Vec<f64> = grad.iter().map(|g| g * scale).collect();
        for i in 0..m {
            if lambda[i] != 0.0 {
                for (gk, jk) in lag_grad.iter_mut().zip(&jac[i * n..(i + 1) * n]) {
                    *gk += lambda[i] * jk;
                }
            }
        }
        pgrad = projected_gradient_norm(&x, &lag_grad, lower, upper);

        if !objective.is_finite() || !violation.is_finite() {
            break;
        }
        if violation <= settings.feas_tol && pgrad <= settings.opt_tol {
            break;
        }
        if outer >= settings.max_outer {
            break;
        }
        if violation > settings.feas_tol && violation > 0.25 * prev_violation {
            rho = (rho * 10.0).min(settings.rho_max);
        }
        prev_violation = violation;
    }

    // An unconverged run falls back to the cheapest feasible iterate seen.
    if violation > settings.feas_tol || !objective.is_finite() {
        if let Some((xb, fb)) = best_feasible {
            objective = nlp.evaluate(&xb, &mut grad, &mut cons, &mut jac);
            debug_assert_eq!(objective, fb);
            violation = cons.iter().fold(0.0f64, |acc, &c| acc.max(c));
            pgrad = f64::INFINITY;
            x = xb;
        }
    }

    AlResult {
        x,
        objective,
        max_violation: violation,
        projected_gradient: pgrad,
        multipliers: lambda.iter().map(|l| l / scale).collect(),
        outer_iterations: outer,
        inner_iterations: inner_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_quadratic_hits_bound() {
        // min (x-2)^2 + (y+1)^2 on [0,1]^2 -> (1, 0)
        let r = minimize_box(
            |x, g| {
                g[0] = 2.0 * (x[0] - 2.0);
                g[1] = 2.0 * (x[1] + 1.0);
                (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2)
            },
            &[0.5, 0.5],
            &[0.0, 0.0],
            &[1.0, 1.0],
            100,
            1e-10,
            5,
        );
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.x[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let r = minimize_box(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            &[-10.0, -10.0],
            &[10.0, 10.0],
            500,
            1e-8,
            8,
        );
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-5);
    }

    /// min x^2 + y^2 s.t. 1 - x - y <= 0  ->  (0.5, 0.5), multiplier 1.
    struct HalfPlane;

    impl InequalityNlp for HalfPlane {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn evaluate(&self, x: &[f64], grad: &mut [f64], cons: &mut [f64], jac: &mut [f64]) -> f64 {
            grad[0] = 2.0 * x[0];
            grad[1] = 2.0 * x[1];
            cons[0] = 1.0 - x[0] - x[1];
            jac[0] = -1.0;
            jac[1] = -1.0;
            x[0] * x[0] + x[1] * x[1]
        }
    }

    #[test]
    fn augmented_lagrangian_half_plane() {
        let r = minimize_al(&HalfPlane, &[0.0, 0.0], &[-5.0; 2], &[5.0; 2], &AlSettings::default());
        assert!(r.max_violation <= 1e-6);
        assert!(r.projected_gradient <= 1e-4);
        assert_abs_diff_eq!(r.x[0], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(r.multipliers[0], 1.0, epsilon = 1e-3);
    }
}
