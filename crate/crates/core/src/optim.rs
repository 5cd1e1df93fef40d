//! Deterministic smooth optimisers on flat parameter vectors.
//!
//! Objectives are closures returning `(value, gradient)`. Line searches halve
//! the step until the Armijo condition with constant `1e-4` holds.

use nalgebra::DVector;

pub const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct OptOptions {
    /// Stop when the objective changes by less than this between iterations
    /// and the gradient is small.
    pub tol: f64,
    /// Stop when the max-norm of the (projected) gradient falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Initial step of every line search.
    pub step: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self { tol: 1e-14, grad_tol: 1e-10, max_iter: 10_000, step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    /// Accepted objective values, starting with the initial point.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gradient descent with a backtracking line search.
pub fn gradient_descent<F>(f: F, x0: DVector<f64>, opts: OptOptions) -> OptResult
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let (mut value, mut grad) = f(&x0);
    let mut x = x0;
    let mut trace = vec![value];
    let mut step = opts.step;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        if max_abs(&grad) < opts.grad_tol {
            converged = true;
            break;
        }
        let g2 = grad.norm_squared();
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let cand = &x - &grad * t;
            let (v, g) = f(&cand);
            if v.is_finite() && v <= value - ARMIJO * t * g2 {
                accepted = Some((cand, v, g));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v, g)) = accepted else {
            converged = max_abs(&grad) < opts.grad_tol.sqrt();
            break;
        };
        let change = value - v;
        x = cand;
        value = v;
        grad = g;
        trace.push(value);
        // let the step grow again after an easy acceptance
        step = if t == step { (t * 2.0).min(opts.step * 1e6) } else { t };
        if change.abs() < opts.tol && max_abs(&grad) < opts.grad_tol.sqrt() {
            converged = true;
            break;
        }
    }
    OptResult { x, value, grad, trace, converged }
}

/// BFGS with an inverse-Hessian approximation and backtracking line search.
pub fn bfgs<F>(f: F, x0: DVector<f64>, opts: OptOptions) -> OptResult
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let (mut value, mut grad) = f(&x0);
    let mut x = x0;
    let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut trace = vec![value];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        if max_abs(&grad) < opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir = -(&h * &grad);
        let mut slope = dir.dot(&grad);
        if slope >= 0.0 {
            h.fill_with_identity();
            dir = -grad.clone();
            slope = -grad.norm_squared();
        }
        let mut t = opts.step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &dir * t;
            let (v, g) = f(&cand);
            if v.is_finite() && v <= value + ARMIJO * t * slope {
                accepted = Some((cand, v, g));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v, g)) = accepted else {
            converged = max_abs(&grad) < opts.grad_tol.sqrt();
            break;
        };
        let s = &cand - &x;
        let y = &g - &grad;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let change = value - v;
        x = cand;
        value = v;
        grad = g;
        trace.push(value);
        if change.abs() < opts.tol && max_abs(&grad) < opts.grad_tol.sqrt() {
            converged = true;
            break;
        }
    }
    OptResult { x, value, grad, trace, converged }
}

/// Max-norm of the projected gradient for the constraint `x >= 0`.
pub fn projected_gradient_norm(x: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    x.iter()
        .zip(grad.iter())
        .map(|(xi, gi)| if *xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
        .fold(0.0, f64::max)
}

/// Projected gradient descent on the non-negative orthant: every trial point
/// is `max(0, x - t·g)`, accepted under the Armijo condition along the
/// projection arc.
pub fn projected_gradient_descent<F>(f: F, x0: DVector<f64>, opts: OptOptions) -> OptResult
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = x0.map(|v| v.max(0.0));
    let (mut value, mut grad) = f(&x);
    let mut trace = vec![value];
    let mut step = opts.step;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        if projected_gradient_norm(&x, &grad) < opts.grad_tol {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = (&x - &grad * t).map(|v| v.max(0.0));
            let (v, g) = f(&cand);
            let decrease = grad.dot(&(&cand - &x));
            if v.is_finite() && v <= value + ARMIJO * decrease {
                accepted = Some((cand, v, g));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v, g)) = accepted else {
            converged = projected_gradient_norm(&x, &grad) < opts.grad_tol.sqrt();
            break;
        };
        let change = value - v;
        x = cand;
        value = v;
        grad = g;
        trace.push(value);
        step = if t == step { (t * 2.0).min(opts.step * 1e6) } else { t };
        if change.abs() < opts.tol && projected_gradient_norm(&x, &grad) < opts.grad_tol.sqrt() {
            converged = true;
            break;
        }
    }
    OptResult { x, value, grad, trace, converged }
}

/// Central finite-difference gradient with step `h`.
pub fn central_difference<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[i] += h;
        down[i] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

/// Max-norm distance between an analytic gradient and its central
/// finite-difference estimate.
pub fn gradient_check<F>(f: F, x: &DVector<f64>, h: f64) -> f64
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let analytic = f(x).1;
    let numeric = central_difference(|p| f(p).0, x, h);
    max_abs(&(analytic - numeric))
}
