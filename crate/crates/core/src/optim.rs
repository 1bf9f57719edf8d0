//! Steepest descent with Armijo backtracking.
//!
//! Each iteration moves along `-grad`. The first trial step length is the
//! Barzilai-Borwein estimate `s'y / y'y` from the previous move. A trial that
//! fails the Armijo condition is shrunk to the minimizer of the quadratic
//! interpolating the line values, clamped to `[0.1, 0.5]` of the failed step,
//! so accepted objective values never increase.

use nalgebra::DVector;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Step reductions allowed per iteration before giving up.
    pub max_halvings: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult<P = DVector<f64>> {
    pub x: P,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn steepest_descent<F>(x0: DVector<f64>, f: F, opts: &DescentOptions) -> Result<DescentResult>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    descend_on(x0, f, |x, d| x + d, opts)
}

/// Steepest descent over points of any type: `f` gives the value and the
/// gradient in local coordinates at a point, and `retract(x, d)` moves `x`
/// by the local step `d`.
pub fn descend_on<P, F, R>(
    x0: P,
    mut f: F,
    retract: R,
    opts: &DescentOptions,
) -> Result<DescentResult<P>>
where
    F: FnMut(&P) -> (f64, DVector<f64>),
    R: Fn(&P, &DVector<f64>) -> P,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    let mut history = vec![fx];
    let mut step = 1.0 / g.norm().max(1.0);
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        let gnorm2 = g.norm_squared();
        if gnorm2.sqrt() <= opts.grad_tol {
            converged = true;
            break;
        }
        if let Some((dx, dg)) = &prev {
            let sy = dx.dot(dg);
            if sy > 0.0 {
                step = sy / dg.norm_squared();
            } else {
                step *= 2.0;
            }
        }

        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let d = &g * -step;
            let trial = retract(&x, &d);
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx - opts.armijo * step * gnorm2 {
                accepted = Some((trial, d, ft, gt));
                break;
            }
            // phi(a) = f(x - a g) has phi(0) = fx and phi'(0) = -|g|^2
            let curv = 2.0 * (ft - fx + step * gnorm2);
            let next = if ft.is_finite() && curv > 0.0 {
                gnorm2 * step * step / curv
            } else {
                0.5 * step
            };
            step = next.clamp(0.1 * step, 0.5 * step);
        }
        let Some((xn, d, fxn, gn)) = accepted else {
            // the decrease needed is below the rounding of f
            break;
        };
        if !gn.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("objective gradient".into()));
        }
        prev = Some((d, &gn - &g));
        x = xn;
        fx = fxn;
        g = gn;
        history.push(fx);
        iterations += 1;
    }
    let grad_norm = g.norm();
    if grad_norm <= opts.grad_tol {
        converged = true;
    }
    Ok(DescentResult {
        x,
        value: fx,
        grad_norm,
        iterations,
        converged,
        history,
    })
}
