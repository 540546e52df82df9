//! BFGS quasi-Newton minimization with a backtracking Armijo line search.
use crate::error::{Error, Result};
use crate::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub max_iter: usize,
    /// Converged when the largest gradient component is at most this.
    pub grad_tol: f64,
    /// When the line search can make no further progress, the run still
    /// counts as converged if the gradient is below this looser bound.
    pub stall_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            stall_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    GradientTolerance,
    /// The line search stalled at machine precision with a small gradient.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: Stop,
}

/// Minimizes `f`, which returns the objective and writes the gradient into
/// its second argument. Non-finite objective values are treated as +∞.
pub fn minimize<F>(mut f: F, x0: &[f64], settings: Settings) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Err(Error::numerical("objective is not finite at the starting point"));
    }
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut fresh = true;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];

    for iter in 0..settings.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm <= settings.grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                gradient_norm: gnorm,
                iterations: iter,
                stop: Stop::GradientTolerance,
            });
        }
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            h = identity(n);
            fresh = true;
            for i in 0..n {
                dir[i] = -g[i];
            }
            slope = dot(&dir, &g);
        }

        let accepted = line_search(&mut f, &x, fx, gnorm, &dir, slope, &mut x_new, &mut g_new);
        let Some(f_new) = accepted else {
            if !fresh {
                h = identity(n);
                fresh = true;
                continue;
            }
            if gnorm <= settings.stall_tol {
                return Ok(Minimum {
                    x,
                    value: fx,
                    gradient_norm: gnorm,
                    iterations: iter,
                    stop: Stop::Stalled,
                });
            }
            return Err(Error::ConvergenceFailure {
                iterations: iter,
                gradient_norm: gnorm,
                objective: fx,
                best: x,
            });
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if fresh {
                // Scale the initial approximation to the observed curvature.
                let scale = sy / dot(&y, &y);
                for v in h.iter_mut() {
                    *v *= scale;
                }
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        fx = f_new;
    }

    let gnorm = inf_norm(&g);
    if gnorm <= settings.grad_tol {
        return Ok(Minimum {
            x,
            value: fx,
            gradient_norm: gnorm,
            iterations: settings.max_iter,
            stop: Stop::GradientTolerance,
        });
    }
    Err(Error::ConvergenceFailure {
        iterations: settings.max_iter,
        gradient_norm: gnorm,
        objective: fx,
        best: x,
    })
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    gnorm: f64,
    dir: &[f64],
    slope: f64,
    x_new: &mut [f64],
    g_new: &mut [f64],
) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const C1: f64 = 1e-4;
    let mut step = 1.0;
    for _ in 0..60 {
        for i in 0..x.len() {
            x_new[i] = x[i] + step * dir[i];
        }
        let f_new = f(x_new, g_new);
        if f_new.is_finite() && f_new <= fx + C1 * step * slope {
            // At machine precision an equal objective still counts as progress
            // if the gradient shrank.
            if f_new < fx || (f_new == fx && inf_norm(g_new) < gnorm) {
                return Some(f_new);
            }
            return None;
        }
        // Quadratic interpolation, kept within [0.1, 0.5] of the current step.
        let next = if f_new.is_finite() {
            let denom = 2.0 * (f_new - fx - step * slope);
            if denom > 0.0 {
                (-slope * step * step / denom).clamp(0.1 * step, 0.5 * step)
            } else {
                0.5 * step
            }
        } else {
            0.25 * step
        };
        step = next;
    }
    None
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Central finite-difference gradient; used to cross-check analytic gradients.
pub fn numerical_gradient<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + step;
            let up = f(&xp);
            xp[i] = orig - step;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}
