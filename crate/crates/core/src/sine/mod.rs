//! The von Mises distribution, the multivariate sine model and the
//! conditional von Mises DAG model.
//!
//! The sine model on the p-torus has unnormalized log-density
//! `κ'c(θ, μ) + ½ s(θ, μ)'Λ s(θ, μ)` with `c_j = cos(θ_j − μ_j)` and
//! `s_j = sin(θ_j − μ_j)`. Its normalizing constant has no closed form for
//! p > 2; it is available here by quadrature for p ≤ 3 only.
use core::f64::consts::{PI, TAU};

use crate::angle::{wrap_unchecked, Angle};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prelude::*;
use crate::special::{ln_2pi, log_i0_unchecked, log_sum_exp};

mod dag;
mod sampler;

pub use dag::{
    cvm_fit, cvm_fit_node, cvm_fit_node_with, cvm_log_likelihood, cvm_lrt_select, node_objective, CvmDagModel,
    LrtOptions, LrtSelection, NodeData, NodeFit,
};
pub use sampler::{cvm_sample, sample_von_mises};

/// Location and concentration of a univariate von Mises law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesParams {
    pub mu: Angle,
    pub kappa: f64,
}

impl VonMisesParams {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::invalid(format!(
                "concentration must be finite and >= 0, got {kappa}"
            )));
        }
        Ok(Self {
            mu: Angle::new(mu)?,
            kappa,
        })
    }

    pub fn log_density(&self, theta: f64) -> f64 {
        vm_log_density(theta, self)
    }
}

/// κ cos(θ − μ) − ln 2π − ln I₀(κ).
pub fn vm_log_density(theta: f64, params: &VonMisesParams) -> f64 {
    params.kappa * (theta - params.mu.radians()).cos() - ln_2pi() - log_i0_unchecked(params.kappa)
}

/// Parameters (μ, κ, Λ) of the multivariate sine distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SineModelParams {
    mu: Vec<f64>,
    kappa: Vec<f64>,
    lambda: Matrix,
}

impl SineModelParams {
    /// `lambda` must be symmetric with a zero diagonal.
    pub fn new(mu: Vec<f64>, kappa: Vec<f64>, lambda: Matrix) -> Result<Self> {
        let p = mu.len();
        if kappa.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: kappa.len(),
            });
        }
        if lambda.nrows() != p || lambda.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: lambda.nrows(),
            });
        }
        if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return Err(Error::invalid(format!(
                "concentration must be finite and >= 0, got {k}"
            )));
        }
        for i in 0..p {
            if lambda[(i, i)] != 0.0 {
                return Err(Error::invalid("interaction matrix must have a zero diagonal"));
            }
            for j in 0..i {
                if lambda[(i, j)] != lambda[(j, i)] {
                    return Err(Error::invalid("interaction matrix must be symmetric"));
                }
            }
        }
        let mu = mu
            .into_iter()
            .map(|m| Angle::new(m).map(Angle::radians))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mu, kappa, lambda })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    /// The exponent of the sine density at `theta`, without the normalizing
    /// constant.
    pub fn log_density_unnormalized(&self, theta: &[f64]) -> f64 {
        sine_log_density_unnormalized(theta, self)
    }

    /// ln C(κ, Λ) by the periodic rectangle rule with `grid` points per
    /// coordinate. Only offered for p ≤ 3.
    pub fn log_normalizing_constant(&self, grid: usize) -> Result<f64> {
        let p = self.p();
        if p > 3 {
            return Err(Error::invalid("normalizing constant is only computed for p <= 3"));
        }
        if grid < 2 {
            return Err(Error::invalid("quadrature grid needs at least two points"));
        }
        let h = TAU / grid as f64;
        let total = grid.pow(p as u32);
        let mut values = Vec::with_capacity(total);
        let mut theta = vec![0.0; p];
        for idx in 0..total {
            let mut rem = idx;
            for t in theta.iter_mut() {
                *t = -PI + h * (rem % grid) as f64;
                rem /= grid;
            }
            values.push(self.log_density_unnormalized(&theta));
        }
        Ok(log_sum_exp(&values) + p as f64 * h.ln())
    }
}

pub fn sine_log_density_unnormalized(theta: &[f64], params: &SineModelParams) -> f64 {
    let p = params.p();
    let s: Vec<f64> = (0..p).map(|j| (theta[j] - params.mu[j]).sin()).collect();
    let mut value = 0.0;
    for j in 0..p {
        value += params.kappa[j] * (theta[j] - params.mu[j]).cos();
    }
    for i in 0..p {
        for j in i + 1..p {
            value += params.lambda[(i, j)] * s[i] * s[j];
        }
    }
    value
}

/// Law of θ_j given the remaining coordinates of `theta` (entry `j` of
/// `theta` is ignored).
///
/// With `b = Σ_{i≠j} λ_ij sin(θ_i − μ_i)` the conditional is von Mises with
/// concentration `√(κ_j² + b²)` and mean direction `μ_j + atan2(b, κ_j)`.
pub fn sine_full_conditional(j: usize, theta: &[f64], params: &SineModelParams) -> Result<VonMisesParams> {
    let p = params.p();
    if p < 2 {
        return Err(Error::invalid("full conditionals need p >= 2"));
    }
    if j >= p {
        return Err(Error::invalid(format!("coordinate {j} out of range")));
    }
    if theta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: theta.len(),
        });
    }
    let b: f64 = (0..p)
        .filter(|&i| i != j)
        .map(|i| params.lambda[(i, j)] * (theta[i] - params.mu[i]).sin())
        .sum();
    Ok(conditional_from_coupling(params.mu[j], params.kappa[j], b))
}

/// Rewrites κ cos(φ) + b sin(φ) as κ' cos(φ − δ).
pub(crate) fn conditional_from_coupling(mu: f64, kappa: f64, b: f64) -> VonMisesParams {
    let kappa_c = kappa.hypot(b);
    let shift = if kappa_c == 0.0 { 0.0 } else { b.atan2(kappa) };
    VonMisesParams {
        mu: Angle(wrap_unchecked(mu + shift)),
        kappa: kappa_c,
    }
}
