//! Approximate profile maximum likelihood for the wrapped Normal.
//!
//! μ is fixed at the circular means; Σ = L Lᵀ is optimized through the
//! log-Cholesky vector η (row-major lower triangle, log on the diagonal).
use core::f64::consts::TAU;

use crate::angle::{circular_summary, complex_moments, wrap_unchecked, AngleMatrix};
use crate::error::{Error, Result};
use crate::linalg::{floor_eigenvalues, Matrix};
use crate::optim::{self, Settings};
use crate::par::map_indices;
use crate::prelude::*;
use crate::special::ln_2pi;

use super::{forward_solve, row_major, sq_dist, WindingTruncation, WnParams};

/// Posterior winding weights below this are skipped in the gradient.
const WEIGHT_CUTOFF: f64 = 1e-15;
/// Eigenvalue floor applied to the moment-based starting point.
const INIT_FLOOR: f64 = 1e-4;
/// Largest r + 1 grid evaluated for the saturation diagnostic.
const SATURATION_GRID_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initialization {
    Moments,
    /// The moment probe was unusable.
    Identity,
}

#[derive(Debug, Clone)]
pub struct WnFit {
    pub params: WnParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub initialization: Initialization,
    /// Largest per-row change in log-density from radius r to r + 1; `None`
    /// when that grid is too large to evaluate.
    pub saturation: Option<f64>,
}

impl WnFit {
    pub const SATURATION_TOLERANCE: f64 = 1e-6;

    pub fn saturation_warning(&self) -> bool {
        self.saturation.is_some_and(|s| s > Self::SATURATION_TOLERANCE)
    }
}

fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Log-Cholesky coordinates of an SPD matrix.
pub fn log_cholesky(sigma: &Matrix) -> Result<Vec<f64>> {
    let l = crate::linalg::cholesky(sigma)?.unpack();
    let p = l.nrows();
    let mut eta = vec![0.0; p * (p + 1) / 2];
    for i in 0..p {
        for j in 0..i {
            eta[tri(i, j)] = l[(i, j)];
        }
        eta[tri(i, i)] = l[(i, i)].ln();
    }
    Ok(eta)
}

fn lower_from_eta(eta: &[f64], p: usize) -> Vec<f64> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..i {
            l[i * p + j] = eta[tri(i, j)];
        }
        l[i * p + i] = eta[tri(i, i)].exp();
    }
    l
}

pub fn sigma_from_log_cholesky(eta: &[f64], p: usize) -> Result<Matrix> {
    if eta.len() != p * (p + 1) / 2 {
        return Err(Error::DimensionMismatch {
            expected: p * (p + 1) / 2,
            found: eta.len(),
        });
    }
    let l = Matrix::from_row_slice(p, p, &lower_from_eta(eta, p));
    Ok(crate::linalg::symmetrize(&(&l * l.transpose())))
}

/// Truncated wrapped Normal log-likelihood of a sample with μ held fixed.
#[derive(Debug, Clone)]
pub struct WnLikelihood {
    n: usize,
    p: usize,
    /// wrap(θ − μ), row-major.
    residuals: Vec<f64>,
    /// 2πk over the grid, row-major.
    shifts: Vec<f64>,
}

impl WnLikelihood {
    pub fn new(data: &AngleMatrix, mu: &[f64], trunc: WindingTruncation) -> Result<Self> {
        let p = data.p();
        if mu.len() != p || trunc.dimension() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: if mu.len() != p { mu.len() } else { trunc.dimension() },
            });
        }
        let residuals = data
            .rows()
            .flat_map(|row| row.iter().zip(mu).map(|(t, m)| wrap_unchecked(t - m)))
            .collect();
        Ok(Self {
            n: data.n(),
            p,
            residuals,
            shifts: trunc.grid().into_iter().map(|k| TAU * k as f64).collect(),
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.p * (self.p + 1) / 2
    }

    /// Σ_i ln Σ_g exp(−½‖L⁻¹(d_i + 2πk_g)‖²) and, if requested, the weighted
    /// whitened scatter M̃ = Σ_i Σ_g ω_ig u_ig u_igᵀ (full p×p, row-major).
    fn accumulate(&self, l: &[f64], want_scatter: bool) -> (f64, Vec<f64>) {
        let p = self.p;
        let mut whitened = self.shifts.clone();
        for w in whitened.chunks_exact_mut(p) {
            forward_solve(l, p, w);
        }
        let per_row = map_indices(self.n, |i| {
            let mut z = self.residuals[i * p..(i + 1) * p].to_vec();
            forward_solve(l, p, &mut z);
            let exps: Vec<f64> = whitened.chunks_exact(p).map(|w| -0.5 * sq_dist(&z, w)).collect();
            let lse = crate::special::log_sum_exp(&exps);
            let mut scatter = Vec::new();
            if want_scatter {
                scatter = vec![0.0; p * p];
                let mut u = vec![0.0; p];
                for (w, e) in whitened.chunks_exact(p).zip(&exps) {
                    let omega = (e - lse).exp();
                    if omega < WEIGHT_CUTOFF {
                        continue;
                    }
                    for a in 0..p {
                        u[a] = z[a] + w[a];
                    }
                    for a in 0..p {
                        for b in 0..=a {
                            scatter[a * p + b] += omega * u[a] * u[b];
                        }
                    }
                }
            }
            (lse, scatter)
        });
        let mut total = 0.0;
        let mut scatter = vec![0.0; if want_scatter { p * p } else { 0 }];
        for (lse, s) in per_row {
            total += lse;
            for (acc, v) in scatter.iter_mut().zip(s) {
                *acc += v;
            }
        }
        if want_scatter {
            for a in 0..p {
                for b in 0..a {
                    scatter[b * p + a] = scatter[a * p + b];
                }
            }
        }
        (total, scatter)
    }

    fn constant(&self, log_det: f64) -> f64 {
        let n = self.n as f64;
        -0.5 * n * self.p as f64 * ln_2pi() - 0.5 * n * log_det
    }

    /// Log-likelihood at the log-Cholesky point `eta`; writes ∂ℓ/∂η into
    /// `grad` when given.
    pub fn evaluate(&self, eta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let p = self.p;
        debug_assert_eq!(eta.len(), self.parameter_count());
        let l = lower_from_eta(eta, p);
        let log_det = 2.0 * (0..p).map(|i| eta[tri(i, i)]).sum::<f64>();
        let (sum, scatter) = self.accumulate(&l, grad.is_some());
        let value = sum + self.constant(log_det);
        if let Some(grad) = grad {
            // ∂ℓ/∂L = L⁻ᵀ (M̃ − n I).
            let mut b = scatter;
            for a in 0..p {
                b[a * p + a] -= self.n as f64;
            }
            let x = back_solve_transposed(&l, p, &b);
            for i in 0..p {
                for j in 0..i {
                    grad[tri(i, j)] = x[i * p + j];
                }
                grad[tri(i, i)] = x[i * p + i] * l[i * p + i];
            }
        }
        value
    }

    pub fn log_likelihood(&self, sigma: &Matrix) -> Result<f64> {
        Ok(self.evaluate(&log_cholesky(sigma)?, None))
    }

    /// ℓ and ∂ℓ/∂Σ in the symmetric convention dℓ = tr(G dΣ).
    pub(crate) fn sigma_gradient(&self, sigma: &Matrix) -> Result<(f64, Matrix)> {
        let p = self.p;
        let lower = crate::linalg::cholesky(sigma)?.unpack();
        let l = row_major(&lower);
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let (sum, scatter) = self.accumulate(&l, true);
        let mut b = Matrix::from_row_slice(p, p, &scatter);
        for a in 0..p {
            b[(a, a)] -= self.n as f64;
        }
        let linv = lower
            .solve_lower_triangular(&Matrix::identity(p, p))
            .ok_or_else(|| Error::numerical("singular Cholesky factor"))?;
        let g = linv.transpose() * b * &linv * 0.5;
        Ok((sum + self.constant(log_det), crate::linalg::symmetrize(&g)))
    }
}

/// X = L⁻ᵀ B for row-major lower-triangular L and row-major B.
fn back_solve_transposed(l: &[f64], p: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for c in 0..p {
        for i in (0..p).rev() {
            let mut v = x[i * p + c];
            for k in i + 1..p {
                v -= l[k * p + i] * x[k * p + c];
            }
            x[i * p + c] = v / l[i * p + i];
        }
    }
    x
}

pub fn wn_log_likelihood(data: &AngleMatrix, params: &WnParams, trunc: WindingTruncation) -> Result<f64> {
    if data.p() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: data.p(),
        });
    }
    let density = params.density(trunc)?;
    Ok(data.rows().map(|row| density.log_density(row)).sum())
}

fn fit_settings() -> Settings {
    Settings {
        max_iter: 1000,
        grad_tol: 1e-7,
        stall_tol: 1e-5,
    }
}

/// Σ from the trigonometric moments: −2 ln R̄_j on the diagonal and
/// ln(R̄_i R̄_j / ‖Ê[Z_i Z_j]‖) off it.
fn moment_start(data: &AngleMatrix) -> Option<Matrix> {
    let p = data.p();
    let summary = circular_summary(data).ok()?;
    let mut m = Matrix::zeros(p, p);
    for j in 0..p {
        m[(j, j)] = summary.mardia_variance[j];
    }
    for i in 0..p {
        for j in i + 1..p {
            let cm = complex_moments(data, i, j).ok()?;
            if cm.mixed <= 1e-12 {
                return None;
            }
            let v = cm.covariance_probe();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(floor_eigenvalues(&m, INIT_FLOOR))
}

pub fn wn_fit_approx_mle(data: &AngleMatrix, trunc: WindingTruncation) -> Result<WnFit> {
    wn_fit_with(data, trunc, fit_settings())
}

pub fn wn_fit_with(data: &AngleMatrix, trunc: WindingTruncation, settings: Settings) -> Result<WnFit> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::invalid(format!(
            "need more rows than columns, got n = {n}, p = {p}"
        )));
    }
    let mu = crate::angle::column_means(data)?;
    let lik = WnLikelihood::new(data, &mu, trunc)?;

    let (start, initialization) = match moment_start(data) {
        Some(m) => (m, Initialization::Moments),
        None => (Matrix::identity(p, p), Initialization::Identity),
    };
    let eta0 = log_cholesky(&start)?;
    let scale = 1.0 / n as f64;
    let objective = |eta: &[f64], g: &mut [f64]| {
        let v = lik.evaluate(eta, Some(&mut *g));
        for gi in g.iter_mut() {
            *gi *= -scale;
        }
        -v * scale
    };
    let min = optim::minimize(objective, &eta0, settings)?;
    let params = WnParams::new(mu, sigma_from_log_cholesky(&min.x, p)?)?;
    let log_likelihood = lik.evaluate(&min.x, None);
    Ok(WnFit {
        saturation: saturation(data, &params, trunc),
        params,
        log_likelihood,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
        initialization,
    })
}

fn saturation(data: &AngleMatrix, params: &WnParams, trunc: WindingTruncation) -> Option<f64> {
    let wide = trunc.widened().ok().filter(|t| t.len() <= SATURATION_GRID_LIMIT)?;
    let narrow = params.density(trunc).ok()?;
    let wide = params.density(wide).ok()?;
    let gaps = map_indices(data.n(), |i| {
        let row = data.row(i);
        (wide.log_density(row) - narrow.log_density(row)).abs()
    });
    Some(gaps.into_iter().fold(0.0, f64::max))
}
