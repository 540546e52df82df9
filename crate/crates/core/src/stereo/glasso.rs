//! Graphical lasso with per-entry penalty weights, by block coordinate
//! descent on the covariance estimate W = Ω⁻¹. The diagonal is unpenalized.
use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, Matrix};
use crate::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoOptions {
    /// Stop when no entry of W moves by more than `tol` times the mean
    /// absolute off-diagonal of S.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit {
    /// Ω̂ with exact zeros.
    pub precision: Matrix,
    /// Ŵ, the final covariance iterate.
    pub covariance: Matrix,
    pub weights: Matrix,
    pub iterations: usize,
}

impl GlassoFit {
    /// Off-diagonal pairs (i < j) with Ω̂_ij ≠ 0.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.precision.nrows();
        let mut out = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                if self.precision[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// ρ·w, with an infinite weight always excluding the entry.
fn penalty_of(rho: f64, w: f64) -> f64 {
    if w.is_infinite() {
        f64::INFINITY
    } else {
        rho * w
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Penalty weights 1/|Ω̃_ij| from a pilot fit (infinite where Ω̃_ij = 0).
pub fn adaptive_weights(pilot: &Matrix) -> Matrix {
    let p = pilot.nrows();
    Matrix::from_fn(p, p, |i, j| {
        if i == j {
            0.0
        } else {
            let v = pilot[(i, j)].abs();
            if v == 0.0 {
                f64::INFINITY
            } else {
                1.0 / v
            }
        }
    })
}

/// Maximizes ln|Ω| − tr(SΩ) − ρ Σ_{i≠j} w_ij |Ω_ij|. With `weights` absent,
/// a unit-weight pilot at the same ρ supplies w = 1/|Ω̃|.
pub fn adaptive_glasso(s: &Matrix, rho: f64, weights: Option<&Matrix>, opts: GlassoOptions) -> Result<GlassoFit> {
    check_symmetric(s)?;
    let p = s.nrows();
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("penalty must be finite and >= 0, got {rho}")));
    }
    if (0..p).any(|i| !(s[(i, i)] > 0.0)) {
        return Err(Error::invalid("covariance diagonal must be positive"));
    }
    let weights = match weights {
        Some(w) => {
            if w.nrows() != p || w.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: w.nrows(),
                });
            }
            if w.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::invalid("penalty weights must be non-negative"));
            }
            if (0..p).any(|i| (0..i).any(|j| w[(i, j)] != w[(j, i)])) {
                return Err(Error::invalid("penalty weights must be symmetric"));
            }
            w.clone()
        }
        None => {
            let unit = Matrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { 1.0 });
            let pilot = weighted_glasso(s, rho, &unit, opts)?;
            adaptive_weights(&pilot.precision)
        }
    };
    weighted_glasso(s, rho, &weights, opts)
}

fn weighted_glasso(s: &Matrix, rho: f64, weights: &Matrix, opts: GlassoOptions) -> Result<GlassoFit> {
    let p = s.nrows();
    let penalty = Matrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { penalty_of(rho, weights[(i, j)]) });
    let mut w = s.clone();
    if p == 1 {
        return Ok(GlassoFit {
            precision: Matrix::from_element(1, 1, 1.0 / s[(0, 0)]),
            covariance: w,
            weights: weights.clone(),
            iterations: 0,
        });
    }
    // β for each column, indexed by the full vertex set (entry j unused).
    let mut beta = Matrix::zeros(p, p);
    let off_scale = {
        let total: f64 = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| s[(i, j)].abs())
            .sum();
        let mean = total / (p * (p - 1)) as f64;
        if mean > 0.0 {
            mean
        } else {
            1.0
        }
    };
    let threshold = opts.tol * off_scale;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for j in 0..p {
            lasso_column(&w, s, &penalty, j, &mut beta, threshold);
            for i in 0..p {
                if i == j {
                    continue;
                }
                let new = (0..p)
                    .filter(|&k| k != j)
                    .map(|k| w[(i, k)] * beta[(k, j)])
                    .sum::<f64>();
                max_change = max_change.max((new - w[(i, j)]).abs());
                w[(i, j)] = new;
                w[(j, i)] = new;
            }
        }
        if max_change < threshold {
            converged = true;
            break;
        }
    }

    let mut omega = Matrix::zeros(p, p);
    for j in 0..p {
        let w12b: f64 = (0..p).filter(|&k| k != j).map(|k| w[(j, k)] * beta[(k, j)]).sum();
        let denom = w[(j, j)] - w12b;
        if !(denom > 0.0) {
            return Err(Error::numerical("graphical lasso produced a non-positive pivot"));
        }
        let d = 1.0 / denom;
        omega[(j, j)] = d;
        for k in 0..p {
            if k != j {
                omega[(k, j)] = -beta[(k, j)] * d;
            }
        }
    }
    // Column-wise estimates need not agree exactly; keep zeros from either side.
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (omega[(i, j)], omega[(j, i)]);
            let v = if a == 0.0 || b == 0.0 { 0.0 } else { 0.5 * (a + b) };
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    let fit = GlassoFit {
        precision: omega,
        covariance: w,
        weights: weights.clone(),
        iterations,
    };
    if !converged {
        let violation = glasso_kkt_violation(s, &fit.precision, rho, weights);
        let gap = duality_gap(s, &fit.precision, &penalty);
        return Err(Error::ConvergenceFailure {
            iterations,
            gradient_norm: violation,
            objective: gap,
            best: fit.precision.as_slice().to_vec(),
        });
    }
    Ok(fit)
}

/// Lasso for column j: min ½β'W₁₁β − β's₁₂ + Σ_k λ_k|β_k| by coordinate descent,
/// warm-started from the previous β.
fn lasso_column(w: &Matrix, s: &Matrix, penalty: &Matrix, j: usize, beta: &mut Matrix, tol: f64) {
    let p = w.nrows();
    for _ in 0..10_000 {
        let mut delta = 0.0_f64;
        for k in 0..p {
            if k == j {
                continue;
            }
            let partial: f64 = (0..p)
                .filter(|&l| l != j && l != k)
                .map(|l| w[(k, l)] * beta[(l, j)])
                .sum();
            let new = soft_threshold(s[(k, j)] - partial, penalty[(k, j)]) / w[(k, k)];
            delta = delta.max((new - beta[(k, j)]).abs() * w[(k, k)]);
            beta[(k, j)] = new;
        }
        if delta < 0.1 * tol {
            break;
        }
    }
}

/// tr(SΩ) − p + Σ_{i≠j} λ_ij |Ω_ij|: the gap between the primal objective at Ω
/// and the dual objective at Ω⁻¹ (zero at the optimum).
fn duality_gap(s: &Matrix, omega: &Matrix, penalty: &Matrix) -> f64 {
    let p = s.nrows();
    let mut gap = (s * omega).trace() - p as f64;
    for i in 0..p {
        for j in 0..p {
            if i != j && omega[(i, j)] != 0.0 {
                gap += penalty[(i, j)] * omega[(i, j)].abs();
            }
        }
    }
    gap
}

/// Largest violation of the stationarity conditions at Ω:
/// (Ω⁻¹ − S)_ii = 0; (Ω⁻¹ − S)_ij = ρw_ij sign(Ω_ij) where Ω_ij ≠ 0;
/// |(Ω⁻¹ − S)_ij| ≤ ρw_ij where Ω_ij = 0.
pub fn glasso_kkt_violation(s: &Matrix, omega: &Matrix, rho: f64, weights: &Matrix) -> f64 {
    let p = s.nrows();
    let Some(inv) = omega.clone().try_inverse() else {
        return f64::INFINITY;
    };
    let grad = inv - s;
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let g = grad[(i, j)];
            let v = if i == j {
                g.abs()
            } else {
                let lam = penalty_of(rho, weights[(i, j)]);
                let o = omega[(i, j)];
                if o == 0.0 {
                    (g.abs() - lam).max(0.0)
                } else {
                    (g - lam * o.signum()).abs()
                }
            };
            worst = worst.max(v);
        }
    }
    worst
}
