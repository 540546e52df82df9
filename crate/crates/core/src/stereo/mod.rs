//! Inverse stereographic Normal and nonparanormal distributions.
//!
//! Θ_j = 2·atan(U_j) with U ∼ N_p(μ, Σ). The point θ_j = π has no image under
//! u = tan(θ/2); it is moved to −π + ε before projecting.
use core::f64::consts::{LN_2, PI};

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angle::{default_names, wrap_unchecked, AngleMatrix};
use crate::error::{Error, Result};
use crate::linalg::{check_disjoint, check_index_set, cholesky, condition_number, submatrix, subvector, Matrix};
use crate::prelude::*;
use crate::special::ln_2pi;

mod glasso;
mod npn;
mod stability;

pub use glasso::{adaptive_glasso, adaptive_weights, glasso_kkt_violation, GlassoFit, GlassoOptions};
pub use npn::{
    isnpn_fit, isnpn_log_density, npn_correlation, npn_estimate_transforms, CoordinateTransform, IsnpnModel,
    NpnTransform, PiecewiseLinear,
};
pub use stability::{stability_select, ModelKind, StabilityOptions, StabilityReport};

pub const DEFAULT_EPSILON: f64 = 1e-9;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1e-3], got {epsilon}")));
    }
    Ok(())
}

/// Replaces θ = π by −π + ε.
pub(crate) fn regularize(theta: f64, epsilon: f64) -> f64 {
    let t = wrap_unchecked(theta);
    if t >= PI {
        -PI + epsilon
    } else {
        t
    }
}

/// tan(θ/2) under the ε-convention.
pub fn project(theta: f64, epsilon: f64) -> f64 {
    (0.5 * regularize(theta, epsilon)).tan()
}

/// ln(1 + cos θ) computed as ln 2 + 2 ln|cos(θ/2)| for accuracy near ±π.
pub(crate) fn log_one_plus_cos(theta: f64) -> f64 {
    LN_2 + 2.0 * (0.5 * theta).cos().abs().ln()
}

/// Projects every entry of `data`, row-major.
pub(crate) fn project_matrix(data: &AngleMatrix, epsilon: f64) -> Vec<f64> {
    data.as_slice().iter().map(|&t| project(t, epsilon)).collect()
}

/// Gaussian parameters on the projected scale plus the singularity ε.
#[derive(Debug, Clone, PartialEq)]
pub struct IsnParams {
    mu: Vec<f64>,
    sigma: Matrix,
    epsilon: f64,
    lower: Matrix,
    log_det: f64,
}

impl IsnParams {
    pub fn new(mu: Vec<f64>, sigma: Matrix, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let p = mu.len();
        if p == 0 {
            return Err(Error::invalid("need at least one coordinate"));
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: sigma.nrows(),
            });
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean vector has non-finite entries"));
        }
        let lower = cholesky(&sigma)?.unpack();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mu,
            sigma,
            epsilon,
            lower,
            log_det,
        })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    /// Gaussian log-density of a point on the projected scale.
    pub(crate) fn gaussian_log_density(&self, u: &[f64]) -> f64 {
        let p = self.p();
        let mut z: Vec<f64> = u.iter().zip(&self.mu).map(|(a, m)| a - m).collect();
        for i in 0..p {
            let mut v = z[i];
            for j in 0..i {
                v -= self.lower[(i, j)] * z[j];
            }
            z[i] = v / self.lower[(i, i)];
        }
        -0.5 * (p as f64 * ln_2pi() + self.log_det + z.iter().map(|v| v * v).sum::<f64>())
    }
}

/// −½ ln|2πΣ| − ½(u − μ)'Σ⁻¹(u − μ) − Σ_j ln(1 + cos θ_j), u_j = tan(θ_j/2).
pub fn isn_log_density(theta: &[f64], params: &IsnParams) -> Result<f64> {
    if theta.len() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("angles must be finite"));
    }
    let reg: Vec<f64> = theta.iter().map(|&t| regularize(t, params.epsilon)).collect();
    let u: Vec<f64> = reg.iter().map(|t| (0.5 * t).tan()).collect();
    let jacobian: f64 = reg.iter().map(|&t| log_one_plus_cos(t)).sum();
    Ok(params.gaussian_log_density(&u) - jacobian)
}

/// Sample mean and covariance (divisor n) of row-major values.
pub(crate) fn moments(values: &[f64], n: usize, p: usize) -> (Vec<f64>, Matrix) {
    let mut mean = vec![0.0; p];
    for row in values.chunks_exact(p) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(p, p);
    for row in values.chunks_exact(p) {
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..=a {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

/// Draws U ∼ N(μ, Σ) and returns Θ = 2·atan(U).
pub fn isn_sample(params: &IsnParams, n: usize, seed: u64) -> Result<AngleMatrix> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let p = params.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..p {
            let u = params.mu[i] + (0..=i).map(|j| params.lower[(i, j)] * z[j]).sum::<f64>();
            values.push(2.0 * u.atan());
        }
    }
    AngleMatrix::from_radians(n, p, values, default_names(p))
}

/// Gaussian maximum likelihood on the projected sample.
pub fn isn_fit(data: &AngleMatrix, epsilon: f64) -> Result<IsnParams> {
    check_epsilon(epsilon)?;
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::invalid(format!(
            "need more rows than columns, got n = {n}, p = {p}"
        )));
    }
    let u = project_matrix(data, epsilon);
    let (mean, cov) = moments(&u, n, p);
    if Cholesky::new(cov.clone()).is_none() || condition_number(&cov) > 1e14 {
        return Err(Error::numerical(format!(
            "projected sample covariance is degenerate (condition number {:.3e})",
            condition_number(&cov)
        )));
    }
    IsnParams::new(mean, cov, epsilon)
}

/// Law of Θ_A: (μ_A, Σ_AA) on the projected scale.
pub fn isn_marginal(params: &IsnParams, a: &[usize]) -> Result<IsnParams> {
    if a.is_empty() {
        return Err(Error::invalid("marginal index set is empty"));
    }
    check_index_set(a, params.p(), "marginal")?;
    IsnParams::new(
        subvector(&params.mu, a).as_slice().to_vec(),
        submatrix(&params.sigma, a, a),
        params.epsilon,
    )
}

/// Law of Θ_A given Θ_B = θ_B.
pub fn isn_conditional(params: &IsnParams, a: &[usize], b: &[usize], theta_b: &[f64]) -> Result<IsnParams> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("conditioning index sets must be non-empty"));
    }
    check_index_set(a, params.p(), "target")?;
    check_index_set(b, params.p(), "conditioning")?;
    check_disjoint(a, b)?;
    if theta_b.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: theta_b.len(),
        });
    }
    let u_b: Vec<f64> = theta_b.iter().map(|&t| project(t, params.epsilon)).collect();
    let (mean, cov) = crate::linalg::gaussian_conditional(&params.mu, &params.sigma, a, b, &u_b)?;
    IsnParams::new(mean.as_slice().to_vec(), cov, params.epsilon)
}

/// Normalized precision entries below this count as zero.
const CI_TOLERANCE: f64 = 1e-10;

/// Whether Θ_A ⊥ Θ_C | Θ_S: the A–C block of the inverse of Σ restricted to
/// A ∪ C ∪ S vanishes (entries scaled by √(K_aa K_cc)).
pub fn isn_ci_query(sigma: &Matrix, a: &[usize], c: &[usize], s: &[usize]) -> Result<bool> {
    let p = sigma.nrows();
    if a.is_empty() || c.is_empty() {
        return Err(Error::invalid("independence query needs non-empty A and C"));
    }
    check_index_set(a, p, "A")?;
    check_index_set(c, p, "C")?;
    check_index_set(s, p, "S")?;
    check_disjoint(a, c)?;
    check_disjoint(a, s)?;
    check_disjoint(c, s)?;
    let idx: Vec<usize> = a.iter().chain(c).chain(s).copied().collect();
    let sub = submatrix(sigma, &idx, &idx);
    let k = cholesky(&sub)
        .map_err(|_| {
            Error::numerical(format!(
                "principal submatrix is singular (condition number {:.3e})",
                condition_number(&sub)
            ))
        })?
        .inverse();
    let (na, nc) = (a.len(), c.len());
    for i in 0..na {
        for j in na..na + nc {
            if k[(i, j)].abs() > CI_TOLERANCE * (k[(i, i)] * k[(j, j)]).sqrt() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
