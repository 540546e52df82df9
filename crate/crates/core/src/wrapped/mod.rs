//! Multivariate wrapped Normal distribution.
//!
//! Θ = X mod 2π with X ∼ N_p(μ, Σ). The density sums the Gaussian density over
//! all winding vectors k ∈ ℤ^p; here the sum runs over the finite grid
//! {−r, …, r}^p of a [`WindingTruncation`], centred at the winding that brings
//! θ closest to μ.
use core::f64::consts::TAU;

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angle::{default_names, wrap_unchecked, AngleMatrix};
use crate::error::{Error, Result};
use crate::linalg::{check_disjoint, check_index_set, condition_number, submatrix, subvector, Matrix};
use crate::prelude::*;
use crate::special::ln_2pi;

mod fit;
mod select;

pub use fit::{
    log_cholesky, sigma_from_log_cholesky, wn_fit_approx_mle, wn_fit_with, wn_log_likelihood, Initialization, WnFit,
    WnLikelihood,
};
pub use select::{covariance_edge_select, partial_correlations, unwrapped_edge_select};

/// Grid sizes above this are refused.
const MAX_GRID: usize = 50_000_000;

/// The winding grid {−r, …, r}^p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindingTruncation {
    radius: u32,
    dimension: usize,
}

impl WindingTruncation {
    pub fn new(radius: u32, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("truncation dimension must be at least 1"));
        }
        let side = 2 * radius as usize + 1;
        let len = u32::try_from(dimension)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .filter(|&l| l <= MAX_GRID);
        if len.is_none() {
            return Err(Error::invalid(format!(
                "winding grid {side}^{dimension} exceeds {MAX_GRID} points"
            )));
        }
        Ok(Self { radius, dimension })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of grid points, (2r + 1)^p.
    pub fn len(&self) -> usize {
        (2 * self.radius as usize + 1).pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All winding vectors in lexicographic order, flattened row-major.
    pub fn grid(&self) -> Vec<i64> {
        let p = self.dimension;
        let r = self.radius as i64;
        let mut out = Vec::with_capacity(self.len() * p);
        let mut k = vec![-r; p];
        loop {
            out.extend_from_slice(&k);
            let mut pos = p;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if k[pos] < r {
                    k[pos] += 1;
                    break;
                }
                k[pos] = -r;
            }
        }
    }

    pub(crate) fn resized(&self, dimension: usize) -> Result<Self> {
        Self::new(self.radius, dimension)
    }

    pub(crate) fn widened(&self) -> Result<Self> {
        Self::new(self.radius + 1, self.dimension)
    }
}

/// Parameters (μ, Σ) of a wrapped Normal; μ is stored wrapped into (−π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct WnParams {
    mu: Vec<f64>,
    sigma: Matrix,
    lower: Matrix,
    log_det: f64,
}

impl WnParams {
    pub fn new(mu: Vec<f64>, sigma: Matrix) -> Result<Self> {
        let p = mu.len();
        if p == 0 {
            return Err(Error::invalid("wrapped Normal needs at least one coordinate"));
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
        crate::linalg::check_symmetric(&sigma)?;
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| {
            Error::invalid(format!(
                "covariance is not positive definite (condition number {:.3e})",
                condition_number(&sigma)
            ))
        })?;
        let lower = chol.unpack();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mu: mu.into_iter().map(wrap_unchecked).collect(),
            sigma,
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

    /// Lower Cholesky factor of Σ.
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Precomputes the winding grid for repeated density evaluation.
    pub fn density(&self, trunc: WindingTruncation) -> Result<WnDensity> {
        if trunc.dimension() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: trunc.dimension(),
            });
        }
        Ok(WnDensity {
            params: self.clone(),
            lower: row_major(&self.lower),
            grid: WhitenedGrid::new(&self.lower, trunc),
        })
    }
}

/// Winding shifts 2πk mapped through L⁻¹, row-major.
#[derive(Debug, Clone)]
pub(crate) struct WhitenedGrid {
    p: usize,
    shifts: Vec<f64>,
}

impl WhitenedGrid {
    pub(crate) fn new(lower: &Matrix, trunc: WindingTruncation) -> Self {
        let p = trunc.dimension();
        let l = row_major(lower);
        let mut shifts: Vec<f64> = trunc.grid().into_iter().map(|k| TAU * k as f64).collect();
        for w in shifts.chunks_exact_mut(p) {
            forward_solve(&l, p, w);
        }
        Self { p, shifts }
    }

    pub(crate) fn points(&self) -> core::slice::ChunksExact<'_, f64> {
        self.shifts.chunks_exact(self.p)
    }

    /// ln Σ_g exp(−½‖z + w_g‖²) for a whitened residual z.
    pub(crate) fn log_sum(&self, z: &[f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for w in self.points() {
            let e = -0.5 * sq_dist(z, w);
            if e > max {
                acc = acc * (max - e).exp() + 1.0;
                max = e;
            } else {
                acc += (e - max).exp();
            }
        }
        max + acc.ln()
    }
}

pub(crate) fn sq_dist(z: &[f64], w: &[f64]) -> f64 {
    z.iter().zip(w).map(|(a, b)| (a + b) * (a + b)).sum()
}

pub(crate) fn row_major(m: &Matrix) -> Vec<f64> {
    let p = m.nrows();
    (0..p * p).map(|idx| m[(idx / p, idx % p)]).collect()
}

/// Solves L x = b in place for row-major lower-triangular L.
pub(crate) fn forward_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut v = b[i];
        for j in 0..i {
            v -= l[i * p + j] * b[j];
        }
        b[i] = v / l[i * p + i];
    }
}

/// A wrapped Normal density with its winding grid prepared.
#[derive(Debug, Clone)]
pub struct WnDensity {
    params: WnParams,
    lower: Vec<f64>,
    grid: WhitenedGrid,
}

impl WnDensity {
    pub fn params(&self) -> &WnParams {
        &self.params
    }

    /// Log-density at θ; `theta.len()` must equal p.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let p = self.params.p();
        debug_assert_eq!(theta.len(), p);
        let mut z: Vec<f64> = theta
            .iter()
            .zip(&self.params.mu)
            .map(|(t, m)| wrap_unchecked(t - m))
            .collect();
        forward_solve(&self.lower, p, &mut z);
        -0.5 * p as f64 * ln_2pi() - 0.5 * self.params.log_det + self.grid.log_sum(&z)
    }
}

pub fn wn_log_density(theta: &[f64], params: &WnParams, trunc: WindingTruncation) -> Result<f64> {
    if theta.len() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("angles must be finite"));
    }
    Ok(params.density(trunc)?.log_density(theta))
}

/// Wrapped draws together with the winding numbers that were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct WnSample {
    pub angles: AngleMatrix,
    /// K = (X − Θ)/2π, row-major n×p.
    pub windings: Vec<i64>,
}

impl WnSample {
    pub fn winding(&self, row: usize, col: usize) -> i64 {
        self.windings[row * self.angles.p() + col]
    }
}

pub fn wn_sample(params: &WnParams, n: usize, seed: u64) -> Result<WnSample> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let p = params.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * p);
    let mut windings = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..p {
            let x = params.mu[i] + (0..=i).map(|j| params.lower[(i, j)] * z[j]).sum::<f64>();
            let theta = wrap_unchecked(x);
            values.push(theta);
            windings.push(libm::round((x - theta) / TAU) as i64);
        }
    }
    Ok(WnSample {
        angles: AngleMatrix::from_radians(n, p, values, default_names(p))?,
        windings,
    })
}

/// Law of Θ_A: (μ_A, Σ_AA).
pub fn wn_marginal(params: &WnParams, a: &[usize]) -> Result<WnParams> {
    if a.is_empty() {
        return Err(Error::invalid("marginal index set is empty"));
    }
    check_index_set(a, params.p(), "marginal")?;
    WnParams::new(
        subvector(&params.mu, a).as_slice().to_vec(),
        submatrix(&params.sigma, a, a),
    )
}

fn check_blocks(p: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("conditioning index sets must be non-empty"));
    }
    check_index_set(a, p, "target")?;
    check_index_set(b, p, "conditioning")?;
    check_disjoint(a, b)
}

fn conditional_at(params: &WnParams, a: &[usize], b: &[usize], x_b: &[f64]) -> Result<WnParams> {
    let (mean, cov) = crate::linalg::gaussian_conditional(&params.mu, &params.sigma, a, b, x_b)?;
    WnParams::new(mean.as_slice().to_vec(), cov)
}

/// Law of Θ_A given X_B = θ_B + 2πk_B. `theta_b` is used as given, so only
/// the sum θ_B + 2πk_B matters.
pub fn wn_conditional_given_unwrapped(
    params: &WnParams,
    a: &[usize],
    b: &[usize],
    theta_b: &[f64],
    k_b: &[i64],
) -> Result<WnParams> {
    check_blocks(params.p(), a, b)?;
    if theta_b.len() != b.len() || k_b.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: if theta_b.len() != b.len() {
                theta_b.len()
            } else {
                k_b.len()
            },
        });
    }
    let x_b: Vec<f64> = theta_b.iter().zip(k_b).map(|(&t, &k)| t + TAU * k as f64).collect();
    conditional_at(params, a, b, &x_b)
}

#[derive(Debug, Clone)]
pub struct MixtureComponent {
    /// Winding of θ_S (as given, after wrapping into (−π, π]).
    pub k_s: Vec<i64>,
    pub weight: f64,
    pub conditional: WnParams,
}

/// Law of Θ_A given Θ_S: a mixture over k_S of wrapped Normal conditionals.
#[derive(Debug, Clone)]
pub struct ConditionalMixture {
    a: Vec<usize>,
    components: Vec<MixtureComponent>,
    densities: Vec<WnDensity>,
}

impl ConditionalMixture {
    pub fn target(&self) -> &[usize] {
        &self.a
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn component(&self, k_s: &[i64]) -> Option<&MixtureComponent> {
        self.components.iter().find(|c| c.k_s == k_s)
    }

    /// Log-density of θ_A, wrapping each component over its own k_A grid.
    pub fn log_density(&self, theta_a: &[f64]) -> Result<f64> {
        if theta_a.len() != self.a.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a.len(),
                found: theta_a.len(),
            });
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.densities)
            .filter(|(c, _)| c.weight > 0.0)
            .map(|(c, d)| c.weight.ln() + d.log_density(theta_a))
            .collect();
        Ok(crate::special::log_sum_exp(&terms))
    }

    /// Log-density of the single component at `k_s`.
    pub fn component_log_density(&self, k_s: &[i64], theta_a: &[f64]) -> Option<f64> {
        let idx = self.components.iter().position(|c| c.k_s == k_s)?;
        Some(self.densities[idx].log_density(theta_a))
    }
}

/// Conditional law of Θ_A given Θ_S = θ_S over the winding grid of `trunc`
/// (which has dimension p; its radius is applied to both S and A).
pub fn wn_conditional_mixture(
    params: &WnParams,
    a: &[usize],
    s: &[usize],
    theta_s: &[f64],
    trunc: WindingTruncation,
) -> Result<ConditionalMixture> {
    check_blocks(params.p(), a, s)?;
    if trunc.dimension() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: trunc.dimension(),
        });
    }
    if theta_s.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: theta_s.len(),
        });
    }
    let q = s.len();
    let mu_s: Vec<f64> = s.iter().map(|&i| params.mu[i]).collect();
    let theta_s: Vec<f64> = theta_s.iter().map(|&t| wrap_unchecked(t)).collect();
    // The grid is centred on the copy of θ_S nearest μ_S; `offset` is that
    // copy's winding.
    let resid: Vec<f64> = theta_s.iter().zip(&mu_s).map(|(t, m)| wrap_unchecked(t - m)).collect();
    let offset: Vec<i64> = (0..q)
        .map(|i| libm::round((mu_s[i] + resid[i] - theta_s[i]) / TAU) as i64)
        .collect();

    let s_trunc = trunc.resized(q)?;
    let a_trunc = trunc.resized(a.len())?;
    let lower_ss = Cholesky::new(submatrix(&params.sigma, s, s))
        .ok_or_else(|| Error::numerical("conditioning block is singular"))?
        .unpack();
    let lss = row_major(&lower_ss);
    let grid = s_trunc.grid();
    let mut log_w = Vec::with_capacity(s_trunc.len());
    let mut z = vec![0.0; q];
    for k in grid.chunks_exact(q) {
        for i in 0..q {
            z[i] = resid[i] + TAU * k[i] as f64;
        }
        forward_solve(&lss, q, &mut z);
        log_w.push(-0.5 * z.iter().map(|v| v * v).sum::<f64>());
    }
    let norm = crate::special::log_sum_exp(&log_w);

    let mut components = Vec::with_capacity(log_w.len());
    let mut densities = Vec::with_capacity(log_w.len());
    for (k, lw) in grid.chunks_exact(q).zip(&log_w) {
        let x_s: Vec<f64> = (0..q).map(|i| mu_s[i] + resid[i] + TAU * k[i] as f64).collect();
        let conditional = conditional_at(params, a, s, &x_s)?;
        densities.push(conditional.density(a_trunc)?);
        components.push(MixtureComponent {
            k_s: k.iter().zip(&offset).map(|(a, b)| a + b).collect(),
            weight: (lw - norm).exp(),
            conditional,
        });
    }
    Ok(ConditionalMixture {
        a: a.to_vec(),
        components,
        densities,
    })
}
