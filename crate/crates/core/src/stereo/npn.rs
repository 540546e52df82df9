//! Nonparanormal marginal transforms on the projected scale.
//!
//! Each h_j is the Winsorized empirical CDF of U_j followed by the Normal
//! quantile, rescaled so that h_j(U_j) keeps the sample mean and variance of
//! U_j. Between sample points h_j is linear; beyond them it is flat.
use core::f64::consts::PI;

use crate::angle::AngleMatrix;
use crate::error::{Error, Result};
use crate::linalg::{floor_eigenvalues, Matrix};
use crate::prelude::*;
use crate::special::normal_quantile;

use super::{log_one_plus_cos, moments, project_matrix, regularize, IsnParams};

const DERIVATIVE_FLOOR: f64 = 1e-12;

/// Monotone piecewise-linear map through sorted knots, flat outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PiecewiseLinear {
    /// `x` strictly increasing, `y` non-decreasing, both finite.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::invalid("piecewise-linear map needs at least one knot"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("knots must be finite"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("knot abscissae must be strictly increasing"));
        }
        if y.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("knot values must be non-decreasing"));
        }
        Ok(Self { x, y })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Index of the segment [x_i, x_{i+1}] holding `u`, if inside the support.
    fn segment(&self, u: f64) -> Option<usize> {
        let n = self.x.len();
        if n < 2 || u < self.x[0] || u > self.x[n - 1] {
            return None;
        }
        let i = self.x.partition_point(|&k| k <= u);
        Some(i.clamp(1, n - 1) - 1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.x.len();
        match self.segment(u) {
            Some(i) => {
                let t = (u - self.x[i]) / (self.x[i + 1] - self.x[i]);
                self.y[i] + t * (self.y[i + 1] - self.y[i])
            }
            None if u < self.x[0] => self.y[0],
            None => self.y[n - 1],
        }
    }

    /// Slope of the segment holding `u`; 0 outside the support.
    pub fn derivative(&self, u: f64) -> f64 {
        match self.segment(u) {
            Some(i) => (self.y[i + 1] - self.y[i]) / (self.x[i + 1] - self.x[i]),
            None => 0.0,
        }
    }

    /// a·h + b.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("affine rescaling needs a positive factor"));
        }
        Self::new(self.x.clone(), self.y.iter().map(|v| a * v + b).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateTransform {
    Identity,
    Piecewise(PiecewiseLinear),
}

impl CoordinateTransform {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Identity => u,
            Self::Piecewise(h) => h.eval(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Piecewise(h) => h.derivative(u),
        }
    }
}

/// The transforms h = (h_1, …, h_p).
#[derive(Debug, Clone, PartialEq)]
pub struct NpnTransform {
    coordinates: Vec<CoordinateTransform>,
    /// Winsorization level δ_n, when estimated from data.
    delta: Option<f64>,
    derivative_floor: f64,
}

impl NpnTransform {
    pub fn identity(p: usize) -> Self {
        Self::new(vec![CoordinateTransform::Identity; p])
    }

    pub fn new(coordinates: Vec<CoordinateTransform>) -> Self {
        Self {
            coordinates,
            delta: None,
            derivative_floor: DERIVATIVE_FLOOR,
        }
    }

    pub fn p(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[CoordinateTransform] {
        &self.coordinates
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn derivative_floor(&self) -> f64 {
        self.derivative_floor
    }

    pub fn with_derivative_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::invalid("derivative floor must be positive"));
        }
        self.derivative_floor = floor;
        Ok(self)
    }

    /// h(u) for a row of projected values.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.coordinates).map(|(&v, h)| h.eval(v)).collect()
    }

    /// h applied to the projection of every row, row-major.
    pub fn transform(&self, data: &AngleMatrix, epsilon: f64) -> Result<Vec<f64>> {
        if data.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: data.p(),
            });
        }
        let p = self.p();
        let mut u = project_matrix(data, epsilon);
        for row in u.chunks_exact_mut(p) {
            for (v, h) in row.iter_mut().zip(&self.coordinates) {
                *v = h.eval(*v);
            }
        }
        Ok(u)
    }
}

/// δ_n = 1 / (4 n^{1/4} √(π ln n)).
pub fn winsorization_level(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * n.powf(0.25) * (PI * n.ln()).sqrt())
}

fn estimate_coordinate(u: &[f64], delta: f64, column: usize) -> Result<PiecewiseLinear> {
    let n = u.len();
    let nf = n as f64;
    let mean = u.iter().sum::<f64>() / nf;
    let var = u.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    if !(var > 0.0) || sorted[0] == sorted[n - 1] {
        return Err(Error::numerical(format!(
            "column {column} is constant; its transform is degenerate"
        )));
    }
    // Distinct values with their ECDF, Winsorized and mapped to Normal scores.
    let mut knots_x = Vec::new();
    let mut scores = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut k = i;
        while k < n && sorted[k] == v {
            k += 1;
        }
        let f = (k as f64 / nf).clamp(delta, 1.0 - delta);
        knots_x.push(v);
        scores.push(normal_quantile(f));
        i = k;
    }
    // Affine rescaling fixed by the training values h(u_i).
    let lookup = |v: f64| scores[knots_x.partition_point(|&x| x < v)];
    let g: Vec<f64> = u.iter().map(|&v| lookup(v)).collect();
    let g_mean = g.iter().sum::<f64>() / nf;
    let g_var = g.iter().map(|v| (v - g_mean) * (v - g_mean)).sum::<f64>() / nf;
    if !(g_var > 0.0) {
        return Err(Error::numerical(format!(
            "column {column} has a degenerate Normal-score transform"
        )));
    }
    let scale = (var / g_var).sqrt();
    let knots_y = scores.iter().map(|s| mean + scale * (s - g_mean)).collect();
    PiecewiseLinear::new(knots_x, knots_y)
}

/// Estimates h_j for every column from the projected sample.
pub fn npn_estimate_transforms(data: &AngleMatrix, epsilon: f64) -> Result<NpnTransform> {
    super::check_epsilon(epsilon)?;
    let (n, p) = (data.n(), data.p());
    if n < 10 {
        return Err(Error::invalid(format!(
            "transform estimation needs at least 10 rows, got {n}"
        )));
    }
    let u = project_matrix(data, epsilon);
    let delta = winsorization_level(n);
    let coordinates = (0..p)
        .map(|j| {
            let col: Vec<f64> = u.iter().skip(j).step_by(p).copied().collect();
            estimate_coordinate(&col, delta, j).map(CoordinateTransform::Piecewise)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NpnTransform {
        coordinates,
        delta: Some(delta),
        derivative_floor: DERIVATIVE_FLOOR,
    })
}

/// Gaussian parameters on the h-scale together with h.
#[derive(Debug, Clone, PartialEq)]
pub struct IsnpnModel {
    params: IsnParams,
    transform: NpnTransform,
}

impl IsnpnModel {
    pub fn new(params: IsnParams, transform: NpnTransform) -> Result<Self> {
        if params.p() != transform.p() {
            return Err(Error::DimensionMismatch {
                expected: params.p(),
                found: transform.p(),
            });
        }
        Ok(Self { params, transform })
    }

    pub fn params(&self) -> &IsnParams {
        &self.params
    }

    pub fn transform(&self) -> &NpnTransform {
        &self.transform
    }
}

/// Gaussian log-density at h(u) plus the log-Jacobians of h and of the
/// stereographic map.
pub fn isnpn_log_density(theta: &[f64], model: &IsnpnModel) -> Result<f64> {
    let params = &model.params;
    if theta.len() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("angles must be finite"));
    }
    let floor = model.transform.derivative_floor;
    let mut v = Vec::with_capacity(theta.len());
    let mut log_jac = 0.0;
    for (&t, h) in theta.iter().zip(&model.transform.coordinates) {
        let r = regularize(t, params.epsilon());
        let u = (0.5 * r).tan();
        v.push(h.eval(u));
        log_jac += h.derivative(u).max(floor).ln() - log_one_plus_cos(r);
    }
    Ok(params.gaussian_log_density(&v) + log_jac)
}

/// Estimates h, then the Gaussian MLE of h(U).
pub fn isnpn_fit(data: &AngleMatrix, epsilon: f64) -> Result<IsnpnModel> {
    let transform = npn_estimate_transforms(data, epsilon)?;
    let values = transform.transform(data, epsilon)?;
    let (mean, cov) = moments(&values, data.n(), data.p());
    let params = IsnParams::new(mean, cov, epsilon)?;
    IsnpnModel::new(params, transform)
}

/// Sample covariance (divisor n) of h(U), eigenvalues floored at 1e−8. With
/// n < p the result is rank deficient before flooring.
pub fn npn_correlation(data: &AngleMatrix, transform: &NpnTransform, epsilon: f64) -> Result<Matrix> {
    super::check_epsilon(epsilon)?;
    let values = transform.transform(data, epsilon)?;
    let (_, cov) = moments(&values, data.n(), data.p());
    Ok(floor_eigenvalues(&cov, 1e-8))
}
