//! Holm-corrected edge tests for the unwrapped Normal graphical model.
use crate::angle::{default_names, AngleMatrix};
use crate::error::{Error, Result};
use crate::graph::{holm_adjust, EdgeRecord, EdgeReport, UndirectedGraph};
use crate::linalg::{condition_number, inverse_spd, symmetrize, Matrix};
use crate::prelude::*;
use crate::special::normal_sf;

use super::{WindingTruncation, WnLikelihood, WnParams};

/// Covariance estimates above this condition number are refused.
const MAX_CONDITION: f64 = 1e12;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "significance level must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn check_conditioning(sigma: &Matrix) -> Result<()> {
    let cond = condition_number(sigma);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::numerical(format!(
            "covariance estimate is near-singular (condition number {cond:.3e})"
        )));
    }
    Ok(())
}

/// −Ω_ij / √(Ω_ii Ω_jj) with Ω = Σ⁻¹; unit diagonal.
pub fn partial_correlations(sigma: &Matrix) -> Result<Matrix> {
    let omega = inverse_spd(sigma)?;
    let p = omega.nrows();
    Ok(Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            -0.5 * (omega[(i, j)] + omega[(j, i)]) / (omega[(i, i)] * omega[(j, j)]).sqrt()
        }
    }))
}

struct Test {
    i: usize,
    j: usize,
    statistic: f64,
    p_value: f64,
    weight: f64,
}

fn assemble(p: usize, tests: Vec<Test>, alpha: f64) -> Result<(UndirectedGraph, EdgeReport)> {
    let raw: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let adjusted = holm_adjust(&raw);
    let mut graph = UndirectedGraph::with_labels(default_names(p));
    let mut records = Vec::with_capacity(tests.len());
    for (t, adj) in tests.into_iter().zip(adjusted) {
        let selected = adj < alpha;
        if selected {
            graph.add_edge(t.i, t.j)?;
        }
        records.push(EdgeRecord {
            i: t.i,
            j: t.j,
            statistic: t.statistic,
            p_value: t.p_value,
            adjusted_p: adj,
            selected,
            stability_frequency: None,
            weight: Some(t.weight),
        });
    }
    Ok((graph, EdgeReport { records }))
}

/// Fisher-z tests of every partial correlation, with √(n − p − 1) scaling and
/// Holm adjustment; edges with adjusted p-value below `alpha` are kept.
pub fn unwrapped_edge_select(params: &WnParams, n: usize, alpha: f64) -> Result<(UndirectedGraph, EdgeReport)> {
    check_alpha(alpha)?;
    let p = params.p();
    if n <= p + 3 {
        return Err(Error::invalid(format!(
            "edge tests need n > p + 3, got n = {n}, p = {p}"
        )));
    }
    check_conditioning(params.sigma())?;
    let rho = partial_correlations(params.sigma())?;
    let scale = ((n - p - 1) as f64).sqrt();
    let mut tests = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            let r = rho[(i, j)].clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            let z = libm::atanh(r) * scale;
            tests.push(Test {
                i,
                j,
                statistic: z,
                p_value: (2.0 * normal_sf(z.abs())).min(1.0),
                weight: rho[(i, j)],
            });
        }
    }
    assemble(p, tests, alpha)
}

/// Wald tests of the off-diagonal entries of Σ, with standard errors from the
/// observed information of the truncated likelihood (numerical Hessian).
pub fn covariance_edge_select(
    data: &AngleMatrix,
    params: &WnParams,
    trunc: WindingTruncation,
    alpha: f64,
) -> Result<(UndirectedGraph, EdgeReport)> {
    check_alpha(alpha)?;
    let p = params.p();
    check_conditioning(params.sigma())?;
    let lik = WnLikelihood::new(data, params.mu(), trunc)?;

    let coords: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let m = coords.len();
    let gradient = |s: &Matrix| -> Result<Vec<f64>> {
        let (_, g) = lik.sigma_gradient(s)?;
        Ok(coords
            .iter()
            .map(|&(i, j)| if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] })
            .collect())
    };
    let mut hessian = Matrix::zeros(m, m);
    for (c, &(i, j)) in coords.iter().enumerate() {
        let h = 1e-5
            * params.sigma()[(i, j)]
                .abs()
                .max(params.sigma()[(i, i)].min(params.sigma()[(j, j)]));
        let bump = |d: f64| {
            let mut s = params.sigma().clone();
            s[(i, j)] += d;
            if i != j {
                s[(j, i)] += d;
            }
            s
        };
        let up = gradient(&bump(h))?;
        let down = gradient(&bump(-h))?;
        for r in 0..m {
            hessian[(r, c)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    let information = symmetrize(&(-hessian));
    let cov =
        inverse_spd(&information).map_err(|_| Error::numerical("observed information is not positive definite"))?;

    let mut tests = Vec::with_capacity(p * (p - 1) / 2);
    for (c, &(i, j)) in coords.iter().enumerate() {
        if i == j {
            continue;
        }
        let est = params.sigma()[(i, j)];
        let z = est / cov[(c, c)].sqrt();
        tests.push(Test {
            i,
            j,
            statistic: z,
            p_value: (2.0 * normal_sf(z.abs())).min(1.0),
            weight: est,
        });
    }
    assemble(p, tests, alpha)
}
