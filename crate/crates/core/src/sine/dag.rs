//! Conditional von Mises DAG model: each node is von Mises given its parents,
//! with coupling `b_j = Σ_{i∈pa(j)} λ_ij sin(θ_i − μ_i)`.
use crate::angle::{column_means, wrap_unchecked, Angle, AngleMatrix};
use crate::error::{Error, Result};
use crate::graph::{holm_adjust, Dag, EdgeRecord, EdgeReport};
use crate::optim::{self, Settings};
use crate::par::map_indices;
use crate::prelude::*;
use crate::special::{bessel_ratio_a1, chi2_1_sf, ln_2pi, log_i0_unchecked};

use super::{conditional_from_coupling, vm_log_density, VonMisesParams};

/// A fitted conditional von Mises DAG. `lambda[j][k]` is the coefficient of
/// the k-th parent of `j` (parents in ordering order, as in [`Dag::parents`]).
#[derive(Debug, Clone, PartialEq)]
pub struct CvmDagModel {
    dag: Dag,
    mu: Vec<f64>,
    kappa: Vec<f64>,
    lambda: Vec<Vec<f64>>,
}

impl CvmDagModel {
    pub fn new(dag: Dag, mu: Vec<f64>, kappa: Vec<f64>, lambda: Vec<Vec<f64>>) -> Result<Self> {
        let p = dag.p();
        for len in [mu.len(), kappa.len(), lambda.len()] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: len,
                });
            }
        }
        for j in 0..p {
            if lambda[j].len() != dag.parents(j).len() {
                return Err(Error::invalid(format!(
                    "node {j} has {} parents but {} coefficients",
                    dag.parents(j).len(),
                    lambda[j].len()
                )));
            }
        }
        if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return Err(Error::invalid(format!(
                "concentration must be finite and >= 0, got {k}"
            )));
        }
        let mu = mu
            .into_iter()
            .map(|m| Angle::new(m).map(Angle::radians))
            .collect::<Result<_>>()?;
        Ok(Self { dag, mu, kappa, lambda })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn p(&self) -> usize {
        self.dag.p()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn lambda(&self, j: usize) -> &[f64] {
        &self.lambda[j]
    }

    /// λ_ij, zero when `i` is not a parent of `j`.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.dag
            .parents(j)
            .iter()
            .position(|&v| v == i)
            .map_or(0.0, |k| self.lambda[j][k])
    }

    /// Law of θ_j given the parent values in `row` (a full p-vector).
    pub fn conditional(&self, j: usize, row: &[f64]) -> VonMisesParams {
        let b: f64 = self
            .dag
            .parents(j)
            .iter()
            .zip(&self.lambda[j])
            .map(|(&i, l)| l * (row[i] - self.mu[i]).sin())
            .sum();
        conditional_from_coupling(self.mu[j], self.kappa[j], b)
    }
}

/// Σ over rows and nodes of the conditional von Mises log-density.
pub fn cvm_log_likelihood(data: &AngleMatrix, model: &CvmDagModel) -> Result<f64> {
    if data.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: data.p(),
        });
    }
    let mut total = 0.0;
    for row in data.rows() {
        for j in 0..model.p() {
            total += vm_log_density(row[j], &model.conditional(j, row));
        }
    }
    Ok(total)
}

/// Centered inputs of one node's conditional likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    /// wrap(θ_j − μ_j) per row.
    pub residual: Vec<f64>,
    /// sin(θ_i − μ_i) per parent, per row.
    pub parent_sines: Vec<Vec<f64>>,
}

impl NodeData {
    pub fn new(data: &AngleMatrix, j: usize, parents: &[usize], mu: &[f64]) -> Self {
        Self {
            residual: data.column(j).map(|t| wrap_unchecked(t - mu[j])).collect(),
            parent_sines: parents
                .iter()
                .map(|&i| data.column(i).map(|t| (t - mu[i]).sin()).collect())
                .collect(),
        }
    }

    fn n(&self) -> usize {
        self.residual.len()
    }
}

/// Mean negative conditional log-likelihood at `x = (ln κ, λ_1, …, λ_m)`;
/// writes its gradient into `grad`.
pub fn node_objective(node: &NodeData, x: &[f64], grad: &mut [f64]) -> f64 {
    let kappa = x[0].exp();
    let lambdas = &x[1..];
    let n = node.n() as f64;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for r in 0..node.n() {
        let phi = node.residual[r];
        let (sin_phi, cos_phi) = phi.sin_cos();
        let b: f64 = lambdas.iter().zip(&node.parent_sines).map(|(l, s)| l * s[r]).sum();
        let conc = kappa.hypot(b);
        value += kappa * cos_phi + b * sin_phi - log_i0_unchecked(conc);
        let a = bessel_ratio_a1(conc);
        let (dk, db) = if conc > 0.0 {
            (a * kappa / conc, a * b / conc)
        } else {
            (0.0, 0.0)
        };
        grad[0] += kappa * (cos_phi - dk);
        let coupling = sin_phi - db;
        for (g, s) in grad[1..].iter_mut().zip(&node.parent_sines) {
            *g += s[r] * coupling;
        }
    }
    grad.iter_mut().for_each(|g| *g = -*g / n);
    -value / n + ln_2pi()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub node: usize,
    pub parents: Vec<usize>,
    pub mu: f64,
    pub kappa: f64,
    pub lambda: Vec<f64>,
    /// Total conditional log-likelihood over all rows.
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn node_settings() -> Settings {
    Settings {
        max_iter: 500,
        grad_tol: 1e-8,
        stall_tol: 1e-5,
    }
}

/// Fits node `j` given `parents`: μ_j is the circular mean of column j, and
/// (κ_j, λ) maximize the conditional likelihood.
pub fn cvm_fit_node(data: &AngleMatrix, j: usize, parents: &[usize]) -> Result<NodeFit> {
    let mu = column_means(data)?;
    cvm_fit_node_with(data, j, parents, &mu)
}

/// As [`cvm_fit_node`], with the mean directions supplied by the caller.
pub fn cvm_fit_node_with(data: &AngleMatrix, j: usize, parents: &[usize], mu: &[f64]) -> Result<NodeFit> {
    if j >= data.p() {
        return Err(Error::invalid(format!("node {j} out of range")));
    }
    crate::linalg::check_index_set(parents, data.p(), "parent set")?;
    if parents.contains(&j) {
        return Err(Error::invalid(format!("node {j} cannot be its own parent")));
    }
    if data.n() <= parents.len() + 2 {
        return Err(Error::invalid(format!(
            "need more than {} rows to fit {} parents",
            parents.len() + 2,
            parents.len()
        )));
    }
    let node = NodeData::new(data, j, parents, mu);
    let resultant = {
        let n = node.n() as f64;
        let c: f64 = node.residual.iter().map(|p| p.cos()).sum::<f64>() / n;
        let s: f64 = node.residual.iter().map(|p| p.sin()).sum::<f64>() / n;
        c.hypot(s)
    };
    let mut x0 = vec![0.0; parents.len() + 1];
    x0[0] = approx_inverse_a1(resultant).max(1e-2).ln();
    let min = optim::minimize(|x, g| node_objective(&node, x, g), &x0, node_settings())?;
    let n = node.n() as f64;
    Ok(NodeFit {
        node: j,
        parents: parents.to_vec(),
        mu: mu[j],
        kappa: min.x[0].exp(),
        lambda: min.x[1..].to_vec(),
        log_likelihood: -n * min.value,
        iterations: min.iterations,
    })
}

/// Closed-form approximation to the solution of A₁(κ) = r.
fn approx_inverse_a1(r: f64) -> f64 {
    if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else if r < 1.0 {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    } else {
        1e6
    }
}

/// Fits every node of `dag` and assembles the model.
pub fn cvm_fit(data: &AngleMatrix, dag: &Dag) -> Result<(CvmDagModel, f64)> {
    if data.p() != dag.p() {
        return Err(Error::DimensionMismatch {
            expected: dag.p(),
            found: data.p(),
        });
    }
    let mu = column_means(data)?;
    let fits = map_indices(dag.p(), |j| cvm_fit_node_with(data, j, dag.parents(j), &mu))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let loglik = fits.iter().map(|f| f.log_likelihood).sum();
    let kappa = fits.iter().map(|f| f.kappa).collect();
    let lambda = fits.into_iter().map(|f| f.lambda).collect();
    Ok((CvmDagModel::new(dag.clone(), mu, kappa, lambda)?, loglik))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtOptions {
    pub alpha: f64,
    /// Holm-adjust the p-values across all tests before selection.
    pub holm: bool,
    /// Candidate parents per node; defaults to all predecessors.
    pub candidates: Option<Vec<Vec<usize>>>,
}

impl Default for LrtOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            holm: false,
            candidates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtSelection {
    pub model: CvmDagModel,
    pub report: EdgeReport,
    pub log_likelihood: f64,
}

impl LrtSelection {
    pub fn dag(&self) -> &Dag {
        self.model.dag()
    }
}

/// Likelihood ratio edge selection for a known node ordering.
///
/// For each node the full model uses all candidate parents; each candidate
/// is tested by dropping it, with `2(ℓ_full − ℓ_reduced) ~ χ²(1)`. Edges with
/// p-value below `alpha` are kept and the retained model is refitted.
pub fn cvm_lrt_select(data: &AngleMatrix, ordering: &[usize], options: &LrtOptions) -> Result<LrtSelection> {
    if !(0.0..1.0).contains(&options.alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0, 1), got {}",
            options.alpha
        )));
    }
    let labels = data.column_names().to_vec();
    let skeleton = Dag::empty(ordering.to_vec(), labels.clone())?;
    let p = skeleton.p();
    if data.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: data.p(),
        });
    }
    let candidates: Vec<Vec<usize>> = match &options.candidates {
        Some(c) => c.clone(),
        None => (0..p).map(|j| skeleton.predecessors(j)).collect(),
    };
    // Validates that every candidate precedes its child.
    let full_dag = Dag::new(ordering.to_vec(), candidates, labels.clone())?;
    let mu = column_means(data)?;

    // One job per (node, dropped candidate), plus the full fit per node.
    let mut jobs: Vec<(usize, Option<usize>)> = Vec::new();
    for j in 0..p {
        jobs.push((j, None));
        for &i in full_dag.parents(j) {
            jobs.push((j, Some(i)));
        }
    }
    let fits = map_indices(jobs.len(), |k| {
        let (j, drop) = jobs[k];
        let parents: Vec<usize> = full_dag
            .parents(j)
            .iter()
            .copied()
            .filter(|&i| Some(i) != drop)
            .collect();
        cvm_fit_node_with(data, j, &parents, &mu)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut k = 0;
    for j in 0..p {
        let full = &fits[k];
        k += 1;
        for (pos, &i) in full_dag.parents(j).iter().enumerate() {
            let reduced = &fits[k];
            k += 1;
            let statistic = (2.0 * (full.log_likelihood - reduced.log_likelihood)).max(0.0);
            let p_value = chi2_1_sf(statistic);
            records.push(EdgeRecord {
                i,
                j,
                statistic,
                p_value,
                adjusted_p: p_value,
                selected: false,
                stability_frequency: None,
                weight: Some(full.lambda[pos]),
            });
        }
    }
    if options.holm {
        let adjusted = holm_adjust(&records.iter().map(|r| r.p_value).collect::<Vec<_>>());
        for (r, a) in records.iter_mut().zip(adjusted) {
            r.adjusted_p = a;
        }
    }
    let mut parents = vec![Vec::new(); p];
    for r in &mut records {
        r.selected = r.adjusted_p < options.alpha;
        if r.selected {
            parents[r.j].push(r.i);
        }
    }
    records.sort_by_key(|r| (r.i, r.j));
    let dag = Dag::new(ordering.to_vec(), parents, labels)?;
    let (model, log_likelihood) = cvm_fit(data, &dag)?;
    Ok(LrtSelection {
        model,
        report: EdgeReport { records },
        log_likelihood,
    })
}
