//! Stability selection over repeated K-fold cross-validation.
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::angle::AngleMatrix;
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::linalg::Matrix;
use crate::par::map_indices;
use crate::prelude::*;
use crate::special::ln_2pi;

use super::glasso::{adaptive_glasso, GlassoOptions};
use super::npn::npn_estimate_transforms;
use super::{moments, project_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Projected values u = tan(θ/2).
    Isn,
    /// Projected values passed through estimated nonparanormal transforms.
    Isnpn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    pub folds: usize,
    pub repeats: usize,
    pub threshold: f64,
    /// Penalties to search; `None` uses `grid_size` log-spaced values from
    /// the largest absolute off-diagonal correlation down by a factor 100.
    pub rho_grid: Option<Vec<f64>>,
    pub grid_size: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub glasso: GlassoOptions,
}

impl StabilityOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 5,
            repeats: 50,
            threshold: 0.5,
            rho_grid: None,
            grid_size: 20,
            seed,
            epsilon: super::DEFAULT_EPSILON,
            glasso: GlassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    p: usize,
    /// Selection counts for pairs (i < j), row-major upper triangle.
    counts: Vec<usize>,
    pub rho_grid: Vec<f64>,
    /// Penalty chosen by each successful repeat, in repeat order.
    pub chosen_rho: Vec<f64>,
    pub threshold: f64,
    pub failed_repeats: usize,
}

impl StabilityReport {
    pub fn successful_repeats(&self) -> usize {
        self.chosen_rho.len()
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (a, b) = (i.min(j), i.max(j));
        a * self.p - a * (a + 1) / 2 + (b - a - 1)
    }

    /// Share of successful repeats that selected edge {i, j}.
    pub fn frequency(&self, i: usize, j: usize) -> f64 {
        self.counts[self.slot(i, j)] as f64 / self.successful_repeats() as f64
    }

    /// Every pair (i < j) with its frequency.
    pub fn frequencies(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.counts.len());
        for i in 0..self.p {
            for j in i + 1..self.p {
                out.push((i, j, self.frequency(i, j)));
            }
        }
        out
    }
}

/// Standardized transformed sample, row-major.
fn prepare(data: &AngleMatrix, kind: ModelKind, epsilon: f64) -> Result<Vec<f64>> {
    let (n, p) = (data.n(), data.p());
    let mut values = match kind {
        ModelKind::Isn => project_matrix(data, epsilon),
        ModelKind::Isnpn => npn_estimate_transforms(data, epsilon)?.transform(data, epsilon)?,
    };
    let (mean, cov) = moments(&values, n, p);
    for j in 0..p {
        if !(cov[(j, j)] > 0.0) {
            return Err(Error::numerical(format!(
                "column {j} has zero variance after transformation"
            )));
        }
    }
    for row in values.chunks_exact_mut(p) {
        for j in 0..p {
            row[j] = (row[j] - mean[j]) / cov[(j, j)].sqrt();
        }
    }
    Ok(values)
}

fn default_grid(corr: &Matrix, size: usize) -> Vec<f64> {
    let p = corr.nrows();
    let mut top = 0.0_f64;
    for i in 0..p {
        for j in i + 1..p {
            top = top.max(corr[(i, j)].abs());
        }
    }
    let top = if top > 0.0 { top } else { 1.0 };
    let bottom = top / 100.0;
    if size == 1 {
        return vec![top];
    }
    (0..size)
        .map(|k| bottom * (top / bottom).powf(k as f64 / (size - 1) as f64))
        .collect()
}

fn rows_of(values: &[f64], p: usize, idx: &[usize]) -> Vec<f64> {
    idx.iter()
        .flat_map(|&i| values[i * p..(i + 1) * p].iter().copied())
        .collect()
}

/// Mean held-out Gaussian log-likelihood per row under N(m, Ω⁻¹).
fn held_out_score(test: &[f64], p: usize, mean: &[f64], omega: &Matrix) -> Result<f64> {
    let chol = crate::linalg::cholesky(omega)?;
    let log_det = crate::linalg::log_det_spd(&chol);
    let rows = test.len() / p;
    let mut total = 0.0;
    for row in test.chunks_exact(p) {
        let mut q = 0.0;
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in 0..p {
                q += da * omega[(a, b)] * (row[b] - mean[b]);
            }
        }
        total += 0.5 * log_det - 0.5 * q - 0.5 * p as f64 * ln_2pi();
    }
    Ok(total / rows as f64)
}

struct Repeat {
    rho: f64,
    edges: Vec<(usize, usize)>,
}

fn run_repeat(
    values: &[f64],
    n: usize,
    p: usize,
    full: &Matrix,
    grid: &[f64],
    opts: &StabilityOptions,
    repeat: usize,
) -> Result<Repeat> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(repeat as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let k = opts.folds;
    let folds: Vec<&[usize]> = (0..k).map(|f| &order[f * n / k..(f + 1) * n / k]).collect();

    let mut best: Option<(f64, f64)> = None;
    for &rho in grid {
        let mut score = 0.0;
        for f in 0..k {
            let train_idx: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| folds[g].iter().copied())
                .collect();
            let train = rows_of(values, p, &train_idx);
            let test = rows_of(values, p, folds[f]);
            let (mean, s) = moments(&train, train_idx.len(), p);
            let fit = adaptive_glasso(&s, rho, None, opts.glasso)?;
            score += held_out_score(&test, p, &mean, &fit.precision)?;
        }
        score /= k as f64;
        // The grid is ascending, so `>=` breaks ties toward the sparser fit.
        if best.is_none_or(|(_, b)| score >= b) {
            best = Some((rho, score));
        }
    }
    let (rho, _) = best.ok_or_else(|| Error::invalid("penalty grid is empty"))?;
    let fit = adaptive_glasso(full, rho, None, opts.glasso)?;
    Ok(Repeat {
        rho,
        edges: fit.edges(),
    })
}

/// Repeated K-fold cross-validation of the adaptive graphical lasso; the
/// returned graph keeps edges selected in at least `threshold` of the
/// successful repeats. Deterministic for a fixed seed.
pub fn stability_select(
    data: &AngleMatrix,
    kind: ModelKind,
    opts: &StabilityOptions,
) -> Result<(UndirectedGraph, StabilityReport)> {
    let (n, p) = (data.n(), data.p());
    if opts.folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    if n < 2 * opts.folds {
        return Err(Error::invalid(format!(
            "need at least {} rows for {} folds, got {n}",
            2 * opts.folds,
            opts.folds
        )));
    }
    if opts.repeats == 0 {
        return Err(Error::invalid("need at least one repeat"));
    }
    if !(opts.threshold > 0.0 && opts.threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 1], got {}",
            opts.threshold
        )));
    }
    let values = prepare(data, kind, opts.epsilon)?;
    let (_, full) = moments(&values, n, p);
    let mut grid = match &opts.rho_grid {
        Some(g) => g.clone(),
        None => default_grid(&full, opts.grid_size.max(1)),
    };
    if grid.is_empty() || grid.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::invalid(
            "penalty grid must be non-empty, finite and non-negative",
        ));
    }
    grid.sort_by(f64::total_cmp);

    let outcomes = map_indices(opts.repeats, |r| run_repeat(&values, n, p, &full, &grid, opts, r));
    let mut report = StabilityReport {
        p,
        counts: vec![0; p * (p.max(1) - 1) / 2],
        rho_grid: grid,
        chosen_rho: Vec::new(),
        threshold: opts.threshold,
        failed_repeats: 0,
    };
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(rep) => {
                report.chosen_rho.push(rep.rho);
                for (i, j) in rep.edges {
                    let s = report.slot(i, j);
                    report.counts[s] += 1;
                }
            }
            Err(e) => {
                report.failed_repeats += 1;
                last_error = Some(e);
            }
        }
    }
    if report.successful_repeats() == 0 {
        return Err(last_error.unwrap_or_else(|| Error::numerical("every repeat failed")));
    }
    let mut graph = UndirectedGraph::with_labels(data.column_names().to_vec());
    for (i, j, f) in report.frequencies() {
        if f >= opts.threshold {
            graph.add_edge(i, j)?;
        }
    }
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inverse_spd;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn chain_data(n: usize, p: usize, rho: f64, seed: u64) -> AngleMatrix {
        let mut omega = Matrix::identity(p, p);
        for i in 0..p - 1 {
            omega[(i, i + 1)] = -rho;
            omega[(i + 1, i)] = -rho;
        }
        let l = crate::linalg::cholesky(&inverse_spd(&omega).unwrap()).unwrap().unpack();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..p)
                    .map(|i| 2.0 * (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>().atan())
                    .collect()
            })
            .collect();
        AngleMatrix::from_rows(&rows).unwrap()
    }

    fn quick(seed: u64) -> StabilityOptions {
        StabilityOptions {
            repeats: 8,
            grid_size: 8,
            ..StabilityOptions::new(seed)
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let data = chain_data(120, 4, 0.4, 1);
        let a = stability_select(&data, ModelKind::Isn, &quick(3)).unwrap();
        let b = stability_select(&data, ModelKind::Isn, &quick(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.successful_repeats(), 8);
    }

    #[test]
    fn stricter_threshold_gives_subset() {
        let data = chain_data(150, 4, 0.3, 2);
        let (loose, _) = stability_select(&data, ModelKind::Isnpn, &quick(5)).unwrap();
        let strict_opts = StabilityOptions {
            threshold: 1.0,
            ..quick(5)
        };
        let (strict, _) = stability_select(&data, ModelKind::Isnpn, &strict_opts).unwrap();
        assert!(strict.edges().all(|(i, j)| loose.has_edge(i, j)));
    }

    #[test]
    fn strong_chain_is_stable() {
        let data = chain_data(300, 5, 0.5, 4);
        let (g, report) = stability_select(&data, ModelKind::Isn, &quick(6)).unwrap();
        for i in 0..4 {
            assert!(g.has_edge(i, i + 1), "{:?}", report.frequencies());
        }
    }

    #[test]
    fn rejects_bad_options() {
        let data = chain_data(9, 3, 0.3, 1);
        assert!(stability_select(&data, ModelKind::Isn, &StabilityOptions::new(1)).is_err());
        let data = chain_data(40, 3, 0.3, 1);
        let bad = StabilityOptions {
            threshold: 0.0,
            ..quick(1)
        };
        assert!(stability_select(&data, ModelKind::Isn, &bad).is_err());
    }

    #[test]
    fn slots_cover_upper_triangle() {
        let report = StabilityReport {
            p: 5,
            counts: vec![0; 10],
            rho_grid: vec![],
            chosen_rho: vec![0.1],
            threshold: 0.5,
            failed_repeats: 0,
        };
        let slots: Vec<usize> = report
            .frequencies()
            .iter()
            .map(|&(i, j, _)| report.slot(i, j))
            .collect();
        assert_eq!(slots, (0..10).collect::<Vec<_>>());
    }
}
