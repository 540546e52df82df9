//! Small dense linear-algebra helpers on top of `nalgebra`.
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::prelude::*;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-12;

/// Checks that `m` is square and symmetric to within 1e−12 (relative to its
/// largest entry).
pub fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    check_symmetric(m)?;
    Cholesky::new(m.clone()).ok_or_else(|| {
        Error::numerical(format!(
            "matrix is not positive definite (condition number {:.3e})",
            condition_number(m)
        ))
    })
}

pub fn inverse_spd(m: &Matrix) -> Result<Matrix> {
    Ok(cholesky(m)?.inverse())
}

/// ln |m| for symmetric positive-definite `m`.
pub fn log_det_spd(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Ratio of extreme eigenvalue magnitudes; infinite when singular.
pub fn condition_number(m: &Matrix) -> f64 {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Replaces eigenvalues below `floor` by `floor`.
pub fn floor_eigenvalues(m: &Matrix, floor: f64) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    symmetrize(&(q * Matrix::from_diagonal(&vals) * q.transpose()))
}

pub fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &[f64], idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Validates a list of vertex indices: in range, no duplicates.
pub(crate) fn check_index_set(set: &[usize], p: usize, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &i in set {
        if i >= p {
            return Err(Error::invalid(format!(
                "{what} index {i} out of range for dimension {p}"
            )));
        }
        if !seen.insert(i) {
            return Err(Error::invalid(format!("{what} contains index {i} twice")));
        }
    }
    Ok(())
}

pub(crate) fn check_disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    if a.iter().any(|i| b.contains(i)) {
        return Err(Error::invalid("index sets must be disjoint"));
    }
    Ok(())
}

/// Gaussian conditioning: mean and covariance of block `a` given block `b`
/// observed at `x_b`, using the Schur complement.
pub(crate) fn gaussian_conditional(
    mu: &[f64],
    sigma: &Matrix,
    a: &[usize],
    b: &[usize],
    x_b: &[f64],
) -> Result<(Vector, Matrix)> {
    let s_aa = submatrix(sigma, a, a);
    let s_ab = submatrix(sigma, a, b);
    let s_bb = submatrix(sigma, b, b);
    let chol = Cholesky::new(s_bb.clone()).ok_or_else(|| {
        Error::numerical(format!(
            "conditioning block is singular (condition number {:.3e})",
            condition_number(&s_bb)
        ))
    })?;
    let resid = Vector::from_iterator(b.len(), b.iter().zip(x_b).map(|(&j, &x)| x - mu[j]));
    let mean = subvector(mu, a) + &s_ab * chol.solve(&resid);
    let cov = &s_aa - &s_ab * chol.solve(&s_ab.transpose());
    Ok((mean, symmetrize(&cov)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_schur_complement() {
        let sigma = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let (m, c) = gaussian_conditional(&[0.0, 0.0], &sigma, &[0], &[1], &[2.0]).unwrap();
        assert!((c[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((m[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(cholesky(&m).is_err());
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&m), Err(Error::Numerical { .. })));
    }

    #[test]
    fn eigen_floor_makes_pd() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = floor_eigenvalues(&m, 1e-4);
        assert!(cholesky(&f).is_ok());
    }

    #[test]
    fn index_sets() {
        assert!(check_index_set(&[0, 1], 2, "A").is_ok());
        assert!(check_index_set(&[0, 0], 2, "A").is_err());
        assert!(check_index_set(&[2], 2, "A").is_err());
        assert!(check_disjoint(&[0], &[0, 1]).is_err());
    }
}
