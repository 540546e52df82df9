//! Angles, angle samples, and circular summary statistics.
use core::f64::consts::{PI, TAU};
use core::fmt;

use crate::error::{Error, Result};
use crate::prelude::*;

/// Mean resultant lengths at or below this are treated as zero.
const ZERO_RESULTANT: f64 = 1e-12;

/// An angle in radians, normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(pub(crate) f64);

impl Angle {
    /// Wraps any finite real into (−π, π].
    pub fn new(radians: f64) -> Result<Self> {
        wrap_angle(radians)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Signed shortest rotation from `self` to `other`, in (−π, π].
    pub fn difference(self, other: Angle) -> Angle {
        Angle(wrap_unchecked(other.0 - self.0))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Reduces `x` modulo 2π into (−π, π].
pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {x}")));
    }
    Ok(Angle(wrap_unchecked(x)))
}

pub(crate) fn wrap_unchecked(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = x - TAU * ((x + PI) / TAU).floor();
    if y <= -PI {
        y + TAU
    } else if y > PI {
        y - TAU
    } else {
        y
    }
}

/// An n×p sample of angles with named columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl AngleMatrix {
    /// Builds a matrix from row-major radians, wrapping every entry.
    pub fn from_radians(n: usize, p: usize, values: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid("angle matrix needs at least one row and one column"));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: column_names.len(),
            });
        }
        let distinct: BTreeSet<&str> = column_names.iter().map(String::as_str).collect();
        if distinct.len() != p {
            return Err(Error::invalid("column names must be distinct"));
        }
        let values = values
            .into_iter()
            .map(|v| wrap_angle(v).map(Angle::radians))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            p,
            values,
            column_names,
        })
    }

    /// Builds a matrix from rows, naming columns `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("rows have unequal lengths"));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_radians(rows.len(), p, values, default_names(p))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.p + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.p).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// A new matrix with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            n: rows.len(),
            p: self.p,
            values,
            column_names: self.column_names.clone(),
        }
    }

    /// Rotates column `j` by `delta` radians.
    pub fn rotate_column(&self, j: usize, delta: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let v = &mut out.values[i * self.p + j];
            *v = wrap_unchecked(*v + delta);
        }
        out
    }

    /// Rotates every column by `delta` radians.
    pub fn rotate(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = wrap_unchecked(*v + delta);
        }
        out
    }

    /// Stacks the rows of `other` below `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.p != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: other.p,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self {
            n: self.n + other.n,
            p: self.p,
            values,
            column_names: self.column_names.clone(),
        })
    }
}

/// Circular mean of every column, used as the profile estimate of μ.
pub(crate) fn column_means(data: &AngleMatrix) -> Result<Vec<f64>> {
    (0..data.p())
        .map(|j| {
            let col: Vec<f64> = data.column(j).collect();
            circular_mean(&col)
                .map(Angle::radians)
                .map_err(|_| Error::UndefinedDirection { column: j })
        })
        .collect()
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Mean direction atan2(S̄, C̄) of a sample of angles.
pub fn circular_mean(column: &[f64]) -> Result<Angle> {
    let (c, s) =
        mean_cos_sin(column.iter().copied()).ok_or_else(|| Error::invalid("circular mean of an empty sample"))?;
    direction(c, s, 0)
}

fn mean_cos_sin(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let (mut c, mut s) = (0.0, 0.0);
    for v in values {
        c += v.cos();
        s += v.sin();
        n += 1;
    }
    (n > 0).then(|| (c / n as f64, s / n as f64))
}

fn direction(c: f64, s: f64, column: usize) -> Result<Angle> {
    if c.hypot(s) <= ZERO_RESULTANT {
        return Err(Error::UndefinedDirection { column });
    }
    Ok(Angle(wrap_unchecked(s.atan2(c))))
}

/// Per-column circular location and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularSummary {
    pub mean_direction: Vec<Angle>,
    pub mean_resultant_length: Vec<f64>,
    /// −2 ln R̄: the wrapped Normal variance implied by the resultant length.
    pub mardia_variance: Vec<f64>,
    /// 1 − R̄.
    pub circular_variance: Vec<f64>,
}

pub fn circular_summary(data: &AngleMatrix) -> Result<CircularSummary> {
    if data.n() < 2 {
        return Err(Error::invalid("circular summary needs at least two rows"));
    }
    let mut summary = CircularSummary {
        mean_direction: Vec::with_capacity(data.p()),
        mean_resultant_length: Vec::with_capacity(data.p()),
        mardia_variance: Vec::with_capacity(data.p()),
        circular_variance: Vec::with_capacity(data.p()),
    };
    for j in 0..data.p() {
        let (c, s) = mean_cos_sin(data.column(j)).expect("non-empty");
        let r = c.hypot(s).min(1.0);
        summary.mean_direction.push(direction(c, s, j)?);
        summary.mean_resultant_length.push(r);
        summary.mardia_variance.push(-2.0 * r.ln());
        summary.circular_variance.push(1.0 - r);
    }
    Ok(summary)
}

/// u = tan(θ/2). Singular at θ = π.
pub fn stereographic(theta: Angle) -> Result<f64> {
    if theta.0 == PI {
        return Err(Error::Singularity);
    }
    Ok((0.5 * theta.0).tan())
}

/// θ = 2·atan(u).
pub fn inverse_stereographic(u: f64) -> Result<Angle> {
    if !u.is_finite() {
        return Err(Error::invalid(format!("projected value must be finite, got {u}")));
    }
    Ok(Angle(2.0 * u.atan()))
}

/// Moduli of the first and mixed trigonometric moments of two columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMoments {
    /// ‖Ê[Z_i]‖
    pub first_i: f64,
    /// ‖Ê[Z_j]‖
    pub first_j: f64,
    /// ‖Ê[Z_i Z_j]‖
    pub mixed: f64,
}

impl ComplexMoments {
    /// ln(‖Ê[Z_i]Ê[Z_j]‖ / ‖Ê[Z_i Z_j]‖), the moment estimate of Σ_ij under a
    /// wrapped Normal law.
    pub fn covariance_probe(&self) -> f64 {
        (self.first_i * self.first_j / self.mixed).ln()
    }

    /// −2 ln ‖Ê[Z_i]‖, the moment estimate of Σ_ii.
    pub fn variance_probe_i(&self) -> f64 {
        -2.0 * self.first_i.ln()
    }

    pub fn variance_probe_j(&self) -> f64 {
        -2.0 * self.first_j.ln()
    }
}

pub fn complex_moments(data: &AngleMatrix, i: usize, j: usize) -> Result<ComplexMoments> {
    if i == j {
        return Err(Error::invalid("complex moments need two distinct columns"));
    }
    if i >= data.p() || j >= data.p() {
        return Err(Error::invalid("column index out of range"));
    }
    if data.n() < 2 {
        return Err(Error::invalid("complex moments need at least two rows"));
    }
    let n = data.n() as f64;
    let (mut ci, mut si, mut cj, mut sj, mut cm, mut sm) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for row in data.rows() {
        let (a, b) = (row[i], row[j]);
        ci += a.cos();
        si += a.sin();
        cj += b.cos();
        sj += b.sin();
        cm += (a + b).cos();
        sm += (a + b).sin();
    }
    Ok(ComplexMoments {
        first_i: (ci / n).hypot(si / n),
        first_j: (cj / n).hypot(sj / n),
        mixed: (cm / n).hypot(sm / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circ_dist(a: f64, b: f64) -> f64 {
        wrap_unchecked(a - b).abs()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap().radians(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap().radians() - PI).abs() < 1e-15);
        assert_eq!(wrap_angle(-PI).unwrap().radians(), PI);
        assert_eq!(wrap_angle(PI).unwrap().radians(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn circular_mean_examples() {
        let m = circular_mean(&[PI / 2.0, PI / 2.0]).unwrap();
        assert!((m.radians() - PI / 2.0).abs() < 1e-15);
        let m = circular_mean(&[-PI + 0.1, PI - 0.1]).unwrap();
        assert!(circ_dist(m.radians(), PI) < 1e-12);
        let m = circular_mean(&[0.0, PI / 2.0]).unwrap();
        assert!((m.radians() - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_mean_is_undefined() {
        assert_eq!(circular_mean(&[0.0, PI]), Err(Error::UndefinedDirection { column: 0 }));
        assert!(circular_mean(&[]).is_err());
    }

    #[test]
    fn summary_of_constant_column() {
        let data = AngleMatrix::from_rows(&[vec![0.7, 0.7], vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap();
        let s = circular_summary(&data).unwrap();
        for j in 0..2 {
            assert!((s.mean_resultant_length[j] - 1.0).abs() < 1e-15);
            assert!(s.mardia_variance[j].abs() < 1e-14);
            assert!((s.mean_direction[j].radians() - 0.7).abs() < 1e-15);
        }
        assert_eq!(s.mean_direction[0], s.mean_direction[1]);
        assert_eq!(s.mardia_variance[0], s.mardia_variance[1]);
    }

    #[test]
    fn summary_rejects_zero_resultant_column() {
        let data = AngleMatrix::from_rows(&[vec![0.1, 0.0], vec![0.2, PI]]).unwrap();
        assert_eq!(circular_summary(&data), Err(Error::UndefinedDirection { column: 1 }));
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(Angle(0.0)).unwrap(), 0.0);
        assert!((stereographic(Angle(PI / 2.0)).unwrap() - 1.0).abs() < 1e-15);
        let back = stereographic(inverse_stereographic(-3.7).unwrap()).unwrap();
        assert!((back + 3.7).abs() < 1e-12);
        assert_eq!(stereographic(Angle(PI)), Err(Error::Singularity));
    }

    #[test]
    fn stereographic_round_trip_grid() {
        let lo = -PI + 1e-6;
        let hi = PI - 1e-6;
        for k in 0..10_000 {
            let t = lo + (hi - lo) * k as f64 / 9_999.0;
            let u = stereographic(Angle(t)).unwrap();
            let back = inverse_stereographic(u).unwrap().radians();
            assert!((back - t).abs() < 1e-12, "theta {t}");
        }
    }

    #[test]
    fn complex_moments_rejects_same_column() {
        let data = AngleMatrix::from_rows(&[vec![0.1, 0.0], vec![0.2, 0.3]]).unwrap();
        assert!(complex_moments(&data, 1, 1).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(AngleMatrix::from_radians(1, 2, vec![0.0, 1.0], vec!["a".into(), "a".into()]).is_err());
        assert!(AngleMatrix::from_radians(1, 2, vec![0.0], vec!["a".into(), "b".into()]).is_err());
        assert!(AngleMatrix::from_radians(0, 2, vec![], vec!["a".into(), "b".into()]).is_err());
        let m = AngleMatrix::from_radians(1, 1, vec![7.0], vec!["a".into()]).unwrap();
        assert!((m.get(0, 0) - (7.0 - TAU)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrap_is_periodic(x in -10.0f64..10.0, k in -1_000_000i64..1_000_000) {
            let a = wrap_angle(x).unwrap().radians();
            let b = wrap_angle(x + TAU * k as f64).unwrap().radians();
            // x + 2πk carries roundoff of order |2πk|·ε.
            prop_assert!(circ_dist(a, b) < 1e-8);
            prop_assert!(b > -PI && b <= PI);
        }

        #[test]
        fn mean_is_rotation_equivariant(
            xs in proptest::collection::vec(-1.2f64..1.2, 2..40),
            delta in -10.0f64..10.0,
        ) {
            let m = circular_mean(&xs).unwrap().radians();
            let shifted: Vec<f64> = xs.iter().map(|x| wrap_unchecked(x + delta)).collect();
            let ms = circular_mean(&shifted).unwrap().radians();
            prop_assert!(circ_dist(ms, wrap_unchecked(m + delta)) < 1e-10);
        }

        #[test]
        fn mardia_variance_is_rotation_invariant(
            xs in proptest::collection::vec(-1.0f64..1.0, 2..40),
            delta in -10.0f64..10.0,
        ) {
            let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
            let data = AngleMatrix::from_rows(&rows).unwrap();
            let a = circular_summary(&data).unwrap();
            let b = circular_summary(&data.rotate(delta)).unwrap();
            prop_assert!((a.mardia_variance[0] - b.mardia_variance[0]).abs() < 1e-10);
        }
    }
}
