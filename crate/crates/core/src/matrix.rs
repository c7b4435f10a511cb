//! Dense and binary matrix containers plus the SVD-based primitives used by
//! the solvers.
//!
//! Rows index items and columns index users throughout the crate.

use std::collections::BTreeSet;
use std::fmt;

use faer::{Mat, MatRef};

use crate::error::{dims, CsrrError, Result};

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)?;
        if self.values.len() <= 64 {
            f.debug_list()
                .entries(self.values.chunks(self.cols))
                .finish()?;
        }
        Ok(())
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CsrrError::InvalidMatrix(format!(
                "matrix must have at least one row and column, got {}",
                dims(rows, cols)
            )));
        }
        if values.len() != rows * cols {
            return Err(CsrrError::DimensionMismatch {
                expected: format!("{} values", rows * cols),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CsrrError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CsrrError::DimensionMismatch {
                expected: dims(self.rows, self.cols),
                actual: dims(other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &DenseMatrix,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        self.ensure_same_shape(other)?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> DenseMatrix {
        self.map(|v| k * v)
    }

    pub fn frobenius_norm(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v)).sqrt()
    }

    /// Sum of absolute entries (the entry-wise l1 norm).
    pub fn l1_norm(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(CsrrError::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                actual: dims(other.rows, other.cols),
            });
        }
        let prod = self.to_faer() * other.to_faer();
        Ok(Self::from_faer(prod.as_ref()))
    }

    /// `selfᵀ * other`.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(CsrrError::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.rows),
                actual: dims(other.rows, other.cols),
            });
        }
        let prod = self.to_faer().transpose() * other.to_faer();
        Ok(Self::from_faer(prod.as_ref()))
    }

    /// `self * otherᵀ`.
    pub fn matmul_transpose(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(CsrrError::DimensionMismatch {
                expected: format!("{} columns on the right operand", self.cols),
                actual: dims(other.rows, other.cols),
            });
        }
        let prod = self.to_faer() * other.to_faer().transpose();
        Ok(Self::from_faer(prod.as_ref()))
    }

    pub(crate) fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub(crate) fn from_faer(m: MatRef<'_, f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Binary observation matrix `A` together with its positive index set.
#[derive(Clone, PartialEq, Eq)]
pub struct ObservationMatrix {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
    count: usize,
}

impl fmt::Debug for ObservationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ObservationMatrix({}x{}, {} positives)",
            self.rows, self.cols, self.count
        )
    }
}

impl ObservationMatrix {
    /// An all-zero observation matrix.
    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CsrrError::InvalidMatrix(format!(
                "observation matrix must be non-empty, got {}",
                dims(rows, cols)
            )));
        }
        Ok(Self {
            rows,
            cols,
            mask: vec![false; rows * cols],
            count: 0,
        })
    }

    /// Rejects out-of-range and duplicate index pairs.
    pub fn from_positives(
        rows: usize,
        cols: usize,
        positives: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut out = Self::empty(rows, cols)?;
        for (i, j) in positives {
            if i >= rows || j >= cols {
                return Err(CsrrError::InvalidMatrix(format!(
                    "positive ({i}, {j}) out of range for {}",
                    dims(rows, cols)
                )));
            }
            let slot = &mut out.mask[i * cols + j];
            if *slot {
                return Err(CsrrError::InvalidMatrix(format!(
                    "duplicate positive ({i}, {j})"
                )));
            }
            *slot = true;
            out.count += 1;
        }
        Ok(out)
    }

    /// Entries strictly greater than `threshold` become positives.
    pub fn from_threshold(m: &DenseMatrix, threshold: f64) -> Self {
        let mask: Vec<bool> = m.values().iter().map(|&v| v > threshold).collect();
        let count = mask.iter().filter(|&&b| b).count();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            mask,
            count,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_positive(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    /// Row-major mask of positives.
    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// |Ω|.
    #[inline]
    pub fn positive_count(&self) -> usize {
        self.count
    }

    pub fn negative_count(&self) -> usize {
        self.rows * self.cols - self.count
    }

    pub fn density(&self) -> f64 {
        self.count as f64 / (self.rows * self.cols) as f64
    }

    /// Positive index pairs in row-major order.
    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / cols, k % cols))
    }

    pub fn positive_set(&self) -> BTreeSet<(usize, usize)> {
        self.positives().collect()
    }

    /// Positive rows (items) of one column (user), ascending.
    pub fn column_positives(&self, col: usize) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| self.is_positive(i, col))
            .collect()
    }

    /// Number of positives in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        self.mask
            .chunks(self.cols)
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self
                .mask
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn ensure_shape(&self, m: &DenseMatrix) -> Result<()> {
        if self.shape() != m.shape() {
            return Err(CsrrError::DimensionMismatch {
                expected: dims(self.rows, self.cols),
                actual: dims(m.rows(), m.cols()),
            });
        }
        Ok(())
    }
}

/// Thin singular value decomposition `left · diag(singular) · rightᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singular: Vec<f64>,
    pub right: DenseMatrix,
}

impl SvdResult {
    /// `left · diag(weights) · rightᵀ` for an arbitrary replacement spectrum.
    pub fn recompose(&self, weights: &[f64]) -> DenseMatrix {
        debug_assert_eq!(weights.len(), self.singular.len());
        let (n, m) = (self.left.rows(), self.right.rows());
        let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != 0.0).collect();
        if active.is_empty() {
            return DenseMatrix::zeros(n, m);
        }
        let scaled_left = Mat::from_fn(n, active.len(), |i, k| {
            self.left.get(i, active[k]) * weights[active[k]]
        });
        let right = Mat::from_fn(m, active.len(), |j, k| self.right.get(j, active[k]));
        let prod = scaled_left * right.transpose();
        DenseMatrix::from_faer(prod.as_ref())
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.recompose(&self.singular)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.singular.iter().filter(|&&s| s > tol).count()
    }
}

fn check_finite(m: &DenseMatrix, routine: &'static str) -> Result<()> {
    if !m.is_finite() {
        return Err(CsrrError::NumericFailure {
            routine,
            rows: m.rows(),
            cols: m.cols(),
            detail: "input contains non-finite entries".into(),
        });
    }
    Ok(())
}

/// Full thin SVD; singular values are returned non-increasing.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    check_finite(m, "svd")?;
    let decomposition = m
        .to_faer()
        .thin_svd()
        .map_err(|e| CsrrError::NumericFailure {
            routine: "svd",
            rows: m.rows(),
            cols: m.cols(),
            detail: format!("{e:?}"),
        })?;
    let s = decomposition.S().column_vector();
    let r = s.nrows();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = decomposition.U();
    let v = decomposition.V();
    Ok(SvdResult {
        left: DenseMatrix::from_fn(m.rows(), r, |i, k| u[(i, order[k])]),
        singular: order.iter().map(|&k| s[k].max(0.0)).collect(),
        right: DenseMatrix::from_fn(m.cols(), r, |j, k| v[(j, order[k])]),
    })
}

/// Singular values only, non-increasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(m, "singular_values")?;
    let mut s = m
        .to_faer()
        .singular_values()
        .map_err(|e| CsrrError::NumericFailure {
            routine: "singular_values",
            rows: m.rows(),
            cols: m.cols(),
            detail: format!("{e:?}"),
        })?;
    for v in &mut s {
        *v = v.max(0.0);
    }
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `‖m‖_*`, the sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(compensated_sum(singular_values(m)?))
}

/// Entry-wise projection onto `[0, 1]`.
pub fn clamp_unit(m: &DenseMatrix) -> DenseMatrix {
    clamp_range(m, 0.0, 1.0)
}

pub fn clamp_range(m: &DenseMatrix, lo: f64, hi: f64) -> DenseMatrix {
    m.map(|v| v.clamp(lo, hi))
}

/// Neumaier-compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
