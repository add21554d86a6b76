//! Dense row-major `f64` matrices with just the arithmetic the solver and
//! baselines need.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Rejects a length mismatch and any
    /// non-finite entry.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Panics on ragged input; intended for literals and tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data).expect("finite literal")
    }

    /// Builds a `dim x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(dim: usize, columns: &[&[f64]]) -> Result<Self> {
        let mut m = Self::zeros(dim, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    op: "from_columns",
                    lhs: (dim, columns.len()),
                    rhs: (col.len(), 1),
                });
            }
            m.set_column(j, col);
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("from_columns"));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    /// Copy of columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Matrix {
        let width = range.len();
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.data[i * width..(i + 1) * width].copy_from_slice(
                &self.data[i * self.cols + range.start..i * self.cols + range.end],
            );
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonneg(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// Frobenius inner product `<self, other>`.
    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape("dot", other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape("sub", other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix { data, ..*self })
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape("add_scaled", other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                op: "t_matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out.ensure_finite("t_matmul")
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "matmul_t",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] =
                    a_row.iter().zip(other.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        out.ensure_finite("matmul_t")
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        frobenius_norm_sq(self)
    }

    pub fn project_nonneg(&self) -> Matrix {
        project_nonneg(self)
    }

    pub fn softmax_cols(&self) -> Matrix {
        softmax_cols(self)
    }

    /// Scales every nonzero column to unit L2 norm; zero columns stay zero.
    pub fn l2_normalize_columns(&self) -> Matrix {
        let mut out = self.clone();
        for j in 0..self.cols {
            let norm = (0..self.rows)
                .map(|i| self[(i, j)] * self[(i, j)])
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for i in 0..self.rows {
                    out[(i, j)] /= norm;
                }
            }
        }
        out
    }

    fn check_same_shape(&self, op: &'static str, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    fn ensure_finite(self, op: &'static str) -> Result<Matrix> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::NonFinite(op))
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    // i-k-j order keeps the inner loop on contiguous rows of `b` and `out`.
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    out.ensure_finite("matmul")
}

pub fn frobenius_norm_sq(a: &Matrix) -> f64 {
    a.data.iter().map(|v| v * v).sum()
}

pub fn project_nonneg(a: &Matrix) -> Matrix {
    a.map(|v| v.max(0.0))
}

/// Column-wise softmax with the column max subtracted before exponentiation.
pub fn softmax_cols(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for j in 0..a.cols {
        let max = (0..a.rows)
            .map(|i| a[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for i in 0..a.rows {
            let e = (a[(i, j)] - max).exp();
            out[(i, j)] = e;
            sum += e;
        }
        for i in 0..a.rows {
            out[(i, j)] /= sum;
        }
    }
    out
}

/// Row index of the largest entry in each column; ties go to the lowest index.
pub fn argmax_cols(a: &Matrix) -> Vec<usize> {
    (0..a.cols)
        .map(|j| {
            let mut best = 0;
            for i in 1..a.rows {
                if a[(i, j)] > a[(best, j)] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn random(rng: &mut SplitMix64, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| lo + (hi - lo) * rng.next_f64())
            .collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn identity_times_a() {
        let a = Matrix::from_rows(&[&[1.0, -2.0], &[3.5, 4.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
    }

    #[test]
    fn hand_computed_product() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[0.0], &[1.0]]);
        assert_eq!(
            matmul(&a, &b).unwrap(),
            Matrix::from_rows(&[&[2.0], &[4.0]])
        );
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = SplitMix64::new(1);
        let a = random(&mut rng, 5, 4, -1.0, 1.0);
        let b = random(&mut rng, 4, 3, -1.0, 1.0);
        let got = matmul(&a, &b).unwrap();
        let want = triple_loop(&a, &b);
        for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((g - w).abs() <= 1e-12);
        }
        let got_t = a.transpose().t_matmul(&b).unwrap();
        let got_tt = a.matmul_t(&b.transpose()).unwrap();
        for ((g, t), w) in got_t
            .as_slice()
            .iter()
            .zip(got_tt.as_slice())
            .zip(want.as_slice())
        {
            assert!((g - w).abs() <= 1e-12);
            assert!((t - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn rejects_non_finite_and_bad_length() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0]).is_err());
        let big = Matrix::filled(1, 2, 1e200);
        assert!(matches!(
            matmul(&big, &big.transpose()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_norm_sq(&Matrix::zeros(3, 2)), 0.0);
        assert_eq!(frobenius_norm_sq(&Matrix::from_rows(&[&[3.0, 4.0]])), 25.0);
        let mut rng = SplitMix64::new(2);
        let a = random(&mut rng, 6, 6, -2.0, 2.0);
        let mut oracle = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                oracle += a[(i, j)].powi(2);
            }
        }
        assert!((frobenius_norm_sq(&a) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn projection_cases() {
        let a = Matrix::from_rows(&[&[-1.0, 2.0]]);
        assert_eq!(project_nonneg(&a), Matrix::from_rows(&[&[0.0, 2.0]]));
        let b = Matrix::from_rows(&[&[0.0, 2.0], &[1.5, 0.25]]);
        assert_eq!(project_nonneg(&b), b);
    }

    #[test]
    fn softmax_cases() {
        let s = softmax_cols(&Matrix::from_rows(&[&[0.0], &[0.0]]));
        assert_eq!(s.column(0), vec![0.5, 0.5]);
        let s = softmax_cols(&Matrix::from_rows(&[&[1000.0], &[0.0]]));
        assert!((s[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((0.0..1e-300).contains(&s[(1, 0)]));
        assert!(s.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn argmax_ties_go_low() {
        let a = Matrix::from_rows(&[&[0.1, 0.5], &[0.7, 0.5], &[0.2, 0.0]]);
        assert_eq!(argmax_cols(&a), vec![1, 0]);
    }

    #[test]
    fn normalize_columns_keeps_zero_columns() {
        let a = Matrix::from_rows(&[&[3.0, 0.0], &[4.0, 0.0]]);
        let n = a.l2_normalize_columns();
        assert_eq!(n.column(0), vec![0.6, 0.8]);
        assert_eq!(n.column(1), vec![0.0, 0.0]);
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            a in arb_matrix(3, 4),
            b in arb_matrix(4, 2),
            c in arb_matrix(2, 5),
        ) {
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((l - r).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn projection_idempotent_and_nonincreasing(a in arb_matrix(4, 4)) {
            let p = project_nonneg(&a);
            prop_assert_eq!(project_nonneg(&p), p.clone());
            for (orig, proj) in a.as_slice().iter().zip(p.as_slice()) {
                prop_assert!(*proj >= 0.0);
                if *orig >= 0.0 {
                    prop_assert_eq!(orig, proj);
                }
            }
        }

        #[test]
        fn softmax_columns_are_distributions(a in arb_matrix(5, 3)) {
            let s = softmax_cols(&a);
            for j in 0..3 {
                let col = s.column(j);
                let sum: f64 = col.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(col.iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}
