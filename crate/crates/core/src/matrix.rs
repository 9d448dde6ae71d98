//! Dense square matrices in row-major `f64` storage.

use std::fmt::Write as _;
use std::ops::{Add, Deref, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::counter;
use crate::error::{Error, Result};

/// A dense real `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = value;
        }
        m
    }

    pub fn from_diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    /// Builds a matrix from row-major data of length `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Ok(Matrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n + i]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &Matrix, alpha: f64) -> Matrix {
        assert_eq!(self.n, other.n, "add_scaled: dimension mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect();
        Matrix { n: self.n, data }
    }

    /// `self + alpha * I`.
    pub fn add_identity(&self, alpha: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += alpha;
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n, "max_abs_diff: dimension mismatch");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Parses the plain-text matrix format: a first line holding `n`, then
    /// `n` lines of `n` whitespace-separated decimals.
    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("invalid dimension line `{header}`")))?;
        if n == 0 {
            return Err(Error::Parse("dimension must be positive".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {n} rows, found {r}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: invalid value `{tok}`", r + 1)))?;
                data.push(v);
            }
            if data.len() - before != n {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {n}",
                    r + 1,
                    data.len() - before
                )));
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse(format!("trailing data after {n} rows")));
        }
        Ok(Matrix { n, data })
    }

    /// Serializes to the plain-text matrix format. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    fn product(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        counter::record_matmul();
        Matrix { n, data: out }
    }
}

/// Dense product `a * b`; counted as one multiplication.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: b.n });
    }
    Ok(a.product(b))
}

/// `tr(a^T b)` computed as an elementwise-product sum; counted as one
/// trace-of-product evaluation.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.n, b.n, "trace_product: dimension mismatch");
    counter::record_trace_products(1);
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

pub fn fro_norm(a: &Matrix) -> f64 {
    a.fro_norm()
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    /// Panics on dimension mismatch; use [`matmul`] for a fallible product.
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n, "matrix product: dimension mismatch");
        self.product(rhs)
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.add_scaled(rhs, -1.0)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// A real symmetric matrix. Construction replaces the input by
/// `(M + M^T) / 2`, so the stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.n == 0 {
            return Err(Error::InvalidArgument { arg: "n", reason: "dimension must be at least 1".into() });
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes an arbitrary square matrix. Panics if `n == 0`.
    pub fn symmetrize(mut m: Matrix) -> Self {
        assert!(m.n >= 1, "symmetric matrix must have n >= 1");
        let n = m.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        SymmetricMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix(Matrix::identity(n))
    }

    pub fn from_diag(values: &[f64]) -> Self {
        SymmetricMatrix(Matrix::from_diag(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymmetricMatrix {
        SymmetricMatrix(self.0.scale(s))
    }
}

impl Deref for SymmetricMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for SymmetricMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        SymmetricMatrix::new(m)
    }
}

impl From<SymmetricMatrix> for Matrix {
    fn from(s: SymmetricMatrix) -> Matrix {
        s.0
    }
}

impl AsRef<Matrix> for SymmetricMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

impl AsRef<Matrix> for Matrix {
    fn as_ref(&self) -> &Matrix {
        self
    }
}

macro_rules! forward_binop {
    ($lhs:ty, $rhs:ty) => {
        impl Mul<&$rhs> for &$lhs {
            type Output = Matrix;

            fn mul(self, rhs: &$rhs) -> Matrix {
                AsRef::<Matrix>::as_ref(self) * AsRef::<Matrix>::as_ref(rhs)
            }
        }

        impl Add<&$rhs> for &$lhs {
            type Output = Matrix;

            fn add(self, rhs: &$rhs) -> Matrix {
                AsRef::<Matrix>::as_ref(self) + AsRef::<Matrix>::as_ref(rhs)
            }
        }

        impl Sub<&$rhs> for &$lhs {
            type Output = Matrix;

            fn sub(self, rhs: &$rhs) -> Matrix {
                AsRef::<Matrix>::as_ref(self) - AsRef::<Matrix>::as_ref(rhs)
            }
        }
    };
}

forward_binop!(SymmetricMatrix, Matrix);
forward_binop!(Matrix, SymmetricMatrix);
forward_binop!(SymmetricMatrix, SymmetricMatrix);

/// A batch of equally sized symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBatch {
    dim: usize,
    items: Vec<SymmetricMatrix>,
}

impl MatrixBatch {
    pub fn new(items: Vec<SymmetricMatrix>) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::InvalidArgument {
            arg: "items",
            reason: "batch must hold at least one matrix".into(),
        })?;
        let dim = first.dim();
        if let Some(bad) = items.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        Ok(MatrixBatch { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[SymmetricMatrix] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SymmetricMatrix> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::count_ops;
    use crate::random::{random_matrix, random_spd};
    use proptest::prelude::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let n = a.dim();
        Matrix::from_fn(n, |i, j| (0..n).map(|k| a[(i, k)] * b[(k, j)]).sum())
    }

    #[test]
    fn identity_product() {
        let a = random_spd(5, 3, 1e-3);
        let i = Matrix::identity(5);
        assert_eq!(matmul(&i, &a).unwrap(), *a.as_matrix());
    }

    #[test]
    fn diagonal_product() {
        let p = matmul(&Matrix::from_diag(&[2.0, 3.0]), &Matrix::from_diag(&[4.0, 5.0])).unwrap();
        assert_eq!(p, Matrix::from_diag(&[8.0, 15.0]));
    }

    #[test]
    fn product_matches_triple_loop() {
        let a = random_matrix(8, 11);
        let b = random_matrix(8, 12);
        let (p, ops) = count_ops(|| matmul(&a, &b).unwrap());
        assert!(p.max_abs_diff(&naive(&a, &b)) <= 1e-12);
        assert_eq!(ops.matmuls, 1);
    }

    #[test]
    fn product_dimension_mismatch() {
        let err = matmul(&Matrix::identity(2), &Matrix::identity(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn fro_norm_of_identity() {
        assert!((fro_norm(&Matrix::identity(3)) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_averages() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 5.0]]).unwrap();
        let s = SymmetricMatrix::new(m).unwrap();
        assert_eq!(s[(0, 1)], 3.0);
        assert_eq!(s[(1, 0)], 3.0);
        assert!(SymmetricMatrix::new(Matrix::zeros(0)).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let a = random_spd(4, 9, 1e-3);
        let back = Matrix::from_text(&a.to_text()).unwrap();
        assert_eq!(&back, a.as_matrix());
        assert!(Matrix::from_text("2\n1 2\n3").is_err());
        assert!(Matrix::from_text("2\n1 2 3\n3 4").is_err());
        assert!(Matrix::from_text("x").is_err());
        assert!(Matrix::from_text("").is_err());
    }

    #[test]
    fn batch_rejects_mixed_dims() {
        let err = MatrixBatch::new(vec![SymmetricMatrix::identity(2), SymmetricMatrix::identity(3)]);
        assert!(err.is_err());
        assert!(MatrixBatch::new(vec![]).is_err());
        let ok = MatrixBatch::new(vec![SymmetricMatrix::identity(2); 3]).unwrap();
        assert_eq!((ok.count(), ok.dim()), (3, 2));
    }

    proptest! {
        #[test]
        fn product_is_associative(seed in any::<u64>(), n in 1usize..12) {
            let a = random_matrix(n, seed);
            let b = random_matrix(n, seed.wrapping_add(1));
            let c = random_matrix(n, seed.wrapping_add(2));
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            let scale = left.max_abs().max(1.0);
            prop_assert!(left.max_abs_diff(&right) <= 1e-10 * scale);
        }
    }
}
