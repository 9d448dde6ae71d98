//! LU factorization with partial pivoting.

use crate::counter;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pivots at or below this magnitude are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// `P A = L U` packed into one row-major buffer (unit lower triangle implied).
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuDecomposition {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.dim();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, lu[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > PIVOT_THRESHOLD) {
                return Err(Error::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let diag = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / diag;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[r * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Ok(LuDecomposition { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` for a row-major `n x cols` right-hand side.
    pub fn solve_columns(&self, rhs: &[f64], cols: usize) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n * cols {
            return Err(Error::DimensionMismatch { expected: n * cols, found: rhs.len() });
        }
        let mut x = vec![0.0; n * cols];
        for (i, &p) in self.perm.iter().enumerate() {
            x[i * cols..(i + 1) * cols].copy_from_slice(&rhs[p * cols..(p + 1) * cols]);
        }
        // forward substitution with unit lower triangle
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    for c in 0..cols {
                        x[i * cols + c] -= l * x[k * cols + c];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    for c in 0..cols {
                        x[i * cols + c] -= u * x[k * cols + c];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for c in 0..cols {
                x[i * cols + c] /= d;
            }
        }
        Ok(x)
    }

    pub fn solve_vector(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_columns(rhs, 1)
    }
}

/// Solves `q S = rhs` for square `rhs`; counted as one solve.
pub fn solve_linear(q: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if q.dim() != rhs.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: rhs.dim() });
    }
    let lu = LuDecomposition::factor(q)?;
    let x = lu.solve_columns(rhs.as_slice(), rhs.dim())?;
    counter::record_solve();
    Matrix::from_row_major(q.dim(), x)
}

/// Solves `q X = rhs` for a row-major `n x cols` right-hand side; counted as
/// one solve.
pub fn solve_rectangular(q: &Matrix, rhs: &[f64], cols: usize) -> Result<Vec<f64>> {
    let lu = LuDecomposition::factor(q)?;
    let x = lu.solve_columns(rhs, cols)?;
    counter::record_solve();
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::count_ops;
    use crate::random::{random_matrix, random_spd};
    use proptest::prelude::*;

    #[test]
    fn identity_system() {
        let c = random_matrix(5, 4);
        let s = solve_linear(&Matrix::identity(5), &c).unwrap();
        assert!(s.max_abs_diff(&c) <= 1e-15);
    }

    #[test]
    fn diagonal_system() {
        let d = Matrix::from_diag(&[2.0, 4.0]);
        let s = solve_linear(&d, &d).unwrap();
        assert_eq!(s, Matrix::identity(2));
    }

    #[test]
    fn residual_on_well_conditioned_system() {
        let q = random_spd(16, 21, 1.0);
        let rhs = random_matrix(16, 22);
        let (s, ops) = count_ops(|| solve_linear(&q, &rhs).unwrap());
        let resid = (&q * &s).max_abs_diff(&rhs);
        assert!(resid <= 1e-9 * rhs.fro_norm().max(1.0), "residual {resid}");
        assert_eq!(ops.solves, 1);
    }

    #[test]
    fn singular_is_reported() {
        let q = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let err = solve_linear(&q, &Matrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { column: 1, .. }));
        assert!(solve_linear(&Matrix::zeros(3), &Matrix::identity(3)).is_err());
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let q = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = solve_linear(&q, &Matrix::from_diag(&[3.0, 5.0])).unwrap();
        assert_eq!(s, Matrix::from_rows(&[vec![0.0, 5.0], vec![3.0, 0.0]]).unwrap());
    }

    proptest! {
        #[test]
        fn recovers_known_solution(seed in any::<u64>(), n in 1usize..20) {
            // eps = 1 bounds the condition number by roughly 5
            let q = random_spd(n, seed, 1.0);
            let x = random_matrix(n, seed ^ 0xABCD);
            let rhs = &q * &x;
            let s = solve_linear(&q, &rhs).unwrap();
            prop_assert!(s.max_abs_diff(&x) <= 1e-9 * x.max_abs().max(1.0));
        }
    }
}

#[cfg(test)]
mod conditioning_tests {
    use super::*;
    use crate::eig::eig_sym;
    use crate::random::{random_matrix, random_symmetric};

    #[test]
    fn recovers_solution_at_condition_1e6() {
        let u = eig_sym(&random_symmetric(12, 3)).unwrap().eigenvectors;
        let spectrum: Vec<f64> = (0..12).map(|i| 10f64.powf(-6.0 * i as f64 / 11.0)).collect();
        let q = Matrix::from_fn(12, |i, j| (0..12).map(|k| u[(i, k)] * spectrum[k] * u[(j, k)]).sum());
        let x = random_matrix(12, 4);
        let s = solve_linear(&q, &(&q * &x)).unwrap();
        let rel = (&s - &x).fro_norm() / x.fro_norm();
        assert!(rel <= 1e-9, "relative error {rel}");
    }
}
