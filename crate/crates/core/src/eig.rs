//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_SWEEPS: usize = 100;
/// Sweeps stop once the off-diagonal Frobenius mass is below this fraction of
/// `||A||_F`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// `A = U diag(lambda) U^T` with eigenvalues sorted in descending order and
/// eigenvectors stored as the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// `U diag(f(lambda)) U^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| u[(i, k)] * w[k] * u[(j, k)]).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi with row-by-row sweep order `(0,1), (0,2), ..., (n-2,n-1)`.
/// Only the symmetric part of `a` is used.
pub fn eig_sym(a: &Matrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let mut m: Vec<f64> = a.as_slice().to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    let mut v = Matrix::identity(n).into_vec();
    let target = OFF_DIAGONAL_TOL * a.fro_norm();

    let mut converged = false;
    let mut off = off_diagonal_norm(&m, n);
    for _ in 0..MAX_SWEEPS {
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let kp = m[k * n + p];
                    let kq = m[k * n + q];
                    m[k * n + p] = c * kp - s * kq;
                    m[k * n + q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let pk = m[p * n + k];
                    let qk = m[q * n + k];
                    m[p * n + k] = c * pk - s * qk;
                    m[q * n + k] = s * pk + c * qk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let kp = v[k * n + p];
                    let kq = v[k * n + q];
                    v[k * n + p] = c * kp - s * kq;
                    v[k * n + q] = s * kp + c * kq;
                }
            }
        }
        off = off_diagonal_norm(&m, n);
    }
    if !converged && off > target {
        return Err(Error::NonConvergence { sweeps: MAX_SWEEPS, off_diagonal: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors = Matrix::from_fn(n, |r, c| v[r * n + order[c]]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}
