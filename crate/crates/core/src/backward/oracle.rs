use crate::eig::eig_sym;
use crate::error::{Error, Result};
use crate::lu::LuDecomposition;
use crate::matrix::Matrix;
use crate::counter;

/// Largest `n` accepted by [`kron_closed_form`]; its system is `n^2 x n^2`.
pub const KRON_MAX_DIM: usize = 16;

const MIN_EIGEN_SUM: f64 = 1e-14;

/// Exact solution of `B X + X B = C` for symmetric positive definite `B`:
/// with `B = U diag(lambda) U^T`, `X = U [(U^T C U)_ij / (lambda_i + lambda_j)] U^T`.
pub fn bartels_stewart(b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = b.dim();
    if c.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.dim() });
    }
    let e = eig_sym(b)?;
    let u = &e.eigenvectors;
    let ut = u.transpose();
    let c_hat = &(&ut * c) * u;
    let mut x_hat = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let denom = e.eigenvalues[i] + e.eigenvalues[j];
            if !(denom > MIN_EIGEN_SUM) {
                return Err(Error::NonPositiveEigenvalue { value: denom });
            }
            x_hat[(i, j)] = c_hat[(i, j)] / denom;
        }
    }
    Ok(&(u * &x_hat) * &ut)
}

/// Solves `(B (x) I + I (x) B) vec(X) = vec(C)` directly. Only for
/// `n <= KRON_MAX_DIM`.
pub fn kron_closed_form(b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = b.dim();
    if c.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.dim() });
    }
    if n > KRON_MAX_DIM {
        return Err(Error::InvalidArgument {
            arg: "b",
            reason: format!("Kronecker system limited to n <= {KRON_MAX_DIM}, got n = {n}"),
        });
    }
    // row-major vec: X_ij -> i * n + j; (BX + XB)_ij = sum_k B_ik X_kj + X_ik B_kj
    let big = Matrix::from_fn(n * n, |row, col| {
        let (i, j) = (row / n, row % n);
        let (k, l) = (col / n, col % n);
        let mut v = 0.0;
        if l == j {
            v += b[(i, k)];
        }
        if k == i {
            v += b[(l, j)];
        }
        v
    });
    let lu = LuDecomposition::factor(&big)?;
    let x = lu.solve_vector(c.as_slice())?;
    counter::record_solve();
    Matrix::from_row_major(n, x)
}
