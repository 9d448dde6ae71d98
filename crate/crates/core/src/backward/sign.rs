use super::lyapunov::DIVERGENCE_THRESHOLD;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Newton-Schulz sign iteration `H_{k+1} = H_k (3I - H_k^2) / 2`.
///
/// The input must already be scaled so that `||H_0^2 - I|| < 1` (for a
/// symmetric matrix, dividing by `||H||_F` suffices). Fails with
/// [`Error::Diverged`] once `||H_k^2 - I||_F` exceeds the divergence
/// threshold.
pub fn matrix_sign_ns(h: &Matrix, iters: usize) -> Result<Matrix> {
    let mut hk = h.clone();
    for k in 0..iters {
        let h2 = &hk * &hk;
        let residual = h2.add_identity(-1.0).fro_norm();
        if !(residual <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Diverged { iteration: k, residual });
        }
        hk = (&hk * &h2.scale(-1.0).add_identity(3.0)).scale(0.5);
    }
    Ok(hk)
}

/// `[[B, C], [0, -B]] / ||B||_F`, the scaled starting point of the block
/// sign iteration whose top-right block converges to `2X` with
/// `B X + X B = C`.
pub fn block_lyapunov_matrix(b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = b.dim();
    if c.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.dim() });
    }
    let s = 1.0 / b.fro_norm();
    Ok(Matrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, true) => s * b[(i, j)],
        (true, false) => s * c[(i, j - n)],
        (false, true) => 0.0,
        (false, false) => -s * b[(i - n, j - n)],
    }))
}

/// Upper-right `n x n` block of a `2n x 2n` matrix.
pub fn top_right_block(h: &Matrix) -> Matrix {
    let n = h.dim() / 2;
    Matrix::from_fn(n, |i, j| h[(i, j + n)])
}
