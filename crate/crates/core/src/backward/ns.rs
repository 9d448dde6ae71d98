use crate::counter;
use crate::error::{Error, Result};
use crate::forward::{NsTrace, SqrtOutput};
use crate::matrix::{trace_product, Matrix, SymmetricMatrix};

/// Reverse sweep through the coupled Newton-Schulz iteration. Given
/// `dl/dY_K` and `dl/dZ_K`, returns `(dl/dY_0, dl/dZ_0)`, applying per step
///
/// ```text
/// dl/dY_k = ( G_Y (3I - Y_k Z_k) - Z_k G_Z Z_k - Z_k Y_k G_Y ) / 2
/// dl/dZ_k = ( (3I - Y_k Z_k) G_Z - Y_k G_Y Y_k - G_Z Z_k Y_k ) / 2
/// ```
///
/// with `G_Y, G_Z` the gradients of step `k + 1`. Ten multiplications per
/// step.
pub fn ns_backward(trace: &NsTrace, grad_y: &Matrix, grad_z: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = trace.y_final.dim();
    for g in [grad_y, grad_z] {
        if g.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: g.dim() });
        }
    }
    let mut gy = grad_y.clone();
    let mut gz = grad_z.clone();
    for (y, z) in trace.steps.iter().rev() {
        let yz = y * z;
        let zy = z * y;
        let t = yz.scale(-1.0).add_identity(3.0);
        let gy_t = &gy * &t;
        let z_gz_z = &(z * &gz) * z;
        let zy_gy = &zy * &gy;
        let t_gz = &t * &gz;
        let y_gy_y = &(y * &gy) * y;
        let gz_zy = &gz * &zy;
        let gy_prev = gy_t.add_scaled(&z_gz_z, -1.0).add_scaled(&zy_gy, -1.0).scale(0.5);
        let gz_prev = t_gz.add_scaled(&y_gy_y, -1.0).add_scaled(&gz_zy, -1.0).scale(0.5);
        gy = gy_prev;
        gz = gz_prev;
    }
    Ok((gy, gz))
}

/// Gradient through the normalization `Y_0 = A / ||A||_F` and the
/// compensation `A^{1/2} = sqrt(||A||_F) Y_K`:
///
/// ```text
/// post = tr(G^T Y_K) / (2 ||A||_F^{3/2}) A
/// dl/dA = -tr(G_0^T A) / ||A||_F^3 A + G_0 / ||A||_F + post
/// ```
///
/// where `G = dl/dA^{1/2}` and `G_0 = dl/dY_0`. Charged as four
/// matrix-multiplication equivalents: the two trace products and the two
/// trace-weighted accumulations of `A`.
pub fn ns_pre_post_grad(a: &Matrix, grad_y0: &Matrix, grad_sqrt: &Matrix, y_k: &Matrix) -> Result<Matrix> {
    let n = a.dim();
    for m in [grad_y0, grad_sqrt, y_k] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
        }
    }
    let norm = a.fro_norm();
    let post_weight = trace_product(grad_sqrt, y_k) / (2.0 * norm.powf(1.5));
    let pre_weight = -trace_product(grad_y0, a) / norm.powi(3);
    counter::record_trace_products(2);
    Ok(grad_y0.scale(1.0 / norm).add_scaled(a, pre_weight + post_weight))
}

/// Full Newton-Schulz square-root gradient: reverse sweep plus the
/// normalization terms. `forward` must come from
/// [`crate::forward::ns_sqrt_coupled_traced`] on `a`.
pub fn ns_sqrt_gradient(a: &SymmetricMatrix, forward: &SqrtOutput, grad_sqrt: &Matrix) -> Result<Matrix> {
    let trace = forward
        .ns_trace
        .as_ref()
        .ok_or_else(|| Error::MissingTrace("forward pass was run without keeping the iterates".into()))?;
    if forward.inverse {
        return Err(Error::MissingTrace("trace belongs to an inverse square root".into()));
    }
    let n = a.dim();
    let gy_k = grad_sqrt.scale(trace.norm.sqrt());
    let (gy0, _) = ns_backward(trace, &gy_k, &Matrix::zeros(n))?;
    ns_pre_post_grad(a, &gy0, grad_sqrt, &trace.y_final)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::count_ops;
    use crate::forward::{ns_sqrt_coupled, ns_sqrt_coupled_traced};
    use crate::random::{random_covariance, random_symmetric};

    #[test]
    fn zero_upstream_gives_zero() {
        let a = random_covariance(6, 24, 1, 1e-3);
        let fwd = ns_sqrt_coupled_traced(&a, 5).unwrap();
        let trace = fwd.ns_trace.as_ref().unwrap();
        let (gy, gz) = ns_backward(trace, &Matrix::zeros(6), &Matrix::zeros(6)).unwrap();
        assert_eq!(gy.max_abs(), 0.0);
        assert_eq!(gz.max_abs(), 0.0);
        let g = ns_pre_post_grad(&a, &Matrix::zeros(6), &Matrix::zeros(6), &trace.y_final).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn one_step_scalar_matches_hand_derivative() {
        // y1 = y (3 - z y) / 2, z1 = (3 - z y) z / 2
        // dy1/dy = (3 - 2 z y) / 2, dy1/dz = -y^2 / 2
        // dz1/dy = -z^2 / 2,       dz1/dz = (3 - 2 z y) / 2
        let (y, z) = (0.7, 1.3);
        let trace = NsTrace {
            norm: 1.0,
            steps: vec![(Matrix::from_diag(&[y]), Matrix::from_diag(&[z]))],
            y_final: Matrix::from_diag(&[0.0]),
            z_final: Matrix::from_diag(&[0.0]),
        };
        let (gy1, gz1) = (0.4, -1.1);
        let (gy, gz) = ns_backward(&trace, &Matrix::from_diag(&[gy1]), &Matrix::from_diag(&[gz1])).unwrap();
        let want_y = gy1 * (3.0 - 2.0 * z * y) / 2.0 + gz1 * (-z * z / 2.0);
        let want_z = gy1 * (-y * y / 2.0) + gz1 * (3.0 - 2.0 * z * y) / 2.0;
        assert!((gy[(0, 0)] - want_y).abs() <= 1e-12);
        assert!((gz[(0, 0)] - want_z).abs() <= 1e-12);
    }

    #[test]
    fn scalar_chain_matches_sqrt_derivative() {
        // for 1x1 input the normalized recurrence is the constant 1 and the
        // whole map is a -> sqrt(a), so dl/da = g / (2 sqrt(a))
        let a = SymmetricMatrix::from_diag(&[2.5]);
        let fwd = ns_sqrt_coupled_traced(&a, 5).unwrap();
        let g = ns_sqrt_gradient(&a, &fwd, &Matrix::from_diag(&[1.0])).unwrap();
        assert!((g[(0, 0)] - 0.5 / 2.5f64.sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn operation_count() {
        let a = random_covariance(16, 64, 2, 1e-3);
        let fwd = ns_sqrt_coupled_traced(&a, 5).unwrap();
        let g = random_symmetric(16, 3);
        let (_, ops) = count_ops(|| ns_sqrt_gradient(&a, &fwd, &g).unwrap());
        assert_eq!(ops.matmuls, 50);
        assert_eq!(ops.trace_products, 4);
        assert_eq!(ops.matmul_equivalents(), 54);
    }

    #[test]
    fn requires_trace() {
        let a = random_covariance(4, 16, 2, 1e-3);
        let fwd = ns_sqrt_coupled(&a, 5).unwrap();
        let err = ns_sqrt_gradient(&a, &fwd, &Matrix::identity(4)).unwrap_err();
        assert!(matches!(err, Error::MissingTrace(_)));
    }
}
