use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymmetricMatrix};

pub const MIN_FD_EPS: f64 = 1e-7;
pub const MAX_FD_EPS: f64 = 1e-3;

/// Checks `grad` against central differences of `l(A) = <G, f(A)>` along
/// every symmetric basis direction `E_ii` and `E_ij + E_ji`.
///
/// Returns `max |fd - analytic| / max |analytic|` over all directions, i.e.
/// the worst deviation relative to the gradient's own scale.
pub fn finite_diff_check<F>(probe: &SymmetricMatrix, a: &SymmetricMatrix, f: F, grad: &Matrix, eps: f64) -> Result<f64>
where
    F: Fn(&SymmetricMatrix) -> Result<Matrix> + Sync,
{
    if !(MIN_FD_EPS..=MAX_FD_EPS).contains(&eps) {
        return Err(Error::InvalidArgument {
            arg: "eps",
            reason: format!("step must lie in [{MIN_FD_EPS:e}, {MAX_FD_EPS:e}], got {eps:e}"),
        });
    }
    let n = a.dim();
    for d in [probe.dim(), grad.dim()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, found: d });
        }
    }
    let loss = |m: Matrix| -> Result<f64> {
        let out = f(&SymmetricMatrix::symmetrize(m))?;
        Ok(out.as_slice().iter().zip(probe.as_slice()).map(|(x, g)| x * g).sum())
    };
    let directions: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let pairs: Vec<(f64, f64)> = directions
        .par_iter()
        .map(|&(i, j)| {
            let bump = |sign: f64| {
                let mut m = a.as_matrix().clone();
                m[(i, j)] += sign * eps;
                if i != j {
                    m[(j, i)] += sign * eps;
                }
                m
            };
            let fd = (loss(bump(1.0))? - loss(bump(-1.0))?) / (2.0 * eps);
            let analytic = if i == j { grad[(i, i)] } else { grad[(i, j)] + grad[(j, i)] };
            Ok((fd, analytic))
        })
        .collect::<Result<_>>()?;
    let scale = pairs.iter().fold(0.0f64, |m, (_, an)| m.max(an.abs()));
    let worst = pairs.iter().fold(0.0f64, |m, (fd, an)| m.max((fd - an).abs()));
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::{
        invsqrt_lyapunov_gradient, ns_sqrt_gradient, sqrt_lyapunov_gradient, DEFAULT_TOLERANCE,
    };
    use crate::forward::{exact_invsqrt_eig, exact_sqrt_eig, ns_sqrt_coupled, ns_sqrt_coupled_traced};
    use crate::random::{random_covariance, random_symmetric};

    #[test]
    fn identity_map() {
        let a = random_covariance(5, 20, 1, 1e-3);
        let g = random_symmetric(5, 2);
        let err = finite_diff_check(&g, &a, |m| Ok(m.as_matrix().clone()), &g, 1e-5).unwrap();
        assert!(err <= 1e-9, "{err:e}");
    }

    #[test]
    fn rejects_bad_step() {
        let a = SymmetricMatrix::identity(2);
        let f = |m: &SymmetricMatrix| Ok(m.as_matrix().clone());
        assert!(finite_diff_check(&a, &a, f, &Matrix::identity(2), 1e-2).is_err());
        assert!(finite_diff_check(&a, &a, f, &Matrix::identity(2), 1e-9).is_err());
    }

    #[test]
    fn detects_wrong_gradient() {
        let a = random_covariance(4, 16, 3, 1e-3);
        let g = random_symmetric(4, 4);
        let err = finite_diff_check(&g, &a, |m| Ok(m.as_matrix().clone()), &g.scale(1.1), 1e-5).unwrap();
        assert!(err > 0.05);
    }

    #[test]
    fn exact_forward_with_lyapunov_backward() {
        let a = random_covariance(8, 64, 5, 1e-3);
        let g = random_symmetric(8, 6);
        let s = exact_sqrt_eig(&a).unwrap().value;
        let grad = sqrt_lyapunov_gradient(&s, &g, 8, DEFAULT_TOLERANCE).unwrap().grad;
        let err = finite_diff_check(&g, &a, |m| Ok(exact_sqrt_eig(m)?.value.into_matrix()), &grad, 1e-5).unwrap();
        assert!(err <= 1e-4, "{err:e}");
    }

    #[test]
    fn ns_forward_with_ns_backward() {
        let a = random_covariance(8, 64, 7, 1e-3);
        let g = random_symmetric(8, 8);
        let fwd = ns_sqrt_coupled_traced(&a, 5).unwrap();
        let grad = ns_sqrt_gradient(&a, &fwd, &g).unwrap();
        let err = finite_diff_check(&g, &a, |m| Ok(ns_sqrt_coupled(m, 5)?.value.into_matrix()), &grad, 1e-5).unwrap();
        assert!(err <= 1e-5, "{err:e}");
    }

    #[test]
    fn ns_chain_on_16x16() {
        let a = random_covariance(16, 128, 9, 1e-3);
        let g = random_symmetric(16, 10);
        let fwd = ns_sqrt_coupled_traced(&a, 5).unwrap();
        let grad = ns_sqrt_gradient(&a, &fwd, &g).unwrap();
        let err = finite_diff_check(&g, &a, |m| Ok(ns_sqrt_coupled(m, 5)?.value.into_matrix()), &grad, 1e-5).unwrap();
        assert!(err <= 1e-5, "{err:e}");
    }

    #[test]
    fn invsqrt_gradient() {
        let a = random_covariance(8, 64, 11, 1e-3);
        let g = random_symmetric(8, 12);
        let r = exact_invsqrt_eig(&a).unwrap().value;
        let grad = invsqrt_lyapunov_gradient(&r, &g, 12, 1e-12).unwrap().grad;
        let err = finite_diff_check(&g, &a, |m| Ok(exact_invsqrt_eig(m)?.value.into_matrix()), &grad, 1e-5).unwrap();
        assert!(err <= 1e-5, "{err:e}");
    }
}
