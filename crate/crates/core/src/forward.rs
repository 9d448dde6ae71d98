//! Forward passes for `A^{1/2}` and `A^{-1/2}`.
//!
//! Every approximate method works on the normalized matrix `A / ||A||_F`,
//! whose spectrum lies in `(0, 1]` for SPD input, and rescales the result by
//! `||A||_F^{+-1/2}` afterwards.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eig::eig_sym;
use crate::error::{Error, Result};
use crate::lu::solve_linear;
use crate::matrix::{Matrix, SymmetricMatrix};
use crate::pade::{frac_binomial_abs, pade_coefficients};

pub const DEFAULT_TAYLOR_DEGREE: usize = 11;
pub const DEFAULT_NS_ITERS: usize = 5;
/// Eigenvalues at or below this are rejected by the exact inverse square root.
pub const MIN_INVSQRT_EIGENVALUE: f64 = 1e-12;

/// Which forward algorithm produced a result, with its degree or iteration
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Mtp { degree: usize },
    Mpa { m: usize, n: usize },
    NsCoupled { iters: usize },
    NsSingle { iters: usize },
    Exact,
}

impl Method {
    /// Diagonal MPA matched to a Taylor polynomial of odd degree `k`.
    pub fn mpa_for_degree(k: usize) -> Result<Method> {
        let (m, n) = diagonal_degrees(k)?;
        Ok(Method::Mpa { m, n })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Mtp { .. } => "MTP",
            Method::Mpa { .. } => "MPA",
            Method::NsCoupled { .. } => "NS",
            Method::NsSingle { .. } => "NS_SINGLE",
            Method::Exact => "EXACT",
        }
    }

    /// Degree for MTP, matched Taylor degree `M + N + 1` for MPA, iterations
    /// for NS, zero for the exact method.
    pub fn param(&self) -> usize {
        match *self {
            Method::Mtp { degree } => degree,
            Method::Mpa { m, n } => m + n + 1,
            Method::NsCoupled { iters } | Method::NsSingle { iters } => iters,
            Method::Exact => 0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Mtp { degree } => write!(f, "MTP(K={degree})"),
            Method::Mpa { m, n } => write!(f, "MPA[{m},{n}]"),
            Method::NsCoupled { iters } => write!(f, "NS({iters})"),
            Method::NsSingle { iters } => write!(f, "NS_SINGLE({iters})"),
            Method::Exact => write!(f, "EXACT"),
        }
    }
}

/// `M = N = (K - 1) / 2`; even `K` has no diagonal match and is rejected.
pub fn diagonal_degrees(k: usize) -> Result<(usize, usize)> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidArgument {
            arg: "degree",
            reason: format!("diagonal Pade needs an odd Taylor degree K >= 3, got {k}"),
        });
    }
    let half = (k - 1) / 2;
    Ok((half, half))
}

/// Iterates of the coupled Newton-Schulz recursion, kept for the reverse
/// sweep. `steps[k]` holds `(Y_k, Z_k)` as consumed by step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsTrace {
    pub norm: f64,
    pub steps: Vec<(Matrix, Matrix)>,
    pub y_final: Matrix,
    pub z_final: Matrix,
}

impl NsTrace {
    pub fn iters(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtOutput {
    /// `A^{1/2}`, or `A^{-1/2}` when `inverse` is set.
    pub value: SymmetricMatrix,
    /// `||A||_F`.
    pub norm: f64,
    pub method: Method,
    pub inverse: bool,
    pub ns_trace: Option<NsTrace>,
}

impl SqrtOutput {
    fn new(value: Matrix, norm: f64, method: Method, inverse: bool) -> Self {
        SqrtOutput { value: SymmetricMatrix::symmetrize(value), norm, method, inverse, ns_trace: None }
    }
}

/// `(||A||_F, I - A / ||A||_F)`.
fn normalized_shift(a: &Matrix) -> Result<(f64, Matrix)> {
    let norm = positive_norm(a)?;
    Ok((norm, a.scale(-1.0 / norm).add_identity(1.0)))
}

fn positive_norm(a: &Matrix) -> Result<f64> {
    let norm = a.fro_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument { arg: "a", reason: format!("Frobenius norm must be positive and finite, got {norm}") });
    }
    Ok(norm)
}

/// `sqrt(||A||_F) (I - sum_{k=1}^{K} |C(1/2,k)| Z^k)` with `Z = I - A/||A||_F`.
/// Costs `K - 1` multiplications.
pub fn mtp_sqrt(a: &SymmetricMatrix, k_degree: usize) -> Result<SqrtOutput> {
    if k_degree == 0 {
        return Err(Error::InvalidArgument { arg: "degree", reason: "Taylor degree must be at least 1".into() });
    }
    let (norm, z) = normalized_shift(a)?;
    let mut acc = z.scale(-frac_binomial_abs(1)).add_identity(1.0);
    let mut power = z.clone();
    for k in 2..=k_degree {
        power = &power * &z;
        acc = acc.add_scaled(&power, -frac_binomial_abs(k));
    }
    Ok(SqrtOutput::new(acc.scale(norm.sqrt()), norm, Method::Mtp { degree: k_degree }, false))
}

/// Builds `P_M` and `Q_N` from shared powers of `Z`; `max(M, N) - 1`
/// multiplications.
fn pade_polynomials(z: &Matrix, m: usize, n: usize) -> Result<(Matrix, Matrix)> {
    let coeffs = pade_coefficients(m, n)?;
    let dim = z.dim();
    let mut p = Matrix::identity(dim);
    let mut q = Matrix::identity(dim);
    let mut power = z.clone();
    for k in 1..=m.max(n) {
        if k > 1 {
            power = &power * z;
        }
        if let Some(&pk) = coeffs.p.get(k - 1) {
            p = p.add_scaled(&power, -pk);
        }
        if let Some(&qk) = coeffs.q.get(k - 1) {
            q = q.add_scaled(&power, -qk);
        }
    }
    Ok((p, q))
}

fn pole_error(e: Error) -> Error {
    match e {
        Error::SingularMatrix { pivot, .. } => Error::PoleDetected { minimum: pivot },
        other => other,
    }
}

/// `sqrt(||A||_F) Q_N^{-1} P_M`, evaluated by solving
/// `Q_N S = sqrt(||A||_F) P_M`.
pub fn mpa_sqrt(a: &SymmetricMatrix, m: usize, n: usize) -> Result<SqrtOutput> {
    let (norm, z) = normalized_shift(a)?;
    let (p, q) = pade_polynomials(&z, m, n)?;
    let s = solve_linear(&q, &p.scale(norm.sqrt())).map_err(pole_error)?;
    Ok(SqrtOutput::new(s, norm, Method::Mpa { m, n }, false))
}

/// `P_M^{-1} Q_N / sqrt(||A||_F)`.
pub fn mpa_invsqrt(a: &SymmetricMatrix, m: usize, n: usize) -> Result<SqrtOutput> {
    let (norm, z) = normalized_shift(a)?;
    let (p, q) = pade_polynomials(&z, m, n)?;
    let s = solve_linear(&p, &q.scale(1.0 / norm.sqrt()))?;
    Ok(SqrtOutput::new(s, norm, Method::Mpa { m, n }, true))
}

fn ns_coupled(a: &SymmetricMatrix, iters: usize, keep_trace: bool) -> Result<(Matrix, Matrix, f64, Option<NsTrace>)> {
    if iters == 0 {
        return Err(Error::InvalidArgument { arg: "iters", reason: "need at least one iteration".into() });
    }
    let norm = positive_norm(a)?;
    let mut y = a.as_matrix().scale(1.0 / norm);
    let mut z = Matrix::identity(a.dim());
    let mut steps = Vec::with_capacity(if keep_trace { iters } else { 0 });
    for _ in 0..iters {
        let t = (&z * &y).scale(-0.5).add_identity(1.5);
        let y_next = &y * &t;
        let z_next = &t * &z;
        if keep_trace {
            steps.push((y, z));
        }
        y = y_next;
        z = z_next;
    }
    let trace = keep_trace.then(|| NsTrace { norm, steps, y_final: y.clone(), z_final: z.clone() });
    Ok((y, z, norm, trace))
}

/// Coupled Newton-Schulz: `Y_0 = A/||A||_F`, `Z_0 = I`,
/// `Y_{k+1} = Y_k T_k`, `Z_{k+1} = T_k Z_k` with `T_k = (3I - Z_k Y_k)/2`;
/// returns `sqrt(||A||_F) Y_iters`. Three multiplications per iteration.
pub fn ns_sqrt_coupled(a: &SymmetricMatrix, iters: usize) -> Result<SqrtOutput> {
    let (y, _, norm, _) = ns_coupled(a, iters, false)?;
    Ok(SqrtOutput::new(y.scale(norm.sqrt()), norm, Method::NsCoupled { iters }, false))
}

/// As [`ns_sqrt_coupled`], also storing every `(Y_k, Z_k)` for
/// [`crate::backward::ns_backward`].
pub fn ns_sqrt_coupled_traced(a: &SymmetricMatrix, iters: usize) -> Result<SqrtOutput> {
    let (y, _, norm, trace) = ns_coupled(a, iters, true)?;
    let mut out = SqrtOutput::new(y.scale(norm.sqrt()), norm, Method::NsCoupled { iters }, false);
    out.ns_trace = trace;
    Ok(out)
}

/// `Z_iters / sqrt(||A||_F)` from the coupled iteration.
pub fn ns_invsqrt_coupled(a: &SymmetricMatrix, iters: usize) -> Result<SqrtOutput> {
    let (_, z, norm, _) = ns_coupled(a, iters, false)?;
    Ok(SqrtOutput::new(z.scale(1.0 / norm.sqrt()), norm, Method::NsCoupled { iters }, true))
}

/// Single-variable form `Z_{k+1} = (3 Z_k - Z_k^3 A/||A||_F) / 2`, `Z_0 = I`.
pub fn ns_invsqrt_single(a: &SymmetricMatrix, iters: usize) -> Result<SqrtOutput> {
    if iters == 0 {
        return Err(Error::InvalidArgument { arg: "iters", reason: "need at least one iteration".into() });
    }
    let norm = positive_norm(a)?;
    let a_hat = a.scale(1.0 / norm);
    let mut z = Matrix::identity(a.dim());
    for _ in 0..iters {
        let z2 = &z * &z;
        let z3 = &z2 * &z;
        let z3a = &z3 * &a_hat;
        z = z.scale(1.5).add_scaled(&z3a, -0.5);
    }
    Ok(SqrtOutput::new(z.scale(1.0 / norm.sqrt()), norm, Method::NsSingle { iters }, true))
}

/// `U diag(sqrt(lambda)) U^T`. Slightly negative eigenvalues from rounding
/// are clamped to zero.
pub fn exact_sqrt_eig(a: &SymmetricMatrix) -> Result<SqrtOutput> {
    let e = eig_sym(a)?;
    let s = e.reconstruct_with(|l| l.max(0.0).sqrt());
    Ok(SqrtOutput::new(s, a.fro_norm(), Method::Exact, false))
}

/// `U diag(lambda^{-1/2}) U^T`.
pub fn exact_invsqrt_eig(a: &SymmetricMatrix) -> Result<SqrtOutput> {
    let e = eig_sym(a)?;
    let min = e.min_eigenvalue();
    if !(min > MIN_INVSQRT_EIGENVALUE) {
        return Err(Error::NonPositiveEigenvalue { value: min });
    }
    let s = e.reconstruct_with(|l| 1.0 / l.sqrt());
    Ok(SqrtOutput::new(s, a.fro_norm(), Method::Exact, true))
}

/// Forward square root by any method.
pub fn sqrt_with(method: Method, a: &SymmetricMatrix) -> Result<SqrtOutput> {
    match method {
        Method::Mtp { degree } => mtp_sqrt(a, degree),
        Method::Mpa { m, n } => mpa_sqrt(a, m, n),
        Method::NsCoupled { iters } => ns_sqrt_coupled(a, iters),
        Method::NsSingle { iters } => {
            // Y_k = Z_k A / ||A||_F; one extra product recovers the square root
            let inv = ns_invsqrt_single(a, iters)?;
            let s = &inv.value * a;
            Ok(SqrtOutput::new(s, inv.norm, method, false))
        }
        Method::Exact => exact_sqrt_eig(a),
    }
}

/// Forward inverse square root by any method. MTP has no direct inverse form
/// and goes through one linear solve against its square root.
pub fn invsqrt_with(method: Method, a: &SymmetricMatrix) -> Result<SqrtOutput> {
    match method {
        Method::Mtp { degree } => {
            let s = mtp_sqrt(a, degree)?;
            let inv = solve_linear(&s.value, &Matrix::identity(a.dim()))?;
            Ok(SqrtOutput::new(inv, s.norm, method, true))
        }
        Method::Mpa { m, n } => mpa_invsqrt(a, m, n),
        Method::NsCoupled { iters } => ns_invsqrt_coupled(a, iters),
        Method::NsSingle { iters } => ns_invsqrt_single(a, iters),
        Method::Exact => exact_invsqrt_eig(a),
    }
}

/// Mean absolute entrywise error.
pub fn mae(approx: &Matrix, exact: &Matrix) -> Result<f64> {
    if approx.dim() != exact.dim() {
        return Err(Error::DimensionMismatch { expected: exact.dim(), found: approx.dim() });
    }
    let n = approx.as_slice().len();
    let total: f64 = approx.as_slice().iter().zip(exact.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / n as f64)
}

/// Mean absolute error over all entries of a batch of equally sized pairs.
pub fn mae_batch<'a>(pairs: impl IntoIterator<Item = (&'a Matrix, &'a Matrix)>) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (approx, exact) in pairs {
        let n = approx.as_slice().len();
        total += mae(approx, exact)? * n as f64;
        count += n;
    }
    if count == 0 {
        return Err(Error::InvalidArgument { arg: "pairs", reason: "empty batch".into() });
    }
    Ok(total / count as f64)
}
