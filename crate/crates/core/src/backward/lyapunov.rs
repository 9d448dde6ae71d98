use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymmetricMatrix};

pub const DEFAULT_LYAPUNOV_ITERS: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 1e-7;
/// A residual `||B_k - I||_F` above this aborts the solve; it only happens
/// when `B` is not positive definite.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// `B X + X B = C` with `B` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProblem {
    pub b: SymmetricMatrix,
    pub c: SymmetricMatrix,
    /// Stop once `||B_k - I||_F < tolerance`.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl LyapunovProblem {
    pub fn new(b: SymmetricMatrix, c: SymmetricMatrix) -> Result<Self> {
        if b.dim() != c.dim() {
            return Err(Error::DimensionMismatch { expected: b.dim(), found: c.dim() });
        }
        Ok(LyapunovProblem { b, c, tolerance: DEFAULT_TOLERANCE, max_iters: DEFAULT_LYAPUNOV_ITERS })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// Unbounded stream of sign iterates starting from
    /// `B_0 = B / ||B||_F`, `C_0 = C / ||B||_F`.
    pub fn iterations(&self) -> SignIterations {
        let scale = 1.0 / self.b.fro_norm();
        SignIterations { b: self.b.as_matrix().scale(scale), c: self.c.as_matrix().scale(scale), index: 0 }
    }
}

/// State after `iter_index` sign steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SignIterate {
    pub b_k: Matrix,
    pub c_k: Matrix,
    pub iter_index: usize,
    /// `||B_k - I||_F`.
    pub residual: f64,
}

/// Iterator over the coupled updates
/// `B_{k+1} = B_k (3I - B_k^2) / 2`,
/// `C_{k+1} = (-B_k^2 C_k + B_k C_k B_k + C_k (3I - B_k^2)) / 2`,
/// six multiplications per step.
#[derive(Debug, Clone)]
pub struct SignIterations {
    b: Matrix,
    c: Matrix,
    index: usize,
}

impl Iterator for SignIterations {
    type Item = SignIterate;

    fn next(&mut self) -> Option<SignIterate> {
        let b = &self.b;
        let c = &self.c;
        let b2 = b * b;
        let t = b2.scale(-1.0).add_identity(3.0);
        let b_next = (b * &t).scale(0.5);
        let b2c = &b2 * c;
        let bcb = &(b * c) * b;
        let ct = c * &t;
        let c_next = bcb.add_scaled(&b2c, -1.0).add_scaled(&ct, 1.0).scale(0.5);
        self.b = b_next;
        self.c = c_next;
        self.index += 1;
        let residual = self.b.add_identity(-1.0).fro_norm();
        Some(SignIterate { b_k: self.b.clone(), c_k: self.c.clone(), iter_index: self.index, residual })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradOutput {
    /// `X = C_k / 2`, the approximate `dl/dA`.
    pub grad: Matrix,
    pub iters_used: usize,
    /// `||B_k - I||_F` at exit.
    pub residual_b: f64,
    /// `||C_k/2 - X_oracle||_F`, filled in only by callers holding an oracle.
    pub residual_c_vs_oracle: Option<f64>,
    /// `||B_k - I||_F` after each step.
    pub residual_history: Vec<f64>,
}

/// Sign-function Lyapunov solver. Runs until `||B_k - I||_F < tolerance` or
/// `max_iters` steps, then returns `C_k / 2`.
pub fn lyapunov_solve_sign(p: &LyapunovProblem) -> Result<GradOutput> {
    if p.b.dim() != p.c.dim() {
        return Err(Error::DimensionMismatch { expected: p.b.dim(), found: p.c.dim() });
    }
    if p.max_iters == 0 {
        return Err(Error::InvalidArgument { arg: "max_iters", reason: "need at least one iteration".into() });
    }
    let mut history = Vec::with_capacity(p.max_iters);
    let mut last = None;
    for it in p.iterations().take(p.max_iters) {
        if !(it.residual <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Diverged { iteration: it.iter_index, residual: it.residual });
        }
        history.push(it.residual);
        let done = it.residual < p.tolerance;
        last = Some(it);
        if done {
            break;
        }
    }
    let last = last.expect("at least one iteration");
    Ok(GradOutput {
        grad: last.c_k.scale(0.5),
        iters_used: last.iter_index,
        residual_b: last.residual,
        residual_c_vs_oracle: None,
        residual_history: history,
    })
}

/// `dl/dA` for `S = A^{1/2}` given `dl/dS`.
pub fn sqrt_lyapunov_gradient(
    sqrt: &SymmetricMatrix,
    grad_sqrt: &SymmetricMatrix,
    max_iters: usize,
    tolerance: f64,
) -> Result<GradOutput> {
    let p = LyapunovProblem::new(sqrt.clone(), grad_sqrt.clone())?.with_max_iters(max_iters).with_tolerance(tolerance);
    lyapunov_solve_sign(&p)
}

/// Recasts the inverse-square-root gradient as a Lyapunov problem:
/// with `R = A^{-1/2}`, `dl/dA` solves `R X + X R = -A^{-1} (dl/dR) A^{-1}`.
pub fn invsqrt_grad_to_lyapunov(
    a_invsqrt: &SymmetricMatrix,
    a_inv: &Matrix,
    grad_invsqrt: &SymmetricMatrix,
) -> Result<LyapunovProblem> {
    let n = a_invsqrt.dim();
    for d in [a_inv.dim(), grad_invsqrt.dim()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, found: d });
        }
    }
    let c = (&(a_inv * grad_invsqrt) * a_inv).scale(-1.0);
    LyapunovProblem::new(a_invsqrt.clone(), SymmetricMatrix::symmetrize(c))
}

/// `dl/dA` for `R = A^{-1/2}` given `dl/dR`; `A^{-1}` is formed as `R R`.
pub fn invsqrt_lyapunov_gradient(
    a_invsqrt: &SymmetricMatrix,
    grad_invsqrt: &SymmetricMatrix,
    max_iters: usize,
    tolerance: f64,
) -> Result<GradOutput> {
    let a_inv = a_invsqrt * a_invsqrt;
    let p = invsqrt_grad_to_lyapunov(a_invsqrt, &a_inv, grad_invsqrt)?
        .with_max_iters(max_iters)
        .with_tolerance(tolerance);
    lyapunov_solve_sign(&p)
}
