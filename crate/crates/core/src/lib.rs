//! Fast differentiable matrix square root and inverse square root.
//!
//! Forward passes: truncated matrix Taylor polynomial (MTP), diagonal matrix
//! Pade approximant (MPA), coupled and single-variable Newton-Schulz, and an
//! exact eigendecomposition reference. Backward passes: an iterative
//! Lyapunov solver driven by the matrix sign function, the Newton-Schulz
//! reverse sweep, and exact Bartels-Stewart / Kronecker oracles.

pub mod backward;
pub mod bench;
pub mod counter;
pub mod eig;
pub mod error;
pub mod forward;
pub mod lu;
pub mod matrix;
pub mod pade;
pub mod random;
pub mod selfcheck;
pub mod whitening;

pub use counter::{count_ops, OpCounter};
pub use eig::{eig_sym, EigenDecomposition};
pub use error::{Error, Result};
pub use lu::solve_linear;
pub use matrix::{fro_norm, matmul, Matrix, MatrixBatch, SymmetricMatrix};
pub use pade::{
    frac_binomial_abs, pade_coefficients, solve_pade_coefficients, taylor_coefficients, verify_no_poles,
    PadeCoefficients, TaylorCoefficients,
};
pub use random::{random_covariance, random_spd, random_symmetric};
pub use forward::{
    exact_invsqrt_eig, exact_sqrt_eig, invsqrt_with, mae, mpa_invsqrt, mpa_sqrt, mtp_sqrt, ns_invsqrt_coupled,
    ns_invsqrt_single, ns_sqrt_coupled, ns_sqrt_coupled_traced, sqrt_with, Method, NsTrace, SqrtOutput,
};
pub use backward::{
    bartels_stewart, finite_diff_check, invsqrt_grad_to_lyapunov, kron_closed_form, lyapunov_solve_sign, matrix_sign_ns,
    ns_backward, ns_pre_post_grad, GradOutput, LyapunovProblem, SignIterate,
};
pub use whitening::{covariance, cov_pool_sqrt, zca_whiten, zca_whiten_backward, FeatureMatrix, WhitenConfig};
pub use bench::{emit_csv, emit_json, run_bench, BenchConfig, BenchRecord, BenchReport};
pub use selfcheck::{selfcheck, CheckOptions, CriterionReport};
