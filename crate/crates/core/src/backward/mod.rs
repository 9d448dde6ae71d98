//! Gradients of the matrix square root and inverse square root.
//!
//! For `S = A^{1/2}` the gradient `X = dl/dA` solves the Lyapunov equation
//! `S X + X S = dl/dS`. [`lyapunov_solve_sign`] solves it with the coupled
//! Newton-Schulz sign iteration on the block matrix `[[B, C], [0, -B]]`;
//! [`bartels_stewart`] and [`kron_closed_form`] are exact references.

mod fd;
mod lyapunov;
mod ns;
mod oracle;
mod sign;

pub use fd::{finite_diff_check, MAX_FD_EPS, MIN_FD_EPS};
pub use lyapunov::{
    invsqrt_grad_to_lyapunov, invsqrt_lyapunov_gradient, lyapunov_solve_sign, sqrt_lyapunov_gradient, GradOutput,
    LyapunovProblem, SignIterate, SignIterations, DEFAULT_LYAPUNOV_ITERS, DEFAULT_TOLERANCE, DIVERGENCE_THRESHOLD,
};
pub use ns::{ns_backward, ns_pre_post_grad, ns_sqrt_gradient};
pub use oracle::{bartels_stewart, kron_closed_form, KRON_MAX_DIM};
pub use sign::{block_lyapunov_matrix, matrix_sign_ns, top_right_block};
