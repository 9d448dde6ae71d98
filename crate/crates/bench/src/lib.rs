//! Shared inputs for the criterion benchmarks.

use matsqrt_core::bench::{bench_input, bench_upstream};
use matsqrt_core::{Method, SymmetricMatrix};

pub const DIMS: [usize; 3] = [16, 64, 128];

/// The forward methods compared in the benchmarks, at their default settings.
pub fn methods() -> [Method; 4] {
    [Method::Mtp { degree: 11 }, Method::Mpa { m: 5, n: 5 }, Method::NsCoupled { iters: 5 }, Method::Exact]
}

/// `count` seeded covariance inputs plus the fixed upstream gradient for `n`.
pub fn inputs(n: usize, count: usize) -> (Vec<SymmetricMatrix>, SymmetricMatrix) {
    let batch = (0..count as u64).map(|i| bench_input(0, n, i)).collect();
    (batch, bench_upstream(0, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_spd_and_reproducible() {
        let (a, g) = inputs(8, 2);
        let (b, h) = inputs(8, 2);
        assert_eq!(a, b);
        assert_eq!(g, h);
        assert!(matsqrt_core::eig_sym(&a[0]).unwrap().min_eigenvalue() > 0.0);
    }
}
