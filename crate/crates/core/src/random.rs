//! Seeded random matrix generators.
//!
//! All generators draw from ChaCha8 seeded with a 64-bit integer, so a given
//! seed produces bit-identical matrices on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{Matrix, SymmetricMatrix};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with an index (splitmix64 finalizer) so that matrix `i`
/// of a run gets an independent, reproducible stream.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normals(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `len` i.i.d. standard normal draws.
pub fn standard_normals(len: usize, seed: u64) -> Vec<f64> {
    normals(&mut rng_from_seed(seed), len)
}

/// Square matrix with i.i.d. standard normal entries.
pub fn random_matrix(n: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    Matrix::from_row_major(n, normals(&mut rng, n * n)).expect("length matches")
}

/// Symmetric matrix `(G + G^T) / 2` with standard normal `G`.
pub fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(random_matrix(n, seed))
}

/// `G G^T / n + eps I` with `G` an `n x n` standard normal matrix.
pub fn random_spd(n: usize, seed: u64, eps: f64) -> SymmetricMatrix {
    random_covariance(n, n, seed, eps)
}

/// Sample second-moment matrix `G G^T / samples + eps I` of `samples`
/// standard normal vectors in `R^n`. More samples than dimensions gives the
/// well-conditioned covariances typical of whitening layers.
pub fn random_covariance(n: usize, samples: usize, seed: u64, eps: f64) -> SymmetricMatrix {
    assert!(n >= 1 && samples >= 1, "random_covariance needs n >= 1 and samples >= 1");
    let mut rng = rng_from_seed(seed);
    let g = normals(&mut rng, n * samples);
    let inv = 1.0 / samples as f64;
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        let gi = &g[i * samples..(i + 1) * samples];
        for j in i..n {
            let gj = &g[j * samples..(j + 1) * samples];
            let v = gi.iter().zip(gj).map(|(a, b)| a * b).sum::<f64>() * inv;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        out[(i, i)] += eps;
    }
    SymmetricMatrix::symmetrize(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::eig_sym;

    #[test]
    fn spd_is_deterministic() {
        let a = random_spd(4, 7, 1e-3);
        let b = random_spd(4, 7, 1e-3);
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), random_spd(4, 8, 1e-3).as_slice());
    }

    #[test]
    fn spd_respects_eps_floor() {
        let a = random_spd(16, 1, 1e-3);
        let eig = eig_sym(&a).unwrap();
        let min = *eig.eigenvalues.last().unwrap();
        assert!(min >= 1e-3 - 1e-12, "min eigenvalue {min}");
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
