//! Binomial series and diagonal Pade coefficients for `(1 - z)^{1/2}`.
//!
//! The Taylor expansion is `(1 - z)^{1/2} = 1 - sum_k |C(1/2, k)| z^k`, and a
//! `[M, N]` approximant `(1 - sum p_m z^m) / (1 - sum q_n z^n)` is fixed by
//! matching that series through degree `M + N`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::counter;
use crate::error::{Error, Result};
use crate::lu::LuDecomposition;
use crate::matrix::Matrix;

/// Step of the uniform grid used by [`verify_no_poles`].
pub const POLE_SCAN_STEP: f64 = 1e-4;

/// `|C(1/2, k)|` via the falling factorial `(1/2)(1/2 - 1)...(1/2 - k + 1) / k!`.
pub fn frac_binomial_abs(k: usize) -> f64 {
    assert!(k >= 1, "binomial index must be positive");
    let mut c = 1.0f64;
    for j in 0..k {
        c *= (0.5 - j as f64) / (j + 1) as f64;
    }
    c.abs()
}

/// `|C(1/2, k)|` for `k = 1..=degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCoefficients {
    pub values: Vec<f64>,
}

impl TaylorCoefficients {
    pub fn degree(&self) -> usize {
        self.values.len()
    }

    /// Truncated series `1 - sum_{k<=K} |C(1/2,k)| z^k`.
    pub fn eval(&self, z: f64) -> f64 {
        let mut pow = 1.0;
        let mut acc = 1.0;
        for c in &self.values {
            pow *= z;
            acc -= c * pow;
        }
        acc
    }
}

pub fn taylor_coefficients(k_max: usize) -> TaylorCoefficients {
    assert!(k_max >= 1, "k_max must be at least 1");
    TaylorCoefficients { values: (1..=k_max).map(frac_binomial_abs).collect() }
}

/// Coefficients of the `[M, N]` approximant
/// `(1 - sum_{m=1}^M p_m z^m) / (1 - sum_{n=1}^N q_n z^n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadeCoefficients {
    pub m_degree: usize,
    pub n_degree: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn poly_one_minus(coeffs: &[f64], z: f64) -> f64 {
    // 1 - sum c_k z^k, Horner
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = (acc + c) * z;
    }
    1.0 - acc
}

impl PadeCoefficients {
    pub fn is_diagonal(&self) -> bool {
        self.m_degree == self.n_degree
    }

    pub fn numerator_at(&self, z: f64) -> f64 {
        poly_one_minus(&self.p, z)
    }

    pub fn denominator_at(&self, z: f64) -> f64 {
        poly_one_minus(&self.q, z)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.numerator_at(z) / self.denominator_at(z)
    }

    /// Largest deviation between the first `M + N` Taylor coefficients of the
    /// rational function and those of `(1 - z)^{1/2}`.
    pub fn matching_residual(&self) -> f64 {
        let k_max = self.m_degree + self.n_degree;
        let series = taylor_series_signed(k_max);
        let denom = signed_poly(&self.q);
        let numer = signed_poly(&self.p);
        (1..=k_max)
            .map(|k| {
                let conv: f64 = (0..=k.min(self.n_degree)).map(|j| denom[j] * series[k - j]).sum();
                let want = numer.get(k).copied().unwrap_or(0.0);
                (conv - want).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `[1, -|C(1/2,1)|, ..., -|C(1/2,K)|]`: the signed series of `(1-z)^{1/2}`.
fn taylor_series_signed(k_max: usize) -> Vec<f64> {
    std::iter::once(1.0).chain((1..=k_max).map(|k| -frac_binomial_abs(k))).collect()
}

fn signed_poly(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(coeffs.iter().map(|c| -c)).collect()
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Dot product in roughly twice the working precision.
fn compensated_dot(xs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in xs {
        let (p, pe) = two_prod(x, y);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

const REFINEMENT_STEPS: usize = 4;

/// Solves the series-matching system for the `[m, n]` approximant.
///
/// Equations `k = M+1..=M+N` (numerator coefficient zero) determine `q`
/// through an `N x N` Toeplitz system, solved by LU and polished with
/// iterative refinement on compensated residuals. Equations `k = 1..=M`
/// then give `p` directly.
pub fn solve_pade_coefficients(m: usize, n: usize) -> Result<PadeCoefficients> {
    if m + n == 0 {
        return Err(Error::InvalidArgument { arg: "degree", reason: "M + N must be at least 1".into() });
    }
    let series = taylor_series_signed(m + n);
    let t = |k: isize| if k < 0 { 0.0 } else { series[k as usize] };

    // b_j = -q_j; sum_{j=1}^{N} b_j t_{k-j} = -t_k
    let q = if n == 0 {
        Vec::new()
    } else {
        let system = Matrix::from_fn(n, |row, col| t((m + 1 + row) as isize - (col + 1) as isize));
        let rhs: Vec<f64> = (0..n).map(|row| -t((m + 1 + row) as isize)).collect();
        let lu = LuDecomposition::factor(&system)?;
        let mut b = lu.solve_vector(&rhs)?;
        for _ in 0..REFINEMENT_STEPS {
            let resid: Vec<f64> = (0..n)
                .map(|row| {
                    let terms = std::iter::once((rhs[row], 1.0))
                        .chain((0..n).map(|col| (-system[(row, col)], b[col])));
                    compensated_dot(terms)
                })
                .collect();
            let delta = lu.solve_vector(&resid)?;
            for (bi, di) in b.iter_mut().zip(delta) {
                *bi += di;
            }
        }
        b.into_iter().map(|bj| -bj).collect()
    };

    let denom = signed_poly(&q);
    let p = (1..=m)
        .map(|k| {
            let a_k = compensated_dot((0..=k.min(n)).map(|j| (denom[j], series[k - j])));
            -a_k
        })
        .collect();
    Ok(PadeCoefficients { m_degree: m, n_degree: n, p, q })
}

fn cache() -> &'static RwLock<HashMap<(usize, usize), Arc<PadeCoefficients>>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, usize), Arc<PadeCoefficients>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Cached [`solve_pade_coefficients`]. The solve is not charged to the
/// operation counters; entries never change once inserted.
pub fn pade_coefficients(m: usize, n: usize) -> Result<Arc<PadeCoefficients>> {
    if let Some(c) = cache().read().expect("pade cache poisoned").get(&(m, n)) {
        return Ok(Arc::clone(c));
    }
    let fresh = Arc::new(counter::uncounted(|| solve_pade_coefficients(m, n))?);
    let mut guard = cache().write().expect("pade cache poisoned");
    Ok(Arc::clone(guard.entry((m, n)).or_insert(fresh)))
}

/// Minimum of `f(x) = 1 - sum q_n x^n` over `[0, 1]`, sampled on a uniform
/// grid of step [`POLE_SCAN_STEP`] including both endpoints. A positive
/// minimum means `det(Q_N) != 0` for every input whose normalized spectrum
/// lies in `(0, 1]`.
pub fn verify_no_poles(c: &PadeCoefficients) -> Result<f64> {
    if !c.is_diagonal() {
        return Err(Error::InvalidArgument {
            arg: "coefficients",
            reason: format!("pole scan expects a diagonal approximant, got [{}, {}]", c.m_degree, c.n_degree),
        });
    }
    let steps = (1.0 / POLE_SCAN_STEP).round() as usize;
    let minimum = (0..=steps)
        .map(|i| c.denominator_at(i as f64 / steps as f64))
        .chain([c.denominator_at(0.0), c.denominator_at(1.0)])
        .fold(f64::INFINITY, f64::min);
    if minimum <= 0.0 {
        return Err(Error::PoleDetected { minimum });
    }
    Ok(minimum)
}
