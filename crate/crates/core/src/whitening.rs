//! ZCA whitening and covariance square-root pooling over `C x S` feature
//! batches.

use serde::{Deserialize, Serialize};

use crate::backward::{invsqrt_lyapunov_gradient, DEFAULT_LYAPUNOV_ITERS, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::forward::{invsqrt_with, sqrt_with, Method, SqrtOutput};
use crate::lu::solve_rectangular;
use crate::matrix::{Matrix, SymmetricMatrix};
use crate::random::standard_normals;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Row-major `channels x samples` feature batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    channels: usize,
    samples: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(channels: usize, samples: usize, values: Vec<f64>) -> Result<Self> {
        if channels < 1 {
            return Err(Error::InvalidArgument { arg: "channels", reason: "need at least one channel".into() });
        }
        if samples < 2 {
            return Err(Error::InvalidArgument { arg: "samples", reason: format!("need at least two samples, got {samples}") });
        }
        if values.len() != channels * samples {
            return Err(Error::DimensionMismatch { expected: channels * samples, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument { arg: "values", reason: "features must be finite".into() });
        }
        Ok(FeatureMatrix { channels, samples, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let samples = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != samples) {
            return Err(Error::DimensionMismatch { expected: samples, found: bad.len() });
        }
        Self::new(rows.len(), samples, rows.concat())
    }

    /// Standard normal features.
    pub fn random(channels: usize, samples: usize, seed: u64) -> Result<Self> {
        Self::new(channels, samples, standard_normals(channels * samples, seed))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.values[c * self.samples..(c + 1) * self.samples]
    }

    pub fn get(&self, c: usize, s: usize) -> f64 {
        self.values[c * self.samples + s]
    }

    pub fn max_abs_diff(&self, other: &FeatureMatrix) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Rows minus their means.
    pub fn centered(&self) -> FeatureMatrix {
        let mut values = self.values.clone();
        for row in values.chunks_mut(self.samples) {
            let mean = row.iter().sum::<f64>() / self.samples as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        FeatureMatrix { values, ..*self }
    }

    /// `M X` for a `C x C` matrix `M`.
    fn left_mul(&self, m: &Matrix) -> FeatureMatrix {
        let (c, s) = (self.channels, self.samples);
        let mut values = vec![0.0; c * s];
        for i in 0..c {
            let out = &mut values[i * s..(i + 1) * s];
            for k in 0..c {
                let w = m[(i, k)];
                out.iter_mut().zip(self.row(k)).for_each(|(o, x)| *o += w * x);
            }
        }
        FeatureMatrix { values, ..*self }
    }

    /// `X Y^T`, a `C x C` matrix.
    fn outer(&self, other: &FeatureMatrix) -> Matrix {
        Matrix::from_fn(self.channels, |i, j| self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum())
    }

    fn check_same_shape(&self, other: &FeatureMatrix) -> Result<()> {
        if self.channels != other.channels || self.samples != other.samples {
            return Err(Error::DimensionMismatch { expected: self.values.len(), found: other.values.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitenConfig {
    pub eps: f64,
    pub method: Method,
    /// Iteration cap for the Lyapunov backward pass.
    pub lyapunov_iters: usize,
}

impl Default for WhitenConfig {
    fn default() -> Self {
        WhitenConfig { eps: DEFAULT_EPS, method: Method::Exact, lyapunov_iters: DEFAULT_LYAPUNOV_ITERS }
    }
}

impl WhitenConfig {
    pub fn with_method(method: Method) -> Self {
        WhitenConfig { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument { arg: "eps", reason: format!("must be positive and finite, got {}", self.eps) });
        }
        if self.lyapunov_iters == 0 {
            return Err(Error::InvalidArgument { arg: "lyapunov_iters", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// `(X - mu)(X - mu)^T + eps I` with per-channel means `mu`. No `1/S`
/// factor.
pub fn covariance(x: &FeatureMatrix, eps: f64) -> SymmetricMatrix {
    let xc = x.centered();
    SymmetricMatrix::symmetrize(xc.outer(&xc).add_identity(eps))
}

/// Whitened features `A^{-1/2} X` with `A = covariance(X, eps)`. MPA applies
/// its inverse form directly; every other method solves `A^{1/2} X_w = X`.
pub fn zca_whiten(x: &FeatureMatrix, cfg: &WhitenConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let a = covariance(x, cfg.eps);
    match cfg.method {
        Method::Mpa { m, n } => {
            let r = crate::forward::mpa_invsqrt(&a, m, n)?;
            Ok(x.left_mul(&r.value))
        }
        method => {
            let s = sqrt_with(method, &a)?;
            let values = solve_rectangular(&s.value, &x.values, x.samples)?;
            Ok(FeatureMatrix { values, ..*x })
        }
    }
}

/// `(X X^T + eps I)^{1/2}` over centered features.
pub fn cov_pool_sqrt(x: &FeatureMatrix, cfg: &WhitenConfig) -> Result<SqrtOutput> {
    cfg.validate()?;
    sqrt_with(cfg.method, &covariance(x, cfg.eps))
}

/// `||covariance(X, 0) - I||_max`.
pub fn whiteness_deviation(x: &FeatureMatrix) -> f64 {
    let c = x.centered();
    c.outer(&c).add_identity(-1.0).max_abs()
}

/// Gradient of `<G, zca_whiten(X)>` with respect to `X`. The inverse square
/// root comes from the configured method; its gradient is obtained from the
/// Lyapunov solver, then pushed through the covariance and the centering.
pub fn zca_whiten_backward(x: &FeatureMatrix, cfg: &WhitenConfig, grad: &FeatureMatrix) -> Result<FeatureMatrix> {
    cfg.validate()?;
    x.check_same_shape(grad)?;
    let a = covariance(x, cfg.eps);
    let r = invsqrt_with(cfg.method, &a)?.value;
    let direct = grad.left_mul(&r);
    let g_r = SymmetricMatrix::symmetrize(grad.outer(x));
    let g_a = invsqrt_lyapunov_gradient(&r, &g_r, cfg.lyapunov_iters, DEFAULT_TOLERANCE)?.grad;
    let g_a = &g_a + &g_a.transpose();
    let through_cov = x.centered().left_mul(&g_a).centered();
    let values = direct.values.iter().zip(&through_cov.values).map(|(a, b)| a + b).collect();
    Ok(FeatureMatrix { values, ..*x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::eig_sym;
    use crate::forward::{exact_sqrt_eig, mae, mpa_invsqrt, mpa_sqrt};

    fn mpa55() -> WhitenConfig {
        WhitenConfig::with_method(Method::Mpa { m: 5, n: 5 })
    }

    /// Rows orthonormal and orthogonal to the all-ones vector, so the
    /// centered covariance is exactly `I`.
    fn white_batch(c: usize, s: usize, seed: u64) -> FeatureMatrix {
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0 / (s as f64).sqrt(); s]];
        let raw = FeatureMatrix::random(c, s, seed).unwrap();
        for i in 0..c {
            let mut v = raw.row(i).to_vec();
            for _ in 0..2 {
                for r in &rows {
                    let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            rows.push(v.iter().map(|a| a / norm).collect());
        }
        FeatureMatrix::from_rows(&rows[1..]).unwrap()
    }

    #[test]
    fn shape_checks() {
        assert!(FeatureMatrix::new(0, 4, vec![]).is_err());
        assert!(FeatureMatrix::new(2, 1, vec![1.0, 2.0]).is_err());
        assert!(FeatureMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let bad = WhitenConfig { eps: 0.0, ..WhitenConfig::default() };
        assert!(zca_whiten(&FeatureMatrix::random(2, 8, 1).unwrap(), &bad).is_err());
    }

    #[test]
    fn covariance_small_cases() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert!((covariance(&x, 0.01)[(0, 0)] - 2.01).abs() <= 1e-15);
        let flat = FeatureMatrix::from_rows(&[vec![3.0; 5], vec![-2.0; 5]]).unwrap();
        assert!(covariance(&flat, 0.5).max_abs_diff(&Matrix::scaled_identity(2, 0.5)) <= 1e-15);
    }

    #[test]
    fn covariance_matches_two_pass() {
        let x = FeatureMatrix::random(8, 64, 3).unwrap();
        let cov = covariance(&x, 1e-3);
        for i in 0..8 {
            for j in 0..8 {
                let mi = x.row(i).iter().sum::<f64>() / 64.0;
                let mj = x.row(j).iter().sum::<f64>() / 64.0;
                let mut want: f64 = (0..64).map(|s| (x.get(i, s) - mi) * (x.get(j, s) - mj)).sum();
                if i == j {
                    want += 1e-3;
                }
                assert!((cov[(i, j)] - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn exact_whitening_gives_identity_covariance() {
        let x = FeatureMatrix::random(8, 256, 5).unwrap();
        let w = zca_whiten(&x, &WhitenConfig::default()).unwrap();
        assert!(whiteness_deviation(&w) <= 1e-5);
        let c = w.centered();
        let e = eig_sym(&c.outer(&c)).unwrap();
        assert!(e.eigenvalues.iter().all(|l| (l - 1.0).abs() <= 1e-6), "{:?}", e.eigenvalues);
    }

    #[test]
    fn mpa_whitening() {
        let x = FeatureMatrix::random(8, 256, 5).unwrap();
        let w = zca_whiten(&x, &mpa55()).unwrap();
        assert!(whiteness_deviation(&w) <= 1e-3);
    }

    #[test]
    fn mpa_inverse_times_sqrt_is_identity() {
        let a = covariance(&FeatureMatrix::random(8, 256, 6).unwrap(), DEFAULT_EPS);
        let r = mpa_invsqrt(&a, 5, 5).unwrap().value;
        let s = mpa_sqrt(&a, 5, 5).unwrap().value;
        assert!((&r * &s).max_abs_diff(&Matrix::identity(8)) <= 1e-10);
    }

    #[test]
    fn white_input_is_a_fixed_point() {
        let x = white_batch(4, 32, 7);
        assert!(whiteness_deviation(&x) <= 1e-12);
        let cfg = WhitenConfig { eps: 1e-8, ..WhitenConfig::default() };
        let w = zca_whiten(&x, &cfg).unwrap();
        assert!(w.max_abs_diff(&x) <= 1e-4);
    }

    #[test]
    fn whitening_is_idempotent() {
        let x = FeatureMatrix::random(6, 128, 8).unwrap();
        let cfg = WhitenConfig { eps: 1e-6, ..WhitenConfig::default() };
        let once = zca_whiten(&x, &cfg).unwrap();
        let twice = zca_whiten(&once, &cfg).unwrap();
        assert!(twice.max_abs_diff(&once) <= 1e-3);
    }

    #[test]
    fn cov_pool_small_cases() {
        let r = 2f64.sqrt();
        let x = FeatureMatrix::from_rows(&[vec![r, -r, 0.0, 0.0], vec![0.0, 0.0, 3.0 / r, -3.0 / r]]).unwrap();
        let cfg = WhitenConfig { eps: 1e-14, ..WhitenConfig::default() };
        let s = cov_pool_sqrt(&x, &cfg).unwrap().value;
        assert!(s.max_abs_diff(&Matrix::from_diag(&[2.0, 3.0])) <= 1e-9);
        let eye = cov_pool_sqrt(&white_batch(3, 16, 2), &cfg).unwrap().value;
        assert!(eye.max_abs_diff(&Matrix::identity(3)) <= 1e-9);
    }

    #[test]
    fn cov_pool_mpa_close_to_exact() {
        let x = FeatureMatrix::random(8, 64, 9).unwrap();
        let exact = cov_pool_sqrt(&x, &WhitenConfig::default()).unwrap();
        let approx = cov_pool_sqrt(&x, &mpa55()).unwrap();
        assert!(mae(&approx.value, &exact.value).unwrap() <= 1e-4);
        let ev = eig_sym(&exact_sqrt_eig(&covariance(&x, DEFAULT_EPS)).unwrap().value).unwrap().eigenvalues;
        let cov_ev = eig_sym(&covariance(&x, DEFAULT_EPS)).unwrap().eigenvalues;
        for (s, c) in ev.iter().zip(&cov_ev) {
            assert!((s - c.sqrt()).abs() <= 1e-9);
        }
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let x = FeatureMatrix::random(4, 16, 11).unwrap();
        let g = FeatureMatrix::random(4, 16, 12).unwrap();
        let cfg = WhitenConfig { eps: 1e-5, method: Method::Exact, lyapunov_iters: 12 };
        let grad = zca_whiten_backward(&x, &cfg, &g).unwrap();
        let loss = |v: Vec<f64>| {
            let w = zca_whiten(&FeatureMatrix::new(4, 16, v).unwrap(), &cfg).unwrap();
            w.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>()
        };
        let h = 1e-5;
        let mut worst = 0.0f64;
        for k in 0..x.values.len() {
            let mut up = x.values.clone();
            let mut down = x.values.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (loss(up) - loss(down)) / (2.0 * h);
            worst = worst.max((fd - grad.values[k]).abs());
        }
        let scale = grad.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst / scale <= 1e-4, "{:e}", worst / scale);
    }
}
