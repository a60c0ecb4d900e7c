//! Scaled unscented transform: weights and a semidefinite-tolerant Cholesky.

use nalgebra::{SMatrix, SVector};

/// Weights of the scaled unscented transform for an `n`-dimensional state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtWeights {
    /// Sigma-point spread, `sqrt(n + lambda)`.
    pub gamma: f64,
    pub mean_center: f64,
    pub cov_center: f64,
    /// Weight of every non-central point (mean and covariance).
    pub outer: f64,
}

impl UtWeights {
    pub fn new(n: usize, alpha: f64, beta: f64, kappa: f64) -> Self {
        let n = n as f64;
        let lambda = alpha * alpha * (n + kappa) - n;
        let mean_center = lambda / (n + lambda);
        Self {
            gamma: (n + lambda).sqrt(),
            mean_center,
            cov_center: mean_center + (1.0 - alpha * alpha + beta),
            outer: 1.0 / (2.0 * (n + lambda)),
        }
    }

    pub fn mean_weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.mean_center
        } else {
            self.outer
        }
    }

    pub fn cov_weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.cov_center
        } else {
            self.outer
        }
    }
}

/// Lower-triangular `L` with `L L^T = P` for symmetric positive
/// semidefinite `P`.
///
/// Pivots that vanish (relative to the largest diagonal entry) produce a zero
/// column, so exactly-zero covariance blocks are accepted. Returns `None` if
/// a pivot is negative beyond tolerance or a zero pivot has a non-zero
/// off-diagonal residual.
pub fn psd_cholesky<const N: usize>(p: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let scale = (0..N).map(|i| p[(i, i)].abs()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return None;
    }
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d > tol {
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..N {
                let mut s = p[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        } else if d >= -tol {
            for i in (j + 1)..N {
                let mut s = p[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > tol.sqrt() * scale.sqrt() {
                    return None;
                }
            }
        } else {
            return None;
        }
    }
    Some(l)
}

/// `0.5 (P + P^T)`.
pub fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Weighted mean and covariance of a set of vectors.
pub fn weighted_moments<const N: usize>(
    points: &[SVector<f64, N>],
    weights: &UtWeights,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let mean = points
        .iter()
        .enumerate()
        .fold(SVector::<f64, N>::zeros(), |acc, (i, x)| acc + x * weights.mean_weight(i));
    let cov = points
        .iter()
        .enumerate()
        .fold(SMatrix::<f64, N, N>::zeros(), |acc, (i, x)| {
            let d = x - mean;
            acc + d * d.transpose() * weights.cov_weight(i)
        });
    (mean, cov)
}
