//! Minimal dense symmetric linear algebra: storage, Cholesky, SPD solves,
//! and a smallest-eigenvalue estimate for indefiniteness diagnostics.

use crate::error::{Result, SfouError};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// y = M x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Plain lower Cholesky. On breakdown reports the failing pivot so callers
/// can decide whether to jitter and retry.
pub(crate) fn cholesky_raw(m: &SquareMatrix) -> std::result::Result<SquareMatrix, (usize, f64)> {
    let n = m.dim();
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err((i, sum));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Lower Cholesky factor of a symmetric positive definite matrix. On a
/// first breakdown a diagonal jitter of 1e-12 * trace / n is added and the
/// factorization retried once; a second breakdown is reported together with
/// an estimate of the offending (smallest) eigenvalue.
pub fn cholesky_factor(m: &SquareMatrix) -> Result<SquareMatrix> {
    match cholesky_raw(m) {
        Ok(l) => Ok(l),
        Err(_) => {
            let n = m.dim();
            let jitter = 1e-12 * m.trace() / n as f64;
            let mut bumped = m.clone();
            for i in 0..n {
                bumped.set(i, i, bumped.get(i, i) + jitter);
            }
            match cholesky_raw(&bumped) {
                Ok(l) => Ok(l),
                Err((pivot, value)) => {
                    let lambda_min = min_eigenvalue_estimate(m, 400);
                    Err(SfouError::Numeric(format!(
                        "covariance factorization failed at pivot {pivot} (value {value:e}) \
                         after jitter retry; smallest eigenvalue is approximately {lambda_min:e}"
                    )))
                }
            }
        }
    }
}

/// Solve L L^T x = b given the lower factor.
pub fn solve_cholesky(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.dim();
    assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    x
}

/// Deterministic estimate of the smallest eigenvalue of a symmetric matrix
/// by power iteration on sigma I - M with sigma = ||M||_inf.
pub fn min_eigenvalue_estimate(m: &SquareMatrix, iterations: usize) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let sigma = m.norm_inf();
    // Fixed, slightly uneven start vector so no eigendirection is missed by
    // symmetry accidents.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sin() * 0.5).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let s = norm(&v);
    v.iter_mut().for_each(|a| *a /= s);
    let mut rayleigh = 0.0;
    for _ in 0..iterations {
        let mv = m.mul_vec(&v);
        // w = (sigma I - M) v
        let w: Vec<f64> = v
            .iter()
            .zip(&mv)
            .map(|(vi, mvi)| sigma * vi - mvi)
            .collect();
        let s = norm(&w);
        if s == 0.0 {
            return sigma;
        }
        v = w.into_iter().map(|a| a / s).collect();
        let mv = m.mul_vec(&v);
        rayleigh = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
    }
    rayleigh
}
