//! Martingale transform, score process, and maximum likelihood drift
//! estimation from a continuously observed path.
//!
//! Observing X with dX = theta X dt + d zeta, the pipeline is
//!
//! ```text
//! Z_t   = int_0^t k_H(t, s) dX_s          (semimartingale transform)
//! J(t)  = d/dw_t int_0^t k_H(t, s) X(s) ds (score integrand)
//! theta^ = int_0^T J dZ / int_0^T J^2 dw   (drift MLE)
//! ```
//!
//! with every stochastic integral discretized non-anticipatively: the
//! integrand value multiplying the forward increment Z_{t_{i+1}} - Z_{t_i}
//! is J(t_{i-1}), the latest value whose central-difference stencil
//! (spanning up to t_i) is known at the increment's left endpoint. Anything
//! later peeks at the increment and destroys the martingale-transform
//! structure of the score, which shows up as a drift bias in the Monte
//! Carlo checks. J is differentiated in the w-clock by central differences,
//! which keeps the t = 0 Jacobian blow-up of dw/dt out of the scheme; t_0
//! and t_1 are excluded from all likelihood integrals.

use crate::error::{Result, SfouError};
use crate::grid::TimeGrid;
use crate::hurst::HurstParams;
use crate::kernels::{
    martingale_kernel_matrix, prediction_kernel, quadratic_variation, reconstruction_kernel_matrix,
    KernelTabulation,
};
use crate::quad::QuadratureSpec;

/// Grid-discretized kernel matrices and clock values, reusable across every
/// per-path transform on the same (grid, H). The k and K matrices hold
/// exact cell averages of the kernels over each subinterval (this keeps the
/// singular cells at s -> t correctly weighted); the strictly
/// lower-triangular support means cell j only ever multiplies increments
/// ending at or before t_i.
#[derive(Debug, Clone)]
pub struct TransformCache {
    grid: TimeGrid,
    h: f64,
    k: KernelTabulation,
    big_k: KernelTabulation,
    /// w_{t_i} for i = 0..=n (w_0 = 0).
    w: Vec<f64>,
    /// Forward increments w_{t_{i+1}} - w_{t_i}.
    dw: Vec<f64>,
    max_refinement: u32,
}

/// Precompute the kernel matrices and the clock. Assembly never evaluates
/// a kernel on its singular lines s = 0 and s = t and costs O(n^2).
pub fn build_cache(grid: &TimeGrid, p: &HurstParams, spec: &QuadratureSpec) -> Result<TransformCache> {
    p.require_kernel()?;
    spec.validate()?;
    let k = martingale_kernel_matrix(grid, p, spec)?;
    let big_k = reconstruction_kernel_matrix(grid, p, spec)?;
    let w: Vec<f64> = grid
        .times()
        .iter()
        .map(|&t| quadratic_variation(t, p).map(|(w, _)| w))
        .collect::<Result<_>>()?;
    for pair in w.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(SfouError::numeric("quadratic variation is not increasing"));
        }
    }
    let dw: Vec<f64> = w.windows(2).map(|pair| pair[1] - pair[0]).collect();
    let max_refinement = k.max_refinement.max(big_k.max_refinement);
    Ok(TransformCache {
        grid: grid.clone(),
        h: p.h(),
        k,
        big_k,
        w,
        dw,
        max_refinement,
    })
}

impl TransformCache {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn w_values(&self) -> &[f64] {
        &self.w
    }

    pub fn dw_values(&self) -> &[f64] {
        &self.dw
    }

    pub fn k_matrix(&self) -> &KernelTabulation {
        &self.k
    }

    pub fn reconstruction_matrix(&self) -> &KernelTabulation {
        &self.big_k
    }

    fn check_path(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.steps() + 1 {
            return Err(SfouError::GridMismatch(format!(
                "path has {} points, cache grid has {}",
                x.len(),
                self.grid.steps() + 1
            )));
        }
        Ok(())
    }
}

/// Volterra transform of a path against kernel rows: out_i = sum_{j<i}
/// rows[i][j] (x_{j+1} - x_j).
fn apply_kernel(tab: &KernelTabulation, x: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let dx: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 1..=n {
        let row = tab.row(i);
        let mut acc = 0.0;
        for (kij, dxj) in row.iter().zip(&dx) {
            acc += kij * dxj;
        }
        out.push(acc);
    }
    out
}

/// Z_t = int_0^t k_H(t, s) dX_s on the cache grid.
pub fn transform_to_z(x: &[f64], cache: &TransformCache) -> Result<Vec<f64>> {
    cache.check_path(x)?;
    Ok(apply_kernel(&cache.k, x))
}

/// X_t = int_0^t K_H(t, s) dZ_s on the cache grid.
pub fn reconstruct_x(z: &[f64], cache: &TransformCache) -> Result<Vec<f64>> {
    cache.check_path(z)?;
    Ok(apply_kernel(&cache.big_k, z))
}

/// Score integrand J(t_i) = dQ/dw at t_i, where Q(t) = int_0^t k_H(t, s)
/// X(s) ds is discretized with midpoint-interpolated X values and the
/// derivative is a central difference in the w-clock (one-sided at t_n).
/// J is undefined at t_0; index 0 of the returned vector is a placeholder
/// zero that never enters any integral.
pub fn compute_j(x: &[f64], cache: &TransformCache) -> Result<Vec<f64>> {
    cache.check_path(x)?;
    let n = cache.grid.steps();
    if n + 1 < 4 {
        return Err(SfouError::domain(
            "score integrand needs at least 4 grid points",
        ));
    }
    let dt = cache.grid.dt();
    let xm: Vec<f64> = x.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let mut q = Vec::with_capacity(n + 1);
    q.push(0.0);
    for i in 1..=n {
        let row = cache.k.row(i);
        let mut acc = 0.0;
        for (kij, xmj) in row.iter().zip(&xm) {
            acc += kij * xmj;
        }
        q.push(acc * dt);
    }
    let w = &cache.w;
    let mut j = vec![0.0; n + 1];
    for i in 1..n {
        j[i] = (q[i + 1] - q[i - 1]) / (w[i + 1] - w[i - 1]);
    }
    j[n] = (q[n] - q[n - 1]) / (w[n] - w[n - 1]);
    Ok(j)
}

/// Centered 3-point moving average of the score integrand. Diagnostic only:
/// smoothing biases the drift estimate, so it is excluded from the
/// statistical experiment runs.
pub fn smooth_j(j: &[f64]) -> Vec<f64> {
    if j.len() < 3 {
        return j.to_vec();
    }
    let mut out = j.to_vec();
    for i in 1..j.len() - 1 {
        out[i] = (j[i - 1] + j[i] + j[i + 1]) / 3.0;
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub refinement_level: u32,
    pub warnings: Vec<String>,
}

/// Everything the estimator produced for one path.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta_hat: f64,
    /// Observed information int_0^T J^2 dw (quadratic variation of the
    /// score martingale).
    pub obs_info: f64,
    pub log_lik_at_hat: f64,
    /// J(t_i) aligned with the grid; index 0 is the placeholder.
    pub j_samples: Vec<f64>,
    pub z_path: Vec<f64>,
    pub grid: TimeGrid,
    pub h: f64,
    pub diagnostics: Diagnostics,
}

/// Discretized score integrals: numerator int J dZ and denominator
/// int J^2 dw. The weight against the increment over [t_i, t_{i+1}] is
/// J(t_{i-1}) (adapted at t_i); the sum runs over i = 3..n-1 so that t_1
/// never enters and every weight is fully measurable.
fn score_integrals(z: &[f64], j: &[f64], cache: &TransformCache) -> (f64, f64) {
    let n = cache.grid.steps();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 3..n {
        num += j[i - 1] * (z[i + 1] - z[i]);
        den += j[i - 1] * j[i - 1] * cache.dw[i];
    }
    (num, den)
}

/// Maximum likelihood estimate of the drift parameter from a path on the
/// cache grid.
pub fn mle(x: &[f64], cache: &TransformCache) -> Result<EstimationResult> {
    mle_with_smoothing(x, cache, false)
}

/// Like [`mle`], optionally smoothing J first (diagnostic use only).
pub fn mle_with_smoothing(
    x: &[f64],
    cache: &TransformCache,
    smooth: bool,
) -> Result<EstimationResult> {
    let z = transform_to_z(x, cache)?;
    let mut j = compute_j(x, cache)?;
    let mut warnings = Vec::new();
    if smooth {
        j = smooth_j(&j);
        warnings.push("J smoothed by 3-point moving average; estimate is biased".to_string());
    }
    let (num, den) = score_integrals(&z, &j, cache);
    if den <= 0.0 {
        return Err(SfouError::DegeneratePath);
    }
    let theta_hat = num / den;
    let log_lik_at_hat = theta_hat * num - 0.5 * theta_hat * theta_hat * den;
    Ok(EstimationResult {
        theta_hat,
        obs_info: den,
        log_lik_at_hat,
        j_samples: j,
        z_path: z,
        grid: cache.grid.clone(),
        h: cache.h,
        diagnostics: Diagnostics {
            refinement_level: cache.max_refinement,
            warnings,
        },
    })
}

/// log L_T(theta) = theta int J dZ - theta^2/2 int J^2 dw.
pub fn log_likelihood(theta: f64, x: &[f64], cache: &TransformCache) -> Result<f64> {
    let z = transform_to_z(x, cache)?;
    let j = compute_j(x, cache)?;
    let (num, den) = score_integrals(&z, &j, cache);
    Ok(theta * num - 0.5 * theta * theta * den)
}

/// log dP_theta / dP_theta0 evaluated on the observed path, using the
/// martingale increments dM = dZ - theta0 J dw implied by theta0.
pub fn likelihood_ratio(
    theta: f64,
    theta0: f64,
    x: &[f64],
    cache: &TransformCache,
) -> Result<f64> {
    let z = transform_to_z(x, cache)?;
    let j = compute_j(x, cache)?;
    let n = cache.grid.steps();
    let mut mart = 0.0;
    let mut den = 0.0;
    for i in 3..n {
        let dm = (z[i + 1] - z[i]) - theta0 * j[i - 1] * cache.dw[i];
        mart += j[i - 1] * dm;
        den += j[i - 1] * j[i - 1] * cache.dw[i];
    }
    let d = theta - theta0;
    Ok(d * mart - 0.5 * d * d * den)
}

/// Girsanov weight removing a constant drift `a` from a driftless sub-fBm
/// path: Lambda = exp(a M_T - a^2 w_T / 2), with M the fundamental
/// martingale obtained by transforming the path.
pub fn girsanov_weight(a: f64, zeta: &[f64], cache: &TransformCache) -> Result<f64> {
    let m = transform_to_z(zeta, cache)?;
    let n = cache.grid.steps();
    Ok((a * m[n] - 0.5 * a * a * cache.w[n]).exp())
}

/// Predict zeta_t from a path observed on [0, a], where a is the grid
/// horizon: the conditional mean is zeta_a + int_0^a psi_{a,t}(u) d zeta_u.
pub fn predict(
    zeta: &[f64],
    grid: &TimeGrid,
    t: f64,
    p: &HurstParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if zeta.len() != grid.steps() + 1 {
        return Err(SfouError::GridMismatch(format!(
            "path has {} points, grid has {}",
            zeta.len(),
            grid.steps() + 1
        )));
    }
    let a = grid.t_max();
    if t <= a {
        return Err(SfouError::domain(format!(
            "prediction time must exceed the observation horizon {a}, got {t}"
        )));
    }
    let mut acc = zeta[grid.steps()];
    for j in 0..grid.steps() {
        let u = grid.midpoint(j);
        let weight = prediction_kernel(u, a, t, p, spec)?;
        acc += weight * (zeta[j + 1] - zeta[j]);
    }
    Ok(acc)
}
