//! Seeded, reproducible path generation.
//!
//! Sub-fBm is sampled three ways: exact Cholesky factorization of the grid
//! covariance (the default), folding a two-sided fBm per
//! zeta(t) = (W_H(t) + W_H(-t)) / sqrt(2), and a discretized
//! Wiener-integral representation zeta(t_i) ~ c_H sum_j n_H(t_i, m_j) dW_j
//! kept as an independent cross-check of the kernel machinery. The drift
//! process solves dX = theta X dt + d zeta with X(0) = 0; its driving
//! increments always come from the Cholesky sampler on the replicate's own
//! stream.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cov;
use crate::error::{Result, SfouError};
use crate::grid::{PathBatch, PathKind, SeedPolicy, SfouScheme, SubfbmMethod, TimeGrid};
use crate::hurst::HurstParams;
use crate::kernels::wiener_kernel_matrix;
use crate::linalg::{cholesky_factor, min_eigenvalue_estimate, SquareMatrix};
use crate::quad::QuadratureSpec;

/// Which covariance function to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    SubFbm,
    Fbm,
}

/// Covariance matrix over the interior grid times t_1..t_n (t_0 is excluded:
/// the process starts at 0, so its row would be identically zero).
pub fn covariance_matrix(grid: &TimeGrid, p: &HurstParams, which: CovKind) -> Result<SquareMatrix> {
    let n = grid.steps();
    let times = &grid.times()[1..];
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = match which {
                CovKind::SubFbm => cov::cov_subfbm(times[i], times[j], p)?,
                CovKind::Fbm => cov::cov_fbm(times[i], times[j], p),
            };
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Check positive semidefiniteness up to an eigenvalue tolerance of
/// -1e-10 * ||M||_inf; returns the smallest-eigenvalue estimate on success.
pub fn verify_covariance(m: &SquareMatrix) -> Result<f64> {
    let lambda_min = min_eigenvalue_estimate(m, 600);
    let tol = -1e-10 * m.norm_inf();
    if lambda_min < tol {
        return Err(SfouError::Numeric(format!(
            "covariance matrix is indefinite: smallest eigenvalue {lambda_min:e} \
             below tolerance {tol:e}"
        )));
    }
    Ok(lambda_min)
}

/// Sub-fBm sampler with a precomputed Cholesky factor, reused across
/// replicates and shared with the drift-process simulator.
pub struct SubfbmSampler {
    n: usize,
    factor: SquareMatrix,
}

impl SubfbmSampler {
    pub fn new(grid: &TimeGrid, p: &HurstParams) -> Result<Self> {
        let cov = covariance_matrix(grid, p, CovKind::SubFbm)?;
        let factor = cholesky_factor(&cov)?;
        Ok(SubfbmSampler {
            n: grid.steps(),
            factor,
        })
    }

    /// One path on the full grid (leading exact zero included).
    pub fn sample_path<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let mut path = Vec::with_capacity(self.n + 1);
        path.push(0.0);
        for i in 0..self.n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.factor.get(i, j) * z[j];
            }
            path.push(acc);
        }
        path
    }
}

fn fold_sampler(grid: &TimeGrid, p: &HurstParams) -> Result<SquareMatrix> {
    // Joint fBm at (-t_n .. -t_1, t_1 .. t_n) using |.|-extended covariance.
    let n = grid.steps();
    let times = &grid.times()[1..];
    let mut pts = Vec::with_capacity(2 * n);
    for i in (0..n).rev() {
        pts.push(-times[i]);
    }
    pts.extend_from_slice(times);
    let mut m = SquareMatrix::zeros(2 * n);
    for i in 0..2 * n {
        for j in 0..=i {
            let v = cov::cov_fbm(pts[i], pts[j], p);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    cholesky_factor(&m)
}

fn sample_lower_product<R: Rng>(factor: &SquareMatrix, rng: &mut R) -> Vec<f64> {
    let n = factor.dim();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += factor.get(i, j) * z[j];
            }
            acc
        })
        .collect()
}

/// Simulate a batch of sub-fBm paths.
pub fn simulate_subfbm(
    grid: &TimeGrid,
    p: &HurstParams,
    reps: usize,
    seeds: &SeedPolicy,
    method: SubfbmMethod,
) -> Result<PathBatch> {
    if reps == 0 {
        return Err(SfouError::domain("reps must be at least 1"));
    }
    let n = grid.steps();
    let values: Vec<Vec<f64>> = match method {
        SubfbmMethod::Cholesky => {
            let sampler = SubfbmSampler::new(grid, p)?;
            (0..reps)
                .into_par_iter()
                .map(|r| sampler.sample_path(&mut seeds.stream_rng(r)))
                .collect()
        }
        SubfbmMethod::FbmFold => {
            let factor = fold_sampler(grid, p)?;
            let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let w = sample_lower_product(&factor, &mut seeds.stream_rng(r));
                    let mut path = Vec::with_capacity(n + 1);
                    path.push(0.0);
                    for i in 1..=n {
                        // W(t_i) sits at index n - 1 + i, W(-t_i) at n - i.
                        path.push((w[n - 1 + i] + w[n - i]) * inv_sqrt2);
                    }
                    path
                })
                .collect()
        }
        SubfbmMethod::KernelWiener => {
            p.require_kernel()?;
            let spec = QuadratureSpec::default();
            let kernel = wiener_kernel_matrix(grid, p, &spec)?;
            let sqrt_dt = grid.dt().sqrt();
            let c_h = p.c_h();
            (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seeds.stream_rng(r);
                    let dw: Vec<f64> = (0..n)
                        .map(|_| {
                            let z: f64 = rng.sample(StandardNormal);
                            z * sqrt_dt
                        })
                        .collect();
                    let mut path = Vec::with_capacity(n + 1);
                    path.push(0.0);
                    for i in 1..=n {
                        let row = kernel.row(i);
                        let mut acc = 0.0;
                        for (kij, dwj) in row.iter().zip(&dw) {
                            acc += kij * dwj;
                        }
                        path.push(c_h * acc);
                    }
                    path
                })
                .collect()
        }
    };
    Ok(PathBatch {
        grid: grid.clone(),
        values,
        kind: PathKind::SubFbm,
        h: p.h(),
        theta: None,
        seed: seeds.master_seed(),
        method: method.into(),
    })
}

/// Advance the drift recursion along a driving noise path.
pub fn sfou_from_noise(zeta: &[f64], theta: f64, dt: f64, scheme: SfouScheme) -> Vec<f64> {
    let propagate = match scheme {
        SfouScheme::ExpEuler => (theta * dt).exp(),
        SfouScheme::PlainEuler => 1.0 + theta * dt,
    };
    let mut x = Vec::with_capacity(zeta.len());
    x.push(0.0);
    for i in 1..zeta.len() {
        let prev = x[i - 1];
        x.push(propagate * prev + (zeta[i] - zeta[i - 1]));
    }
    x
}

/// Simulate the drift process dX = theta X dt + d zeta, X(0) = 0.
pub fn simulate_sfou(
    grid: &TimeGrid,
    p: &HurstParams,
    theta: f64,
    reps: usize,
    seeds: &SeedPolicy,
    scheme: SfouScheme,
) -> Result<PathBatch> {
    if reps == 0 {
        return Err(SfouError::domain("reps must be at least 1"));
    }
    let sampler = SubfbmSampler::new(grid, p)?;
    let dt = grid.dt();
    let values: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let zeta = sampler.sample_path(&mut seeds.stream_rng(r));
            sfou_from_noise(&zeta, theta, dt, scheme)
        })
        .collect();
    Ok(PathBatch {
        grid: grid.clone(),
        values,
        kind: PathKind::Sfou,
        h: p.h(),
        theta: Some(theta),
        seed: seeds.master_seed(),
        method: scheme.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::hurst::derive_constants;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sample_mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn covariance_matrix_brownian_case_is_min() {
        let grid = build_grid(2.0, 4).unwrap();
        let p = derive_constants(0.5).unwrap();
        let m = covariance_matrix(&grid, &p, CovKind::SubFbm).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = grid.times()[i + 1].min(grid.times()[j + 1]);
                assert_abs_diff_eq!(m.get(i, j), expect, epsilon = 1e-12);
            }
        }
        assert!(verify_covariance(&m).is_ok());
    }

    #[test]
    fn covariance_matrix_frozen_entries() {
        // Grid {0, 1, 2} at H = 0.75.
        let grid = build_grid(2.0, 2).unwrap();
        let p = derive_constants(0.75).unwrap();
        let m = covariance_matrix(&grid, &p, CovKind::SubFbm).unwrap();
        assert_relative_eq!(m.get(0, 0), 2.0 - 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m.get(0, 1), 0.730_350_913_392_874_3, max_relative = 1e-12);
        assert_relative_eq!(m.get(1, 0), m.get(0, 1), max_relative = 1e-15);
        // 2 * 2^1.5 - 4^1.5 / 2 = 2^2.5 - 4
        assert_relative_eq!(m.get(1, 1), 2f64.powf(2.5) - 4.0, max_relative = 1e-12);
    }

    #[test]
    fn verify_covariance_rejects_indefinite_matrices() {
        let mut m = SquareMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0); // eigenvalues 3 and -1
        let err = verify_covariance(&m).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("indefinite"), "{msg}");
        assert!(msg.contains("eigenvalue"), "{msg}");
    }

    #[test]
    fn determinism_same_seed_same_bits() {
        let grid = build_grid(1.0, 32).unwrap();
        let p = derive_constants(0.7).unwrap();
        let seeds = SeedPolicy::new(42);
        let a = simulate_subfbm(&grid, &p, 3, &seeds, SubfbmMethod::Cholesky).unwrap();
        let b = simulate_subfbm(&grid, &p, 3, &seeds, SubfbmMethod::Cholesky).unwrap();
        assert_eq!(a.values, b.values);
        // Replicate r does not depend on how many other replicates run.
        let c = simulate_subfbm(&grid, &p, 1, &seeds, SubfbmMethod::Cholesky).unwrap();
        assert_eq!(a.values[0], c.values[0]);
    }

    #[test]
    fn paths_start_at_zero_and_validate() {
        let grid = build_grid(1.0, 16).unwrap();
        let p = derive_constants(0.3).unwrap();
        for method in [SubfbmMethod::Cholesky, SubfbmMethod::FbmFold] {
            let batch = simulate_subfbm(&grid, &p, 5, &SeedPolicy::new(7), method).unwrap();
            batch.validate().unwrap();
            for row in &batch.values {
                assert_eq!(row[0], 0.0);
            }
        }
    }

    #[test]
    fn kernel_wiener_requires_high_hurst() {
        let grid = build_grid(1.0, 8).unwrap();
        let p = derive_constants(0.4).unwrap();
        let err =
            simulate_subfbm(&grid, &p, 1, &SeedPolicy::new(1), SubfbmMethod::KernelWiener);
        assert!(err.is_err());
    }

    #[test]
    fn empirical_variance_matches_covariance() {
        // Var(zeta_1) should be within 5 standard errors of beta_H.
        let grid = build_grid(1.0, 64).unwrap();
        let p = derive_constants(0.7).unwrap();
        let batch =
            simulate_subfbm(&grid, &p, 2000, &SeedPolicy::new(9), SubfbmMethod::Cholesky)
                .unwrap();
        let finals: Vec<f64> = batch.values.iter().map(|row| *row.last().unwrap()).collect();
        let (_, var) = sample_mean_var(&finals);
        let target = p.beta_h(); // C_H(1,1) = 2 - 2^(2H-1)
        let se = (2.0f64).sqrt() * target / (2000f64).sqrt();
        assert!(
            (var - target).abs() < 5.0 * se,
            "var {var} vs {target} (se {se})"
        );
    }

    #[test]
    fn fold_and_cholesky_agree_in_distribution() {
        // Empirical covariances (variances and a cross-time entry) from the
        // two samplers agree with the closed form and with each other,
        // within 5 Monte Carlo standard errors.
        let empirical_cov = |rows: &[Vec<f64>], i: usize, j: usize| {
            let n = rows.len() as f64;
            let mi = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let mj = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            rows.iter()
                .map(|r| (r[i] - mi) * (r[j] - mj))
                .sum::<f64>()
                / (n - 1.0)
        };
        for &h in &[0.3, 0.7] {
            let grid = build_grid(1.0, 32).unwrap();
            let p = derive_constants(h).unwrap();
            let reps = 3000;
            let a = simulate_subfbm(&grid, &p, reps, &SeedPolicy::new(11), SubfbmMethod::Cholesky)
                .unwrap();
            let b = simulate_subfbm(&grid, &p, reps, &SeedPolicy::new(12), SubfbmMethod::FbmFold)
                .unwrap();
            for &(i, j) in &[(16usize, 16usize), (32, 32), (16, 32), (8, 24)] {
                let (s, t) = (grid.times()[i], grid.times()[j]);
                let target = cov::cov_subfbm(s, t, &p).unwrap();
                // Gaussian fourth-moment standard error of a covariance
                // estimate: (C_ss C_tt + C_st^2) / reps.
                let css = cov::cov_subfbm(s, s, &p).unwrap();
                let ctt = cov::cov_subfbm(t, t, &p).unwrap();
                let se = ((css * ctt + target * target) / reps as f64).sqrt();
                let va = empirical_cov(&a.values, i, j);
                let vb = empirical_cov(&b.values, i, j);
                assert!(
                    (va - target).abs() < 5.0 * se,
                    "cholesky h={h} ({s},{t}): {va} vs {target} (se {se})"
                );
                assert!(
                    (vb - target).abs() < 5.0 * se,
                    "fold h={h} ({s},{t}): {vb} vs {target} (se {se})"
                );
                let se_pair = (2.0f64).sqrt() * se;
                assert!(
                    (va - vb).abs() < 5.0 * se_pair,
                    "methods disagree at h={h} ({s},{t}): {va} vs {vb}"
                );
            }
        }
    }

    #[test]
    fn kernel_wiener_bias_shrinks_under_refinement() {
        // The scheme draws independent increments, so its terminal variance
        // is exactly c_H^2 dt sum_j n_H(T, m_j)^2; the discretization bias
        // against C_H(T, T) must fall monotonically with the grid.
        let p = derive_constants(0.7).unwrap();
        let target = p.beta_h();
        let spec = QuadratureSpec::default();
        let mut biases = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = build_grid(1.0, n).unwrap();
            let kernel = wiener_kernel_matrix(&grid, &p, &spec).unwrap();
            let row = kernel.row(n);
            let scheme_var =
                p.c_h() * p.c_h() * grid.dt() * row.iter().map(|v| v * v).sum::<f64>();
            biases.push((scheme_var - target).abs());
        }
        assert!(
            biases[0] > biases[1] && biases[1] > biases[2],
            "kernel-method bias did not shrink monotonically: {biases:?}"
        );

        // Monte Carlo spot check at the finest grid.
        let reps = 1500;
        let grid = build_grid(1.0, 256).unwrap();
        let batch = simulate_subfbm(
            &grid,
            &p,
            reps,
            &SeedPolicy::new(5),
            SubfbmMethod::KernelWiener,
        )
        .unwrap();
        let finals: Vec<f64> = batch.values.iter().map(|row| *row.last().unwrap()).collect();
        let (_, var) = sample_mean_var(&finals);
        let se = (2.0f64).sqrt() * target / (reps as f64).sqrt();
        assert!(
            (var - target).abs() < 5.0 * se,
            "kernel-method empirical variance {var} vs {target}"
        );
    }

    #[test]
    fn sfou_zero_drift_reproduces_noise() {
        let grid = build_grid(1.0, 64).unwrap();
        let p = derive_constants(0.7).unwrap();
        let seeds = SeedPolicy::new(21);
        for scheme in [SfouScheme::ExpEuler, SfouScheme::PlainEuler] {
            let x = simulate_sfou(&grid, &p, 0.0, 2, &seeds, scheme).unwrap();
            let z = simulate_subfbm(&grid, &p, 2, &seeds, SubfbmMethod::Cholesky).unwrap();
            for (xr, zr) in x.values.iter().zip(&z.values) {
                for (a, b) in xr.iter().zip(zr) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn ergodic_case_stays_bounded_with_stable_variance() {
        let grid = build_grid(20.0, 2000).unwrap();
        let p = derive_constants(0.7).unwrap();
        let reps = 200;
        let batch = simulate_sfou(&grid, &p, -1.0, reps, &SeedPolicy::new(3), SfouScheme::ExpEuler)
            .unwrap();
        let sup = batch
            .values
            .iter()
            .flat_map(|row| row.iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        assert!(sup < 50.0, "ergodic paths blew up: sup |X| = {sup}");
        // Empirical Var(X_t) stabilizes across the last quarter of the horizon.
        let n = grid.steps();
        let var_at = |idx: usize| {
            sample_mean_var(&batch.values.iter().map(|r| r[idx]).collect::<Vec<_>>()).1
        };
        let v75 = var_at(3 * n / 4);
        let v100 = var_at(n);
        assert!(
            (v100 - v75).abs() <= 0.2 * v100.max(v75),
            "variance drifted across last quarter: {v75} vs {v100}"
        );
    }

    #[test]
    fn schemes_agree_at_first_order_in_dt() {
        // One driving path sampled at the finest grid, subsampled to the
        // coarser ones so every level sees the same noise.
        let p = derive_constants(0.7).unwrap();
        let theta = -1.0;
        let fine = build_grid(1.0, 512).unwrap();
        let sampler = SubfbmSampler::new(&fine, &p).unwrap();
        let zeta_fine = sampler.sample_path(&mut SeedPolicy::new(77).stream_rng(0));
        let mut sups = Vec::new();
        for n in [128usize, 256, 512] {
            let stride = 512 / n;
            let zeta: Vec<f64> = (0..=n).map(|i| zeta_fine[i * stride]).collect();
            let dt = 1.0 / n as f64;
            let a = sfou_from_noise(&zeta, theta, dt, SfouScheme::ExpEuler);
            let b = sfou_from_noise(&zeta, theta, dt, SfouScheme::PlainEuler);
            let sup = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            sups.push(sup);
        }
        // Halving dt should roughly halve the gap (first order), allow slack.
        assert!(sups[1] < 0.75 * sups[0], "{sups:?}");
        assert!(sups[2] < 0.75 * sups[1], "{sups:?}");
    }
}
