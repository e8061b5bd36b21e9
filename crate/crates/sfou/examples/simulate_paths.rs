//! Simulate sub-fractional Brownian motion with all three samplers and the
//! drift process it drives, then compare empirical moments with the closed
//! forms.
//!
//! Run with: cargo run --release --example simulate_paths

use sfou::cov::cov_subfbm;
use sfou::grid::{build_grid, SeedPolicy, SfouScheme, SubfbmMethod};
use sfou::hurst::derive_constants;
use sfou::montecarlo::{mean, variance};
use sfou::simulate::{simulate_sfou, simulate_subfbm};

fn main() -> sfou::Result<()> {
    let h = 0.7;
    let p = derive_constants(h)?;
    let grid = build_grid(1.0, 64)?;
    let seeds = SeedPolicy::new(42);
    let reps = 2000;

    println!("sub-fBm at H = {h}, T = 1, n = 64, {reps} replicates");
    println!(
        "theoretical Var(zeta_1) = C_H(1,1) = beta_H = {:.6}",
        p.beta_h()
    );
    for method in [
        SubfbmMethod::Cholesky,
        SubfbmMethod::FbmFold,
        SubfbmMethod::KernelWiener,
    ] {
        let batch = simulate_subfbm(&grid, &p, reps, &seeds, method)?;
        let finals: Vec<f64> = batch.values.iter().map(|r| *r.last().unwrap()).collect();
        println!(
            "  {method:?}: empirical Var(zeta_1) = {:.6}, mean = {:+.4}",
            variance(&finals),
            mean(&finals)
        );
    }

    // Mid-grid covariance against the closed form.
    let batch = simulate_subfbm(&grid, &p, reps, &seeds, SubfbmMethod::Cholesky)?;
    let t_half = grid.times()[32];
    let emp_cov = {
        let a: Vec<f64> = batch.values.iter().map(|r| r[32]).collect();
        let b: Vec<f64> = batch.values.iter().map(|r| r[64]).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (reps as f64 - 1.0)
    };
    println!(
        "covariance C_H({t_half}, 1): empirical {:.5} vs exact {:.5}",
        emp_cov,
        cov_subfbm(t_half, 1.0, &p)?
    );

    // The drift process: theta < 0 keeps paths bounded.
    let theta = -1.0;
    let long_grid = build_grid(20.0, 1000)?;
    let sfou = simulate_sfou(&long_grid, &p, theta, 200, &seeds, SfouScheme::ExpEuler)?;
    let sup = sfou
        .values
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let finals: Vec<f64> = sfou.values.iter().map(|r| *r.last().unwrap()).collect();
    println!(
        "drift process theta = {theta}, T = 20: sup |X| = {sup:.3}, Var(X_T) = {:.4}",
        variance(&finals)
    );
    Ok(())
}
