//! Numerical identities tying the Volterra kernels together: the
//! representation identity for the covariance, the quadratic variation of
//! the fundamental martingale, and the covariance orderings.
//!
//! Run with: cargo run --release --example kernel_identities

use sfou::cov::{cov_fbm, cov_subfbm, increment_variance};
use sfou::hurst::derive_constants;
use sfou::kernels::{
    martingale_kernel, quadratic_variation, representation_identity_max_error,
};
use sfou::quad::QuadratureSpec;

fn main() -> sfou::Result<()> {
    let spec = QuadratureSpec::default();

    println!("representation identity  c_H^2 int n_H(t,u) n_H(t',u) du = C_H(t,t')");
    for &h in &[0.6, 0.7, 0.85] {
        let p = derive_constants(h)?;
        let err = representation_identity_max_error(&p, &[0.25, 0.5, 1.0], &spec)?;
        println!("  H = {h}: max |error| = {err:.2e}");
    }

    println!("\nquadratic variation  Var(int k_H d zeta) vs w_1 (graded 256-point grid)");
    for &h in &[0.6, 0.7, 0.85] {
        let p = derive_constants(h)?;
        let n = 256;
        let t = 1.0;
        let eval_spec = QuadratureSpec {
            max_refinements: 14,
            ..spec
        };
        let times: Vec<f64> = (0..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                t * x * x / (x * x + (1.0 - x) * (1.0 - x))
            })
            .collect();
        let k: Vec<f64> = (0..n)
            .map(|i| {
                let m = 0.5 * (times[i] + times[i + 1]);
                martingale_kernel(t, m, &p, &eval_spec).unwrap()
            })
            .collect();
        let mut qf = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dc = cov_subfbm(times[i + 1], times[j + 1], &p)?
                    - cov_subfbm(times[i + 1], times[j], &p)?
                    - cov_subfbm(times[i], times[j + 1], &p)?
                    + cov_subfbm(times[i], times[j], &p)?;
                qf += k[i] * k[j] * dc;
            }
        }
        let (w, _) = quadratic_variation(t, &p)?;
        println!("  H = {h}: k'dCk = {qf:.5}, w_1 = {w:.5}  ({:+.2}%)", 100.0 * (qf - w) / w);
    }

    println!("\ncovariance ordering and increment sandwich at (s, t) = (1, 2)");
    for &h in &[0.3, 0.5, 0.75] {
        let p = derive_constants(h)?;
        let c = cov_subfbm(1.0, 2.0, &p)?;
        let r = cov_fbm(1.0, 2.0, &p);
        let v = increment_variance(1.0, 2.0, &p)?;
        println!(
            "  H = {h}: C = {c:.4}, R = {r:.4}, Var(increment) = {v:.4}, beta_H = {:.4}",
            p.beta_h()
        );
    }
    Ok(())
}
