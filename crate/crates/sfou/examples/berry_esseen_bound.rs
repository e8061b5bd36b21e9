//! Berry-Esseen-type bound study: the Kolmogorov distance of the
//! pilot-normalized estimator stays below the computable chain
//! sqrt(2 eps_T) + 2 P(|delta_T <gamma>_T - 1| >= eps_T) + eps_T.
//!
//! Run with: cargo run --release --example berry_esseen_bound

use sfou::montecarlo::{berry_esseen_experiment, tail_experiment, McConfig};

fn main() -> sfou::Result<()> {
    let cfg = McConfig {
        horizons: vec![5.0, 10.0, 20.0],
        dt: 0.04,
        reps: 150,
        pilot_reps: 60,
        ..McConfig::default()
    };
    let report = berry_esseen_experiment(&cfg)?;
    println!("Berry-Esseen chain at H = {}, theta0 = {}", cfg.h, cfg.theta0);
    println!(
        "{:>6} {:>9} {:>7} {:>8} {:>8} {:>8} {:>9}",
        "T", "delta", "eps", "ks", "p_cond", "bound", "vacuous"
    );
    for hz in &report.horizons {
        println!(
            "{:>6} {:>9.5} {:>7.3} {:>8.4} {:>8.3} {:>8.3} {:>9}",
            hz.t_max,
            hz.delta.unwrap(),
            hz.eps.unwrap(),
            hz.ks.unwrap(),
            hz.p_cond.unwrap(),
            hz.bound.unwrap(),
            hz.vacuous
        );
    }
    println!("pass = {}\n", report.pass);

    let tail_cfg = McConfig {
        horizons: vec![20.0],
        d_values: vec![0.25, 0.5, 1.0],
        ..cfg
    };
    let report = tail_experiment(&tail_cfg)?;
    println!("tail bounds at T = 20");
    println!("{:>6} {:>10} {:>10}", "d", "empirical", "bound");
    for hz in &report.horizons {
        for t in &hz.tail {
            println!("{:>6} {:>10.4} {:>10.4}", t.d, t.empirical, t.bound);
        }
    }
    println!("pass = {}", report.pass);
    Ok(())
}
