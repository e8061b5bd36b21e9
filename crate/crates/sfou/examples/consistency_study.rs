//! Monte Carlo consistency check: the estimation error falls and the
//! observed information rises as the horizon grows.
//!
//! Run with: cargo run --release --example consistency_study

use sfou::montecarlo::{consistency_experiment, McConfig};

fn main() -> sfou::Result<()> {
    let cfg = McConfig {
        horizons: vec![5.0, 10.0, 20.0],
        dt: 0.04,
        reps: 100,
        ..McConfig::default()
    };
    let report = consistency_experiment(&cfg)?;
    println!(
        "consistency at H = {}, theta0 = {}, {} replicates (seed {})",
        cfg.h, cfg.theta0, cfg.reps, cfg.seed
    );
    println!("{:>6} {:>14} {:>16}", "T", "median |err|", "median obs info");
    for hz in &report.horizons {
        println!(
            "{:>6} {:>14.4} {:>16.3}",
            hz.t_max,
            hz.median_abs_error.unwrap(),
            hz.median_obs_info.unwrap()
        );
    }
    println!("pass = {} (runtime {:.1}s)", report.pass, report.runtime_seconds);
    Ok(())
}
