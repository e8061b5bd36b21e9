//! Closed-form covariances of sub-fractional and fractional Brownian motion.

use crate::error::{Result, SfouError};
use crate::hurst::HurstParams;

/// Covariance of sub-fractional Brownian motion,
/// C_H(s, t) = t^2H + s^2H - ((s + t)^2H + |s - t|^2H) / 2.
pub fn cov_subfbm(s: f64, t: f64, p: &HurstParams) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(SfouError::domain(format!(
            "sub-fBm covariance needs non-negative times, got ({s}, {t})"
        )));
    }
    let two_h = 2.0 * p.h();
    Ok(s.powf(two_h) + t.powf(two_h)
        - 0.5 * ((s + t).powf(two_h) + (s - t).abs().powf(two_h)))
}

/// Covariance of fractional Brownian motion,
/// R_H(s, t) = (|s|^2H + |t|^2H - |s - t|^2H) / 2.
///
/// Accepts negative arguments (two-sided fBm), which the folding simulator
/// relies on.
pub fn cov_fbm(s: f64, t: f64, p: &HurstParams) -> f64 {
    let two_h = 2.0 * p.h();
    0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (s - t).abs().powf(two_h))
}

/// Variance of the increment zeta(t) - zeta(s) for 0 <= s <= t. For
/// H > 1/2 it satisfies beta_H (t-s)^2H <= . <= (t-s)^2H, with the
/// inequality reversed for H < 1/2.
pub fn increment_variance(s: f64, t: f64, p: &HurstParams) -> Result<f64> {
    if s < 0.0 || t < s {
        return Err(SfouError::domain(format!(
            "increment variance needs 0 <= s <= t, got ({s}, {t})"
        )));
    }
    let css = cov_subfbm(s, s, p)?;
    let ctt = cov_subfbm(t, t, p)?;
    let cst = cov_subfbm(s, t, p)?;
    Ok(ctt + css - 2.0 * cst)
}
