//! Hurst index with its derived normalization constants.
//!
//! For Hurst index H in (0, 1) the constants are
//!
//! ```text
//! c_H^2    = Gamma(2H + 1) sin(pi H) / pi
//! d_H      = 2^(H - 1/2) / (c_H Gamma(3/2 - H) sqrt(pi))
//! lambda_H = d_H^2 / (2 - 2H)
//! beta_H   = 2 - 2^(2H - 1)
//! ```
//!
//! c_H normalizes the Wiener-integral representation of the process, d_H
//! and lambda_H shape the fundamental martingale and its quadratic
//! variation, and beta_H is the sharp increment-variance constant. The
//! Volterra kernels require H > 1/2 (Gamma(H - 1/2) has a pole at 1/2), so
//! kernel-dependent call sites gate on `kernel_valid`.

use std::f64::consts::PI;

use crate::error::{Result, SfouError};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParams {
    h: f64,
    c_h: f64,
    d_h: f64,
    lambda_h: f64,
    beta_h: f64,
}

/// Validate H and compute all derived constants.
pub fn derive_constants(h: f64) -> Result<HurstParams> {
    HurstParams::new(h)
}

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(SfouError::Domain(format!(
                "Hurst index must lie in (0, 1), got {h}"
            )));
        }
        let c_h = (gamma(2.0 * h + 1.0) * (PI * h).sin() / PI).sqrt();
        let d_h = 2f64.powf(h - 0.5) / (c_h * gamma(1.5 - h) * PI.sqrt());
        let lambda_h = d_h * d_h / (2.0 - 2.0 * h);
        let beta_h = 2.0 - 2f64.powf(2.0 * h - 1.0);
        Ok(HurstParams {
            h,
            c_h,
            d_h,
            lambda_h,
            beta_h,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn lambda_h(&self) -> f64 {
        self.lambda_h
    }

    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }

    /// The Volterra kernels and everything built on them exist only for
    /// H > 1/2.
    pub fn kernel_valid(&self) -> bool {
        self.h > 0.5
    }

    pub(crate) fn require_kernel(&self) -> Result<()> {
        if self.kernel_valid() {
            Ok(())
        } else {
            Err(SfouError::Domain(format!(
                "kernel operations require H > 1/2, got H = {}",
                self.h
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn brownian_case_collapses_to_unit_constants() {
        let p = derive_constants(0.5).unwrap();
        assert_relative_eq!(p.c_h(), 0.564_189_583_547_756_3, max_relative = 1e-12);
        assert_relative_eq!(p.d_h(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.lambda_h(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.beta_h(), 1.0, max_relative = 1e-15);
        assert!(!p.kernel_valid());
    }

    #[test]
    fn beta_at_three_quarters() {
        let p = derive_constants(0.75).unwrap();
        assert_relative_eq!(p.beta_h(), 2.0 - 2f64.sqrt(), max_relative = 1e-15);
        assert!(p.kernel_valid());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(derive_constants(1.2).is_err());
        assert!(derive_constants(0.0).is_err());
        assert!(derive_constants(1.0).is_err());
        assert!(derive_constants(-0.3).is_err());
        assert!(derive_constants(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn defining_identities_hold(h in 0.001f64..0.999) {
            let p = derive_constants(h).unwrap();
            let c2 = gamma(2.0 * h + 1.0) * (PI * h).sin() / PI;
            prop_assert!((p.c_h() * p.c_h() - c2).abs() <= 1e-12 * c2.abs());
            let d = 2f64.powf(h - 0.5) / (p.c_h() * gamma(1.5 - h) * PI.sqrt());
            prop_assert!((p.d_h() - d).abs() <= 1e-12 * d.abs());
            let lam = p.d_h() * p.d_h() / (2.0 - 2.0 * h);
            prop_assert!((p.lambda_h() - lam).abs() <= 1e-12 * lam.abs());
            let beta = 2.0 - 2f64.powf(2.0 * h - 1.0);
            prop_assert!((p.beta_h() - beta).abs() <= 1e-12 * beta.abs().max(1e-6));
            prop_assert_eq!(p.kernel_valid(), h > 0.5);
        }
    }
}
