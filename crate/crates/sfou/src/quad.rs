//! Composite-midpoint quadrature with panel doubling.
//!
//! All kernel integrands in this crate have algebraic endpoint
//! singularities of the form (x - a)^gamma with gamma in (-1, 0). The
//! midpoint rule never touches interval endpoints, and a power-law change
//! of variables absorbs the singular weight before the rule is applied, so
//! panel doubling converges at second order instead of order 1 + gamma.

use crate::error::{Result, SfouError};

/// Identifier for the quadrature rule. Only the composite midpoint rule is
/// provided: it is open (no endpoint evaluations), which is what the
/// singular kernels require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    #[default]
    CompositeMidpoint,
}

/// Controls for the panel-doubling loop.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Number of panels for the first estimate.
    pub panels: usize,
    pub rule: QuadratureRule,
    /// Panel multiplier per refinement step (>= 2).
    pub refinement_factor: usize,
    /// Stop once successive estimates agree to this relative tolerance.
    pub rel_tol: f64,
    /// Give up (with an error carrying the last two estimates) after this
    /// many refinements.
    pub max_refinements: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            panels: 256,
            rule: QuadratureRule::CompositeMidpoint,
            refinement_factor: 2,
            rel_tol: 1e-6,
            max_refinements: 8,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 {
            return Err(SfouError::config("quadrature panels must be positive"));
        }
        if self.refinement_factor < 2 {
            return Err(SfouError::config("refinement_factor must be >= 2"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(SfouError::config("rel_tol must be positive"));
        }
        Ok(())
    }

    /// Variant used for the many short smooth sub-segment integrals of the
    /// kernel-matrix assembly, where starting at the full panel count would
    /// be wasteful.
    pub(crate) fn for_segment(&self) -> QuadratureSpec {
        QuadratureSpec {
            panels: 8,
            max_refinements: self.max_refinements + 6,
            ..*self
        }
    }
}

fn midpoint_sum<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        acc += f(a + (i as f64 + 0.5) * h);
    }
    acc * h
}

/// Integrate a smooth function over [a, b], doubling panels until two
/// successive estimates agree to `rel_tol`. Returns 0 for an empty range.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_with_level(&f, a, b, spec).map(|(v, _)| v)
}

pub(crate) fn integrate_with_level<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, u32)> {
    integrate_with_level_abs(f, a, b, spec, 0.0)
}

/// Doubling loop with an additional absolute tolerance, for integrals that
/// are small contributions to a larger accumulated value.
pub(crate) fn integrate_with_level_abs<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    abs_tol: f64,
) -> Result<(f64, u32)> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(SfouError::domain("quadrature limits must be finite"));
    }
    if b <= a {
        return Ok((0.0, 0));
    }
    let mut panels = spec.panels.max(1);
    let mut prev = midpoint_sum(f, a, b, panels);
    for level in 1..=spec.max_refinements {
        panels = panels.saturating_mul(spec.refinement_factor);
        let cur = midpoint_sum(f, a, b, panels);
        if (cur - prev).abs() <= (spec.rel_tol * cur.abs().max(1e-300)).max(abs_tol) {
            return Ok((cur, level));
        }
        prev = cur;
    }
    let latest = midpoint_sum(f, a, b, panels.saturating_mul(spec.refinement_factor));
    Err(SfouError::QuadratureNonConvergence {
        refinements: spec.max_refinements,
        previous: prev,
        latest,
    })
}

/// Integral of phi(x) * (x - a)^gamma over [a, b] for gamma > -1.
///
/// For gamma in (-1, 0) the substitution u = (x - a)^(1 + gamma) removes
/// the weight exactly; for gamma > 0 the substitution x = a + u^2 tames the
/// non-smooth derivative at the endpoint. `phi` must not include the weight.
pub fn integrate_power_lower<F: Fn(f64) -> f64>(
    phi: F,
    a: f64,
    b: f64,
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_power_lower_with_level(&phi, a, b, gamma, spec).map(|(v, _)| v)
}

pub(crate) fn integrate_power_lower_with_level<F: Fn(f64) -> f64>(
    phi: &F,
    a: f64,
    b: f64,
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, u32)> {
    if b <= a {
        return Ok((0.0, 0));
    }
    if gamma <= -1.0 {
        return Err(SfouError::domain(format!(
            "power weight exponent {gamma} is not integrable"
        )));
    }
    if gamma == 0.0 {
        return integrate_with_level(phi, a, b, spec);
    }
    if gamma < 0.0 {
        let p = 1.0 + gamma;
        let upper = (b - a).powf(p);
        let inv_p = 1.0 / p;
        integrate_with_level(&|u: f64| phi(a + u.powf(inv_p)) * inv_p, 0.0, upper, spec)
    } else {
        let upper = (b - a).sqrt();
        integrate_with_level(
            &|u: f64| 2.0 * phi(a + u * u) * u.powf(2.0 * gamma + 1.0),
            0.0,
            upper,
            spec,
        )
    }
}

/// Integral of phi(x) * (b - x)^gamma over [a, b] for gamma > -1.
pub fn integrate_power_upper<F: Fn(f64) -> f64>(
    phi: F,
    a: f64,
    b: f64,
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    integrate_power_lower(|y: f64| phi(b - y), 0.0, b - a, gamma, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn tight() -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: 1e-10,
            max_refinements: 14,
            ..QuadratureSpec::default()
        }
    }

    #[test]
    fn integrates_polynomials() {
        // Accuracy tracks the requested tolerance.
        let v = integrate(|x| x * x, 0.0, 1.0, &spec()).unwrap();
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-6);
        let v = integrate(|x| x.exp(), 0.0, 1.0, &tight()).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, &spec()).unwrap(), 0.0);
        assert_eq!(integrate(|x| x, 2.0, 1.0, &spec()).unwrap(), 0.0);
        assert_eq!(
            integrate_power_lower(|_| 1.0, 1.0, 1.0, -0.5, &spec()).unwrap(),
            0.0
        );
    }

    #[test]
    fn power_weight_negative_exponent_exact_value() {
        // int_0^1 (x)^(-1/2) dx = 2, with phi = 1.
        let v = integrate_power_lower(|_| 1.0, 0.0, 1.0, -0.5, &tight()).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        // Closed form: int_1^3 x (x-1)^(-0.8) dx
        //            = int_0^2 (1+u) u^(-0.8) du = 2^0.2/0.2 + 2^1.2/1.2.
        let g: f64 = -0.8;
        let expected = 2f64.powf(g + 1.0) / (g + 1.0) + 2f64.powf(g + 2.0) / (g + 2.0);
        let v = integrate_power_lower(|x| x, 1.0, 3.0, g, &tight()).unwrap();
        assert_relative_eq!(v, expected, max_relative = 1e-9);
    }

    #[test]
    fn power_weight_positive_exponent_exact_value() {
        // int_0^1 x^0.3 dx = 1/1.3.
        let v = integrate_power_lower(|_| 1.0, 0.0, 1.0, 0.3, &tight()).unwrap();
        assert_relative_eq!(v, 1.0 / 1.3, max_relative = 1e-9);
    }

    #[test]
    fn power_weight_upper_matches_reflected_lower() {
        let g = -0.4;
        let upper = integrate_power_upper(|x| x.cos(), 0.0, 2.0, g, &spec()).unwrap();
        let lower = integrate_power_lower(|x| (2.0 - x).cos(), 0.0, 2.0, g, &spec()).unwrap();
        assert_relative_eq!(upper, lower, max_relative = 1e-10);
    }

    #[test]
    fn non_integrable_weight_rejected() {
        let err = integrate_power_lower(|_| 1.0, 0.0, 1.0, -1.0, &spec()).unwrap_err();
        assert!(matches!(err, SfouError::Domain(_)));
    }

    #[test]
    fn nonconvergent_integrand_reports_last_two_estimates() {
        // A rapidly oscillating integrand with a tiny budget cannot settle.
        let tight = QuadratureSpec {
            panels: 1,
            rel_tol: 1e-14,
            max_refinements: 2,
            ..spec()
        };
        let err = integrate(|x: f64| (1000.0 * x).sin() * x.powf(-0.3), 1e-6, 1.0, &tight)
            .unwrap_err();
        match err {
            SfouError::QuadratureNonConvergence {
                refinements,
                previous,
                latest,
            } => {
                assert_eq!(refinements, 2);
                assert!(previous.is_finite() && latest.is_finite());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn doubling_converges_at_second_order_on_smooth_integrands() {
        // Error roughly quarters when panels double.
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let exact = (1.0 - (3.0f64).cos()) / 3.0 + 1.0 / 3.0;
        let e16 = (midpoint_sum(&f, 0.0, 1.0, 16) - exact).abs();
        let e32 = (midpoint_sum(&f, 0.0, 1.0, 32) - exact).abs();
        let e64 = (midpoint_sum(&f, 0.0, 1.0, 64) - exact).abs();
        assert!(e32 < e16 / 2.0);
        assert!(e64 < e32 / 2.0);
    }
}
