//! Conditional mean of a censored (saturated) Gaussian observation.
//!
//! With `g(z) = clamp(z, L, U)` and `e ~ N(0, s^2)`, the optimal predictor is
//! `G(x) = E[g(x + e)]`. For `s = 1`:
//!
//! ```text
//! G(x)  = U + (L - x) F(L - x) - (U - x) F(U - x) + f(L - x) - f(U - x)
//! G'(x) = F(U - x) - F(L - x)
//! ```
//!
//! A general `s` rescales `(L, U, x)` by `1/s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationSpec {
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "unit")]
    pub noise_std: f64,
}

fn unit() -> f64 {
    1.0
}

impl SaturationSpec {
    pub fn new(lower: f64, upper: f64, noise_std: f64) -> Result<Self> {
        let spec = Self {
            lower,
            upper,
            noise_std,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn standard(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::config(
                "saturation",
                "censoring bounds must be finite",
            ));
        }
        if self.lower >= self.upper {
            return Err(Error::config(
                "saturation",
                format!("need lower < upper, got [{}, {}]", self.lower, self.upper),
            ));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("saturation.noise_std", "must be positive"));
        }
        Ok(())
    }

    /// The censoring map `g`.
    pub fn censor(&self, z: f64) -> f64 {
        z.clamp(self.lower, self.upper)
    }

    fn scaled(&self, x: f64) -> (f64, f64, f64) {
        let s = self.noise_std;
        (self.lower / s, self.upper / s, x / s)
    }
}

fn unit_mean(l: f64, u: f64, x: f64) -> f64 {
    // The two algebraically equal forms cancel in opposite tails; pick the one
    // whose large terms are damped by a small CDF value.
    if x >= 0.5 * (l + u) {
        u + (l - x) * normal_cdf(l - x) - (u - x) * normal_cdf(u - x) + normal_pdf(l - x)
            - normal_pdf(u - x)
    } else {
        l + (x - l) * normal_cdf(x - l) - (x - u) * normal_cdf(x - u) + normal_pdf(x - l)
            - normal_pdf(x - u)
    }
}

fn unit_deriv(l: f64, u: f64, x: f64) -> f64 {
    if x >= 0.5 * (l + u) {
        normal_cdf(u - x) - normal_cdf(l - x)
    } else {
        normal_cdf(x - l) - normal_cdf(x - u)
    }
}

/// `G(x) = E[clamp(x + e, L, U)]`.
pub fn saturation_mean(spec: &SaturationSpec, x: f64) -> f64 {
    let (l, u, z) = spec.scaled(x);
    spec.noise_std * unit_mean(l, u, z)
}

/// `G'(x) = F((U - x)/s) - F((L - x)/s)`, strictly positive.
pub fn saturation_mean_deriv(spec: &SaturationSpec, x: f64) -> f64 {
    let (l, u, z) = spec.scaled(x);
    unit_deriv(l, u, z)
}

/// `G''(x)`.
pub fn saturation_mean_second_deriv(spec: &SaturationSpec, x: f64) -> f64 {
    let (l, u, z) = spec.scaled(x);
    (normal_pdf(l - z) - normal_pdf(u - z)) / spec.noise_std
}

/// Number of grid points scanned by [`saturation_assumption2_delta`].
pub const DELTA_GRID_POINTS: usize = 10_000;

/// `inf_{|x| <= m2} G'(x)`, the weak-convexity constant of the censored
/// mean-square pair on the operating set `|phi^T theta| <= m2`.
pub fn saturation_assumption2_delta(spec: &SaturationSpec, m2: f64) -> Result<f64> {
    saturation_delta_on(spec, 0.0, m2)
}

/// `inf_{|x - center| <= m2} G'(x)`, for operating sets that sit inside a
/// window away from the origin.
///
/// Scans a dense grid with both endpoints included; no assumption is made
/// about where the infimum sits, so asymmetric windows work too.
pub fn saturation_delta_on(spec: &SaturationSpec, center: f64, m2: f64) -> Result<f64> {
    if !(m2 > 0.0 && m2.is_finite()) {
        return Err(Error::config(
            "m2",
            format!("operating bound must be positive, got {m2}"),
        ));
    }
    if !center.is_finite() {
        return Err(Error::config("center", "must be finite"));
    }
    let n = DELTA_GRID_POINTS;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let x = center - m2 + 2.0 * m2 * (i as f64) / ((n - 1) as f64);
        best = best.min(saturation_mean_deriv(spec, x));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: f64, u: f64) -> SaturationSpec {
        SaturationSpec::standard(l, u).unwrap()
    }

    #[test]
    fn symmetric_window_is_odd() {
        let s = spec(-1.0, 1.0);
        assert!(saturation_mean(&s, 0.0).abs() < 1e-16);
        for &x in &[0.1, 0.7, 2.0, 4.5] {
            assert!((saturation_mean(&s, x) + saturation_mean(&s, -x)).abs() < 1e-15);
        }
    }

    #[test]
    fn censoring_limits() {
        let s = spec(-1.0, 2.0);
        assert!((saturation_mean(&s, 40.0) - 2.0).abs() < 1e-12);
        assert!((saturation_mean(&s, -40.0) + 1.0).abs() < 1e-12);
        assert!(saturation_mean_deriv(&s, 40.0) >= 0.0);
        assert!(saturation_mean_deriv(&s, 40.0) < 1e-100);
    }

    #[test]
    fn deriv_at_zero() {
        let s = spec(-1.0, 1.0);
        let want = 2.0 * normal_cdf(1.0) - 1.0;
        assert!((saturation_mean_deriv(&s, 0.0) - want).abs() < 1e-15);
        // 0.682689492137086, the one-sigma probability
        assert!((want - 0.682_689_492_137_085_9).abs() < 1e-15);
    }

    #[test]
    fn delta_symmetric_matches_endpoint() {
        let s = spec(-1.0, 1.0);
        let d = saturation_assumption2_delta(&s, 2.0).unwrap();
        let endpoint = normal_cdf(3.0) - normal_cdf(1.0);
        assert!((d - endpoint).abs() < 1e-10, "{d} vs {endpoint}");
        assert!((endpoint - 0.157_305_355_899_826_97).abs() < 1e-12);
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn delta_degenerate_interval() {
        let s = spec(-1.0, 1.0);
        let d = saturation_assumption2_delta(&s, 1e-9).unwrap();
        assert!((d - (2.0 * normal_cdf(1.0) - 1.0)).abs() < 1e-9);
        assert!(saturation_assumption2_delta(&s, 0.0).is_err());
    }

    #[test]
    fn delta_centered_in_window() {
        let s = SaturationSpec::new(1.0, 60.0, 5.0).unwrap();
        let d = saturation_delta_on(&s, 30.5, 25.0).unwrap();
        // G'(5.5) = Phi(10.9) - Phi(-0.9), the two ends tie
        let want = normal_cdf(10.9) - normal_cdf(-0.9);
        assert!((d - want).abs() < 1e-10, "{d} vs {want}");
        assert!(saturation_assumption2_delta(&s, 25.0).unwrap() < 1e-3);
    }

    #[test]
    fn noise_scale_rescales() {
        let s5 = SaturationSpec::new(1.0, 60.0, 5.0).unwrap();
        let s1 = spec(0.2, 12.0);
        let x = 13.0;
        assert!((saturation_mean(&s5, x) - 5.0 * saturation_mean(&s1, x / 5.0)).abs() < 1e-12);
        assert!(
            (saturation_mean_deriv(&s5, x) - saturation_mean_deriv(&s1, x / 5.0)).abs() < 1e-15
        );
    }

    #[test]
    fn rejects_bad_window() {
        assert!(SaturationSpec::standard(1.0, 1.0).is_err());
        assert!(SaturationSpec::new(0.0, 1.0, 0.0).is_err());
    }
}
