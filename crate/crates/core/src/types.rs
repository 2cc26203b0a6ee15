//! Domain value types: parameter vectors, regressors, the gain accumulator and
//! the estimator hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Estimate,
    Truth,
}

/// A parameter vector, either an estimate or the true parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    role: ParamRole,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, role: ParamRole) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config(
                "theta",
                "parameter vector must have length >= 1",
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                format!("theta[{i}]"),
                "parameter entries must be finite",
            ));
        }
        Ok(Self { values, role })
    }

    pub fn estimate(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ParamRole::Estimate)
    }

    pub fn truth(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ParamRole::Truth)
    }

    /// `d` copies of `value`.
    pub fn filled(d: usize, value: f64, role: ParamRole) -> Result<Self> {
        Self::new(vec![value; d], role)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn role(&self) -> ParamRole {
        self.role
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Distance `||self - other||`, i.e. the estimation error when `other` is
    /// the truth.
    pub fn distance_to(&self, other: &ParameterVector) -> f64 {
        crate::numeric::distance(&self.values, &other.values)
    }

    pub(crate) fn from_raw(values: Vec<f64>, role: ParamRole) -> Self {
        Self { values, role }
    }
}

/// A regression vector `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor(Vec<f64>);

impl Regressor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("regressor entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Regressor> for Vec<f64> {
    fn from(r: Regressor) -> Self {
        r.0
    }
}

/// Accumulator `r_k = beta3 + sum_t ||grad f(phi_t, theta_t)||^2`.
///
/// The running sum is compensated so long traces replay to the last bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainState {
    acc: CompensatedSum,
    k: u64,
}

impl GainState {
    pub fn new(r0: f64) -> Self {
        Self {
            acc: CompensatedSum::new(r0),
            k: 0,
        }
    }

    pub fn r(&self) -> f64 {
        self.acc.value()
    }

    /// Number of gradient increments absorbed so far.
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn advance(&self, grad_norm_sq: f64) -> Self {
        let mut acc = self.acc;
        acc.add(grad_norm_sq);
        Self { acc, k: self.k + 1 }
    }
}

/// Step-size hyperparameters of the adaptive gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Moment exponent of the noise assumption. Carried for reporting only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_moment: Option<f64>,
    /// Accept `(beta1, beta2)` pairs outside the convergence regime.
    #[serde(default)]
    pub outside_theorem_regime: bool,
}

impl HyperParams {
    pub fn new(mu: f64, beta1: f64, beta2: f64, beta3: f64) -> Self {
        Self {
            mu,
            beta1,
            beta2,
            beta3,
            alpha_moment: None,
            outside_theorem_regime: false,
        }
    }

    /// Whether `(beta1, beta2)` lies in the regime where the estimate is
    /// guaranteed to stay bounded: `beta1 = 1/2, beta2 > 1/2` or
    /// `beta1 in (1/2, 1], beta2 = 0`.
    pub fn in_theorem_regime(&self) -> bool {
        (self.beta1 == 0.5 && self.beta2 > 0.5)
            || (self.beta1 > 0.5 && self.beta1 <= 1.0 && self.beta2 == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("mu", self.mu),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::config(
                "mu",
                format!("mu = {} must lie in (0, 1)", self.mu),
            ));
        }
        if !(0.5..=1.0).contains(&self.beta1) {
            return Err(Error::config(
                "beta1",
                format!("beta1 = {} must lie in [1/2, 1]", self.beta1),
            ));
        }
        if self.beta2 < 0.0 {
            return Err(Error::config(
                "beta2",
                format!("beta2 = {} must be >= 0", self.beta2),
            ));
        }
        if self.beta3 <= 1.0 {
            return Err(Error::config(
                "beta3",
                format!("beta3 = {} must be > 1 so that log r_k > 0", self.beta3),
            ));
        }
        if let Some(a) = self.alpha_moment {
            if !(a > 2.0) {
                return Err(Error::config(
                    "alpha_moment",
                    format!("alpha = {a} must be > 2"),
                ));
            }
        }
        if !self.in_theorem_regime() && !self.outside_theorem_regime {
            return Err(Error::config(
                "beta1/beta2",
                format!(
                    "(beta1, beta2) = ({}, {}) requires beta1 = 1/2 with beta2 > 1/2, or \
                     beta1 in (1/2, 1] with beta2 = 0; set outside_theorem_regime = true to override",
                    self.beta1, self.beta2
                ),
            ));
        }
        Ok(())
    }

    /// Enforce the step-size cap `mu < min{1, 2 delta / c1}`.
    pub fn check_step_cap(&self, delta: f64, c1: f64) -> Result<()> {
        let cap = 1.0f64.min(2.0 * delta / c1);
        if self.mu >= cap {
            return Err(Error::config(
                "mu",
                format!(
                    "mu = {} violates mu < min{{1, 2*delta/c1}} = {cap} (delta = {delta}, c1 = {c1})",
                    self.mu
                ),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_parameters() {
        assert!(ParameterVector::estimate(vec![1.0, f64::NAN]).is_err());
        assert!(ParameterVector::estimate(vec![]).is_err());
        assert!(Regressor::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn regime_boundaries() {
        assert!(HyperParams::new(0.3, 0.5, 2.0 / 3.0, 2.0)
            .validate()
            .is_ok());
        assert!(HyperParams::new(0.3, 0.5, 0.51, 2.0).validate().is_ok());
        assert!(HyperParams::new(0.3, 0.7, 0.0, 2.0).validate().is_ok());
        assert!(HyperParams::new(0.3, 1.0, 0.0, 2.0).validate().is_ok());
        // beta1 = 1/2 needs beta2 > 1/2
        assert!(HyperParams::new(0.3, 0.5, 0.5, 2.0).validate().is_err());
        assert!(HyperParams::new(0.3, 0.7, 0.2, 2.0).validate().is_err());
        let mut h = HyperParams::new(0.3, 0.5, 0.0, 2.0);
        h.outside_theorem_regime = true;
        assert!(h.validate().is_ok());
    }

    #[test]
    fn beta3_must_exceed_one() {
        let err = HyperParams::new(0.3, 0.5, 0.6, 1.0).validate().unwrap_err();
        assert!(err.to_string().contains("beta3"), "{err}");
    }

    #[test]
    fn step_cap() {
        let h = HyperParams::new(0.3, 0.5, 0.6, 2.0);
        assert!(h.check_step_cap(2.0, 4.0).is_ok());
        assert!(h.check_step_cap(0.1, 4.0).is_err());
    }

    #[test]
    fn gain_accumulates() {
        let g = GainState::new(2.0).advance(1.0).advance(0.0);
        assert_eq!(g.r(), 3.0);
        assert_eq!(g.k(), 2);
    }
}
