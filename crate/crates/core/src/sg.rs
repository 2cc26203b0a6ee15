//! Online stochastic-gradient estimators.
//!
//! The modified rule uses
//!
//! ```text
//! theta_{k+1} = theta_k - mu_k grad f(phi_k, theta_k) dL/dx(y_{k+1}, f(phi_k, theta_k))
//! mu_k        = mu / (r_k^beta1 log^beta2 r_k + ||grad f(phi_k, theta_k)||^2)
//! r_k         = beta3 + sum_{t <= k} ||grad f(phi_t, theta_t)||^2
//! ```
//!
//! where `r_k` already contains the current step's gradient. The classical
//! rule keeps the same accumulator with `mu_k = mu / r_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss_grad_x, predictor_grad, ModelLossPair};
use crate::numeric::{norm, norm_sq};
use crate::types::{GainState, HyperParams, ParamRole, ParameterVector};

/// Estimate norm above which a run is flagged as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Gain `mu / (r^beta1 log^beta2 r + ||grad f||^2)`.
    Modified,
    /// Gain `mu / r`.
    Classical,
}

impl StepRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepRule::Modified => "modified",
            StepRule::Classical => "classical",
        }
    }
}

impl std::fmt::Display for StepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta: ParameterVector,
    pub gain: GainState,
    pub hyper: HyperParams,
    pub rule: StepRule,
    /// Step size used by the most recent update (`0` before the first step).
    pub last_mu: f64,
    pub last_grad_norm_sq: f64,
    /// `f(phi_k, theta_k)` of the most recent update.
    pub last_prediction: f64,
}

/// Gain of the modified rule for accumulator `gain` and current gradient
/// norm. Requires `gain.r() > 1`.
pub fn mu_schedule(gain: &GainState, grad_norm_sq: f64, hyper: &HyperParams) -> f64 {
    let r = gain.r();
    let log_term = if hyper.beta2 == 0.0 {
        1.0
    } else {
        r.ln().powf(hyper.beta2)
    };
    hyper.mu / (r.powf(hyper.beta1) * log_term + grad_norm_sq)
}

/// Gain of the classical rule, `mu / r`.
pub fn classical_mu(gain: &GainState, hyper: &HyperParams) -> f64 {
    hyper.mu / gain.r()
}

/// Start the modified estimator at `theta0` with `r_0 = beta3`.
pub fn sg_init(theta0: ParameterVector, hyper: HyperParams) -> Result<EstimatorState> {
    hyper.validate()?;
    Ok(EstimatorState::new(theta0, hyper, StepRule::Modified))
}

/// Start the classical estimator at `theta0` with accumulator `r0 > 0`.
///
/// The classical gain never takes a logarithm, so `r0 = 1` is allowed here.
pub fn classical_sg_init(theta0: ParameterVector, mu: f64, r0: f64) -> Result<EstimatorState> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::config("mu", format!("mu = {mu} must lie in (0, 1)")));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::config(
            "classical_r0",
            format!("r0 = {r0} must be positive"),
        ));
    }
    let mut hyper = HyperParams::new(mu, 1.0, 0.0, r0);
    hyper.outside_theorem_regime = r0 <= 1.0;
    Ok(EstimatorState::new(theta0, hyper, StepRule::Classical))
}

impl EstimatorState {
    fn new(theta0: ParameterVector, hyper: HyperParams, rule: StepRule) -> Self {
        let theta = ParameterVector::from_raw(theta0.into_vec(), ParamRole::Estimate);
        Self {
            theta,
            gain: GainState::new(hyper.beta3),
            hyper,
            rule,
            last_mu: 0.0,
            last_grad_norm_sq: 0.0,
            last_prediction: f64::NAN,
        }
    }

    pub fn k(&self) -> u64 {
        self.gain.k()
    }

    pub fn diverged(&self) -> bool {
        norm(self.theta.as_slice()) > DIVERGENCE_NORM
    }

    /// Advance by one observation `(phi_k, y_{k+1})` using this state's rule.
    pub fn step(&self, pair: &ModelLossPair, phi: &[f64], y: f64) -> Result<EstimatorState> {
        self.advance(self.rule, pair, phi, y)
    }

    fn advance(
        &self,
        rule: StepRule,
        pair: &ModelLossPair,
        phi: &[f64],
        y: f64,
    ) -> Result<EstimatorState> {
        let theta = self.theta.as_slice();
        if !y.is_finite() {
            return Err(Error::numeric("observation", phi, theta).at_step(self.k()));
        }
        let model = pair.predictor.as_ref();
        let grad = predictor_grad(model, phi, theta).map_err(|e| e.at_step(self.k()))?;
        let f = model.value(phi, theta);
        if !f.is_finite() {
            return Err(Error::numeric("prediction", phi, theta).at_step(self.k()));
        }
        let lx = loss_grad_x(pair.loss.as_ref(), y, f)?;
        let gn = norm_sq(&grad);
        if !gn.is_finite() {
            return Err(Error::numeric("gradient norm", phi, theta).at_step(self.k()));
        }
        let gain = self.gain.advance(gn);
        let mu = match rule {
            StepRule::Modified => mu_schedule(&gain, gn, &self.hyper),
            StepRule::Classical => classical_mu(&gain, &self.hyper),
        };
        assert!(
            mu * gn <= self.hyper.mu,
            "step-size law violated: mu_k ||grad f||^2 = {} > mu = {}",
            mu * gn,
            self.hyper.mu
        );
        let scale = mu * lx;
        let next: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| t - scale * g)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("parameter update", phi, theta).at_step(self.k()));
        }
        Ok(EstimatorState {
            theta: ParameterVector::from_raw(next, ParamRole::Estimate),
            gain,
            hyper: self.hyper,
            rule: self.rule,
            last_mu: mu,
            last_grad_norm_sq: gn,
            last_prediction: f,
        })
    }
}

/// One update of the modified rule.
pub fn sg_step(
    state: &EstimatorState,
    pair: &ModelLossPair,
    phi: &[f64],
    y: f64,
) -> Result<EstimatorState> {
    state.advance(StepRule::Modified, pair, phi, y)
}

/// One update of the classical rule `mu_k = mu / r_k`.
pub fn classical_sg_step(
    state: &EstimatorState,
    pair: &ModelLossPair,
    phi: &[f64],
    y: f64,
) -> Result<EstimatorState> {
    state.advance(StepRule::Classical, pair, phi, y)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::models::{CrossEntropy, SingleIndexModel, SquaredError};

    fn linear_pair(d: usize) -> ModelLossPair {
        ModelLossPair::new(
            "linear-mse",
            Arc::new(SingleIndexModel::linear(d)),
            Arc::new(SquaredError),
            None,
        )
    }

    fn hyper(beta1: f64, beta2: f64) -> HyperParams {
        HyperParams::new(0.3, beta1, beta2, 2.0)
    }

    #[test]
    fn init_sets_accumulator() {
        let s = sg_init(
            ParameterVector::estimate(vec![0.0; 4]).unwrap(),
            hyper(0.5, 0.51),
        )
        .unwrap();
        assert_eq!(s.gain.r(), 2.0);
        assert_eq!(s.k(), 0);
        assert_eq!(s.theta.as_slice(), &[0.0; 4]);
        let theta0 = ParameterVector::estimate(vec![0.01; 5]).unwrap();
        assert!(sg_init(theta0, hyper(0.5, 2.0 / 3.0)).is_ok());
    }

    #[test]
    fn init_rejects_beta3_one() {
        let theta0 = ParameterVector::estimate(vec![0.0]).unwrap();
        let err = sg_init(theta0, HyperParams::new(0.3, 0.5, 0.51, 1.0)).unwrap_err();
        assert!(err.to_string().contains("beta3"));
    }

    #[test]
    fn mu_schedule_values() {
        let h = hyper(1.0, 0.0);
        assert_eq!(mu_schedule(&GainState::new(2.0), 0.0, &h), 0.15);
        let e2 = std::f64::consts::E.powi(2);
        let v = mu_schedule(&GainState::new(e2), 0.0, &hyper(0.5, 0.51));
        // 0.3 / (e * 2^0.51), hand-evaluated
        assert!((v - 0.077_499_959_406_388_53).abs() < 1e-15, "{v}");
        assert!(mu_schedule(&GainState::new(2.0), 1e300, &h) < 1e-299);
    }

    #[test]
    fn single_step_matches_hand_calculation() {
        let pair = linear_pair(1);
        let s0 = sg_init(
            ParameterVector::estimate(vec![0.0]).unwrap(),
            hyper(0.5, 0.51),
        )
        .unwrap();
        let s1 = sg_step(&s0, &pair, &[1.0], 1.0).unwrap();
        // r_1 = 3, mu_0 = 0.3 / (sqrt(3) ln(3)^0.51 + 1), theta_1 = 2 mu_0
        assert_eq!(s1.gain.r(), 3.0);
        assert!((s1.last_mu - 0.106_490_519_999_743_25).abs() < 1e-15);
        assert!((s1.theta.as_slice()[0] - 0.212_981_039_999_486_5).abs() < 1e-15);
    }

    #[test]
    fn classical_single_step() {
        let pair = linear_pair(1);
        let s0 =
            classical_sg_init(ParameterVector::estimate(vec![0.0]).unwrap(), 0.3, 2.0).unwrap();
        let s1 = classical_sg_step(&s0, &pair, &[1.0], 1.0).unwrap();
        assert_eq!(s1.gain.r(), 3.0);
        assert!((s1.last_mu - 0.1).abs() < 1e-16);
        assert!((s1.theta.as_slice()[0] - 0.2).abs() < 1e-15);
        assert!(s1.last_mu < 0.3 / 2.0);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let pair = linear_pair(2);
        let s0 = sg_init(
            ParameterVector::estimate(vec![0.4, -1.0]).unwrap(),
            hyper(0.5, 0.51),
        )
        .unwrap();
        let s1 = sg_step(&s0, &pair, &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(s1.theta, s0.theta);
        assert_eq!(s1.gain.r(), s0.gain.r());
        let c1 = classical_sg_step(&s0, &pair, &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(c1.theta, s0.theta);
    }

    #[test]
    fn domain_violation_surfaces() {
        // identity predictor feeding a cross-entropy loss leaves (0, 1)
        let pair = ModelLossPair::new(
            "bad",
            Arc::new(SingleIndexModel::linear(1)),
            Arc::new(CrossEntropy),
            None,
        );
        let s0 = sg_init(
            ParameterVector::estimate(vec![2.0]).unwrap(),
            hyper(0.5, 0.51),
        )
        .unwrap();
        assert!(matches!(
            sg_step(&s0, &pair, &[1.0], 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn non_finite_observation_is_numeric_error() {
        let pair = linear_pair(1);
        let s0 = sg_init(
            ParameterVector::estimate(vec![0.0]).unwrap(),
            hyper(0.5, 0.51),
        )
        .unwrap();
        assert!(matches!(
            sg_step(&s0, &pair, &[1.0], f64::NAN),
            Err(Error::Numeric { step: Some(0), .. })
        ));
    }
}
