//! The predictor and loss contracts consumed by the estimator, the controller
//! and the metrics.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A parametric predictor `f(phi, theta)` with its analytic parameter gradient.
pub trait PredictorModel: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Parameter (and regressor) dimension.
    fn dim(&self) -> usize;

    /// Unchecked evaluation; callers go through [`predictor_eval`].
    fn value(&self, phi: &[f64], theta: &[f64]) -> f64;

    /// Unchecked gradient with respect to `theta`.
    fn gradient(&self, phi: &[f64], theta: &[f64]) -> Vec<f64>;

    /// Sensitivity of the prediction to regressor entry `index`, used by the
    /// controller to detect a vanishing input gain. Single-index models
    /// override this with the index coefficient so that saturation of the
    /// link does not read as a singular gain.
    fn input_gain(&self, phi: &[f64], theta: &[f64], index: usize) -> f64 {
        let h = 1e-6 * (1.0 + phi[index].abs());
        let mut hi = phi.to_vec();
        let mut lo = phi.to_vec();
        hi[index] += h;
        lo[index] -= h;
        (self.value(&hi, theta) - self.value(&lo, theta)) / (2.0 * h)
    }

    /// Constants `(K1, K2)` of the growth bound `||grad f|| <= K1 + K2 ||phi||`,
    /// when the model has one.
    fn growth_bound(&self) -> Option<(f64, f64)> {
        None
    }
}

/// A loss `L(y, x)` between a target `y` and a prediction `x`.
pub trait LossFunction: Debug + Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, y: f64, x: f64) -> f64;

    /// `dL(y, x) / dx`.
    fn grad_x(&self, y: f64, x: f64) -> f64;

    /// Whether `x` is an admissible prediction.
    fn in_domain(&self, _x: f64) -> bool {
        true
    }

    /// The first loss argument induced by the optimal prediction `f_star`.
    /// Identity for distance-like losses; classification losses map the
    /// optimal score to a label.
    fn reference_target(&self, f_star: f64) -> f64 {
        f_star
    }

    /// Excess loss `L(t*, x) - L(t*, t*)` with `t* = reference_target(f_star)`.
    /// This is the per-step regret term; it vanishes at `x = t*`.
    fn excess(&self, f_star: f64, x: f64) -> f64 {
        let t = self.reference_target(f_star);
        let floor = if self.in_domain(t) {
            self.value(t, t)
        } else {
            0.0
        };
        self.value(t, x) - floor
    }
}

/// Constants of the weak-convexity condition
/// `grad J(theta)^T (theta - theta*) >= delta J(theta)` and
/// `(dL/dx)^2 <= c1 J(theta) + c2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Assumption2Constants {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
}

/// A predictor paired with the loss it is trained under.
#[derive(Debug, Clone)]
pub struct ModelLossPair {
    pub name: String,
    pub predictor: Arc<dyn PredictorModel>,
    pub loss: Arc<dyn LossFunction>,
    pub constants: Option<Assumption2Constants>,
}

impl ModelLossPair {
    pub fn new(
        name: impl Into<String>,
        predictor: Arc<dyn PredictorModel>,
        loss: Arc<dyn LossFunction>,
        constants: Option<Assumption2Constants>,
    ) -> Self {
        Self {
            name: name.into(),
            predictor,
            loss,
            constants,
        }
    }

    pub fn dim(&self) -> usize {
        self.predictor.dim()
    }
}

fn check_dims(model: &dyn PredictorModel, phi: &[f64], theta: &[f64]) -> Result<()> {
    let d = model.dim();
    if phi.len() != d {
        return Err(Error::Dimension {
            context: "regressor",
            expected: d,
            got: phi.len(),
        });
    }
    if theta.len() != d {
        return Err(Error::Dimension {
            context: "parameter",
            expected: d,
            got: theta.len(),
        });
    }
    Ok(())
}

pub fn predictor_eval(model: &dyn PredictorModel, phi: &[f64], theta: &[f64]) -> Result<f64> {
    check_dims(model, phi, theta)?;
    let v = model.value(phi, theta);
    if !v.is_finite() {
        return Err(Error::numeric("prediction", phi, theta));
    }
    Ok(v)
}

pub fn predictor_grad(model: &dyn PredictorModel, phi: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    check_dims(model, phi, theta)?;
    let g = model.gradient(phi, theta);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("predictor gradient", phi, theta));
    }
    Ok(g)
}

fn check_loss_args(loss: &dyn LossFunction, y: f64, x: f64) -> Result<()> {
    if !y.is_finite() || !x.is_finite() {
        return Err(Error::Domain(format!(
            "{}: arguments must be finite (y = {y}, x = {x})",
            loss.name()
        )));
    }
    if !loss.in_domain(x) {
        return Err(Error::Domain(format!(
            "{}: prediction x = {x} is outside the loss domain",
            loss.name()
        )));
    }
    Ok(())
}

pub fn loss_eval(loss: &dyn LossFunction, y: f64, x: f64) -> Result<f64> {
    check_loss_args(loss, y, x)?;
    Ok(loss.value(y, x))
}

pub fn loss_grad_x(loss: &dyn LossFunction, y: f64, x: f64) -> Result<f64> {
    check_loss_args(loss, y, x)?;
    Ok(loss.grad_x(y, x))
}
