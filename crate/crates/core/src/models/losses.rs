//! Loss functions `L(y, x)` of the catalog.

use crate::model::LossFunction;

/// `(y - x)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

impl LossFunction for SquaredError {
    fn name(&self) -> &str {
        "mse"
    }

    fn value(&self, y: f64, x: f64) -> f64 {
        (y - x) * (y - x)
    }

    fn grad_x(&self, y: f64, x: f64) -> f64 {
        2.0 * (x - y)
    }
}

/// `max{0, 1 - y x}^2` for a label `y in {-1, +1}`.
///
/// The loss is C^1, so at the kink `y x = 1` the derivative is exactly zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredHinge;

impl LossFunction for SquaredHinge {
    fn name(&self) -> &str {
        "squared-hinge"
    }

    fn value(&self, y: f64, x: f64) -> f64 {
        let m = (1.0 - y * x).max(0.0);
        m * m
    }

    fn grad_x(&self, y: f64, x: f64) -> f64 {
        let m = (1.0 - y * x).max(0.0);
        -2.0 * m * y
    }

    /// Labels are the sign of the optimal score.
    fn reference_target(&self, f_star: f64) -> f64 {
        if f_star >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Binary cross-entropy `-y log x - (1 - y) log(1 - x)` on predictions
/// `x in (0, 1)`.
///
/// The target may be a noisy observation outside `[0, 1]`; only the
/// prediction is domain-checked.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossEntropy;

impl LossFunction for CrossEntropy {
    fn name(&self) -> &str {
        "cross-entropy"
    }

    fn value(&self, y: f64, x: f64) -> f64 {
        -y * x.ln() - (1.0 - y) * (-x).ln_1p()
    }

    fn grad_x(&self, y: f64, x: f64) -> f64 {
        (x - y) / (x * (1.0 - x))
    }

    fn in_domain(&self, x: f64) -> bool {
        x > 0.0 && x < 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{loss_eval, loss_grad_x};

    #[test]
    fn squared_error_values() {
        assert_eq!(loss_eval(&SquaredError, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(loss_eval(&SquaredError, 3.0, 1.0).unwrap(), 4.0);
        assert_eq!(loss_grad_x(&SquaredError, 3.0, 1.0).unwrap(), -4.0);
        assert_eq!(loss_grad_x(&SquaredError, 1.5, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn hinge_flat_region_and_kink() {
        // margin 1 - y x = -0.5
        assert_eq!(SquaredHinge.grad_x(1.0, 1.5), 0.0);
        assert_eq!(SquaredHinge.value(1.0, 1.5), 0.0);
        assert_eq!(SquaredHinge.grad_x(-1.0, -1.0), 0.0);
        assert_eq!(SquaredHinge.value(1.0, -1.0), 4.0);
        assert_eq!(SquaredHinge.reference_target(-0.2), -1.0);
    }

    #[test]
    fn cross_entropy_self_entropy() {
        let v = loss_eval(&CrossEntropy, 0.5, 0.5).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(CrossEntropy.excess(0.5, 0.5), 0.0);
        assert!(CrossEntropy.excess(0.3, 0.6) > 0.0);
    }

    #[test]
    fn cross_entropy_rejects_out_of_domain() {
        assert!(loss_eval(&CrossEntropy, 0.5, 1.0).is_err());
        assert!(loss_grad_x(&CrossEntropy, 0.5, -0.1).is_err());
        assert!(loss_eval(&SquaredError, f64::NAN, 0.0).is_err());
    }
}
