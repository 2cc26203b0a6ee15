//! Numerical check of the weak-convexity condition on sampled operating points.

use serde::Serialize;

use crate::model::{Assumption2Constants, ModelLossPair};
use crate::numeric::{dot, norm};

/// One operating point `(phi, theta, theta*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_star: Vec<f64>,
}

/// Slack below which an inequality counts as violated, relative to
/// `1 + |terms|` so that rounding on large losses is not read as a violation.
pub const SLACK_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Assumption2Report {
    pub pair: String,
    pub constants: Assumption2Constants,
    pub samples: usize,
    /// Draws whose prediction fell outside the loss domain.
    pub rejected: usize,
    /// `min grad J^T (theta - theta*) - delta J` over the draws.
    pub min_slack_descent: f64,
    /// `max |grad J^T (theta - theta*) - delta J|`.
    pub max_abs_slack_descent: f64,
    /// `min c1 J + c2 - (dL/dx)^2` over the draws.
    pub min_slack_gradient: f64,
    /// Sample that attained `min_slack_descent`.
    pub worst_descent_index: Option<usize>,
    pub pass: bool,
}

/// Evaluate both inequalities at `n_samples` draws.
///
/// `J(theta)` is the excess loss `L(t*, f(phi, theta)) - L(t*, t*)`, which is
/// the plain loss for distance-like losses and the KL gap for cross-entropy.
pub fn verify_assumption2(
    pair: &ModelLossPair,
    constants: Assumption2Constants,
    sampler: &mut dyn FnMut() -> Draw,
    n_samples: usize,
) -> Assumption2Report {
    let model = pair.predictor.as_ref();
    let loss = pair.loss.as_ref();
    let mut min_descent = f64::INFINITY;
    let mut max_abs_descent: f64 = 0.0;
    let mut min_gradient = f64::INFINITY;
    let mut violated = false;
    let mut worst = None;
    let mut rejected = 0;

    for i in 0..n_samples {
        let draw = sampler();
        let f = model.value(&draw.phi, &draw.theta);
        let f_star = model.value(&draw.phi, &draw.theta_star);
        if !loss.in_domain(f) || !f.is_finite() {
            rejected += 1;
            continue;
        }
        let target = loss.reference_target(f_star);
        let j = loss.excess(f_star, f);
        let lx = loss.grad_x(target, f);
        let grad_f = model.gradient(&draw.phi, &draw.theta);
        let diff: Vec<f64> = draw
            .theta
            .iter()
            .zip(&draw.theta_star)
            .map(|(a, b)| a - b)
            .collect();
        let inner = lx * dot(&grad_f, &diff);
        let descent = inner - constants.delta * j;
        let gradient = constants.c1 * j + constants.c2 - lx * lx;
        let descent_scale = 1.0 + inner.abs() + (constants.delta * j).abs();
        let gradient_scale = 1.0 + constants.c1 * j.abs() + constants.c2 + lx * lx;
        violated |= descent < SLACK_TOLERANCE * descent_scale
            || gradient < SLACK_TOLERANCE * gradient_scale;
        if descent < min_descent {
            min_descent = descent;
            worst = Some(i);
        }
        max_abs_descent = max_abs_descent.max(descent.abs());
        min_gradient = min_gradient.min(gradient);
    }

    let pass = !violated && rejected < n_samples;
    Assumption2Report {
        pair: pair.name.clone(),
        constants,
        samples: n_samples,
        rejected,
        min_slack_descent: min_descent,
        max_abs_slack_descent: max_abs_descent,
        min_slack_gradient: min_gradient,
        worst_descent_index: worst,
        pass,
    }
}

/// Largest `||grad f|| - (K1 + K2 ||phi||)` over the draws; non-positive when
/// the growth bound holds.
pub fn growth_bound_excess(
    pair: &ModelLossPair,
    bound: (f64, f64),
    sampler: &mut dyn FnMut() -> Draw,
    n_samples: usize,
) -> f64 {
    let model = pair.predictor.as_ref();
    (0..n_samples)
        .map(|_| {
            let d = sampler();
            let g = model.gradient(&d.phi, &d.theta);
            norm(&g) - (bound.0 + bound.1 * norm(&d.phi))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
