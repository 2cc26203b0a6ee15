//! Scalar diagnostics computed from traces: regret, tracking error, gradient
//! noise, the relative-error criterion and the step-size summability check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LossFunction, ModelLossPair};
use crate::numeric::CompensatedSum;
use crate::sg::mu_schedule;
use crate::trace::StepRecord;
use crate::types::{GainState, HyperParams};

/// A named per-step series with its compensated running sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let mut acc = CompensatedSum::default();
        let cumulative = values
            .iter()
            .map(|v| {
                acc.add(*v);
                acc.value()
            })
            .collect();
        Self {
            name: name.into(),
            values,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// `cumulative[k] / (k + 1)`.
    pub fn running_mean(&self) -> Vec<f64> {
        self.cumulative
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k + 1) as f64)
            .collect()
    }
}

fn truth_column(trace: &[StepRecord]) -> Result<Vec<f64>> {
    trace
        .iter()
        .map(|r| {
            r.f_true.ok_or_else(|| {
                Error::config(
                    "trace.f_true",
                    format!("row {} has no optimal prediction", r.k),
                )
            })
        })
        .collect()
}

/// Per-step regret `L(t*, f_est) - L(t*, t*)`; `cumulative` holds the regret sum.
pub fn regret_sum(trace: &[StepRecord], loss: &dyn LossFunction) -> Result<MetricSeries> {
    let truth = truth_column(trace)?;
    let values = trace
        .iter()
        .zip(truth)
        .map(|(r, f)| loss.excess(f, r.f_est))
        .collect();
    Ok(MetricSeries::new("regret", values))
}

/// Average regret `(1/(k+1)) sum_{i<=k} regret_i` per step.
pub fn average_regret(trace: &[StepRecord], loss: &dyn LossFunction) -> Result<MetricSeries> {
    let sum = regret_sum(trace, loss)?;
    Ok(MetricSeries::new("regret_avg", sum.running_mean()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingError {
    /// Running mean of `(f(phi_k, theta*) - y*_{k+1})^2`.
    pub conditional: MetricSeries,
    /// Running mean of `(y_{k+1} - y*_{k+1})^2`.
    pub observed: MetricSeries,
}

pub fn tracking_error(trace: &[StepRecord]) -> Result<TrackingError> {
    let truth = truth_column(trace)?;
    let mut cond = Vec::with_capacity(trace.len());
    let mut obs = Vec::with_capacity(trace.len());
    for (r, f) in trace.iter().zip(truth) {
        let ys = r.y_star.ok_or_else(|| {
            Error::config("trace.y_star", format!("row {} has no reference", r.k))
        })?;
        cond.push((f - ys) * (f - ys));
        obs.push((r.y - ys) * (r.y - ys));
    }
    let c = MetricSeries::new("tracking_conditional", cond);
    let o = MetricSeries::new("tracking_observed", obs);
    Ok(TrackingError {
        conditional: MetricSeries::new("tracking_conditional_avg", c.running_mean()),
        observed: MetricSeries::new("tracking_observed_avg", o.running_mean()),
    })
}

/// Reference rate curve `log^beta2(n) / n^(1 - beta1) + n^eps / n` for
/// `n = 1..=n_max`. Scale-free: compare slopes, or rescale with
/// [`normalize_curve`].
pub fn bound_curve(hyper: &HyperParams, alpha_eps: f64, n_max: usize) -> Result<MetricSeries> {
    if !(alpha_eps > 0.0 && alpha_eps < 1.0) {
        return Err(Error::config(
            "alpha_eps",
            format!("must lie in (0, 1), got {alpha_eps}"),
        ));
    }
    let values = (1..=n_max)
        .map(|n| {
            let n = n as f64;
            let log_term = if hyper.beta2 == 0.0 {
                1.0
            } else {
                n.ln().powf(hyper.beta2)
            };
            log_term / n.powf(1.0 - hyper.beta1) + n.powf(alpha_eps) / n
        })
        .collect();
    Ok(MetricSeries::new("bound_curve", values))
}

/// Rescale `curve` so that it equals `anchor` at 1-based step `n0`.
pub fn normalize_curve(curve: &MetricSeries, anchor: f64, n0: usize) -> MetricSeries {
    let s = anchor / curve.values[n0 - 1];
    MetricSeries::new(
        format!("{}_normalized", curve.name),
        curve.values.iter().map(|v| v * s).collect(),
    )
}

/// Log-log slope of a 1-based series between steps `n1` and `n2`.
pub fn log_log_slope(values: &[f64], n1: usize, n2: usize) -> f64 {
    (values[n2 - 1].ln() - values[n1 - 1].ln()) / ((n2 as f64).ln() - (n1 as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientNoise {
    pub series: MetricSeries,
    pub mean: f64,
    pub second_moment: f64,
}

/// Realized gradient noise `w_{k+1} = dL/dx(y_{k+1}, f_est) - dL/dx(t*, f_est)`.
pub fn gradient_noise(trace: &[StepRecord], pair: &ModelLossPair) -> Result<GradientNoise> {
    let truth = truth_column(trace)?;
    let loss = pair.loss.as_ref();
    let values: Vec<f64> = trace
        .iter()
        .zip(truth)
        .map(|(r, f)| loss.grad_x(r.y, r.f_est) - loss.grad_x(loss.reference_target(f), r.f_est))
        .collect();
    let n = values.len().max(1) as f64;
    let series = MetricSeries::new("gradient_noise", values);
    let mean = series.cumulative.last().copied().unwrap_or(0.0) / n;
    let second_moment = series
        .values
        .iter()
        .map(|w| w * w)
        .collect::<CompensatedSum>()
        .value()
        / n;
    Ok(GradientNoise {
        series,
        mean,
        second_moment,
    })
}

/// `(1/T) sum |y - y_hat| / y` over strictly positive targets.
pub fn relative_error_metric(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension {
            context: "relative error",
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::Data {
            line: 0,
            message: "no targets".into(),
        });
    }
    let mut acc = CompensatedSum::default();
    for (i, (p, y)) in predictions.iter().zip(targets).enumerate() {
        if !(*y > 0.0) {
            return Err(Error::Data {
                line: i + 1,
                message: format!("target {y} must be strictly positive"),
            });
        }
        acc.add((y - p).abs() / y);
    }
    Ok(acc.value() / targets.len() as f64)
}

/// Running relative error after each row.
pub fn relative_error_series(predictions: &[f64], targets: &[f64]) -> Result<MetricSeries> {
    relative_error_metric(predictions, targets)?;
    let values = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p).abs() / y)
        .collect();
    let s = MetricSeries::new("relative_error", values);
    Ok(MetricSeries::new("relative_error_avg", s.running_mean()))
}

/// Tail fraction below which the step-size sum counts as converged.
pub const SUMMABILITY_TAIL_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityDiagnostic {
    /// `sum mu_k^2 ||grad f_k||^2`.
    pub total: f64,
    /// Share of `total` contributed by the second half of the steps.
    pub tail_fraction: f64,
    pub pass: bool,
}

pub fn summability_from_terms(mu: &[f64], grad_norm_sq: &[f64]) -> SummabilityDiagnostic {
    let terms: Vec<f64> = mu
        .iter()
        .zip(grad_norm_sq)
        .map(|(m, g)| m * m * g)
        .collect();
    let half = terms.len() / 2;
    let total = terms.iter().copied().collect::<CompensatedSum>().value();
    let tail = terms[half..]
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .value();
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    SummabilityDiagnostic {
        total,
        tail_fraction,
        pass: tail_fraction < SUMMABILITY_TAIL_LIMIT,
    }
}

/// Robbins-Siegmund style summability check of `sum mu_k^2 ||grad f_k||^2`.
pub fn robbins_siegmund_diag(trace: &[StepRecord]) -> SummabilityDiagnostic {
    let mu: Vec<f64> = trace.iter().map(|r| r.mu_k).collect();
    let g: Vec<f64> = trace.iter().map(|r| r.grad_norm_sq).collect();
    summability_from_terms(&mu, &g)
}

/// Gains of the modified rule on a stream whose gradient norm is always
/// `sqrt(grad_norm_sq)`; returns `(mu_k, ||grad||^2)` per step.
pub fn constant_gradient_gains(
    hyper: &HyperParams,
    grad_norm_sq: f64,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut gain = GainState::new(hyper.beta3);
    let mut mus = Vec::with_capacity(n);
    for _ in 0..n {
        gain = gain.advance(grad_norm_sq);
        mus.push(mu_schedule(&gain, grad_norm_sq, hyper));
    }
    (mus, vec![grad_norm_sq; n])
}

/// Ratio `u_{k-1}^2 / sum_{t<=k} lambda^{k-t} (y_t^2 + w_t^2)` per step, a
/// monitor for the minimum-phase property of a closed loop. Steps with an
/// empty denominator are skipped.
pub fn minimum_phase_ratio(trace: &[StepRecord], lambda: f64) -> MetricSeries {
    // row k holds u_k, y_{k+1}, w_{k+1}; y_0 = w_0 = 0
    let mut weighted = 0.0;
    let mut values = Vec::new();
    for k in 1..trace.len() {
        let prev = &trace[k - 1];
        let w = prev.noise.unwrap_or(0.0);
        weighted = lambda * weighted + prev.y * prev.y + w * w;
        if weighted > 0.0 {
            let u = prev.u.unwrap_or(0.0);
            values.push(u * u / weighted);
        }
    }
    MetricSeries::new("minimum_phase_ratio", values)
}

/// Means over consecutive windows of `window` values (a trailing partial
/// window is dropped).
pub fn windowed_means(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks_exact(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SquaredError;
    use crate::trace::StepFlags;

    fn rec(k: u64, f_true: f64, f_est: f64, y: f64, y_star: f64) -> StepRecord {
        StepRecord {
            k,
            y,
            u: None,
            y_star: Some(y_star),
            f_true: Some(f_true),
            f_est,
            loss: 0.0,
            regret: None,
            regret_avg: None,
            theta_err: None,
            mu_k: 0.0,
            r_k: 0.0,
            grad_norm_sq: 0.0,
            noise: None,
            flags: StepFlags::default(),
        }
    }

    #[test]
    fn regret_two_steps() {
        let t = vec![rec(0, 1.0, 0.0, 0.0, 0.0), rec(1, 2.0, 0.0, 0.0, 0.0)];
        let s = regret_sum(&t, &SquaredError).unwrap();
        assert_eq!(s.cumulative, vec![1.0, 5.0]);
        let avg = average_regret(&t, &SquaredError).unwrap();
        assert_eq!(avg.values, vec![1.0, 2.5]);
    }

    #[test]
    fn regret_zero_at_truth_and_constant_gap() {
        let t: Vec<_> = (0..5).map(|k| rec(k, 0.3, 0.3, 0.0, 0.0)).collect();
        assert!(average_regret(&t, &SquaredError)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
        let t: Vec<_> = (0..5).map(|k| rec(k, 0.5, 0.25, 0.0, 0.0)).collect();
        assert!(average_regret(&t, &SquaredError)
            .unwrap()
            .values
            .iter()
            .all(|v| (*v - 0.0625).abs() < 1e-16));
    }

    #[test]
    fn missing_truth_is_config_error() {
        let mut r = rec(0, 0.0, 0.0, 0.0, 0.0);
        r.f_true = None;
        assert!(matches!(
            regret_sum(&[r], &SquaredError),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn tracking_constant_offset() {
        let t: Vec<_> = (0..4).map(|k| rec(k, 0.6, 0.0, 0.5, 0.5)).collect();
        let te = tracking_error(&t).unwrap();
        assert!(te
            .conditional
            .values
            .iter()
            .all(|v| (*v - 0.01).abs() < 1e-15));
        assert!(te.observed.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bound_curve_limits() {
        let c = bound_curve(&HyperParams::new(0.3, 0.5, 0.0, 2.0), 0.5, 100).unwrap();
        assert!((c.values[99] - 0.2).abs() < 1e-15);
        let c = bound_curve(&HyperParams::new(0.3, 1.0, 0.0, 2.0), 1e-9, 10).unwrap();
        assert!((c.values[9] - 1.1).abs() < 1e-8);
        assert!(bound_curve(&HyperParams::new(0.3, 1.0, 0.0, 2.0), 1.0, 10).is_err());
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(
            relative_error_metric(&[2.0, 4.0], &[2.0, 4.0]).unwrap(),
            0.0
        );
        assert_eq!(
            relative_error_metric(&[1.0, 2.0], &[2.0, 4.0]).unwrap(),
            0.5
        );
        let err = relative_error_metric(&[1.0, 2.0], &[2.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Data { line: 2, .. }));
    }

    #[test]
    fn summability_zero_gradients() {
        let d = summability_from_terms(&[0.1; 10], &[0.0; 10]);
        assert_eq!(d.total, 0.0);
        assert!(d.pass);
    }

    #[test]
    fn windows() {
        assert_eq!(
            windowed_means(&[1.0, 3.0, 5.0, 7.0, 9.0], 2),
            vec![2.0, 6.0]
        );
    }
}
