//! Certainty-equivalence adaptive control of a nonlinear ARX plant.
//!
//! At step `k` the controller picks `u_k` so that the estimated model hits the
//! reference, `f(phi_k(u_k), theta_k) = y*_{k+1}`, the plant answers with
//! `y_{k+1} = f(phi_k, theta*) + w_{k+1}`, and the estimator absorbs
//! `(phi_k, y_{k+1})`.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelLossPair, PredictorModel};
use crate::rng::{SeededRng, NOISE_STREAM};
use crate::sg::EstimatorState;
use crate::trace::{StepFlags, StepRecord};
use crate::types::ParameterVector;

/// Output and input history, newest first, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct LagBuffer {
    p: usize,
    q: usize,
    y_hist: VecDeque<f64>,
    u_hist: VecDeque<f64>,
}

impl LagBuffer {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::config("p/q", "lag orders must be >= 1"));
        }
        Ok(Self {
            p,
            q,
            y_hist: std::iter::repeat_n(0.0, p).collect(),
            u_hist: std::iter::repeat_n(0.0, q).collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Position of `u_k` inside the regressor.
    pub fn input_index(&self) -> usize {
        self.p
    }

    /// The most recent applied control `u_{k-1}`.
    pub fn last_input(&self) -> f64 {
        self.u_hist[0]
    }

    /// The most recent output `y_k`.
    pub fn last_output(&self) -> f64 {
        self.y_hist[0]
    }

    /// `[y_k, .., y_{k-p+1}, u, u_{k-1}, .., u_{k-q+1}]`.
    pub fn regressor_with(&self, u: f64) -> Vec<f64> {
        let mut phi = Vec::with_capacity(self.dim());
        phi.extend(self.y_hist.iter().copied());
        phi.push(u);
        phi.extend(self.u_hist.iter().take(self.q - 1).copied());
        phi
    }

    /// Shift in `y_{k+1}` and the control `u_k` that produced it.
    pub fn push(&mut self, y_next: f64, u: f64) {
        self.y_hist.pop_back();
        self.y_hist.push_front(y_next);
        self.u_hist.pop_back();
        self.u_hist.push_front(u);
    }
}

/// Distribution of the additive plant noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    None,
    Gaussian {
        std: f64,
    },
    /// Student-t with `dof` degrees of freedom, scaled by `scale`.
    StudentT {
        dof: f64,
        scale: f64,
    },
}

impl NoiseLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseLaw::None => Ok(()),
            NoiseLaw::Gaussian { std } if std >= 0.0 && std.is_finite() => Ok(()),
            NoiseLaw::StudentT { dof, scale } if dof > 2.0 && scale > 0.0 => Ok(()),
            other => Err(Error::config(
                "noise",
                format!("invalid noise law {other:?}"),
            )),
        }
    }

    /// Noise variance.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseLaw::None => 0.0,
            NoiseLaw::Gaussian { std } => std * std,
            NoiseLaw::StudentT { dof, scale } => scale * scale * dof / (dof - 2.0),
        }
    }
}

/// Seeded noise stream; each draw consumes exactly one uniform.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    law: NoiseLaw,
    rng: SeededRng,
}

impl NoiseSource {
    pub fn new(law: NoiseLaw, seed: u64) -> Self {
        Self {
            law,
            rng: SeededRng::substream(seed, NOISE_STREAM),
        }
    }

    pub fn law(&self) -> NoiseLaw {
        self.law
    }

    pub fn draw(&mut self) -> f64 {
        match self.law {
            NoiseLaw::None => 0.0,
            NoiseLaw::Gaussian { std } => std * self.rng.standard_normal(),
            NoiseLaw::StudentT { dof, scale } => {
                use statrs::distribution::{ContinuousCDF, StudentsT};
                let t = StudentsT::new(0.0, 1.0, dof).expect("validated dof");
                scale * t.inverse_cdf(self.rng.uniform())
            }
        }
    }
}

/// Plant `y_{k+1} = f(phi_k, theta*) + w_{k+1}`.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: Arc<dyn PredictorModel>,
    pub theta_star: ParameterVector,
    pub noise: NoiseSource,
}

impl Plant {
    pub fn new(
        model: Arc<dyn PredictorModel>,
        theta_star: ParameterVector,
        noise: NoiseLaw,
        seed: u64,
    ) -> Result<Self> {
        noise.validate()?;
        if theta_star.dim() != model.dim() {
            return Err(Error::Dimension {
                context: "plant theta*",
                expected: model.dim(),
                got: theta_star.dim(),
            });
        }
        Ok(Self {
            model,
            theta_star,
            noise: NoiseSource::new(noise, seed),
        })
    }

    /// Restart the noise stream from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.noise = NoiseSource::new(self.noise.law(), seed);
    }

    /// `f(phi, theta*)`.
    pub fn conditional_mean(&self, phi: &[f64]) -> f64 {
        self.model.value(phi, self.theta_star.as_slice())
    }
}

/// Reference trajectory `y*_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Constant(f64),
    /// Per-step values; the last one is held once the sequence runs out.
    Sequence(Vec<f64>),
}

impl Reference {
    /// `y*_{k+1}`.
    pub fn at(&self, k: u64) -> f64 {
        match self {
            Reference::Constant(v) => *v,
            Reference::Sequence(v) => v[(k as usize).min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Reference::Constant(v) => v.is_finite(),
            Reference::Sequence(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "y_target",
                "reference must be non-empty and finite",
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub y_target: Reference,
    /// Actuator clamp: controls are searched in `[-u_max, u_max]`.
    pub u_max: f64,
    /// Estimated input gains below this magnitude hold the previous control.
    pub b_eps: f64,
    pub root_tol: f64,
    pub root_max_iter: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            y_target: Reference::Constant(0.5),
            u_max: 1e3,
            b_eps: 1e-8,
            root_tol: 1e-10,
            root_max_iter: 200,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        self.y_target.validate()?;
        for (name, v) in [
            ("u_max", self.u_max),
            ("b_eps", self.b_eps),
            ("root_tol", self.root_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if self.root_max_iter == 0 {
            return Err(Error::config("root_max_iter", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutcome {
    pub u: f64,
    /// `f(phi(u), theta) - y*` at the returned control.
    pub residual: f64,
    pub saturated: bool,
    pub singular_gain: bool,
    pub iterations: usize,
}

/// Solve `f(phi_k(u), theta) = y*` for `u`.
///
/// The bracket grows geometrically around the previous control until the
/// residual changes sign or covers `[-u_max, u_max]`; bisection then runs to
/// machine resolution (or `root_max_iter`). If no sign change exists, the
/// endpoint with the smaller residual is returned and `saturated` is set. If
/// the estimated input gain is below `b_eps`, the previous control is held and
/// `singular_gain` is set.
pub fn solve_control(
    model: &dyn PredictorModel,
    theta: &[f64],
    lags: &LagBuffer,
    y_star: f64,
    cfg: &ControlConfig,
) -> Result<ControlOutcome> {
    if theta.len() != lags.dim() || model.dim() != lags.dim() {
        return Err(Error::Dimension {
            context: "controller",
            expected: lags.dim(),
            got: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::numeric("estimate", &lags.regressor_with(0.0), theta));
    }
    let idx = lags.input_index();
    let prev = lags.last_input();
    let residual = |u: f64| model.value(&lags.regressor_with(u), theta) - y_star;

    let gain = model.input_gain(&lags.regressor_with(prev), theta, idx);
    if !(gain.abs() >= cfg.b_eps) {
        return Ok(ControlOutcome {
            u: prev,
            residual: residual(prev),
            saturated: false,
            singular_gain: true,
            iterations: 0,
        });
    }

    let u0 = prev.clamp(-cfg.u_max, cfg.u_max);
    let h0 = residual(u0);
    if h0 == 0.0 {
        return Ok(ControlOutcome {
            u: u0,
            residual: 0.0,
            saturated: false,
            singular_gain: false,
            iterations: 0,
        });
    }

    let mut step = 1.0;
    let (mut lo, mut hi, mut h_lo, mut h_hi);
    loop {
        let a = (u0 - step).max(-cfg.u_max);
        let b = (u0 + step).min(cfg.u_max);
        let (ha, hb) = (residual(a), residual(b));
        if ha.signum() != h0.signum() || ha == 0.0 {
            (lo, hi, h_lo, h_hi) = (a, u0, ha, h0);
            break;
        }
        if hb.signum() != h0.signum() || hb == 0.0 {
            (lo, hi, h_lo, h_hi) = (u0, b, h0, hb);
            break;
        }
        if a <= -cfg.u_max && b >= cfg.u_max {
            let (u, r) = if ha.abs() <= hb.abs() {
                (a, ha)
            } else {
                (b, hb)
            };
            return Ok(ControlOutcome {
                u,
                residual: r,
                saturated: true,
                singular_gain: false,
                iterations: 0,
            });
        }
        step *= 2.0;
    }

    let mut iterations = 0;
    while iterations < cfg.root_max_iter {
        if h_lo == 0.0 || h_hi == 0.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let hm = residual(mid);
        if hm == 0.0 {
            (lo, h_lo) = (mid, hm);
            break;
        }
        if hm.signum() == h_lo.signum() {
            (lo, h_lo) = (mid, hm);
        } else {
            (hi, h_hi) = (mid, hm);
        }
    }
    let (u, r) = if h_lo.abs() <= h_hi.abs() {
        (lo, h_lo)
    } else {
        (hi, h_hi)
    };
    Ok(ControlOutcome {
        u,
        residual: r,
        saturated: r.abs() > cfg.root_tol,
        singular_gain: false,
        iterations,
    })
}

/// Apply `u` to the plant: returns `(y_{k+1}, w_{k+1})`.
pub fn plant_step(plant: &mut Plant, lags: &LagBuffer, u: f64) -> Result<(f64, f64)> {
    let phi = lags.regressor_with(u);
    let mean = plant.conditional_mean(&phi);
    let w = plant.noise.draw();
    let y = mean + w;
    if !y.is_finite() {
        return Err(Error::numeric(
            "plant output",
            &phi,
            plant.theta_star.as_slice(),
        ));
    }
    Ok((y, w))
}

/// Result of one run. `error` is set when the run stopped early;
/// `trace` then holds the rows completed before the failure.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Vec<StepRecord>,
    pub final_state: EstimatorState,
    pub error: Option<Error>,
}

/// Run `n_steps` of certainty-equivalence control with the noise stream
/// seeded by `seed`. The estimator's rule decides the gain.
pub fn run_closed_loop(
    plant: &mut Plant,
    estimator: EstimatorState,
    pair: &ModelLossPair,
    lags: LagBuffer,
    cfg: &ControlConfig,
    n_steps: u64,
    seed: u64,
) -> RunOutcome {
    plant.reseed(seed);
    let mut lags = lags;
    let mut state = estimator;
    let mut trace = Vec::with_capacity(n_steps as usize);
    let mut regret_sum = crate::numeric::CompensatedSum::default();
    let model = pair.predictor.as_ref();
    let loss = pair.loss.as_ref();

    for k in 0..n_steps {
        let step = (|| -> Result<(StepRecord, EstimatorState, f64, f64)> {
            let y_star = cfg.y_target.at(k);
            let ctrl = solve_control(model, state.theta.as_slice(), &lags, y_star, cfg)?;
            let phi = lags.regressor_with(ctrl.u);
            let (y, w) = plant_step(plant, &lags, ctrl.u)?;
            let f_true = plant.conditional_mean(&phi);
            let next = state.step(pair, &phi, y)?;
            let f_est = next.last_prediction;
            let regret = loss.excess(f_true, f_est);
            let rec = StepRecord {
                k,
                y,
                u: Some(ctrl.u),
                y_star: Some(y_star),
                f_true: Some(f_true),
                f_est,
                loss: loss.value(y, f_est),
                regret: Some(regret),
                regret_avg: None,
                theta_err: Some(next.theta.distance_to(&plant.theta_star)),
                mu_k: next.last_mu,
                r_k: next.gain.r(),
                grad_norm_sq: next.last_grad_norm_sq,
                noise: Some(w),
                flags: StepFlags {
                    saturated: ctrl.saturated,
                    singular_gain: ctrl.singular_gain,
                    diverged: next.diverged(),
                },
            };
            Ok((rec, next, y, ctrl.u))
        })();
        match step {
            Ok((mut rec, next, y, u)) => {
                regret_sum.add(rec.regret.unwrap_or(0.0));
                rec.regret_avg = Some(regret_sum.value() / (k + 1) as f64);
                trace.push(rec);
                state = next;
                lags.push(y, u);
            }
            Err(e) => {
                return RunOutcome {
                    trace,
                    final_state: state,
                    error: Some(e.at_step(k)),
                }
            }
        }
    }
    RunOutcome {
        trace,
        final_state: state,
        error: None,
    }
}
