//! Online identification and control of nonlinear stochastic systems with a
//! normalized stochastic-gradient estimator.
//!
//! The estimator updates
//! `theta_{k+1} = theta_k - mu_k grad f(phi_k, theta_k) dL/dx(y_{k+1}, f(phi_k, theta_k))`
//! with the adaptive gain
//! `mu_k = mu / (r_k^beta1 ln^beta2(r_k) + ||grad f||^2)` and
//! `r_k = beta3 + sum_{i<=k} ||grad f_i||^2`.

pub mod control;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod sg;
pub mod trace;
pub mod types;

pub use error::{Error, Result};
pub use model::{Assumption2Constants, LossFunction, ModelLossPair, PredictorModel};
pub use sg::{classical_sg_init, sg_init, sg_step, EstimatorState, StepRule};
pub use trace::{StepFlags, StepRecord};
pub use types::{GainState, HyperParams, ParamRole, ParameterVector, Regressor};
