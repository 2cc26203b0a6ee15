//! Predictors of the form `f(phi, theta) = h(phi^T theta)` for a strictly
//! increasing link `h`.

use crate::model::PredictorModel;
use crate::numeric::dot;

use super::saturation::{saturation_mean, saturation_mean_deriv, SaturationSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Identity,
    Tanh,
    Sigmoid,
    /// Censored-Gaussian conditional mean `G`.
    Saturation(SaturationSpec),
}

impl Link {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Tanh => x.tanh(),
            Link::Sigmoid => sigmoid(x),
            Link::Saturation(spec) => saturation_mean(spec, x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Tanh => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            Link::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Link::Saturation(spec) => saturation_mean_deriv(spec, x),
        }
    }

    /// Bound on `sup |h'|`, which gives the growth constant `K2`.
    fn derivative_bound(&self) -> f64 {
        match self {
            Link::Identity | Link::Tanh | Link::Saturation(_) => 1.0,
            Link::Sigmoid => 0.25,
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct SingleIndexModel {
    name: String,
    dim: usize,
    link: Link,
}

impl SingleIndexModel {
    pub fn new(name: impl Into<String>, dim: usize, link: Link) -> Self {
        Self {
            name: name.into(),
            dim,
            link,
        }
    }

    pub fn linear(dim: usize) -> Self {
        Self::new("linear", dim, Link::Identity)
    }

    pub fn logistic(dim: usize) -> Self {
        Self::new("logistic", dim, Link::Sigmoid)
    }

    pub fn saturation(dim: usize, spec: SaturationSpec) -> Self {
        Self::new("saturation", dim, Link::Saturation(spec))
    }

    pub fn link(&self) -> &Link {
        &self.link
    }
}

impl PredictorModel for SingleIndexModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, phi: &[f64], theta: &[f64]) -> f64 {
        self.link.apply(dot(phi, theta))
    }

    fn gradient(&self, phi: &[f64], theta: &[f64]) -> Vec<f64> {
        let s = self.link.derivative(dot(phi, theta));
        phi.iter().map(|p| s * p).collect()
    }

    fn input_gain(&self, _phi: &[f64], theta: &[f64], index: usize) -> f64 {
        theta[index]
    }

    fn growth_bound(&self) -> Option<(f64, f64)> {
        Some((0.0, self.link.derivative_bound()))
    }
}

/// Nonlinear ARX predictor `tanh(phi^T theta)` over the lag stack
/// `[y_k .. y_{k-p+1}, u_k .. u_{k-q+1}]`.
pub fn tanh_arx_model(p: usize, q: usize) -> crate::error::Result<SingleIndexModel> {
    if p == 0 || q == 0 {
        return Err(crate::error::Error::config(
            "p/q",
            format!("lag orders must be >= 1, got p = {p}, q = {q}"),
        ));
    }
    Ok(SingleIndexModel::new("tanh-arx", p + q, Link::Tanh))
}
