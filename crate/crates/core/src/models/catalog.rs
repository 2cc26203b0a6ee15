//! Named model/loss pairs with their weak-convexity constants, operating-set
//! samplers and observation models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assumption2Constants, ModelLossPair, PredictorModel};
use crate::numeric::dot;
use crate::rng::SeededRng;

use super::assumption2::Draw;
use super::losses::{CrossEntropy, SquaredError, SquaredHinge};
use super::quadnet::KroneckerFeatures;
use super::saturation::{saturation_delta_on, SaturationSpec};
use super::single_index::{tanh_arx_model, SingleIndexModel};

pub const PAIR_NAMES: [&str; 6] = [
    "linear-mse",
    "hinge",
    "saturation",
    "logistic",
    "quadnet",
    "tanh-arx",
];

/// Knobs shared by the catalog constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairOptions {
    /// Regressor dimension for the single-index pairs.
    pub dim: usize,
    pub saturation: SaturationSpec,
    /// Operating set `|phi^T theta - center| <= m2` of the censored pair.
    pub saturation_bound: f64,
    pub saturation_center: f64,
    /// Operating bound `|phi^T theta| <= M` of the logistic pair.
    pub logistic_bound: f64,
    /// Operating bound `|phi^T theta| <= M` of the tanh ARX pair.
    pub tanh_bound: f64,
    pub p: usize,
    pub q: usize,
    /// Input dimension of the quadratic network before lifting.
    pub quad_dim: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            dim: 3,
            saturation: SaturationSpec {
                lower: -1.0,
                upper: 1.0,
                noise_std: 1.0,
            },
            saturation_bound: 2.0,
            saturation_center: 0.0,
            logistic_bound: 3.0,
            tanh_bound: 1.0,
            p: 3,
            q: 2,
            quad_dim: 2,
        }
    }
}

/// How operating points are drawn for the weak-convexity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingSet {
    /// Entries i.i.d. `N(0, scale^2)`.
    Free { scale: f64 },
    /// As `Free`, with `theta` and `theta*` moved along `phi` so that
    /// `|phi^T theta - center| <= bound`.
    BoundedIndex { scale: f64, center: f64, bound: f64 },
    /// As `Free`, with `phi` stretched so the true margin `|phi^T theta*| >= 1`.
    Margin { scale: f64 },
}

impl OperatingSet {
    pub fn scale(&self) -> f64 {
        match *self {
            OperatingSet::Free { scale }
            | OperatingSet::BoundedIndex { scale, .. }
            | OperatingSet::Margin { scale } => scale,
        }
    }
}

/// How a noisy observation is generated from the true index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    /// `y = f(phi, theta*) + std * e`.
    Additive { std: f64 },
    /// `y = clamp(phi^T theta* + s e, L, U)`.
    Censored(SaturationSpec),
    /// `y = sgn(phi^T theta*)`.
    Label,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub pair: ModelLossPair,
    pub constants: Assumption2Constants,
    pub operating_set: OperatingSet,
    /// Feature lift applied to a base regressor, for the quadratic network.
    pub lift: Option<KroneckerFeatures>,
    pub observation: Observation,
    /// Regressor dimension before any lift.
    pub base_dim: usize,
}

impl CatalogEntry {
    /// Deterministic sampler over the entry's operating set.
    pub fn sampler(&self, seed: u64) -> impl FnMut() -> Draw + '_ {
        let mut rng = SeededRng::new(seed);
        let dim = self.pair.dim();
        let scale = self.operating_set.scale();
        move || {
            let base = rng.normal_vec(self.base_dim, scale);
            let mut phi = match self.lift {
                Some(l) => l.lift(&base).expect("base_dim matches lift"),
                None => base,
            };
            let mut theta = rng.normal_vec(dim, scale);
            let mut theta_star = rng.normal_vec(dim, scale);
            match self.operating_set {
                OperatingSet::Free { .. } => {}
                OperatingSet::BoundedIndex { center, bound, .. } => {
                    pull_into(&phi, &mut theta, center, bound, rng.uniform());
                    pull_into(&phi, &mut theta_star, center, bound, rng.uniform());
                }
                OperatingSet::Margin { .. } => {
                    let m = dot(&phi, &theta_star).abs();
                    if m < 1.0 {
                        let stretch = (1.0 + rng.uniform()) / m;
                        phi.iter_mut().for_each(|v| *v *= stretch);
                    }
                }
            }
            Draw {
                phi,
                theta,
                theta_star,
            }
        }
    }

    /// Draw an observation `y` for regressor `phi` under `theta_star`.
    pub fn observe(&self, phi: &[f64], theta_star: &[f64], rng: &mut SeededRng) -> f64 {
        let index = dot(phi, theta_star);
        match self.observation {
            Observation::Additive { std } => {
                self.pair.predictor.value(phi, theta_star) + std * rng.standard_normal()
            }
            Observation::Censored(spec) => {
                spec.censor(index + spec.noise_std * rng.standard_normal())
            }
            Observation::Label => {
                if index >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Move `theta` along `phi` so that `|phi^T theta - center| <= bound`,
/// landing at offset `u * bound` on the same side when it had to move.
fn pull_into(phi: &[f64], theta: &mut [f64], center: f64, bound: f64, u: f64) {
    let x = dot(phi, theta);
    let off = x - center;
    let pp = dot(phi, phi);
    if off.abs() > bound && pp > 0.0 {
        let target = center + u * bound * off.signum();
        let s = (target - x) / pp;
        theta.iter_mut().zip(phi).for_each(|(t, p)| *t += s * p);
    }
}

/// Logistic regression under cross-entropy, valid while `|phi^T theta| <= M`.
pub fn logistic_pair(dim: usize, bound: f64) -> ModelLossPair {
    ModelLossPair::new(
        "logistic",
        Arc::new(SingleIndexModel::logistic(dim)),
        Arc::new(CrossEntropy),
        Some(logistic_constants(bound)),
    )
}

/// `delta = 1`, `c1 = (1 + e^M)^4 / (2 e^{2M})`, `c2 = 0`.
pub fn logistic_constants(bound: f64) -> Assumption2Constants {
    let e = bound.exp();
    Assumption2Constants {
        delta: 1.0,
        c1: (1.0 + e).powi(4) / (2.0 * e * e),
        c2: 0.0,
    }
}

/// `delta = 2 inf_{|x| <= M} sech^2(x) = 2 sech^2(M)`, `c1 = 4`, `c2 = 0`.
pub fn tanh_constants(bound: f64) -> Assumption2Constants {
    let c = bound.cosh();
    Assumption2Constants {
        delta: 2.0 / (c * c),
        c1: 4.0,
        c2: 0.0,
    }
}

pub const LINEAR_MSE_CONSTANTS: Assumption2Constants = Assumption2Constants {
    delta: 2.0,
    c1: 4.0,
    c2: 0.0,
};

pub const HINGE_CONSTANTS: Assumption2Constants = Assumption2Constants {
    delta: 1.0,
    c1: 4.0,
    c2: 0.0,
};

/// Squared hinge loss `max{0, 1 - y phi^T theta}^2` and its `theta`-gradient.
pub fn hinge_sq_loss(phi: &[f64], theta: &[f64], label: f64) -> Result<(f64, Vec<f64>)> {
    if label != 1.0 && label != -1.0 {
        return Err(Error::Domain(format!(
            "hinge label must be +1 or -1, got {label}"
        )));
    }
    if phi.len() != theta.len() {
        return Err(Error::Dimension {
            context: "hinge",
            expected: theta.len(),
            got: phi.len(),
        });
    }
    let m = (1.0 - label * dot(phi, theta)).max(0.0);
    let g = phi.iter().map(|p| -2.0 * m * label * p).collect();
    Ok((m * m, g))
}

pub fn catalog_pair(name: &str, opts: &PairOptions) -> Result<CatalogEntry> {
    let free = OperatingSet::Free { scale: 1.0 };
    let entry = match name {
        "linear-mse" => CatalogEntry {
            pair: ModelLossPair::new(
                name,
                Arc::new(SingleIndexModel::linear(opts.dim)),
                Arc::new(SquaredError),
                Some(LINEAR_MSE_CONSTANTS),
            ),
            constants: LINEAR_MSE_CONSTANTS,
            operating_set: free,
            lift: None,
            observation: Observation::Additive { std: 1.0 },
            base_dim: opts.dim,
        },
        "hinge" => CatalogEntry {
            pair: ModelLossPair::new(
                name,
                Arc::new(SingleIndexModel::linear(opts.dim)),
                Arc::new(SquaredHinge),
                Some(HINGE_CONSTANTS),
            ),
            constants: HINGE_CONSTANTS,
            operating_set: OperatingSet::Margin { scale: 1.0 },
            lift: None,
            observation: Observation::Label,
            base_dim: opts.dim,
        },
        "saturation" => {
            opts.saturation.validate()?;
            let constants = Assumption2Constants {
                delta: saturation_delta_on(
                    &opts.saturation,
                    opts.saturation_center,
                    opts.saturation_bound,
                )?,
                c1: 4.0,
                c2: 0.0,
            };
            CatalogEntry {
                pair: ModelLossPair::new(
                    name,
                    Arc::new(SingleIndexModel::saturation(opts.dim, opts.saturation)),
                    Arc::new(SquaredError),
                    Some(constants),
                ),
                constants,
                operating_set: OperatingSet::BoundedIndex {
                    scale: 1.0,
                    center: opts.saturation_center,
                    bound: opts.saturation_bound,
                },
                lift: None,
                observation: Observation::Censored(opts.saturation),
                base_dim: opts.dim,
            }
        }
        "logistic" => {
            let pair = logistic_pair(opts.dim, opts.logistic_bound);
            CatalogEntry {
                constants: pair.constants.expect("logistic constants"),
                pair,
                operating_set: OperatingSet::BoundedIndex {
                    scale: 1.0,
                    center: 0.0,
                    bound: opts.logistic_bound,
                },
                lift: None,
                observation: Observation::Additive { std: 1.0 },
                base_dim: opts.dim,
            }
        }
        "quadnet" => {
            let lift = KroneckerFeatures { d: opts.quad_dim };
            CatalogEntry {
                pair: ModelLossPair::new(
                    name,
                    Arc::new(SingleIndexModel::new(
                        "quadnet-lifted",
                        lift.lifted_dim(),
                        super::Link::Identity,
                    )),
                    Arc::new(SquaredError),
                    Some(LINEAR_MSE_CONSTANTS),
                ),
                constants: LINEAR_MSE_CONSTANTS,
                operating_set: free,
                lift: Some(lift),
                observation: Observation::Additive { std: 1.0 },
                base_dim: opts.quad_dim,
            }
        }
        "tanh-arx" => {
            let constants = tanh_constants(opts.tanh_bound);
            let model = tanh_arx_model(opts.p, opts.q)?;
            let d = model.dim();
            CatalogEntry {
                pair: ModelLossPair::new(
                    name,
                    Arc::new(model),
                    Arc::new(SquaredError),
                    Some(constants),
                ),
                constants,
                operating_set: OperatingSet::BoundedIndex {
                    scale: 1.0,
                    center: 0.0,
                    bound: opts.tanh_bound,
                },
                lift: None,
                observation: Observation::Additive { std: 0.05 },
                base_dim: d,
            }
        }
        other => {
            return Err(Error::config(
                "pair",
                format!(
                    "unknown pair `{other}`; expected one of {}",
                    PAIR_NAMES.join(", ")
                ),
            ))
        }
    };
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_constant_at_unit_bound() {
        let c = logistic_constants(1.0);
        let e = std::f64::consts::E;
        assert!((c.c1 - (1.0 + e).powi(4) / (2.0 * e * e)).abs() < 1e-12);
        assert_eq!(c.delta, 1.0);
    }

    #[test]
    fn hinge_values() {
        let (l, g) = hinge_sq_loss(&[1.0, 0.0], &[1.0, 5.0], 1.0).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        let (l, _) = hinge_sq_loss(&[1.0], &[-1.0], 1.0).unwrap();
        assert_eq!(l, 4.0);
        assert!(hinge_sq_loss(&[1.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn every_name_resolves() {
        for name in PAIR_NAMES {
            let e = catalog_pair(name, &PairOptions::default()).unwrap();
            assert_eq!(e.pair.name, name);
        }
        assert!(catalog_pair("nope", &PairOptions::default()).is_err());
    }

    #[test]
    fn bounded_sampler_respects_bound() {
        let e = catalog_pair("logistic", &PairOptions::default()).unwrap();
        let mut s = e.sampler(3);
        for _ in 0..1000 {
            let d = s();
            assert!(dot(&d.phi, &d.theta).abs() <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn margin_sampler_respects_margin() {
        let e = catalog_pair("hinge", &PairOptions::default()).unwrap();
        let mut s = e.sampler(3);
        for _ in 0..1000 {
            let d = s();
            assert!(dot(&d.phi, &d.theta_star).abs() >= 1.0 - 1e-12);
        }
    }
}
