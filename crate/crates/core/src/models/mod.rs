//! Catalog of predictor/loss instances and the weak-convexity verifier.

mod assumption2;
mod catalog;
mod losses;
mod quadnet;
mod saturation;
mod single_index;

pub use assumption2::{
    growth_bound_excess, verify_assumption2, Assumption2Report, Draw, SLACK_TOLERANCE,
};
pub use catalog::{
    catalog_pair, hinge_sq_loss, logistic_constants, logistic_pair, tanh_constants, CatalogEntry,
    Observation, OperatingSet, PairOptions, HINGE_CONSTANTS, LINEAR_MSE_CONSTANTS, PAIR_NAMES,
};
pub use losses::{CrossEntropy, SquaredError, SquaredHinge};
pub use quadnet::{kron, quadnet_lift, KroneckerFeatures, QuadNetSpec};
pub use saturation::{
    saturation_assumption2_delta, saturation_delta_on, saturation_mean, saturation_mean_deriv,
    saturation_mean_second_deriv, SaturationSpec, DELTA_GRID_POINTS,
};
pub use single_index::{sigmoid, tanh_arx_model, Link, SingleIndexModel};
