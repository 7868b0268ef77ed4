//! Feed-forward regressors: a two-layer tanh perceptron trained by scaled
//! conjugate gradient, and a thin-plate-spline radial basis network.

mod mlp;
mod rbf;
mod scg;

pub use mlp::{
    mlp_cost, mlp_forward, mlp_gradient, mlp_train, scg_train, MlpObjective, MlpParams, TrainConfig,
};
pub use rbf::{
    kmeans_centers, rbf_basis, rbf_fit_output, rbf_forward, rbf_train, thin_plate, RbfParams,
    DEFAULT_RIDGE,
};
pub use scg::{scg_minimize, Objective, ScgOutcome, ScgSettings};
