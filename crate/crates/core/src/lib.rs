//! Estimating the time domain average of gear vibration from a reduced
//! number of revolutions.
//!
//! The crate provides a synthetic gear-life data generator, direct averaging
//! and fit/diagnostic metrics, three regressors (tanh perceptron trained by
//! scaled conjugate gradient, thin-plate-spline RBF network, and
//! epsilon-insensitive SVR) and the two estimation pipelines built on them:
//! a single-stage map from the first 40 revolutions to the full average, and
//! a two-stage running estimate that holds at most one subsection of raw
//! revolutions in memory.

mod codec;
pub mod error;
pub mod linalg;
pub mod nets;
pub mod pipelines;
pub mod regressor;
pub mod source;
pub mod svr;
pub mod synth;
pub mod tda;

pub use error::{Error, Result};
