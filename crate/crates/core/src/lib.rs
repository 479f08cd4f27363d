//! Data-driven identification of the linear temperature-power dynamics of a
//! power converter, and inversion of the identified model to estimate
//! device power losses from temperature measurements.
//!
//! Pipeline:
//!
//! 1. [`dataset`]: load power/temperature series, oversample, filter,
//!    baseline against ambient, split per calibration step, and stack the
//!    regression matrices.
//! 2. [`identify`]: fit `u(k+1) = Ā u(k) + B̄ x(k)` by ridge least squares or
//!    by projected gradient under per-entry constraints.
//! 3. [`estimate`]: simulate temperatures from powers, invert the model to
//!    estimate powers from temperatures, and summarize the errors.
//! 4. [`synth`]: RC-network oracles whose exact discretization lies in the
//!    model class, for generating test data.
//!
//! Every numeric type is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod estimate;
pub mod identify;
pub mod scalar;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Dataset = dataset::TimeSeriesDataset<f64>;
pub type Regression = dataset::RegressionMatrices<f64>;
pub type Model = identify::LinearThermalModel<f64>;
pub type Fit = identify::FitReport<f64>;
pub type Constraints = identify::ConstraintSpec<f64>;
pub type Options = identify::IdentOptions<f64>;
pub type Estimator = estimate::EstimatorGain<f64>;
pub type Report = estimate::EstimationReport<f64>;
pub type Network = synth::ThermalNetwork<f64>;

pub type Dataset32 = dataset::TimeSeriesDataset<f32>;
pub type Model32 = identify::LinearThermalModel<f32>;
pub type Network32 = synth::ThermalNetwork<f32>;
