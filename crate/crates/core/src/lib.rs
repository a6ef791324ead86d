//! Robust shape-matrix estimation for complex elliptically symmetric data.
//!
//! The centerpiece is the one-step rank-based estimator
//! [`estimators::r_estimate`], which corrects a preliminary √L-consistent
//! shape estimate (sample covariance or Tyler) with a closed-form
//! rank statistic. Around it sit the scalar special functions the scores
//! need, CES samplers, and a Monte Carlo harness that measures the MSE
//! index of each estimator.

pub mod ces_sampling;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod matrix_core;
pub mod scores;
pub mod special_fn;

pub use ces_sampling::{CesModel, ContaminationConfig, ModularKind, ModularLaw, RadialLaw, RngStream};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use estimators::{EstimatorOutput, ROptions, RStatistics, TylerOptions};
pub use harness::{ExperimentConfig, MseCurve, MseRow, Preset};
pub use matrix_core::{CMatrix, CVector, HermitianPd, ShapeMatrix, StructuralOperators};
pub use num_complex::Complex64;
pub use scores::ScoreFunction;
pub use special_fn::QuantileResult;
