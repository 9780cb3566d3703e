//! Quantile-based optimal investment with a smoothed lower-quantile
//! constraint: model, adjoints, strategy, calibration and simulation.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adjoint;
pub mod calibration;
pub mod model;
pub mod roots;
pub mod simulation;
pub mod smoothing;
pub mod strategy;

pub use calibration::{calibrate, CalibrationError, ParamOverrides, PriceSeries, ReturnSeries};
pub use model::{covariance_matrix, ModelParams, ParamError, QuantileCovariance, WealthState};
pub use simulation::{simulate_ensemble, simulate_path, Ensemble, SimConfig, StrategyMode};
pub use smoothing::SmoothedConstraint;
pub use strategy::{solve_pi, solve_pi_approx, solve_pi_full, StrategyQuery, StrategyResult};
