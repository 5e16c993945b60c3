//! Soiling loss estimation for photovoltaic production data.
//!
//! A daily energy (or performance-index) signal `y` is decomposed as
//! `y = x1 + x2 + x3 + x4` on the days with data, where `x1` is a quantile-cost
//! residual, `x2` a smooth yearly-periodic baseline, `x3` a linear degradation
//! trend and `x4` the nonpositive, piecewise-linear soiling loss. The convex
//! problem is rewritten as a sparse QP and solved with a built-in ADMM solver.
//!
//! ```no_run
//! use soilsd::{decompose, scale_p95, DailySignal, SdConfig, SolverSettings};
//!
//! let raw = DailySignal::new(vec![Some(30.0); 730]).unwrap();
//! let y = scale_p95(&raw).unwrap();
//! let d = decompose(&y, &SdConfig::unlabeled(), &SolverSettings::default()).unwrap();
//! println!("{:?}", &d.x4[..5]);
//! ```
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`.

// index loops mirror the math; negated float comparisons are deliberate NaN guards
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod decompose;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod prep;
pub mod qp;
mod scalar;
pub mod sparse;
pub mod synthetic;

pub use decompose::decompose;
pub use error::{Error, Result};
pub use metrics::{
    correct_daily, correct_power, filtered_rate_mae, loss_mae, rate_mae, soiling_rate, summary,
    total_energy_loss, FilteredRate, SoilingReport,
};
pub use model::{
    assemble, degradation_feasible, quantile_cost, seasonal_cost, soiling_cost, Component,
    Decomposition, DifferenceOperator, SdConfig, SdConfigFile, SdProblem,
};
pub use prep::{apply_quality_mask, integrate_daily, integrate_daily_with, percentile, scale_p95, DailySignal, PowerSeries};
pub use qp::{reformulate, solve, QpLayout, Solution, SolveReport, SolveStatus, SolverSettings, StandardQp};
pub use scalar::Scalar;
pub use sparse::CscMatrix;
pub use synthetic::{generate, scenario_suite, ScenarioConfig, SyntheticRealization};

pub type DailySignal64 = DailySignal<f64>;
pub type PowerSeries64 = PowerSeries<f64>;
pub type Decomposition64 = Decomposition<f64>;
pub type StandardQp64 = StandardQp<f64>;
pub type CscMatrix64 = CscMatrix<f64>;

pub type DailySignal32 = DailySignal<f32>;
pub type Decomposition32 = Decomposition<f32>;
pub type StandardQp32 = StandardQp<f32>;
