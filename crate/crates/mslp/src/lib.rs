//! Monitoring of multivariate simple linear profiles.
//!
//! A process is observed through repeated samples, each consisting of p
//! correlated responses measured at n fixed design points, with every
//! response linear in the explanatory variable. Each sample is summarized by
//! the sums of its fitted intercepts and slopes; an EWMA of that pair is
//! tested against a time-varying control limit built from the exact
//! covariance of the summary statistic.
//!
//! Modules:
//! - [`model`]: design points, coefficient matrices, error covariance,
//!   process model.
//! - [`estimate`]: per-sample least-squares fits and the covariance of the
//!   summed-coefficient statistic.
//! - [`chart`]: the EWMA decision rule and its single-sample (Shewhart)
//!   counterpart.
//! - [`simulate`]: run-length simulation, ARL estimation, and control-limit
//!   calibration.
//! - [`tables`]: built-in shift grids for the bivariate reference process
//!   with published ARL values for comparison.

pub mod chart;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod model;
pub mod simulate;
pub mod tables;

pub use chart::{ChartConfig, ChartVerdict, EwmaChartState};
pub use error::{Error, Result};
pub use estimate::{CoefSumVector, InterceptVariance, SigmaB};
pub use model::{build_model, CoefMatrix, DesignPoints, ErrorCovariance, ProcessModel, SampleMatrix};
pub use simulate::{
    ArlEstimate, RunOutcome, ShiftScenario, SimRng, SimulationConfig, DEFAULT_SEED,
};
pub use tables::{table_rows, with_correlation, ShiftKind, TableRow};
