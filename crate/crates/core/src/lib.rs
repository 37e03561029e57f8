//! Forecasting toolkit for weekly bug-arrival counts.
//!
//! The pipeline runs in four stages, each with its own module:
//!
//! 1. [`ingest`] — pull bug records from a Bugzilla-compatible tracker (or a
//!    committed CSV snapshot), aggregate them into a gap-free weekly series,
//!    and apply configured outlier removal.
//! 2. [`diagnostics`] — augmented Dickey-Fuller stationarity test with
//!    AIC-selected lag length, plus ACF/PACF correlograms and an advisory
//!    ARIMA order suggestion.
//! 3. [`models`] — nine forecasters behind one interface: a lag-1 naive
//!    baseline, exponential smoothing, weighted moving average, ARIMA,
//!    random-forest regression and an LSTM, the last three each with an
//!    exogenous-covariate variant.
//! 4. [`eval`] — rolling-origin one-step evaluation, 13-week multi-horizon
//!    evaluation, and a five-metric comparison report.

pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
mod ols;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use series::{ReleaseCalendar, SeriesLabel, WeeklySeries};
