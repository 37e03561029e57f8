//! Stationarity testing and correlograms.
//!
//! The ADF test justifies modelling the raw counts without differencing; the
//! ACF/PACF pair drives the advisory ARIMA order suggestion.

mod adf;
mod correlogram;

pub use adf::{adf_test, adf_test_values, default_max_lag, AdfResult, CriticalValues};
pub use correlogram::{
    acf, acf_values, pacf, pacf_values, suggest_orders, Correlogram, CorrelogramKind,
};
