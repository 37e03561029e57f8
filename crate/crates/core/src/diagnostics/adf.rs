//! Augmented Dickey-Fuller stationarity test, constant-only regression.
//!
//! Lag order is chosen by AIC over a common estimation sample, then the
//! regression is re-fit at the chosen lag on the full usable sample. P-values
//! come from the MacKinnon (1994) response-surface approximation and critical
//! values from the MacKinnon (2010) tables, both for the constant-only case —
//! the same conventions mainstream statistics stacks use, so results are
//! directly comparable.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::ols::ols;
use crate::series::WeeklySeries;

/// ADF critical values at the conventional significance levels.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalValues {
    #[serde(rename = "1%")]
    pub pct_1: f64,
    #[serde(rename = "5%")]
    pub pct_5: f64,
    #[serde(rename = "10%")]
    pub pct_10: f64,
}

/// Outcome of an ADF unit-root test.
#[derive(Debug, Clone, Serialize)]
pub struct AdfResult {
    /// The Dickey-Fuller t-statistic (coefficient on the lagged level over
    /// its standard error).
    pub statistic: f64,
    /// MacKinnon approximate p-value for the null of a unit root.
    pub p_value: f64,
    /// Number of lagged difference terms selected by AIC.
    pub chosen_lag: usize,
    /// Observations used in the final regression.
    pub n_obs_used: usize,
    pub critical_values: CriticalValues,
    /// Convenience flag: `p_value < 0.05`.
    pub reject_at_5pct: bool,
}

/// Schwert's rule of thumb for the largest lag to consider:
/// `floor(12·(n/100)^0.25)`.
pub fn default_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Runs the ADF test on a weekly series. See [`adf_test_values`].
pub fn adf_test(series: &WeeklySeries, max_lag: usize) -> Result<AdfResult> {
    adf_test_values(&series.values(), max_lag)
}

/// Runs the ADF test with constant-only regression on raw values.
///
/// For each candidate lag `k` in `0..=max_lag` the regression
/// `Δy_t = c + β·y_{t-1} + Σ γ_i·Δy_{t-i}` is fit over the common sample that
/// leaves room for `max_lag` lagged differences; the `k` minimizing AIC wins
/// (ties break toward fewer lags). The winning lag is then re-fit on all rows
/// it permits, and the reported statistic is `β̂ / SE(β̂)` from that final fit.
pub fn adf_test_values(values: &[f64], max_lag: usize) -> Result<AdfResult> {
    let n = values.len();
    let required = (max_lag + 10).max(2 * max_lag + 4);
    if n < required {
        return Err(Error::InsufficientData {
            required,
            actual: n,
        });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::DegenerateRegression(
            "constant series: the Dickey-Fuller regression is undefined".into(),
        ));
    }

    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();

    // Lag selection over the common sample: rows t = max_lag .. dy.len()-1.
    let nobs_common = dy.len() - max_lag;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..=max_lag {
        let fit = fit_df_regression(values, &dy, max_lag, k)?;
        let aic =
            nobs_common as f64 * (fit.rss / nobs_common as f64).ln() + 2.0 * (k + 2) as f64;
        if best.map_or(true, |(b, _)| aic < b) {
            best = Some((aic, k));
        }
    }
    let chosen_lag = best.expect("at least one candidate lag").1;

    // Final regression at the chosen lag, using every available row.
    let fit = fit_df_regression(values, &dy, chosen_lag, chosen_lag)?;
    let statistic = fit.coef[1] / fit.std_errors[1];
    let n_obs_used = dy.len() - chosen_lag;
    let p_value = mackinnon_p(statistic);

    Ok(AdfResult {
        statistic,
        p_value,
        chosen_lag,
        n_obs_used,
        critical_values: mackinnon_crit(n_obs_used),
        reject_at_5pct: p_value < 0.05,
    })
}

/// Fits `Δy_t = c + β·y_{t-1} + Σ_{i=1..k} γ_i·Δy_{t-i}` over rows
/// `t = start_lag .. dy.len()-1` (`start_lag ≥ k` controls the sample).
fn fit_df_regression(
    values: &[f64],
    dy: &[f64],
    start_lag: usize,
    k: usize,
) -> Result<crate::ols::OlsFit> {
    let rows = dy.len() - start_lag;
    let cols = k + 2;
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        let t = start_lag + r;
        match c {
            0 => 1.0,
            1 => values[t],
            i => dy[t - (i - 1)],
        }
    });
    let target = DVector::from_fn(rows, |r, _| dy[start_lag + r]);
    ols(&design, &target)
}

// MacKinnon (1994) response-surface coefficients, constant-only case.
const TAU_STAR: f64 = -1.61;
const TAU_MIN: f64 = -18.83;
const TAU_MAX: f64 = 2.74;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate asymptotic p-value for a constant-case ADF statistic.
fn mackinnon_p(stat: f64) -> f64 {
    if stat > TAU_MAX {
        return 1.0;
    }
    if stat < TAU_MIN {
        return 0.0;
    }
    let poly = if stat <= TAU_STAR {
        polyval(&SMALL_P, stat)
    } else {
        polyval(&LARGE_P, stat)
    };
    norm_cdf(poly)
}

// MacKinnon (2010) finite-sample critical value surfaces, constant-only case:
// c(T) = b0 + b1/T + b2/T² + b3/T³.
const CRIT_1PCT: [f64; 4] = [-3.43035, -6.5393, -16.786, -79.433];
const CRIT_5PCT: [f64; 4] = [-2.86154, -2.8903, -4.234, -40.04];
const CRIT_10PCT: [f64; 4] = [-2.56677, -1.5384, -2.809, 0.0];

fn crit_at(coeffs: &[f64; 4], nobs: usize) -> f64 {
    let t = nobs as f64;
    coeffs[0] + coeffs[1] / t + coeffs[2] / (t * t) + coeffs[3] / (t * t * t)
}

fn mackinnon_crit(nobs: usize) -> CriticalValues {
    CriticalValues {
        pct_1: crit_at(&CRIT_1PCT, nobs),
        pct_5: crit_at(&CRIT_5PCT, nobs),
        pct_10: crit_at(&CRIT_10PCT, nobs),
    }
}
