//! ARIMA(p, d, 0) by conditional least squares.
//!
//! With no moving-average terms the conditional-likelihood maximum is an
//! ordinary least-squares problem: difference the series `d` times, regress
//! each value on its `p` predecessors (plus intercept and any exogenous
//! columns), conditioning on the first `p` differenced values. Forecasts are
//! produced on the differenced scale and integrated back.

use nalgebra::{DMatrix, DVector};

use super::ArimaParams;
use crate::error::{Error, Result};
use crate::features::{ExogRow, ExogenousMatrix};
use crate::ols::ols;

/// Coefficients and residual variance of a conditional-least-squares fit.
///
/// `std_errors` is aligned with `[intercept, ar_coefs..., exog_coefs...]`.
#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub intercept: f64,
    pub ar_coefs: Vec<f64>,
    pub exog_coefs: Vec<f64>,
    pub sigma2: f64,
    pub std_errors: Vec<f64>,
}

/// Fitted ARIMA state: orders plus the regression result.
#[derive(Debug, Clone)]
pub(crate) struct ArimaState {
    pub d: usize,
    pub p: usize,
    pub fit: ArimaFit,
}

pub(super) fn fit_state(
    values: &[f64],
    params: &ArimaParams,
    exog: Option<&ExogenousMatrix>,
) -> Result<ArimaState> {
    let fit = arima_fit_css(values, params, exog)?;
    Ok(ArimaState {
        d: params.d,
        p: params.p,
        fit,
    })
}

fn difference(values: &[f64], d: usize) -> Vec<f64> {
    let mut w = values.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|pair| pair[1] - pair[0]).collect();
    }
    w
}

/// Fits ARIMA(p, d, 0) with optional exogenous columns by OLS on the
/// `d`-times-differenced series. Exogenous rows stay on the original weekly
/// index (only the target is differenced).
pub fn arima_fit_css(
    values: &[f64],
    params: &ArimaParams,
    exog: Option<&ExogenousMatrix>,
) -> Result<ArimaFit> {
    if params.q > 0 {
        return Err(Error::InvalidSpec(format!(
            "moving-average terms are unsupported (q = {}, must be 0)",
            params.q
        )));
    }
    let n_exog = exog.map_or(0, |m| {
        debug_assert!(!m.is_empty());
        ExogRow::FEATURE_NAMES.len()
    });
    if let Some(m) = exog {
        if m.len() != values.len() {
            return Err(Error::Alignment(format!(
                "exogenous matrix has {} rows but the series has {} values",
                m.len(),
                values.len()
            )));
        }
    }
    let p = params.p;
    let d = params.d;
    let w = difference(values, d);
    // The differenced length must exceed p + exog columns + 2, and leave at
    // least one residual degree of freedom (rows > columns).
    let min_w = (p + n_exog + 3).max(2 * p + n_exog + 2);
    if w.len() < min_w {
        return Err(Error::InsufficientData {
            required: min_w + d,
            actual: values.len(),
        });
    }

    let rows = w.len() - p;
    let cols = 1 + p + n_exog;
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        let t = p + r;
        if c == 0 {
            1.0
        } else if c <= p {
            w[t - c]
        } else {
            // Exogenous covariates of the target week (raw index t + d).
            exog.expect("n_exog > 0 implies matrix").row(t + d).as_features()[c - 1 - p]
        }
    });
    let target = DVector::from_fn(rows, |r, _| w[p + r]);
    let fit = ols(&design, &target)?;

    Ok(ArimaFit {
        intercept: fit.coef[0],
        ar_coefs: fit.coef[1..=p].to_vec(),
        exog_coefs: fit.coef[1 + p..].to_vec(),
        sigma2: fit.sigma2(),
        std_errors: fit.std_errors,
    })
}

impl ArimaState {
    /// One-step forecast given the raw working history (oldest first).
    pub fn predict_next(&self, history: &[f64], exog_row: Option<&ExogRow>) -> f64 {
        // Last value of each difference level 0..d fuels the integration.
        let mut level = history.to_vec();
        let mut level_lasts = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            level_lasts.push(*level.last().expect("history nonempty"));
            level = difference(&level, 1);
        }

        let mut w_hat = self.fit.intercept;
        for (i, a) in self.fit.ar_coefs.iter().enumerate() {
            w_hat += a * level[level.len() - 1 - i];
        }
        if let Some(row) = exog_row {
            for (b, x) in self.fit.exog_coefs.iter().zip(row.as_features()) {
                w_hat += b * x;
            }
        }

        // Integrate back up: each level's next value adds its last value.
        let mut y = w_hat;
        for last in level_lasts.iter().rev() {
            y += last;
        }
        y
    }
}
