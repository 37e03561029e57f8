//! The forecaster families behind a single fit/predict interface.
//!
//! Six families — naive baseline, exponential smoothing (EXP), weighted
//! moving average (WMA), ARIMA, random forest (RF) and LSTM — with optional
//! exogenous-covariate variants of the last three (ARIMAx, RFx, LSTMx) make
//! up the nine configurable forecasters. All are implemented from first
//! principles; fitting is deterministic for a fixed seed.

mod arima;
mod lstm;
mod rf;
mod serialize;
mod simple;

pub use arima::{arima_fit_css, ArimaFit};
pub use lstm::{lstm_cell_step, LstmWeights};
pub use rf::{rf_fit, tree_build, Forest, RegressionTree};
pub use serialize::{load_model, save_model, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ExogRow, ExogenousMatrix};
use crate::series::WeeklySeries;

/// Exponential-smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpParams {
    pub alpha: f64,
}

impl Default for ExpParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

/// Weighted-moving-average parameters. Weights are listed newest-first and
/// are normalized to sum 1 unless `normalize` is disabled (the raw-weight
/// mode keeps them exactly as configured).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WmaParams {
    pub weights: Vec<f64>,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

impl Default for WmaParams {
    fn default() -> Self {
        Self {
            weights: vec![0.66, 0.33],
            normalize: true,
        }
    }
}

/// ARIMA orders. Only `q = 0` is supported (conditional least squares is
/// exact there); moving-average terms are rejected at validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaParams {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for ArimaParams {
    fn default() -> Self {
        Self { p: 2, d: 0, q: 0 }
    }
}

/// How many candidate features each random-forest split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(total features))` per split.
    Sqrt,
    /// Every feature at every split.
    All,
}

/// Random-forest parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub lag_count: usize,
    pub min_samples_leaf: usize,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            lag_count: 4,
            min_samples_leaf: 2,
        }
    }
}

/// LSTM parameters. `refit_epochs` controls how long warm-started refits
/// train during rolling evaluation (a full `epochs` run happens once, at the
/// initial fit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmParams {
    pub units: usize,
    pub epochs: usize,
    pub window: usize,
    pub learning_rate: f64,
    #[serde(default = "default_refit_epochs")]
    pub refit_epochs: usize,
}

fn default_refit_epochs() -> usize {
    10
}

impl Default for LstmParams {
    fn default() -> Self {
        Self {
            units: 100,
            epochs: 50,
            window: 13,
            learning_rate: 1e-3,
            refit_epochs: default_refit_epochs(),
        }
    }
}

/// Model family plus its family-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Naive,
    Exp(ExpParams),
    Wma(WmaParams),
    Arima(ArimaParams),
    Rf(RfParams),
    Lstm(LstmParams),
}

impl FamilyParams {
    /// Family name without the exogenous suffix.
    pub fn family_name(&self) -> &'static str {
        match self {
            FamilyParams::Naive => "Naive",
            FamilyParams::Exp(_) => "EXP",
            FamilyParams::Wma(_) => "WMA",
            FamilyParams::Arima(_) => "ARIMA",
            FamilyParams::Rf(_) => "RF",
            FamilyParams::Lstm(_) => "LSTM",
        }
    }
}

/// A fully specified forecaster: family, parameters, covariate switch, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    #[serde(flatten)]
    pub params: FamilyParams,
    #[serde(default)]
    pub use_exogenous: bool,
    #[serde(default)]
    pub seed: u64,
    /// Optional display label; defaults to the family name plus an `x`
    /// suffix for exogenous variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Steps between refits during rolling evaluation. Unset, LSTM models
    /// refit every fourth step (warm-started, so per-step retraining stays
    /// affordable) and every other family follows the split's interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit_interval: Option<u32>,
}

impl ForecasterSpec {
    pub fn new(params: FamilyParams) -> Self {
        Self {
            params,
            use_exogenous: false,
            seed: 0,
            label: None,
            refit_interval: None,
        }
    }

    pub fn with_exogenous(mut self) -> Self {
        self.use_exogenous = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_refit_interval(mut self, interval: u32) -> Self {
        self.refit_interval = Some(interval);
        self
    }

    /// Refit cadence for rolling evaluation: the explicit override if set,
    /// otherwise every fourth step for LSTM and the evaluation-wide
    /// `fallback` for everything else.
    pub fn effective_refit_interval(&self, fallback: u32) -> u32 {
        self.refit_interval.unwrap_or(match self.params {
            FamilyParams::Lstm(_) => 4,
            _ => fallback,
        })
    }

    /// Display label: explicit label if set, else e.g. `ARIMA` / `ARIMAx`.
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let base = self.params.family_name();
        if self.use_exogenous {
            format!("{base}x")
        } else {
            base.to_string()
        }
    }

    /// Checks parameter ranges and the family/exogenous compatibility rules.
    pub fn validate(&self) -> Result<()> {
        match &self.params {
            FamilyParams::Naive | FamilyParams::Exp(_) | FamilyParams::Wma(_) => {
                if self.use_exogenous {
                    return Err(Error::InvalidSpec(format!(
                        "{} does not support exogenous covariates",
                        self.params.family_name()
                    )));
                }
            }
            _ => {}
        }
        match &self.params {
            FamilyParams::Naive => {}
            FamilyParams::Exp(p) => {
                if !(p.alpha > 0.0 && p.alpha <= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "EXP alpha must lie in (0, 1], got {}",
                        p.alpha
                    )));
                }
            }
            FamilyParams::Wma(p) => {
                if p.weights.is_empty() {
                    return Err(Error::InvalidSpec("WMA needs at least one weight".into()));
                }
                if p.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "WMA weights must all be positive and finite".into(),
                    ));
                }
            }
            FamilyParams::Arima(p) => {
                if p.q > 0 {
                    return Err(Error::InvalidSpec(format!(
                        "moving-average terms are unsupported (q = {}, must be 0)",
                        p.q
                    )));
                }
            }
            FamilyParams::Rf(p) => {
                if p.n_trees == 0 || p.lag_count == 0 || p.min_samples_leaf == 0 {
                    return Err(Error::InvalidSpec(
                        "RF requires n_trees, lag_count and min_samples_leaf ≥ 1".into(),
                    ));
                }
            }
            FamilyParams::Lstm(p) => {
                if p.units == 0 || p.epochs == 0 || p.window == 0 {
                    return Err(Error::InvalidSpec(
                        "LSTM requires units, epochs and window ≥ 1".into(),
                    ));
                }
                if !(p.learning_rate > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "LSTM learning rate must be positive, got {}",
                        p.learning_rate
                    )));
                }
            }
        }
        if self.refit_interval == Some(0) {
            return Err(Error::InvalidSpec(
                "per-model refit_interval must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    /// Minimum history length the family needs before `fit` succeeds.
    pub fn min_history(&self) -> usize {
        match &self.params {
            FamilyParams::Naive | FamilyParams::Exp(_) => 1,
            FamilyParams::Wma(p) => p.weights.len(),
            FamilyParams::Arima(p) => p.p + p.d + 10,
            FamilyParams::Rf(p) => p.lag_count + 10,
            FamilyParams::Lstm(p) => p.window + 10,
        }
    }
}

/// Family-specific fitted state.
#[derive(Debug, Clone)]
pub(crate) enum ModelState {
    Naive,
    Exp { x_hat: f64 },
    Wma { weights: Vec<f64> },
    Arima(arima::ArimaState),
    Rf(rf::RfState),
    Lstm(lstm::LstmState),
}

/// A trained forecaster together with the history it needs to keep
/// predicting and updating.
#[derive(Debug, Clone)]
pub struct FittedModel {
    spec: ForecasterSpec,
    state: ModelState,
    /// Observed values, oldest first; grows as ground truth arrives.
    tail_values: Vec<f64>,
    /// Covariate rows aligned with `tail_values` (empty for plain models).
    tail_exog: Vec<ExogRow>,
}

/// Fits `spec` on `series`. `exog` must be present iff the spec uses
/// exogenous covariates, aligned row-for-row with the series.
pub fn fit(
    spec: &ForecasterSpec,
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
) -> Result<FittedModel> {
    spec.validate()?;
    check_exog_presence(spec, series.len(), exog)?;
    let min = spec.min_history();
    if series.len() < min {
        return Err(Error::InsufficientData {
            required: min,
            actual: series.len(),
        });
    }
    let values = series.values();
    let state = fit_state(spec, &values, exog)?;
    Ok(FittedModel {
        spec: spec.clone(),
        state,
        tail_values: values,
        tail_exog: exog.map(|m| m.rows().to_vec()).unwrap_or_default(),
    })
}

fn check_exog_presence(
    spec: &ForecasterSpec,
    series_len: usize,
    exog: Option<&ExogenousMatrix>,
) -> Result<()> {
    match (spec.use_exogenous, exog) {
        (true, None) => Err(Error::Alignment(format!(
            "{} requires an exogenous matrix",
            spec.label()
        ))),
        (false, Some(_)) => Err(Error::Alignment(format!(
            "{} does not take exogenous covariates but a matrix was supplied",
            spec.label()
        ))),
        (true, Some(m)) if m.len() != series_len => Err(Error::Alignment(format!(
            "exogenous matrix has {} rows but the series has {} weeks",
            m.len(),
            series_len
        ))),
        _ => Ok(()),
    }
}

/// Fits an LSTM forecaster directly, without the conservative
/// `window + 10` history minimum that [`fit`] applies: any history longer
/// than `window + 1` is accepted (enough for at least one training sample).
pub fn lstm_fit(
    series: &WeeklySeries,
    params: LstmParams,
    exog: Option<&ExogenousMatrix>,
    seed: u64,
) -> Result<FittedModel> {
    let spec = ForecasterSpec {
        use_exogenous: exog.is_some(),
        seed,
        ..ForecasterSpec::new(FamilyParams::Lstm(params))
    };
    spec.validate()?;
    check_exog_presence(&spec, series.len(), exog)?;
    let values = series.values();
    let state = ModelState::Lstm(lstm::fit_state(&values, &params, exog, seed)?);
    Ok(FittedModel {
        spec,
        state,
        tail_values: values,
        tail_exog: exog.map(|m| m.rows().to_vec()).unwrap_or_default(),
    })
}

fn fit_state(
    spec: &ForecasterSpec,
    values: &[f64],
    exog: Option<&ExogenousMatrix>,
) -> Result<ModelState> {
    Ok(match &spec.params {
        FamilyParams::Naive => ModelState::Naive,
        FamilyParams::Exp(p) => ModelState::Exp {
            x_hat: simple::exp_run_recurrence(values, p.alpha),
        },
        FamilyParams::Wma(p) => ModelState::Wma {
            weights: simple::wma_resolve_weights(p),
        },
        FamilyParams::Arima(p) => {
            ModelState::Arima(arima::fit_state(values, p, exog.filter(|_| spec.use_exogenous))?)
        }
        FamilyParams::Rf(p) => ModelState::Rf(rf::fit_state(
            values,
            p,
            exog.filter(|_| spec.use_exogenous),
            spec.seed,
        )?),
        FamilyParams::Lstm(p) => ModelState::Lstm(lstm::fit_state(
            values,
            p,
            exog.filter(|_| spec.use_exogenous),
            spec.seed,
        )?),
    })
}

impl FittedModel {
    pub fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    /// The observed history the model currently conditions on.
    pub fn training_tail(&self) -> &[f64] {
        &self.tail_values
    }

    /// The fitted gate weights, when this is an LSTM model.
    pub fn lstm_weights(&self) -> Option<LstmWeights> {
        match &self.state {
            ModelState::Lstm(s) => Some(s.weights()),
            _ => None,
        }
    }

    /// Forecasts `horizon` steps ahead recursively: each prediction is
    /// appended to a working copy of the history and fed back as a lag
    /// input. Predictions are clamped at 0 from below.
    ///
    /// Exogenous models need `future_exog` with exactly `horizon` rows — the
    /// covariates of the weeks being predicted.
    pub fn predict(&self, horizon: usize, future_exog: Option<&[ExogRow]>) -> Result<Vec<f64>> {
        if horizon == 0 {
            return Ok(Vec::new());
        }
        let future = match (self.spec.use_exogenous, future_exog) {
            (true, Some(rows)) if rows.len() == horizon => Some(rows),
            (true, got) => {
                return Err(Error::Alignment(format!(
                    "{} needs {} future exogenous rows, got {}",
                    self.label(),
                    horizon,
                    got.map_or(0, <[ExogRow]>::len)
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Alignment(format!(
                    "{} does not take exogenous covariates but future rows were supplied",
                    self.label()
                )))
            }
            (false, None) => None,
        };

        let mut out = Vec::with_capacity(horizon);
        match &self.state {
            ModelState::Naive => {
                let last = *self.tail_values.last().expect("non-empty history");
                out = vec![last.max(0.0); horizon];
            }
            ModelState::Exp { x_hat } => {
                // Feeding the prediction back through the recurrence leaves
                // x_hat unchanged, so the forecast is flat.
                out = vec![x_hat.max(0.0); horizon];
            }
            ModelState::Wma { weights } => {
                let mut work = self.tail_values.clone();
                for _ in 0..horizon {
                    let next = simple::wma_next(&work, weights).max(0.0);
                    out.push(next);
                    work.push(next);
                }
            }
            ModelState::Arima(state) => {
                let mut work = self.tail_values.clone();
                for step in 0..horizon {
                    let exog_row = future.map(|rows| &rows[step]);
                    let next = state.predict_next(&work, exog_row).max(0.0);
                    out.push(next);
                    work.push(next);
                }
            }
            ModelState::Rf(state) => {
                let mut work = self.tail_values.clone();
                for step in 0..horizon {
                    let exog_row = future.map(|rows| &rows[step]);
                    let next = state.predict_next(&work, exog_row)?.max(0.0);
                    out.push(next);
                    work.push(next);
                }
            }
            ModelState::Lstm(state) => {
                out = state.predict(&self.tail_values, &self.tail_exog, future, horizon)?;
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(out)
    }

    /// Appends one observed ground-truth value (and its covariates, for
    /// exogenous models). Updates recurrence state where the family has any;
    /// this is a state update, not a refit.
    pub fn observe(&mut self, actual: f64, exog: Option<ExogRow>) -> Result<()> {
        match (self.spec.use_exogenous, exog) {
            (true, Some(row)) => self.tail_exog.push(row),
            (true, None) => {
                return Err(Error::Alignment(format!(
                    "{} needs the covariate row of each observed week",
                    self.label()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Alignment(format!(
                    "{} does not take exogenous covariates",
                    self.label()
                )))
            }
            (false, None) => {}
        }
        self.tail_values.push(actual);
        if let ModelState::Exp { x_hat } = &mut self.state {
            let alpha = match &self.spec.params {
                FamilyParams::Exp(p) => p.alpha,
                _ => unreachable!("EXP state implies EXP params"),
            };
            *x_hat = alpha * actual + (1.0 - alpha) * *x_hat;
        }
        Ok(())
    }

    /// Re-fits the model on `series` (typically the original training data
    /// plus newly observed weeks). LSTM refits warm-start from the current
    /// weights and train for `refit_epochs`; every other family re-fits from
    /// scratch (cheap).
    pub fn refit(&mut self, series: &WeeklySeries, exog: Option<&ExogenousMatrix>) -> Result<()> {
        check_exog_presence(&self.spec, series.len(), exog)?;
        let values = series.values();
        match (&mut self.state, &self.spec.params) {
            (ModelState::Lstm(state), FamilyParams::Lstm(p)) => {
                state.warm_refit(&values, exog, p)?;
            }
            _ => {
                self.state = fit_state(&self.spec, &values, exog)?;
            }
        }
        self.tail_values = values;
        self.tail_exog = exog.map(|m| m.rows().to_vec()).unwrap_or_default();
        Ok(())
    }
}
