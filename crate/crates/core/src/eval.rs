//! Rolling-origin evaluation and the five-metric comparison report.
//!
//! One-step evaluation walks the test span week by week: predict the next
//! week, record the pair, append the ground truth, optionally refit. The
//! 13-week variant fits at a set of origins and lets each model run the full
//! horizon on its own predictions. [`compare_models`] wraps both into the
//! familiar table shape with a naive baseline row appended last.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ExogRow, ExogenousMatrix};
use crate::models::{fit, FamilyParams, ForecasterSpec};
use crate::series::WeeklySeries;

/// The paper-style long-range horizon: a quarter, 13 weeks.
pub const DEFAULT_HORIZON: usize = 13;

/// Train/test boundary and refit cadence for rolling evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Last week (inclusive) of the initial training window.
    pub train_end: NaiveDate,
    /// Last week (inclusive) of the test span.
    pub test_end: NaiveDate,
    /// Test steps between refits; [`SplitSpec::FIT_ONCE`] disables refits.
    #[serde(default = "default_refit_interval")]
    pub refit_interval: u32,
}

fn default_refit_interval() -> u32 {
    1
}

impl SplitSpec {
    /// Sentinel interval meaning "fit once at `train_end`, never refit".
    pub const FIT_ONCE: u32 = u32::MAX;

    pub fn new(train_end: NaiveDate, test_end: NaiveDate) -> Self {
        Self {
            train_end,
            test_end,
            refit_interval: default_refit_interval(),
        }
    }

    pub fn with_refit_interval(mut self, interval: u32) -> Self {
        self.refit_interval = interval;
        self
    }

    pub fn fit_once(self) -> Self {
        self.with_refit_interval(Self::FIT_ONCE)
    }

    /// Series-independent sanity checks, for validating configuration before
    /// any data is touched.
    pub fn validate(&self) -> Result<()> {
        if self.refit_interval == 0 {
            return Err(Error::InvalidSpec("refit_interval must be ≥ 1".into()));
        }
        if self.train_end >= self.test_end {
            return Err(Error::InvalidRange(format!(
                "train_end {} must precede test_end {}",
                self.train_end, self.test_end
            )));
        }
        Ok(())
    }

    /// Resolves both boundary dates against `series`, returning their
    /// indices.
    fn resolve(&self, series: &WeeklySeries) -> Result<(usize, usize)> {
        if self.refit_interval == 0 {
            return Err(Error::InvalidSpec("refit_interval must be ≥ 1".into()));
        }
        let train_idx = series.index_of(self.train_end).ok_or(Error::UnknownWeek {
            week: self.train_end,
        })?;
        let test_idx = series.index_of(self.test_end).ok_or(Error::UnknownWeek {
            week: self.test_end,
        })?;
        if train_idx >= test_idx {
            return Err(Error::InvalidRange(format!(
                "train_end {} must precede test_end {}",
                self.train_end, self.test_end
            )));
        }
        Ok((train_idx, test_idx))
    }
}

/// One evaluated test week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub week_start: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

/// One-step predictions over the whole test span, in week order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub model_label: String,
    pub rows: Vec<TraceRow>,
}

/// The five Table-2 metrics for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Root mean squared error.
    pub rmse: f64,
    /// Coefficient of determination; `NaN` (serialized as `null`) when the
    /// actuals are constant.
    #[serde(with = "nullable_f64")]
    pub r_squared: f64,
    /// Mean absolute percentage error (per-week actual as denominator).
    pub error_pct: f64,
    /// Median absolute error (the paper's "MAE").
    pub median_abs_error: f64,
    /// Population standard deviation of the errors.
    pub error_std: f64,
}

/// Serializes non-finite floats as JSON `null` and reads `null` back as NaN.
mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// A 13-step recursive forecast from one origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginForecast {
    /// Last observed week the fit conditioned on.
    pub origin_week: NaiveDate,
    /// `(actual, predicted)` for steps 1..=horizon past the origin.
    pub pairs: Vec<(f64, f64)>,
}

/// Multi-origin long-horizon forecasts plus the Fig.-5-style pooled error
/// curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonTrace {
    pub model_label: String,
    pub per_origin: Vec<OriginForecast>,
    /// Entry `k`: mean `|e|/actual` pooled over every origin and every step
    /// `1..=k+1` — the running cumulative error percentage.
    pub cumulative_error_pct: Vec<f64>,
}

/// Checks that an exogenous matrix covers every week of the series, so
/// future covariate rows exist for each test week.
fn check_exog_cover(
    spec: &ForecasterSpec,
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
) -> Result<()> {
    if let Some(m) = exog.filter(|_| spec.use_exogenous) {
        if m.len() != series.len() {
            return Err(Error::Alignment(format!(
                "exogenous matrix has {} rows but the series has {} weeks",
                m.len(),
                series.len()
            )));
        }
    }
    Ok(())
}

/// Rolling one-step evaluation.
///
/// For each test week `t`: the model (fit on everything through `t − 1`,
/// refreshed on its refit cadence) predicts one step; the pair is recorded
/// and the ground truth appended to the working history. Between refits the
/// model still observes every actual, so recurrence state and lag inputs
/// stay current even when the fitted parameters do not. The cadence is the
/// model's [`ForecasterSpec::effective_refit_interval`] resolved against the
/// split's interval.
pub fn rolling_evaluate(
    spec: &ForecasterSpec,
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
    split: &SplitSpec,
) -> Result<PredictionTrace> {
    let (train_idx, test_idx) = split.resolve(series)?;
    check_exog_cover(spec, series, exog)?;
    let exog = exog.filter(|_| spec.use_exogenous);
    let interval = spec.effective_refit_interval(split.refit_interval);

    let initial = series.prefix(train_idx + 1)?;
    let initial_exog = exog.map(|m| m.prefix(train_idx + 1)).transpose()?;
    let mut model = fit(spec, &initial, initial_exog.as_ref())?;

    let values = series.values();
    let week_starts = series.week_starts();
    let mut rows = Vec::with_capacity(test_idx - train_idx);
    for (step, t) in (train_idx + 1..=test_idx).enumerate() {
        let refit_due = interval != SplitSpec::FIT_ONCE
            && step > 0
            && step % interval as usize == 0;
        if refit_due {
            let history = series.prefix(t)?;
            let history_exog = exog.map(|m| m.prefix(t)).transpose()?;
            model.refit(&history, history_exog.as_ref())?;
        }
        let future_row = exog.map(|m| [*m.row(t)]);
        let predicted = model.predict(1, future_row.as_ref().map(<[ExogRow; 1]>::as_slice))?[0];
        rows.push(TraceRow {
            week_start: week_starts[t],
            actual: values[t],
            predicted,
        });
        model.observe(values[t], exog.map(|m| *m.row(t)))?;
    }
    Ok(PredictionTrace {
        model_label: spec.label(),
        rows,
    })
}

/// Computes the five-metric report for a trace.
///
/// Constant actuals leave R² undefined; it is reported as NaN (with a
/// warning) while the other metrics are still computed. `error_pct` assumes
/// strictly positive actuals, which ingestion guarantees for bug counts.
pub fn compute_metrics(trace: &PredictionTrace) -> Result<MetricsReport> {
    let n = trace.rows.len();
    if n == 0 {
        return Err(Error::InsufficientData {
            required: 1,
            actual: 0,
        });
    }
    let nf = n as f64;
    let errors: Vec<f64> = trace.rows.iter().map(|r| r.actual - r.predicted).collect();

    let ss_res: f64 = errors.iter().map(|e| e * e).sum();
    let rmse = (ss_res / nf).sqrt();

    let mean_actual = trace.rows.iter().map(|r| r.actual).sum::<f64>() / nf;
    let ss_tot: f64 = trace
        .rows
        .iter()
        .map(|r| (r.actual - mean_actual) * (r.actual - mean_actual))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        log::warn!(
            "actuals are constant in the {} trace: R² is undefined",
            trace.model_label
        );
        f64::NAN
    };

    let error_pct = trace
        .rows
        .iter()
        .zip(&errors)
        .map(|(r, e)| e.abs() / r.actual)
        .sum::<f64>()
        / nf;

    let mut abs_errors: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs_errors.sort_by(|a, b| a.total_cmp(b));
    let median_abs_error = if n % 2 == 1 {
        abs_errors[n / 2]
    } else {
        0.5 * (abs_errors[n / 2 - 1] + abs_errors[n / 2])
    };

    let mean_error = errors.iter().sum::<f64>() / nf;
    let error_std = (errors
        .iter()
        .map(|e| (e - mean_error) * (e - mean_error))
        .sum::<f64>()
        / nf)
        .sqrt();

    Ok(MetricsReport {
        rmse,
        r_squared,
        error_pct,
        median_abs_error,
        error_std,
    })
}

/// Long-horizon evaluation: fit at each origin, then predict `horizon` steps
/// recursively with no intermediate ground-truth injection.
///
/// Origins start at `train_end` and advance by `stride` (13 for
/// non-overlapping quarters, the default elsewhere). Origins whose window
/// would cross `test_end` are dropped with a warning; dropping all of them is
/// an error.
pub fn multi_horizon_evaluate(
    spec: &ForecasterSpec,
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
    split: &SplitSpec,
    horizon: usize,
    stride: usize,
) -> Result<HorizonTrace> {
    if horizon == 0 || stride == 0 {
        return Err(Error::InvalidSpec(
            "horizon and stride must be ≥ 1".into(),
        ));
    }
    let (train_idx, test_idx) = split.resolve(series)?;
    check_exog_cover(spec, series, exog)?;
    let exog = exog.filter(|_| spec.use_exogenous);

    let mut origins = Vec::new();
    let mut dropped = 0usize;
    let mut origin = train_idx;
    while origin < test_idx {
        if origin + horizon <= test_idx {
            origins.push(origin);
        } else {
            dropped += 1;
        }
        origin += stride;
    }
    if dropped > 0 {
        log::warn!(
            "dropped {dropped} origin(s) with fewer than {horizon} weeks left before test_end"
        );
    }
    if origins.is_empty() {
        return Err(Error::InsufficientData {
            required: horizon,
            actual: test_idx - train_idx,
        });
    }

    let values = series.values();
    let week_starts = series.week_starts();
    let mut per_origin = Vec::with_capacity(origins.len());
    for &o in &origins {
        let history = series.prefix(o + 1)?;
        let history_exog = exog.map(|m| m.prefix(o + 1)).transpose()?;
        let model = fit(spec, &history, history_exog.as_ref())?;
        let future: Option<Vec<ExogRow>> = exog.map(|m| m.rows()[o + 1..=o + horizon].to_vec());
        let predictions = model.predict(horizon, future.as_deref())?;
        let pairs = (0..horizon)
            .map(|k| (values[o + 1 + k], predictions[k]))
            .collect();
        per_origin.push(OriginForecast {
            origin_week: week_starts[o],
            pairs,
        });
    }

    let mut cumulative_error_pct = Vec::with_capacity(horizon);
    let mut pooled_sum = 0.0;
    let mut pooled_n = 0usize;
    for k in 0..horizon {
        for origin in &per_origin {
            let (actual, predicted) = origin.pairs[k];
            pooled_sum += (actual - predicted).abs() / actual;
            pooled_n += 1;
        }
        cumulative_error_pct.push(pooled_sum / pooled_n as f64);
    }

    Ok(HorizonTrace {
        model_label: spec.label(),
        per_origin,
        cumulative_error_pct,
    })
}

/// One row of the comparison table: metrics on success, the error message of
/// the failed evaluation otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Labels of the best-scoring model per metric. R² is best when largest;
/// every other metric when smallest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BestByMetric {
    pub rmse: Option<String>,
    pub r_squared: Option<String>,
    pub error_pct: Option<String>,
    pub median_abs_error: Option<String>,
    pub error_std: Option<String>,
}

/// The Table-2-shaped comparison: one row per requested model in input
/// order, then the naive baseline as the final `Base` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub best: BestByMetric,
}

impl ComparisonTable {
    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Evaluates every spec (plus the appended naive baseline) with
/// [`rolling_evaluate`] and assembles the metric table.
///
/// Per-model failures do not abort the run; the failed row carries the error
/// message instead of metrics. Models are independent and evaluated in
/// parallel; row order is the input order regardless of scheduling.
pub fn compare_models(
    specs: &[ForecasterSpec],
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
    split: &SplitSpec,
) -> Result<ComparisonTable> {
    compare_models_with_traces(specs, series, exog, split).map(|(table, _)| table)
}

/// [`compare_models`], additionally returning each successful row's
/// prediction trace (aligned with `table.rows`; `None` where the row
/// failed). This is what report writers want: metrics and the plot-ready
/// traces from a single evaluation pass.
pub fn compare_models_with_traces(
    specs: &[ForecasterSpec],
    series: &WeeklySeries,
    exog: Option<&ExogenousMatrix>,
    split: &SplitSpec,
) -> Result<(ComparisonTable, Vec<Option<PredictionTrace>>)> {
    if specs.is_empty() {
        return Err(Error::InvalidSpec(
            "compare_models needs at least one forecaster".into(),
        ));
    }
    let mut all = specs.to_vec();
    all.push(ForecasterSpec {
        label: Some("Base".into()),
        ..ForecasterSpec::new(FamilyParams::Naive)
    });

    let evaluated: Vec<(ComparisonRow, Option<PredictionTrace>)> = all
        .par_iter()
        .map(|spec| {
            match rolling_evaluate(spec, series, exog, split)
                .and_then(|trace| compute_metrics(&trace).map(|m| (trace, m)))
            {
                Ok((trace, metrics)) => (
                    ComparisonRow {
                        label: spec.label(),
                        metrics: Some(metrics),
                        error: None,
                    },
                    Some(trace),
                ),
                Err(e) => (
                    ComparisonRow {
                        label: spec.label(),
                        metrics: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let (rows, traces): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();

    let best = BestByMetric {
        rmse: best_label(&rows, |m| m.rmse, false),
        r_squared: best_label(&rows, |m| m.r_squared, true),
        error_pct: best_label(&rows, |m| m.error_pct, false),
        median_abs_error: best_label(&rows, |m| m.median_abs_error, false),
        error_std: best_label(&rows, |m| m.error_std, false),
    };
    Ok((ComparisonTable { rows, best }, traces))
}

/// First row holding the extreme finite value of `key` (ties keep the
/// earliest row, so the ordering is deterministic).
fn best_label(
    rows: &[ComparisonRow],
    key: impl Fn(&MetricsReport) -> f64,
    largest: bool,
) -> Option<String> {
    let mut best: Option<(&str, f64)> = None;
    for row in rows {
        let Some(metrics) = &row.metrics else { continue };
        let value = key(metrics);
        if !value.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, incumbent)) => {
                if largest {
                    value > incumbent
                } else {
                    value < incumbent
                }
            }
        };
        if better {
            best = Some((&row.label, value));
        }
    }
    best.map(|(label, _)| label.to_string())
}
