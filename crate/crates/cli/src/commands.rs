//! The subcommand implementations behind `main`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use bugcast_core::diagnostics::{acf, adf_test, default_max_lag, pacf, suggest_orders, AdfResult};
use bugcast_core::eval::{
    compare_models_with_traces, multi_horizon_evaluate, ComparisonTable, HorizonTrace,
    PredictionTrace, SplitSpec, DEFAULT_HORIZON,
};
use bugcast_core::features::{build_exogenous, build_exogenous_for_weeks, ExogenousMatrix};
use bugcast_core::ingest::{
    self, fetch_bug_counts, fetch_bug_counts_with_cache, load_outlier_spec, load_release_calendar,
    load_series_csv, remove_outliers, save_series_csv,
};
use bugcast_core::models::{fit, load_model, save_model, FamilyParams, FittedModel, ForecasterSpec};
use bugcast_core::series::{ReleaseCalendar, WeeklySeries};
use bugcast_core::{Error, Result};

use crate::config::RunConfig;

/// Largest lag written to `correlogram.csv`; clamped for short series so the
/// partial autocorrelation solve stays well-posed.
const CORRELOGRAM_LAG: usize = 20;

/// Everything `evaluate` writes to `report.json`, and everything `report`
/// reads back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDoc {
    pub seed: u64,
    pub split: SplitSpec,
    pub table: ComparisonTable,
}

/// Writes `body` via a sibling temp file and an atomic rename, so readers
/// never observe a half-written artifact.
fn atomic_write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads the configured snapshot and applies the outlier replacements, if a
/// replacement file is configured.
fn load_series(config: &RunConfig) -> Result<WeeklySeries> {
    let Some(path) = &config.data.series_csv else {
        return Err(Error::InvalidSpec(
            "data.series_csv is not set; run `bugcast fetch` first or point the config at a snapshot"
                .into(),
        ));
    };
    let mut series = load_series_csv(path, config.data.label)?;
    if let Some(outliers) = &config.data.outliers_csv {
        let spec = load_outlier_spec(outliers)?;
        series = remove_outliers(&series, &spec)?;
        log::info!("applied {} outlier replacement(s)", spec.removals.len());
    }
    Ok(series)
}

fn load_calendar(config: &RunConfig) -> Result<Option<ReleaseCalendar>> {
    config
        .data
        .releases_csv
        .as_deref()
        .map(load_release_calendar)
        .transpose()
}

/// Downloads raw records, buckets them into the weekly series and writes
/// `series.csv` plus a short `fetch.log`.
pub fn cmd_fetch(config: &RunConfig, out_dir: &Path, from: NaiveDate, to: NaiveDate) -> Result<()> {
    let endpoint = std::env::var("BUGCAST_ENDPOINT")
        .ok()
        .or_else(|| config.data.endpoint.clone())
        .unwrap_or_else(ingest::default_endpoint);
    log::info!("fetching {from}..{to} from {endpoint}");
    let records = match &config.data.cache_dir {
        Some(dir) => fetch_bug_counts_with_cache(&endpoint, (from, to), config.data.page_size, dir)?,
        None => fetch_bug_counts(&endpoint, (from, to), config.data.page_size)?,
    };
    let series = ingest::aggregate_weekly(&records, (from, to), config.data.label)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let series_path = out_dir.join("series.csv");
    save_series_csv(&series, &series_path)?;

    let total: u64 = series.counts().iter().map(|&c| u64::from(c)).sum();
    let mut log_body = String::new();
    let _ = writeln!(log_body, "endpoint: {endpoint}");
    let _ = writeln!(log_body, "range: {from}..{to}");
    let _ = writeln!(log_body, "label: {:?}", config.data.label);
    let _ = writeln!(log_body, "records: {}", records.len());
    let _ = writeln!(log_body, "weeks: {}", series.len());
    let _ = writeln!(log_body, "first_week: {}", series.first_week());
    let _ = writeln!(log_body, "last_week: {}", series.last_week());
    let _ = writeln!(log_body, "total: {total}");
    atomic_write(&out_dir.join("fetch.log"), &log_body)?;

    log::info!(
        "wrote {} ({} weeks, {} events)",
        series_path.display(),
        series.len(),
        total
    );
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticsDoc {
    weeks: usize,
    first_week: NaiveDate,
    last_week: NaiveDate,
    adf: AdfResult,
    confidence_band: f64,
    /// Lags 1..=max whose ACF/PACF lies outside the white-noise band.
    acf_outside_band: Vec<usize>,
    pacf_outside_band: Vec<usize>,
    suggested_p: usize,
    suggested_q: usize,
}

/// Runs the stationarity battery and writes `diagnostics.json` plus a
/// plot-ready `correlogram.csv`.
pub fn cmd_diagnose(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let series = load_series(config)?;
    let adf = adf_test(&series, default_max_lag(series.len()))?;
    let max_lag = CORRELOGRAM_LAG.min(series.len() / 2 - 1);
    let ac = acf(&series, max_lag)?;
    let pc = pacf(&series, max_lag)?;
    let (p, q) = suggest_orders(&ac, &pc);

    let outside = |c: &bugcast_core::diagnostics::Correlogram| {
        (1..=c.max_lag()).filter(|&k| c.outside_band(k)).collect::<Vec<_>>()
    };
    log::info!(
        "ADF statistic {:.4}, p-value {:.4} ({} lag(s)): {}",
        adf.statistic,
        adf.p_value,
        adf.chosen_lag,
        if adf.reject_at_5pct {
            "reject unit root at 5%"
        } else {
            "cannot reject unit root at 5%"
        }
    );
    log::info!("suggested orders from the correlograms: p = {p}, q = {q}");

    let doc = DiagnosticsDoc {
        weeks: series.len(),
        first_week: series.first_week(),
        last_week: series.last_week(),
        confidence_band: ac.confidence_band,
        acf_outside_band: outside(&ac),
        pacf_outside_band: outside(&pc),
        suggested_p: p,
        suggested_q: q,
        adf,
    };
    let json_path = out_dir.join("diagnostics.json");
    atomic_write(
        &json_path,
        &(serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidSpec(format!("serializing diagnostics: {e}")))?
            + "\n"),
    )?;

    let mut csv = String::from("lag,acf,pacf,band\n");
    for k in 0..=max_lag {
        let _ = writeln!(csv, "{k},{},{},{}", ac.values[k], pc.values[k], ac.confidence_band);
    }
    atomic_write(&out_dir.join("correlogram.csv"), &csv)?;
    log::info!("wrote {} and correlogram.csv", json_path.display());
    Ok(())
}

fn write_trace_csv(out_dir: &Path, trace: &PredictionTrace) -> Result<()> {
    let mut csv = String::from("week_start,actual,predicted\n");
    for row in &trace.rows {
        let _ = writeln!(csv, "{},{},{}", row.week_start, row.actual, row.predicted);
    }
    atomic_write(&out_dir.join(format!("trace_{}.csv", trace.model_label)), &csv)
}

fn write_horizon_csv(out_dir: &Path, trace: &HorizonTrace) -> Result<()> {
    let mut csv = String::from("step,cumulative_error_pct\n");
    for (i, value) in trace.cumulative_error_pct.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, value);
    }
    atomic_write(
        &out_dir.join(format!("horizon_{}.csv", trace.model_label)),
        &csv,
    )
}

/// Rolling one-step comparison of every configured model plus the naive
/// baseline, followed by the 13-week horizon sweep. Writes `report.json`,
/// one `trace_<label>.csv` and one `horizon_<label>.csv` per model, and
/// prints the comparison table.
pub fn cmd_evaluate(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let specs = config.seeded_models(seed);
    if specs.is_empty() {
        return Err(Error::InvalidSpec(
            "the config lists no models to evaluate".into(),
        ));
    }
    let series = load_series(config)?;
    let calendar = load_calendar(config)?;
    let exog = calendar.as_ref().map(|c| build_exogenous(&series, c));

    log::info!(
        "evaluating {} model(s) plus the baseline over {}..{}",
        specs.len(),
        config.split.train_end,
        config.split.test_end
    );
    let (table, traces) =
        compare_models_with_traces(&specs, &series, exog.as_ref(), &config.split)?;
    for trace in traces.iter().flatten() {
        write_trace_csv(out_dir, trace)?;
    }

    // The horizon sweep refits per origin, so run the models in parallel and
    // keep input order for deterministic output.
    let mut horizon_specs = specs.clone();
    horizon_specs.push(ForecasterSpec {
        label: Some("Base".into()),
        ..ForecasterSpec::new(FamilyParams::Naive)
    });
    let horizons: Vec<_> = horizon_specs
        .par_iter()
        .map(|spec| {
            multi_horizon_evaluate(
                spec,
                &series,
                exog.as_ref(),
                &config.split,
                DEFAULT_HORIZON,
                DEFAULT_HORIZON,
            )
        })
        .collect();
    for (spec, result) in horizon_specs.iter().zip(&horizons) {
        match result {
            Ok(trace) => write_horizon_csv(out_dir, trace)?,
            Err(e) => log::warn!("horizon sweep skipped for {}: {e}", spec.label()),
        }
    }

    let doc = ReportDoc {
        seed: config.effective_seed(seed),
        split: config.split,
        table,
    };
    let report_path = out_dir.join("report.json");
    atomic_write(
        &report_path,
        &(serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidSpec(format!("serializing report: {e}")))?
            + "\n"),
    )?;
    log::info!("wrote {}", report_path.display());
    println!("{}", render_report(&doc));
    Ok(())
}

/// Fits one configured model (or loads a saved one) and forecasts the next
/// `horizon` weeks past the end of the series.
pub fn cmd_forecast(
    config: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
    horizon: usize,
    model_label: Option<&str>,
    model_file: Option<&Path>,
    save_as: Option<&Path>,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidSpec("forecast horizon must be ≥ 1".into()));
    }
    let series = load_series(config)?;
    let calendar = load_calendar(config)?;

    let model: FittedModel = match model_file {
        Some(path) => {
            let model = load_model(path)?;
            log::info!("loaded {} from {}", model.spec().label(), path.display());
            model
        }
        None => {
            let specs = config.seeded_models(seed);
            let spec = match model_label {
                Some(label) => specs
                    .iter()
                    .find(|s| s.label() == label)
                    .cloned()
                    .ok_or_else(|| {
                        Error::InvalidSpec(format!("no model labelled `{label}` in the config"))
                    })?,
                None => specs.first().cloned().ok_or_else(|| {
                    Error::InvalidSpec("the config lists no models to fit".into())
                })?,
            };
            let exog = if spec.use_exogenous {
                calendar.as_ref().map(|c| build_exogenous(&series, c))
            } else {
                None
            };
            log::info!("fitting {} on {} weeks", spec.label(), series.len());
            fit(&spec, &series, exog.as_ref())?
        }
    };

    let weeks: Vec<NaiveDate> = (1..=horizon as i64)
        .map(|k| series.last_week() + Duration::weeks(k))
        .collect();
    let future: Option<ExogenousMatrix> = if model.spec().use_exogenous {
        calendar
            .as_ref()
            .map(|c| build_exogenous_for_weeks(&weeks, c))
    } else {
        None
    };
    let predicted = model.predict(horizon, future.as_ref().map(|m| m.rows()))?;

    let mut csv = String::from("week_start,predicted\n");
    for (week, value) in weeks.iter().zip(&predicted) {
        let _ = writeln!(csv, "{week},{value}");
    }
    let path = out_dir.join("forecast.csv");
    atomic_write(&path, &csv)?;
    log::info!(
        "wrote {} ({} step(s) from {})",
        path.display(),
        horizon,
        series.last_week()
    );

    if let Some(path) = save_as {
        save_model(&model, path)?;
        log::info!("saved fitted model to {}", path.display());
    }
    Ok(())
}

/// Pretty-prints a previously written `report.json`.
pub fn cmd_report(out_dir: &Path, input: Option<&Path>) -> Result<()> {
    let path: PathBuf = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("report.json"));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let doc: ReportDoc = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidSpec(format!("unreadable report {}: {e}", path.display())))?;
    println!("{}", render_report(&doc));
    Ok(())
}

/// Renders the comparison table with a `*` on the best value per metric
/// (largest R², smallest everywhere else).
pub fn render_report(doc: &ReportDoc) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rolling one-step comparison — train_end {}, test_end {}, refit every {} step(s), seed {}",
        doc.split.train_end, doc.split.test_end, doc.split.refit_interval, doc.seed
    );
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "model", "rmse", "r2", "err_pct", "mae", "std"
    );
    let best = &doc.table.best;
    let cell = |value: f64, starred: bool| -> String {
        let text = if value.is_finite() {
            format!("{value:.4}")
        } else {
            "n/a".to_string()
        };
        if starred {
            format!("{text}*")
        } else {
            text
        }
    };
    for row in &doc.table.rows {
        match &row.metrics {
            Some(m) => {
                let starred = |choice: &Option<String>| choice.as_deref() == Some(row.label.as_str());
                let _ = writeln!(
                    out,
                    "{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                    row.label,
                    cell(m.rmse, starred(&best.rmse)),
                    cell(m.r_squared, starred(&best.r_squared)),
                    cell(m.error_pct, starred(&best.error_pct)),
                    cell(m.median_abs_error, starred(&best.median_abs_error)),
                    cell(m.error_std, starred(&best.error_std)),
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<10} failed: {}",
                    row.label,
                    row.error.as_deref().unwrap_or("unknown error")
                );
            }
        }
    }
    let _ = write!(out, "* best per column");
    out
}
