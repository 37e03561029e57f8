//! Covariate matrices, supervised lag reframing, and the log-difference
//! transform pair.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ReleaseCalendar, WeeklySeries};

/// Exogenous covariates for one week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExogRow {
    /// 1 when at least one release date falls inside the week, else 0.
    pub branch_release: u8,
    /// Day-of-month bucket of the week start: `1 + (day − 1) / 7`, so 1..=5.
    pub week_of_month: u8,
    pub month_of_year: u8,
    pub year: i32,
}

impl ExogRow {
    /// The row as model-ready numeric features, in declaration order.
    pub fn as_features(&self) -> [f64; 4] {
        [
            self.branch_release as f64,
            self.week_of_month as f64,
            self.month_of_year as f64,
            self.year as f64,
        ]
    }

    /// Column names matching [`ExogRow::as_features`] order.
    pub const FEATURE_NAMES: [&'static str; 4] =
        ["branch_release", "week_of_month", "month_of_year", "year"];
}

/// Per-week covariate rows aligned to a weekly series by week-start date.
#[derive(Debug, Clone, Serialize)]
pub struct ExogenousMatrix {
    week_starts: Vec<NaiveDate>,
    rows: Vec<ExogRow>,
}

impl ExogenousMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn week_starts(&self) -> &[NaiveDate] {
        &self.week_starts
    }

    pub fn rows(&self) -> &[ExogRow] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &ExogRow {
        &self.rows[index]
    }

    /// A new matrix holding only the first `len` rows (mirrors
    /// [`WeeklySeries::prefix`] for rolling-train windows).
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::Alignment(format!(
                "prefix length {len} out of range for matrix of {} rows",
                self.len()
            )));
        }
        Ok(Self {
            week_starts: self.week_starts[..len].to_vec(),
            rows: self.rows[..len].to_vec(),
        })
    }
}

/// Builds the covariate matrix for every week of `series`.
pub fn build_exogenous(series: &WeeklySeries, calendar: &ReleaseCalendar) -> ExogenousMatrix {
    build_exogenous_for_weeks(series.week_starts(), calendar)
}

/// Builds covariate rows for arbitrary week-start dates — used to extend the
/// matrix past the observed series when forecasting future weeks (release
/// dates are scheduled in advance, so these are known covariates, not leaks).
pub fn build_exogenous_for_weeks(
    week_starts: &[NaiveDate],
    calendar: &ReleaseCalendar,
) -> ExogenousMatrix {
    let rows = week_starts
        .iter()
        .map(|&ws| ExogRow {
            branch_release: calendar.has_release_in_week(ws) as u8,
            week_of_month: (1 + (ws.day0()) / 7) as u8,
            month_of_year: ws.month() as u8,
            year: ws.year(),
        })
        .collect();
    ExogenousMatrix {
        week_starts: week_starts.to_vec(),
        rows,
    }
}

/// One supervised-learning row: the value to predict plus its `L` most recent
/// predecessors (lag 1 first) and, optionally, the target week's covariates.
#[derive(Debug, Clone)]
pub struct LagRow {
    pub target: f64,
    pub lag_values: Vec<f64>,
    pub exog_row: Option<ExogRow>,
}

/// Supervised reframing of a series: one row per index `t ≥ lag_count`.
#[derive(Debug, Clone)]
pub struct LagMatrix {
    pub rows: Vec<LagRow>,
    pub lag_count: usize,
}

impl LagMatrix {
    /// Number of numeric features per row (lags plus any covariates).
    pub fn feature_count(&self) -> usize {
        self.lag_count
            + self
                .rows
                .first()
                .and_then(|r| r.exog_row.as_ref())
                .map_or(0, |_| ExogRow::FEATURE_NAMES.len())
    }

    /// Features of row `i` as one flat vector: lags, then covariates.
    pub fn features(&self, i: usize) -> Vec<f64> {
        let row = &self.rows[i];
        let mut out = row.lag_values.clone();
        if let Some(exog) = &row.exog_row {
            out.extend(exog.as_features());
        }
        out
    }
}

/// Reframes `values` into a [`LagMatrix`] with `lag_count` lagged inputs per
/// row. When `exog` is given it must be aligned index-for-index with
/// `values`; each row then carries the covariates of its *target* week.
pub fn build_lag_matrix(
    values: &[f64],
    lag_count: usize,
    exog: Option<&ExogenousMatrix>,
) -> Result<LagMatrix> {
    if lag_count == 0 {
        return Err(Error::InvalidLag {
            max_lag: 0,
            len: values.len(),
        });
    }
    if values.len() <= lag_count {
        return Err(Error::InsufficientData {
            required: lag_count + 1,
            actual: values.len(),
        });
    }
    if let Some(m) = exog {
        if m.len() != values.len() {
            return Err(Error::Alignment(format!(
                "exogenous matrix has {} rows but the series has {} weeks",
                m.len(),
                values.len()
            )));
        }
    }
    let rows = (lag_count..values.len())
        .map(|t| LagRow {
            target: values[t],
            lag_values: (1..=lag_count).map(|l| values[t - l]).collect(),
            exog_row: exog.map(|m| *m.row(t)),
        })
        .collect();
    Ok(LagMatrix { rows, lag_count })
}

/// Which invertible transform produced a [`TransformState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    LogDifference,
}

/// Everything needed to undo a forward transform.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransformState {
    pub kind: TransformKind,
    pub first_value: f64,
}

/// First differences of the natural log: `out[i] = ln(v[i+1]) − ln(v[i])`.
///
/// All inputs must be strictly positive; callers working with counts that may
/// contain zeros clamp to 1 first.
pub fn log_difference(values: &[f64]) -> Result<(Vec<f64>, TransformState)> {
    if values.is_empty() {
        return Err(Error::InsufficientData {
            required: 2,
            actual: 0,
        });
    }
    for (index, &v) in values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::TransformDomain { index, value: v });
        }
    }
    let transformed = values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    let state = TransformState {
        kind: TransformKind::LogDifference,
        first_value: values[0],
    };
    Ok((transformed, state))
}

/// Inverse of [`log_difference`]: reconstructs the original series from the
/// differences and the stored first value.
pub fn inverse_log_difference(transformed: &[f64], state: &TransformState) -> Vec<f64> {
    let mut out = Vec::with_capacity(transformed.len() + 1);
    out.push(state.first_value);
    for &d in transformed {
        let prev = *out.last().expect("seeded with first_value");
        out.push(prev * d.exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Release, SeriesLabel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn series_from(first: NaiveDate, counts: Vec<u32>) -> WeeklySeries {
        WeeklySeries::new(first, counts, SeriesLabel::Arrival).unwrap()
    }

    #[test]
    fn exog_row_for_plain_week() {
        let s = series_from(date(2017, 3, 6), vec![10, 20]);
        let m = build_exogenous(&s, &ReleaseCalendar::new(vec![]));
        assert_eq!(
            *m.row(0),
            ExogRow {
                branch_release: 0,
                week_of_month: 1,
                month_of_year: 3,
                year: 2017
            }
        );
        assert_eq!(m.len(), s.len());
    }

    #[test]
    fn release_inside_week_sets_indicator() {
        let s = series_from(date(2017, 3, 6), vec![10, 20, 30]);
        let cal = ReleaseCalendar::new(vec![Release {
            version: "52.0".into(),
            release_date: date(2017, 3, 16), // Thursday of the second week
        }]);
        let m = build_exogenous(&s, &cal);
        assert_eq!(m.row(0).branch_release, 0);
        assert_eq!(m.row(1).branch_release, 1);
        assert_eq!(m.row(2).branch_release, 0);
    }

    #[test]
    fn week_of_month_buckets_by_day() {
        // Mondays 2021-03-01 (day 1 → week 1), 03-08 (→2), 03-15 (→3),
        // 03-22 (→4), 03-29 (→5).
        let s = series_from(date(2021, 3, 1), vec![1, 1, 1, 1, 1]);
        let m = build_exogenous(&s, &ReleaseCalendar::new(vec![]));
        let buckets: Vec<u8> = m.rows().iter().map(|r| r.week_of_month).collect();
        assert_eq!(buckets, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn exog_ignores_calendar_order() {
        let s = series_from(date(2017, 3, 6), vec![1; 8]);
        let releases = vec![
            Release {
                version: "53.0".into(),
                release_date: date(2017, 4, 19),
            },
            Release {
                version: "52.0".into(),
                release_date: date(2017, 3, 7),
            },
        ];
        let mut reversed = releases.clone();
        reversed.reverse();
        let a = build_exogenous(&s, &ReleaseCalendar::new(releases));
        let b = build_exogenous(&s, &ReleaseCalendar::new(reversed));
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn lag_matrix_unrolled_by_hand() {
        let m = build_lag_matrix(&[1.0, 2.0, 3.0, 4.0], 2, None).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].target, 3.0);
        assert_eq!(m.rows[0].lag_values, vec![2.0, 1.0]);
        assert_eq!(m.rows[1].target, 4.0);
        assert_eq!(m.rows[1].lag_values, vec![3.0, 2.0]);
    }

    #[test]
    fn lag_matrix_boundaries() {
        let m = build_lag_matrix(&[1.0, 2.0, 3.0, 4.0], 3, None).unwrap();
        assert_eq!(m.rows.len(), 1);
        let constant = build_lag_matrix(&[5.0; 5], 2, None).unwrap();
        assert!(constant
            .rows
            .iter()
            .all(|r| r.target == 5.0 && r.lag_values == vec![5.0, 5.0]));
        assert!(matches!(
            build_lag_matrix(&[1.0, 2.0], 2, None),
            Err(Error::InsufficientData { required: 3, .. })
        ));
        assert!(matches!(
            build_lag_matrix(&[1.0, 2.0], 0, None),
            Err(Error::InvalidLag { .. })
        ));
    }

    #[test]
    fn lag_matrix_carries_target_week_exog() {
        let s = series_from(date(2017, 3, 6), vec![10, 20, 30, 40]);
        let cal = ReleaseCalendar::new(vec![Release {
            version: "52.0".into(),
            release_date: date(2017, 3, 21),
        }]);
        let exog = build_exogenous(&s, &cal);
        let m = build_lag_matrix(&s.values(), 2, Some(&exog)).unwrap();
        // Row 0 targets index 2 (week of 2017-03-20, the release week).
        assert_eq!(m.rows[0].exog_row.unwrap().branch_release, 1);
        assert_eq!(m.rows[1].exog_row.unwrap().branch_release, 0);
        assert_eq!(m.feature_count(), 6);
        assert_eq!(m.features(1), vec![30.0, 20.0, 0.0, 4.0, 3.0, 2017.0]);
    }

    #[test]
    fn misaligned_exog_is_rejected() {
        let s = series_from(date(2017, 3, 6), vec![10, 20, 30, 40]);
        let short = series_from(date(2017, 3, 6), vec![10, 20, 30]);
        let exog = build_exogenous(&short, &ReleaseCalendar::new(vec![]));
        assert!(matches!(
            build_lag_matrix(&s.values(), 2, Some(&exog)),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn log_difference_ln_identity() {
        let e = std::f64::consts::E;
        let (t, state) = log_difference(&[1.0, e, e * e]).unwrap();
        assert_abs_diff_eq!(t[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1], 1.0, epsilon = 1e-12);
        assert_eq!(state.first_value, 1.0);
        let (t, _) = log_difference(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(t, vec![0.0, 0.0]);
    }

    #[test]
    fn log_difference_rejects_non_positive() {
        let err = log_difference(&[5.0, 0.0, 3.0]).unwrap_err();
        match err {
            Error::TransformDomain { index, value } => {
                assert_eq!(index, 1);
                assert_eq!(value, 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_counts() {
        let original = [50.0, 120.0, 558.0];
        let (t, state) = log_difference(&original).unwrap();
        let back = inverse_log_difference(&t, &state);
        for (a, b) in original.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(values in proptest::collection::vec(0.5f64..1000.0, 2..60)) {
            let (t, state) = log_difference(&values).unwrap();
            let back = inverse_log_difference(&t, &state);
            prop_assert_eq!(back.len(), values.len());
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn lag_matrix_row_count(n in 2usize..80, l in 1usize..20) {
            prop_assume!(n > l);
            let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let m = build_lag_matrix(&values, l, None).unwrap();
            prop_assert_eq!(m.rows.len(), n - l);
        }
    }
}
