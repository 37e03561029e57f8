//! Acquisition and preparation of the weekly bug-count series.
//!
//! The pipeline is: fetch raw bug records from a Bugzilla-style REST endpoint
//! (or load them from a bundled snapshot), bucket them into gap-free weekly
//! counts, then resolve known outlier weeks before any modelling happens.

mod client;
mod csv_io;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{week_monday, SeriesLabel, WeeklySeries};

pub use client::{default_endpoint, fetch_bug_counts, fetch_bug_counts_with_cache};
pub use csv_io::{
    load_outlier_spec, load_release_calendar, load_series_csv, save_series_csv,
};

/// One bug report as delivered by the tracker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    /// Tracker-assigned numeric id, unique within a collection.
    pub bug_id: u64,
    /// When the report was filed.
    pub creation_time: DateTime<Utc>,
    /// When the report was last resolved, if it ever was.
    pub resolution_time: Option<DateTime<Utc>>,
}

/// A validated collection of bug records, sorted by id.
///
/// Construction enforces that ids are unique and that no bug resolves before
/// it was created. Exact duplicate records (same id, same timestamps) are
/// collapsed silently because paginated fetches can overlap at page edges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawBugRecords {
    records: Vec<BugRecord>,
}

impl RawBugRecords {
    /// Validates and normalises a batch of records.
    pub fn new(mut records: Vec<BugRecord>) -> Result<Self> {
        records.sort_by(|a, b| {
            (a.bug_id, a.creation_time).cmp(&(b.bug_id, b.creation_time))
        });
        records.dedup();
        for pair in records.windows(2) {
            if pair[0].bug_id == pair[1].bug_id {
                return Err(Error::MalformedResponse {
                    detail: format!(
                        "conflicting records for bug id {}",
                        pair[0].bug_id
                    ),
                    excerpt: format!("{:?} vs {:?}", pair[0], pair[1]),
                });
            }
        }
        for record in &records {
            if let Some(resolved) = record.resolution_time {
                if resolved < record.creation_time {
                    return Err(Error::MalformedResponse {
                        detail: format!(
                            "bug id {} resolved before it was created",
                            record.bug_id
                        ),
                        excerpt: format!("{record:?}"),
                    });
                }
            }
        }
        Ok(Self { records })
    }

    /// The records, sorted by ascending bug id.
    pub fn records(&self) -> &[BugRecord] {
        &self.records
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether the collection is empty.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Buckets bug records into a gap-free weekly count series.
///
/// Weeks start on Mondays (UTC). The series holds one week per Monday lying
/// inside `[start, end]`, with zero counts for weeks in which nothing
/// happened; a leading partial week (a `start` that falls mid-week) is
/// dropped rather than under-counted. A record contributes to the week
/// containing its event date: creation time for [`SeriesLabel::Arrival`],
/// resolution time for [`SeriesLabel::Resolved`] (records that never
/// resolved are skipped). Events outside the bucketed span are ignored.
pub fn aggregate_weekly(
    records: &RawBugRecords,
    range: (NaiveDate, NaiveDate),
    which: SeriesLabel,
) -> Result<WeeklySeries> {
    let (start, end) = range;
    if end < start {
        return Err(Error::InvalidRange(format!(
            "aggregation range ends ({end}) before it starts ({start})"
        )));
    }
    let monday_of_start = week_monday(start);
    let first_week = if monday_of_start == start {
        start
    } else {
        monday_of_start + chrono::Duration::weeks(1)
    };
    let last_week = week_monday(end);
    if (end - start).num_days() < 6 || first_week > last_week {
        return Err(Error::InvalidRange(format!(
            "aggregation range {start}..={end} does not cover one full week"
        )));
    }
    let n_weeks = ((last_week - first_week).num_days() / 7 + 1) as usize;
    let mut counts = vec![0u32; n_weeks];
    for record in records.records() {
        let event = match which {
            SeriesLabel::Arrival => Some(record.creation_time),
            SeriesLabel::Resolved => record.resolution_time,
        };
        let Some(event) = event else { continue };
        let week = week_monday(event.date_naive());
        if week < first_week || week > last_week {
            continue;
        }
        let idx = ((week - first_week).num_days() / 7) as usize;
        counts[idx] += 1;
    }
    WeeklySeries::new(first_week, counts, which)
}

/// How a flagged outlier week is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementRule {
    /// Replace the count with the rounded mean of its two neighbours; at a
    /// series boundary the single neighbour is copied.
    DropAndInterpolate,
    /// Clamp the count from above at the given value.
    CapAtValue(u32),
}

/// One outlier week and its resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierRemoval {
    /// Monday of the affected week.
    pub week_start: NaiveDate,
    /// Replacement to apply.
    pub rule: ReplacementRule,
}

/// An ordered list of outlier resolutions, applied sequentially.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierSpec {
    /// Resolutions in application order.
    pub removals: Vec<OutlierRemoval>,
}

/// Applies an outlier specification to a series, returning the cleaned copy.
///
/// Rules are applied in listing order against the current (already partially
/// cleaned) values, so two adjacent interpolations see each other's output.
/// Weeks not present in the series are rejected rather than ignored.
pub fn remove_outliers(series: &WeeklySeries, spec: &OutlierSpec) -> Result<WeeklySeries> {
    let mut cleaned = series.clone();
    for removal in &spec.removals {
        let idx = cleaned
            .index_of(removal.week_start)
            .ok_or(Error::UnknownWeek {
                week: removal.week_start,
            })?;
        let counts = cleaned.counts();
        let replacement = match removal.rule {
            ReplacementRule::DropAndInterpolate => {
                let left = idx.checked_sub(1).map(|i| counts[i]);
                let right = counts.get(idx + 1).copied();
                match (left, right) {
                    (Some(l), Some(r)) => (f64::from(l) + f64::from(r)) / 2.0,
                    (Some(l), None) => f64::from(l),
                    (None, Some(r)) => f64::from(r),
                    (None, None) => f64::from(counts[idx]),
                }
                .round() as u32
            }
            ReplacementRule::CapAtValue(cap) => counts[idx].min(cap),
        };
        cleaned.set_count(idx, replacement);
    }
    Ok(cleaned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn ts(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn record(id: u64, created: DateTime<Utc>) -> BugRecord {
        BugRecord {
            bug_id: id,
            creation_time: created,
            resolution_time: None,
        }
    }

    #[test]
    fn records_sort_and_collapse_exact_duplicates() {
        let a = record(7, ts(2015, 3, 2, 9));
        let b = record(3, ts(2015, 3, 3, 9));
        let batch = RawBugRecords::new(vec![a.clone(), b.clone(), a.clone()]).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.records()[0].bug_id, 3);
        assert_eq!(batch.records()[1].bug_id, 7);
    }

    #[test]
    fn conflicting_duplicate_ids_are_rejected() {
        let a = record(5, ts(2015, 3, 2, 9));
        let b = record(5, ts(2015, 3, 4, 9));
        let err = RawBugRecords::new(vec![a, b]).unwrap_err();
        match err {
            Error::MalformedResponse { detail, .. } => {
                assert!(detail.contains("bug id 5"), "{detail}");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn resolution_before_creation_is_rejected() {
        let bad = BugRecord {
            bug_id: 11,
            creation_time: ts(2015, 3, 4, 9),
            resolution_time: Some(ts(2015, 3, 1, 9)),
        };
        let err = RawBugRecords::new(vec![bad]).unwrap_err();
        match err {
            Error::MalformedResponse { detail, .. } => {
                assert!(detail.contains("resolved before"), "{detail}");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn aggregate_buckets_arrivals_by_iso_week() {
        // 2015-03-02 is a Monday. Two bugs in that week, one the following
        // Monday, and one before the range that must be ignored.
        let records = RawBugRecords::new(vec![
            record(1, ts(2015, 3, 3, 10)),
            record(2, ts(2015, 3, 4, 23)),
            record(3, ts(2015, 3, 9, 0)),
            record(4, ts(2014, 12, 25, 12)),
        ])
        .unwrap();
        let series = aggregate_weekly(
            &records,
            (date(2015, 3, 2), date(2015, 3, 15)),
            SeriesLabel::Arrival,
        )
        .unwrap();
        assert_eq!(series.first_week(), date(2015, 3, 2));
        assert_eq!(series.counts(), &[2, 1]);
    }

    #[test]
    fn aggregate_pads_empty_weeks_with_zeros() {
        let records = RawBugRecords::new(vec![record(1, ts(2015, 3, 2, 8))]).unwrap();
        let series = aggregate_weekly(
            &records,
            (date(2015, 3, 2), date(2015, 3, 29)),
            SeriesLabel::Arrival,
        )
        .unwrap();
        assert_eq!(series.counts(), &[1, 0, 0, 0]);
    }

    #[test]
    fn aggregate_resolved_skips_unresolved_records() {
        let records = RawBugRecords::new(vec![
            BugRecord {
                bug_id: 1,
                creation_time: ts(2015, 3, 2, 8),
                resolution_time: Some(ts(2015, 3, 10, 8)),
            },
            BugRecord {
                bug_id: 2,
                creation_time: ts(2015, 3, 2, 9),
                resolution_time: None,
            },
        ])
        .unwrap();
        let series = aggregate_weekly(
            &records,
            (date(2015, 3, 2), date(2015, 3, 15)),
            SeriesLabel::Resolved,
        )
        .unwrap();
        assert_eq!(series.counts(), &[0, 1]);
        assert_eq!(series.label(), SeriesLabel::Resolved);
    }

    #[test]
    fn aggregate_preserves_total_mass_inside_the_span() {
        use rand::Rng;
        let mut rng = crate::synth::rng(99);
        let start = date(2016, 1, 4);
        let end = date(2016, 6, 27);
        let mut records = Vec::new();
        let mut in_span = 0u32;
        for id in 0..400u64 {
            // Scatter creation times over a window wider than the range so
            // some records fall outside and must be dropped.
            let offset_hours = rng.gen_range(-1000..6000);
            let when = ts(2016, 1, 4, 0) + Duration::hours(offset_hours);
            let week = week_monday(when.date_naive());
            if week >= week_monday(start) && week <= week_monday(end) {
                in_span += 1;
            }
            records.push(record(id + 1, when));
        }
        let records = RawBugRecords::new(records).unwrap();
        let series =
            aggregate_weekly(&records, (start, end), SeriesLabel::Arrival).unwrap();
        let total: u32 = series.counts().iter().sum();
        assert_eq!(total, in_span);
    }

    #[test]
    fn decade_range_with_partial_edges_yields_522_weeks() {
        // 2010-01-01 is a Friday: the partial week before Monday 2010-01-04
        // is dropped, and the final week starts Monday 2019-12-30.
        let records = RawBugRecords::new(vec![
            record(1, ts(2010, 1, 2, 12)),
            record(2, ts(2010, 1, 4, 0)),
            record(3, ts(2019, 12, 31, 23)),
        ])
        .unwrap();
        let series = aggregate_weekly(
            &records,
            (date(2010, 1, 1), date(2019, 12, 31)),
            SeriesLabel::Arrival,
        )
        .unwrap();
        assert_eq!(series.len(), 522);
        assert_eq!(series.first_week(), date(2010, 1, 4));
        assert_eq!(series.last_week(), date(2019, 12, 30));
        // The Jan 2 record falls in the dropped partial week.
        assert_eq!(series.counts()[0], 1);
        assert_eq!(series.counts()[521], 1);
        let total: u32 = series.counts().iter().sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn aggregate_rejects_degenerate_ranges() {
        let records = RawBugRecords::default();
        let reversed = aggregate_weekly(
            &records,
            (date(2015, 3, 9), date(2015, 3, 2)),
            SeriesLabel::Arrival,
        );
        assert!(matches!(reversed, Err(Error::InvalidRange(_))));
        let sub_week = aggregate_weekly(
            &records,
            (date(2015, 3, 3), date(2015, 3, 5)),
            SeriesLabel::Arrival,
        );
        assert!(matches!(sub_week, Err(Error::InvalidRange(_))));
    }

    #[test]
    fn interpolation_replaces_an_interior_spike() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![10, 999, 12],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let spec = OutlierSpec {
            removals: vec![OutlierRemoval {
                week_start: date(2015, 3, 9),
                rule: ReplacementRule::DropAndInterpolate,
            }],
        };
        let cleaned = remove_outliers(&series, &spec).unwrap();
        assert_eq!(cleaned.counts(), &[10, 11, 12]);
    }

    #[test]
    fn interpolation_copies_the_single_neighbour_at_boundaries() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![999, 10, 12],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let spec = OutlierSpec {
            removals: vec![OutlierRemoval {
                week_start: date(2015, 3, 2),
                rule: ReplacementRule::DropAndInterpolate,
            }],
        };
        let cleaned = remove_outliers(&series, &spec).unwrap();
        assert_eq!(cleaned.counts(), &[10, 10, 12]);
    }

    #[test]
    fn caps_clamp_from_above_only() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![100, 400],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let spec = OutlierSpec {
            removals: vec![
                OutlierRemoval {
                    week_start: date(2015, 3, 2),
                    rule: ReplacementRule::CapAtValue(250),
                },
                OutlierRemoval {
                    week_start: date(2015, 3, 9),
                    rule: ReplacementRule::CapAtValue(250),
                },
            ],
        };
        let cleaned = remove_outliers(&series, &spec).unwrap();
        assert_eq!(cleaned.counts(), &[100, 250]);
    }

    #[test]
    fn sequential_rules_see_earlier_replacements() {
        // After the spike at week 2 is interpolated to 11, interpolating
        // week 3 must average 11 and 13, not the original 999.
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![10, 999, 999, 13],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let spec = OutlierSpec {
            removals: vec![
                OutlierRemoval {
                    week_start: date(2015, 3, 9),
                    rule: ReplacementRule::DropAndInterpolate,
                },
                OutlierRemoval {
                    week_start: date(2015, 3, 16),
                    rule: ReplacementRule::DropAndInterpolate,
                },
            ],
        };
        let cleaned = remove_outliers(&series, &spec).unwrap();
        // Week 2: mean(10, 999) = 504.5 -> 505. Week 3: mean(505, 13) = 259.
        assert_eq!(cleaned.counts(), &[10, 505, 259, 13]);
    }

    #[test]
    fn unknown_outlier_weeks_are_rejected() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![10, 11],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let spec = OutlierSpec {
            removals: vec![OutlierRemoval {
                week_start: date(2015, 4, 6),
                rule: ReplacementRule::CapAtValue(5),
            }],
        };
        let err = remove_outliers(&series, &spec).unwrap_err();
        assert!(matches!(err, Error::UnknownWeek { week } if week == date(2015, 4, 6)));
    }

    #[test]
    fn empty_spec_returns_an_identical_series() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![10, 11, 12],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let cleaned = remove_outliers(&series, &OutlierSpec::default()).unwrap();
        assert_eq!(cleaned, series);
    }
}
