//! The weekly count series and the release calendar.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which event a weekly series counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesLabel {
    /// Bugs bucketed by creation time.
    Arrival,
    /// Bugs bucketed by resolution time.
    Resolved,
}

/// A univariate weekly count series.
///
/// Weeks are ISO weeks starting Monday (UTC). The series is gap-free by
/// construction: consecutive week starts are exactly seven days apart and
/// empty weeks are stored as zero counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeeklySeries {
    week_starts: Vec<NaiveDate>,
    counts: Vec<u32>,
    label: SeriesLabel,
}

/// Returns the Monday of the ISO week containing `date`.
pub fn week_monday(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

impl WeeklySeries {
    /// Builds a series from its first week and the per-week counts.
    ///
    /// `first_week` must be a Monday and `counts` must be non-empty.
    pub fn new(first_week: NaiveDate, counts: Vec<u32>, label: SeriesLabel) -> Result<Self> {
        if first_week.weekday() != Weekday::Mon {
            return Err(Error::InvalidSeries(format!(
                "first week start {first_week} is not a Monday"
            )));
        }
        if counts.is_empty() {
            return Err(Error::InvalidSeries("series must have at least one week".into()));
        }
        let week_starts = (0..counts.len())
            .map(|i| first_week + Duration::weeks(i as i64))
            .collect();
        Ok(Self {
            week_starts,
            counts,
            label,
        })
    }

    /// Builds a series from explicit week starts, validating the no-gap invariant.
    pub fn from_parts(
        week_starts: Vec<NaiveDate>,
        counts: Vec<u32>,
        label: SeriesLabel,
    ) -> Result<Self> {
        if week_starts.len() != counts.len() {
            return Err(Error::InvalidSeries(format!(
                "{} week starts but {} counts",
                week_starts.len(),
                counts.len()
            )));
        }
        let Some(&first) = week_starts.first() else {
            return Err(Error::InvalidSeries("series must have at least one week".into()));
        };
        if first.weekday() != Weekday::Mon {
            return Err(Error::InvalidSeries(format!(
                "week start {first} is not a Monday"
            )));
        }
        for pair in week_starts.windows(2) {
            let expected = pair[0] + Duration::weeks(1);
            if pair[1] != expected {
                return Err(Error::WeekGap {
                    missing: expected,
                    previous: pair[0],
                });
            }
        }
        Ok(Self {
            week_starts,
            counts,
            label,
        })
    }

    /// Week-start dates (Mondays, strictly increasing, gap-free).
    pub fn week_starts(&self) -> &[NaiveDate] {
        &self.week_starts
    }

    /// Per-week counts, aligned with [`Self::week_starts`].
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// What the series counts.
    pub fn label(&self) -> SeriesLabel {
        self.label
    }

    /// Counts as `f64`, the form every model consumes.
    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Number of weeks.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    /// True when the series holds no weeks (never constructible, kept for API completeness).
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// First week start.
    pub fn first_week(&self) -> NaiveDate {
        self.week_starts[0]
    }

    /// Last week start.
    pub fn last_week(&self) -> NaiveDate {
        *self.week_starts.last().expect("series is non-empty")
    }

    /// Index of the week starting exactly at `week`, if present.
    pub fn index_of(&self, week: NaiveDate) -> Option<usize> {
        let first = self.week_starts[0];
        let days = (week - first).num_days();
        if days < 0 || days % 7 != 0 {
            return None;
        }
        let idx = (days / 7) as usize;
        (idx < self.len()).then_some(idx)
    }

    /// A new series holding only the first `len` weeks.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::InvalidSeries(format!(
                "prefix length {len} out of range for series of length {}",
                self.len()
            )));
        }
        Ok(Self {
            week_starts: self.week_starts[..len].to_vec(),
            counts: self.counts[..len].to_vec(),
            label: self.label,
        })
    }

    /// Replaces the count at `index`, preserving all date invariants.
    pub(crate) fn set_count(&mut self, index: usize, count: u32) {
        self.counts[index] = count;
    }
}

/// A single release: version label and its branch date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Release {
    /// Human-readable version label, e.g. `"68.0"`.
    pub version: String,
    /// Branch/release date.
    pub release_date: NaiveDate,
}

/// The release calendar: branch dates sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReleaseCalendar {
    releases: Vec<Release>,
}

impl ReleaseCalendar {
    /// Builds a calendar, sorting by date (then version) and dropping exact duplicates.
    pub fn new(mut releases: Vec<Release>) -> Self {
        releases.sort_by(|a, b| {
            a.release_date
                .cmp(&b.release_date)
                .then_with(|| a.version.cmp(&b.version))
        });
        releases.dedup();
        Self { releases }
    }

    /// All releases in ascending date order.
    pub fn releases(&self) -> &[Release] {
        &self.releases
    }

    /// True when at least one release date falls within `[week_start, week_start + 6]`.
    pub fn has_release_in_week(&self, week_start: NaiveDate) -> bool {
        let week_end = week_start + Duration::days(6);
        self.releases
            .iter()
            .any(|r| r.release_date >= week_start && r.release_date <= week_end)
    }
}
