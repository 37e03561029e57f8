//! CSV persistence for series, release calendars and outlier specifications.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::{OutlierRemoval, OutlierSpec, ReplacementRule};
use crate::series::{Release, ReleaseCalendar, SeriesLabel, WeeklySeries};

/// Writes a series as `week_start,count` rows with ISO dates.
///
/// The write is atomic: content goes to a sibling temp file that is renamed
/// over the target, so readers never observe a half-written snapshot.
pub fn save_series_csv(series: &WeeklySeries, path: &Path) -> Result<()> {
    let mut body = String::from("week_start,count\n");
    for (week, count) in series.week_starts().iter().zip(series.counts()) {
        body.push_str(&format!("{week},{count}\n"));
    }
    atomic_write(path, &body)
}

/// Loads a series saved by [`save_series_csv`].
///
/// The file must carry the exact `week_start,count` header, ISO-formatted
/// Monday dates and non-negative integer counts; rows must be consecutive
/// weeks. Schema violations name the offending row and column, and week gaps
/// surface as [`Error::WeekGap`].
pub fn load_series_csv(path: &Path, label: SeriesLabel) -> Result<WeeklySeries> {
    let mut reader = open_csv(path)?;
    expect_header(&mut reader, path, &["week_start", "count"])?;
    let mut weeks = Vec::new();
    let mut counts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_schema(path, row, "", e))?;
        check_width(path, row, &record, 2)?;
        weeks.push(parse_date(path, row, "week_start", &record[0])?);
        counts.push(parse_count(path, row, "count", &record[1])?);
    }
    WeeklySeries::from_parts(weeks, counts, label)
}

/// Loads a release calendar from `version,release_date` rows.
///
/// Rows may arrive in any order and exact duplicates are tolerated; the
/// calendar sorts and deduplicates on construction. A header-only file is a
/// valid, empty calendar.
pub fn load_release_calendar(path: &Path) -> Result<ReleaseCalendar> {
    let mut reader = open_csv(path)?;
    expect_header(&mut reader, path, &["version", "release_date"])?;
    let mut releases = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_schema(path, row, "", e))?;
        check_width(path, row, &record, 2)?;
        let version = record[0].trim();
        if version.is_empty() {
            return Err(csv_schema(path, row, "version", "version is empty"));
        }
        releases.push(Release {
            version: version.to_string(),
            release_date: parse_date(path, row, "release_date", &record[1])?,
        });
    }
    Ok(ReleaseCalendar::new(releases))
}

/// Loads an outlier specification from `week_start,rule,value` rows.
///
/// `rule` is either `interpolate` (value must be empty) or `cap` (value must
/// be the non-negative ceiling to clamp to). Rows apply in file order.
pub fn load_outlier_spec(path: &Path) -> Result<OutlierSpec> {
    let mut reader = open_csv(path)?;
    expect_header(&mut reader, path, &["week_start", "rule", "value"])?;
    let mut removals = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_schema(path, row, "", e))?;
        check_width(path, row, &record, 3)?;
        let week_start = parse_date(path, row, "week_start", &record[0])?;
        let value = record[2].trim();
        let rule = match record[1].trim() {
            "interpolate" => {
                if !value.is_empty() {
                    return Err(csv_schema(
                        path,
                        row,
                        "value",
                        "interpolate rows must leave value empty",
                    ));
                }
                ReplacementRule::DropAndInterpolate
            }
            "cap" => ReplacementRule::CapAtValue(parse_count(path, row, "value", value)?),
            other => {
                return Err(csv_schema(
                    path,
                    row,
                    "rule",
                    format!("unknown rule `{other}` (expected interpolate or cap)"),
                ));
            }
        };
        removals.push(OutlierRemoval { week_start, rule });
    }
    Ok(OutlierSpec { removals })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn expect_header(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_schema(path, 0, "", e))?;
    let actual: Vec<&str> = header.iter().collect();
    if actual != expected {
        return Err(csv_schema(
            path,
            0,
            "",
            format!("expected header `{}`, found `{}`", expected.join(","), actual.join(",")),
        ));
    }
    Ok(())
}

fn check_width(path: &Path, row: usize, record: &csv::StringRecord, want: usize) -> Result<()> {
    if record.len() != want {
        return Err(csv_schema(
            path,
            row,
            "",
            format!("expected {want} fields, found {}", record.len()),
        ));
    }
    Ok(())
}

fn parse_date(path: &Path, row: usize, column: &str, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| csv_schema(path, row, column, format!("invalid date `{raw}`")))
}

fn parse_count(path: &Path, row: usize, column: &str, raw: &str) -> Result<u32> {
    raw.parse::<u32>().map_err(|_| {
        csv_schema(
            path,
            row,
            column,
            format!("invalid non-negative count `{raw}`"),
        )
    })
}

fn csv_schema(
    path: &Path,
    row: usize,
    column: &str,
    detail: impl ToString,
) -> Error {
    Error::CsvSchema {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        detail: detail.to_string(),
    }
}

fn atomic_write(path: &Path, body: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn write(path: &Path, body: &str) {
        std::fs::write(path, body).unwrap();
    }

    #[test]
    fn series_round_trips_losslessly() {
        let values = synth::white_noise(522, 190.0, 40.0, 4);
        let series = synth::counts_series(&values, date(2010, 1, 4), SeriesLabel::Arrival);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        save_series_csv(&series, &path).unwrap();
        let loaded = load_series_csv(&path, SeriesLabel::Arrival).unwrap();
        assert_eq!(loaded, series);
    }

    #[test]
    fn saved_files_use_the_documented_layout() {
        let series = WeeklySeries::new(
            date(2015, 3, 2),
            vec![10, 11],
            SeriesLabel::Arrival,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        save_series_csv(&series, &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert_eq!(body, "week_start,count\n2015-03-02,10\n2015-03-09,11\n");
    }

    #[test]
    fn wrong_header_is_a_schema_error_on_row_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write(&path, "week,count\n2015-03-02,10\n");
        let err = load_series_csv(&path, SeriesLabel::Arrival).unwrap_err();
        match err {
            Error::CsvSchema { row, .. } => assert_eq!(row, 0),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn negative_counts_name_the_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write(&path, "week_start,count\n2015-03-02,10\n2015-03-09,-3\n");
        let err = load_series_csv(&path, SeriesLabel::Arrival).unwrap_err();
        match err {
            Error::CsvSchema { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "count");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn malformed_dates_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write(&path, "week_start,count\n03/02/2015,10\n");
        let err = load_series_csv(&path, SeriesLabel::Arrival).unwrap_err();
        match err {
            Error::CsvSchema { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "week_start");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn skipped_weeks_surface_as_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write(
            &path,
            "week_start,count\n2015-03-02,10\n2015-03-16,12\n",
        );
        let err = load_series_csv(&path, SeriesLabel::Arrival).unwrap_err();
        match err {
            Error::WeekGap { missing, previous } => {
                assert_eq!(missing, date(2015, 3, 9));
                assert_eq!(previous, date(2015, 3, 2));
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn missing_files_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.csv");
        let err = load_series_csv(&path, SeriesLabel::Arrival).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn calendar_sorts_rows_and_drops_exact_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("releases.csv");
        write(
            &path,
            "version,release_date\n43.0,2015-12-15\n42.0,2015-11-03\n42.0,2015-11-03\n",
        );
        let calendar = load_release_calendar(&path).unwrap();
        let versions: Vec<&str> =
            calendar.releases().iter().map(|r| r.version.as_str()).collect();
        assert_eq!(versions, vec!["42.0", "43.0"]);
    }

    #[test]
    fn header_only_calendar_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("releases.csv");
        write(&path, "version,release_date\n");
        let calendar = load_release_calendar(&path).unwrap();
        assert!(calendar.releases().is_empty());
    }

    #[test]
    fn calendar_rejects_blank_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("releases.csv");
        write(&path, "version,release_date\n,2015-11-03\n");
        let err = load_release_calendar(&path).unwrap_err();
        match err {
            Error::CsvSchema { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "version");
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn outlier_spec_parses_both_rules_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("outliers.csv");
        write(
            &path,
            "week_start,rule,value\n2016-05-02,interpolate,\n2017-09-18,cap,400\n",
        );
        let spec = load_outlier_spec(&path).unwrap();
        assert_eq!(
            spec.removals,
            vec![
                OutlierRemoval {
                    week_start: date(2016, 5, 2),
                    rule: ReplacementRule::DropAndInterpolate,
                },
                OutlierRemoval {
                    week_start: date(2017, 9, 18),
                    rule: ReplacementRule::CapAtValue(400),
                },
            ]
        );
    }

    #[test]
    fn outlier_spec_rejects_unknown_rules_and_stray_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("outliers.csv");
        write(&path, "week_start,rule,value\n2016-05-02,median,\n");
        let err = load_outlier_spec(&path).unwrap_err();
        assert!(matches!(err, Error::CsvSchema { ref column, .. } if column == "rule"));

        write(&path, "week_start,rule,value\n2016-05-02,interpolate,7\n");
        let err = load_outlier_spec(&path).unwrap_err();
        assert!(matches!(err, Error::CsvSchema { ref column, .. } if column == "value"));
    }
}
