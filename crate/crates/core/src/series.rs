//! CSV time-series ingestion for the model estimators.
//!
//! Input is a two-column CSV with a header row, columns `timestamp,value`.
//! A timestamp is either an integer interval index or an ISO-8601 datetime;
//! datetimes are mapped to hourly interval indices (hours since the Unix
//! epoch), which keeps daily phase alignment for hourly-sampled data.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

/// One observation of a time series at a discrete sampling interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Interval index; the phase of the sample is `index mod T`.
    pub index: i64,
    pub value: f64,
}

fn parse_timestamp(raw: &str) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(k) = raw.parse::<i64>() {
        return Ok(k);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.timestamp().div_euclid(3600));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(dt.and_utc().timestamp().div_euclid(3600));
        }
    }
    Err(Error::Parse(format!(
        "timestamp `{raw}` is neither an integer interval index nor ISO-8601"
    )))
}

/// Reads `timestamp,value` rows from any reader.
pub fn read_series<R: Read>(reader: R) -> Result<Vec<Sample>> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut samples = Vec::new();
    for (row, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse(format!("row {}: expected 2 columns", row + 1)));
        }
        let index = parse_timestamp(&record[0])?;
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad value `{}`", row + 1, &record[1])))?;
        samples.push(Sample { index, value });
    }
    Ok(samples)
}

/// Reads `timestamp,value` rows from a CSV file.
pub fn read_series_csv<P: AsRef<Path>>(path: P) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path)?;
    read_series(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_indices() {
        let data = "timestamp,value\n0,1.5\n1,2.5\n7,-0.5\n";
        let s = read_series(data.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2], Sample { index: 7, value: -0.5 });
    }

    #[test]
    fn iso_timestamps_map_to_hours() {
        let data = "timestamp,value\n1970-01-01T00:00:00,1.0\n1970-01-01T01:00:00,2.0\n";
        let s = read_series(data.as_bytes()).unwrap();
        assert_eq!(s[0].index, 0);
        assert_eq!(s[1].index, 1);
    }

    #[test]
    fn bad_timestamp_is_an_error() {
        let data = "timestamp,value\nnot-a-time,1.0\n";
        assert!(read_series(data.as_bytes()).is_err());
    }
}
