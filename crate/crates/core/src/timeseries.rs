//! Uniformly sampled time series and the tabular CSV backend.
//!
//! Every signal in the framework (prices, carbon intensity, generation,
//! demand) is a [`TimeSeries`]: a start instant, a fixed step in minutes and
//! a vector of finite values. Timestamps are naive local wall-clock time at
//! minute resolution.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;
const TS_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Minute-aligned, timezone-naive instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    /// Build from calendar fields. Panics on an invalid date; use
    /// [`Timestamp::from_str`] for untrusted input.
    pub fn ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Self {
        let dt = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, minute, 0))
            .expect("valid calendar date");
        Timestamp(dt)
    }

    pub fn from_naive(dt: NaiveDateTime) -> Result<Self> {
        if dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(Error::InvalidSeries(format!("timestamp {dt} is not minute-aligned")));
        }
        Ok(Timestamp(dt))
    }

    pub fn naive(&self) -> NaiveDateTime {
        self.0
    }

    pub fn add_minutes(&self, minutes: i64) -> Self {
        Timestamp(self.0 + Duration::minutes(minutes))
    }

    /// Signed difference `self - other` in minutes.
    pub fn minutes_since(&self, other: Timestamp) -> i64 {
        (self.0 - other.0).num_minutes()
    }

    pub fn minute_of_day(&self) -> u32 {
        self.0.hour() * 60 + self.0.minute()
    }

    pub fn hour(&self) -> u32 {
        self.0.hour()
    }

    pub fn date(&self) -> NaiveDate {
        self.0.date()
    }

    pub fn midnight(&self) -> Self {
        Timestamp(self.0.date().and_hms_opt(0, 0, 0).expect("midnight exists"))
    }

    /// Minutes since 1970-01-01T00:00, used for recurrence arithmetic.
    pub fn epoch_minutes(&self) -> i64 {
        self.0.and_utc().timestamp().div_euclid(60)
    }

    pub fn from_epoch_minutes(m: i64) -> Self {
        let dt = chrono::DateTime::from_timestamp(m * 60, 0).expect("epoch minutes in range").naive_utc();
        Timestamp(dt)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TS_FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s.trim(), TS_FORMAT)
            .map_err(|e| Error::InvalidSeries(format!("bad timestamp {s:?}: {e}")))?;
        Ok(Timestamp(dt))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A uniformly sampled series of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: Timestamp,
    granularity_min: u32,
    values: Vec<f64>,
    unit: String,
}

impl TimeSeries {
    pub fn new(start: Timestamp, granularity_min: u32, values: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        if granularity_min == 0 || !MINUTES_PER_DAY.is_multiple_of(granularity_min) {
            return Err(Error::InvalidSeries(format!("granularity {granularity_min} min does not divide a day")));
        }
        if values.is_empty() {
            return Err(Error::InvalidSeries("series must hold at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: i + 1, column: "<series>".into() });
        }
        Ok(TimeSeries { start, granularity_min, values, unit: unit.into() })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn granularity_min(&self) -> u32 {
        self.granularity_min
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.granularity_min) as usize
    }

    pub fn timestamp(&self, index: usize) -> Timestamp {
        self.start.add_minutes(index as i64 * self.granularity_min as i64)
    }

    /// Exclusive end instant.
    pub fn end(&self) -> Timestamp {
        self.timestamp(self.values.len())
    }

    /// Index of `ts` if it lies on the sampling grid (possibly past the end).
    pub fn grid_index(&self, ts: Timestamp) -> Option<i64> {
        let delta = ts.minutes_since(self.start);
        let g = self.granularity_min as i64;
        (delta % g == 0).then_some(delta / g)
    }

    /// Copy of the window `[start, start + n·Δt)`.
    pub fn slice(&self, start: Timestamp, n: usize) -> Result<TimeSeries> {
        let idx = self
            .grid_index(start)
            .ok_or_else(|| Error::OutOfRange(format!("{start} is not on the {} min grid", self.granularity_min)))?;
        if n == 0 || idx < 0 || idx as usize + n > self.values.len() {
            return Err(Error::OutOfRange(format!(
                "[{start}, +{n} steps) not inside [{}, {})",
                self.start,
                self.end()
            )));
        }
        let idx = idx as usize;
        Ok(TimeSeries {
            start,
            granularity_min: self.granularity_min,
            values: self.values[idx..idx + n].to_vec(),
            unit: self.unit.clone(),
        })
    }

    /// Same grid, new values (must stay finite and non-empty).
    pub fn with_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        TimeSeries::new(self.start, self.granularity_min, values, self.unit.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<TimeSeries> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Affine map `y = lo + (x - offset) * gain` together with its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaling {
    pub offset: f64,
    pub gain: f64,
    pub lo: f64,
}

impl MinMaxScaling {
    /// Mapping of `[min, max]` onto `[lo, hi]`.
    pub fn fit(min: f64, max: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param("hi", format!("must exceed lo ({lo} >= {hi})")));
        }
        if !(max > min) {
            return Err(Error::DegenerateRange(min));
        }
        Ok(MinMaxScaling { offset: min, gain: (hi - lo) / (max - min), lo })
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.lo + (x - self.offset) * self.gain
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.lo) / self.gain + self.offset
    }
}

/// Min-max scale a series onto `[lo, hi]`, returning the mapping so the raw
/// values can be recovered.
pub fn scale_minmax(ts: &TimeSeries, lo: f64, hi: f64) -> Result<(TimeSeries, MinMaxScaling)> {
    let min = ts.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ts.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scale_with_bounds(ts, min, max, lo, hi)
}

/// Like [`scale_minmax`] but with caller-supplied source bounds.
pub fn scale_with_bounds(ts: &TimeSeries, min: f64, max: f64, lo: f64, hi: f64) -> Result<(TimeSeries, MinMaxScaling)> {
    let scaling = MinMaxScaling::fit(min, max, lo, hi)?;
    Ok((ts.map(|v| scaling.apply(v))?, scaling))
}

/// Named columns sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularBackend {
    columns: Vec<(String, TimeSeries)>,
}

impl TabularBackend {
    pub fn new(columns: Vec<(String, TimeSeries)>) -> Result<Self> {
        let Some((_, first)) = columns.first() else {
            return Err(Error::InvalidSeries("table has no value columns".into()));
        };
        for (i, (name, ts)) in columns.iter().enumerate() {
            if columns[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidSeries(format!("duplicate column `{name}`")));
            }
            if ts.len() != first.len() || ts.start() != first.start() || ts.granularity_min() != first.granularity_min()
            {
                return Err(Error::InvalidSeries(format!("column `{name}` does not share the table grid")));
            }
        }
        Ok(TabularBackend { columns })
    }

    pub fn column(&self, name: &str) -> Result<&TimeSeries> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, ts)| ts)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn columns(&self) -> &[(String, TimeSeries)] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns[0].1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> Timestamp {
        self.columns[0].1.start()
    }

    pub fn granularity_min(&self) -> u32 {
        self.columns[0].1.granularity_min()
    }

    /// Write the canonical CSV form: `timestamp` first, then the columns in
    /// order, values in shortest round-trip notation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        let first = &self.columns[0].1;
        for i in 0..self.len() {
            let mut row = vec![first.timestamp(i).to_string()];
            row.extend(self.columns.iter().map(|(_, ts)| ts.values()[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load selected columns of a CSV file. An empty `value_columns` loads every
/// column other than the timestamp column.
pub fn load_table(path: impl AsRef<Path>, timestamp_column: &str, value_columns: &[&str]) -> Result<TabularBackend> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_table(file, timestamp_column, value_columns)
}

/// Parse a CSV table from any reader. Row numbers in errors are 1-based data
/// rows (the header is not counted).
pub fn read_table<R: Read>(reader: R, timestamp_column: &str, value_columns: &[&str]) -> Result<TabularBackend> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_idx = headers
        .iter()
        .position(|h| h == timestamp_column)
        .ok_or_else(|| Error::UnknownColumn(timestamp_column.to_string()))?;
    let selected: Vec<(String, usize)> = if value_columns.is_empty() {
        headers.iter().enumerate().filter(|&(i, _)| i != ts_idx).map(|(i, h)| (h.to_string(), i)).collect()
    } else {
        value_columns
            .iter()
            .map(|&c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .map(|i| (c.to_string(), i))
                    .ok_or_else(|| Error::UnknownColumn(c.to_string()))
            })
            .collect::<Result<_>>()?
    };

    let mut stamps: Vec<Timestamp> = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); selected.len()];
    let mut granularity: Option<i64> = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let raw_ts = record.get(ts_idx).unwrap_or_default();
        let ts: Timestamp = raw_ts.parse().map_err(|_| Error::Malformed {
            row,
            column: timestamp_column.to_string(),
            value: raw_ts.to_string(),
        })?;
        if let Some(&prev) = stamps.last() {
            let gap = ts.minutes_since(prev);
            match granularity {
                None if gap > 0 => granularity = Some(gap),
                Some(g) if gap == g => {}
                _ => {
                    return Err(Error::NonUniformSpacing {
                        row,
                        detail: format!(
                            "{prev} -> {ts} ({gap} min, expected {})",
                            granularity.map_or("a positive step".to_string(), |g| format!("{g} min"))
                        ),
                    })
                }
            }
        }
        stamps.push(ts);
        for (col, (name, idx)) in selected.iter().enumerate() {
            let raw = record.get(*idx).unwrap_or_default();
            let v: f64 =
                raw.parse().map_err(|_| Error::Malformed { row, column: name.clone(), value: raw.to_string() })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, column: name.clone() });
            }
            data[col].push(v);
        }
    }
    let Some(g) = granularity else {
        return Err(Error::InvalidSeries("need at least two rows to infer the sampling step".into()));
    };
    let g = u32::try_from(g).map_err(|_| Error::InvalidSeries(format!("step {g} min too large")))?;
    let start = stamps[0];
    let columns = selected
        .into_iter()
        .zip(data)
        .map(|((name, _), values)| Ok((name, TimeSeries::new(start, g, values, "")?)))
        .collect::<Result<Vec<_>>>()?;
    TabularBackend::new(columns)
}
