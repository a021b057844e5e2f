//! Split a project history into analysis windows and assign facts to windows.
//!
//! "Months" are calendar months (day-clamped arithmetic, fractional parts
//! resolved as floor(frac * days-in-month) days); "weeks" are exact 7-day
//! spans. Windows are half-open [start, end).

use chrono::{DateTime, Datelike, Months, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window range end ({end}) must be after start ({start})")]
    EmptyRange { start: i64, end: i64 },
    #[error("overlap step must be positive and no larger than the window length")]
    BadStep,
    #[error("timestamp {0} is outside the representable datetime range")]
    OutOfRange(i64),
    #[error("cannot parse timestamp: {0}")]
    BadTimestamp(String),
}

/// Window length in calendar months or exact weeks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "unit", content = "count")]
pub enum LengthSpec {
    Months(u32),
    Weeks(u32),
}

impl std::fmt::Display for LengthSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LengthSpec::Months(n) => write!(f, "{n}m"),
            LengthSpec::Weeks(n) => write!(f, "{n}w"),
        }
    }
}

/// One analysis window [start, end), UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    /// True when the window extends past the configured range end.
    pub partial: bool,
}

impl TimeWindow {
    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

fn to_datetime(secs: i64) -> Result<DateTime<Utc>, WindowError> {
    Utc.timestamp_opt(secs, 0)
        .single()
        .ok_or(WindowError::OutOfRange(secs))
}

fn days_in_month(year: i32, month: u32) -> i64 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days()
}

/// Add a possibly fractional number of calendar months. The whole part uses
/// day-clamped month arithmetic; the fractional part advances by
/// floor(frac * days-in-current-month) days.
fn add_months_fractional(secs: i64, months: f64) -> Result<i64, WindowError> {
    let dt = to_datetime(secs)?;
    let whole = months.floor() as i64;
    let frac = months - months.floor();
    let shifted = if whole >= 0 {
        dt.checked_add_months(Months::new(whole as u32))
    } else {
        dt.checked_sub_months(Months::new((-whole) as u32))
    }
    .ok_or(WindowError::OutOfRange(secs))?;
    let extra_days = if frac > 0.0 {
        (frac * days_in_month(shifted.year(), shifted.month()) as f64).floor() as i64
    } else {
        0
    };
    Ok(shifted.timestamp() + extra_days * 86_400)
}

fn advance(origin: i64, amount: f64, spec: LengthSpec) -> Result<i64, WindowError> {
    match spec {
        LengthSpec::Months(_) => add_months_fractional(origin, amount),
        LengthSpec::Weeks(_) => Ok(origin + (amount * 7.0 * 86_400.0).round() as i64),
    }
}

fn length_units(spec: LengthSpec) -> f64 {
    match spec {
        LengthSpec::Months(n) => n as f64,
        LengthSpec::Weeks(n) => n as f64,
    }
}

/// Tile (or slide, when `overlap_step` is given) windows over [start, end).
///
/// In non-overlap mode consecutive windows share boundaries; in overlap mode
/// window starts advance by `overlap_step` (same unit as the length). The
/// final window may extend past `end` and is then flagged partial.
pub fn split_windows(
    start: i64,
    end: i64,
    length: LengthSpec,
    overlap_step: Option<f64>,
) -> Result<Vec<TimeWindow>, WindowError> {
    if end <= start {
        return Err(WindowError::EmptyRange { start, end });
    }
    let len_units = length_units(length);
    let step = overlap_step.unwrap_or(len_units);
    if step <= 0.0 || step > len_units {
        return Err(WindowError::BadStep);
    }
    let mut windows = Vec::new();
    let mut i = 0usize;
    loop {
        let w_start = advance(start, step * i as f64, length)?;
        if w_start >= end {
            break;
        }
        let w_end = if overlap_step.is_none() {
            // cumulative from the origin so month tiling never drifts
            advance(start, len_units * (i + 1) as f64, length)?
        } else {
            advance(w_start, len_units, length)?
        };
        windows.push(TimeWindow {
            index: i,
            start: w_start,
            end: w_end,
            partial: w_end > end,
        });
        i += 1;
    }
    Ok(windows)
}

/// All windows containing `t` (exactly one in non-overlap mode; possibly
/// empty when `t` lies outside the covered range).
pub fn assign(t: i64, windows: &[TimeWindow]) -> Vec<usize> {
    windows
        .iter()
        .filter(|w| w.contains(t))
        .map(|w| w.index)
        .collect()
}

/// Epoch seconds -> "2020-01-01T00:00:00Z".
pub fn format_iso8601(secs: i64) -> String {
    match Utc.timestamp_opt(secs, 0).single() {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => format!("@{secs}"),
    }
}

/// Parse "2020-01-01" or "2020-01-01T12:30:00Z" into epoch seconds.
pub fn parse_iso8601(s: &str) -> Result<i64, WindowError> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    Err(WindowError::BadTimestamp(s.to_string()))
}
