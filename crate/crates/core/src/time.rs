//! Day-valued epochs.
//!
//! Every epoch in the toolkit is a fractional number of days since
//! 2000-01-01T00:00:00 UTC. Leap seconds are ignored.

use alloc::string::String;
use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime};
use thiserror::Error;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ISO-8601 timestamp `{0}`")]
pub struct TimestampError(pub String);

fn reference() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid reference epoch")
}

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS[.f]]` (space separator and a
/// trailing `Z` or offset are accepted) into days since the reference epoch.
pub fn parse_epoch(raw: &str) -> Result<f64, TimestampError> {
    let s = raw.trim();
    let err = || TimestampError(String::from(raw));
    let dt = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        dt.naive_utc()
    } else {
        let s = s.strip_suffix('Z').unwrap_or(s);
        const FORMATS: [&str; 4] = [
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ];
        match FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        {
            Some(dt) => dt,
            None => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .ok_or_else(err)?,
        }
    };
    let delta = dt - reference();
    let micros = delta.num_microseconds().ok_or_else(err)?;
    Ok(micros as f64 / 1e6 / SECONDS_PER_DAY)
}

/// Formats a day-valued epoch as `YYYY-MM-DDTHH:MM:SS.ffffff` (UTC, microsecond resolution).
pub fn format_epoch(days: f64) -> String {
    use core::fmt::Write;
    let micros = libm::round(days * SECONDS_PER_DAY * 1e6) as i64;
    let dt = reference() + Duration::microseconds(micros);
    let mut out = String::new();
    let _ = write!(out, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.6f"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_leap(y: i64) -> bool {
        (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
    }

    // Independent oracle: walk years and months from the reference date.
    fn oracle_days(y: i64, m: i64, d: i64, hh: f64, mm: f64, ss: f64) -> f64 {
        let month_len = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let mut days = 0i64;
        if y >= 2000 {
            for yr in 2000..y {
                days += if is_leap(yr) { 366 } else { 365 };
            }
        } else {
            for yr in y..2000 {
                days -= if is_leap(yr) { 366 } else { 365 };
            }
        }
        for mo in 1..m {
            days += month_len[(mo - 1) as usize];
            if mo == 2 && is_leap(y) {
                days += 1;
            }
        }
        days += d - 1;
        days as f64 + (hh * 3600.0 + mm * 60.0 + ss) / SECONDS_PER_DAY
    }

    #[test]
    fn epoch_matches_calendar_oracle() {
        let got = parse_epoch("2018-04-01T00:00:00").unwrap();
        assert_eq!(got, oracle_days(2018, 4, 1, 0.0, 0.0, 0.0));
        assert_eq!(got, 6665.0);
        let cases = [
            ("2000-01-01", (2000, 1, 1, 0.0, 0.0, 0.0)),
            ("2000-03-01T12:00:00Z", (2000, 3, 1, 12.0, 0.0, 0.0)),
            ("2011-09-24T04:00", (2011, 9, 24, 4.0, 0.0, 0.0)),
            ("1999-12-31 18:00:00", (1999, 12, 31, 18.0, 0.0, 0.0)),
            ("2021-10-07T23:59:30.5", (2021, 10, 7, 23.0, 59.0, 30.5)),
        ];
        for (s, (y, m, d, hh, mm, ss)) in cases {
            let got = parse_epoch(s).unwrap();
            let want = oracle_days(y, m, d, hh, mm, ss);
            assert!((got - want).abs() < 1e-9, "{s}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_epoch("yesterday").is_err());
        assert!(parse_epoch("2018-13-01").is_err());
    }

    #[test]
    fn format_round_trips() {
        let s = "2018-04-02T00:16:00.000000";
        assert_eq!(format_epoch(parse_epoch(s).unwrap()), s);
    }
}
