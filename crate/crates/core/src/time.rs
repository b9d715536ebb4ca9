//! Wall-clock helpers. All timestamps are integer seconds; local time is
//! `t_utc + tz_offset_min * 60` and day windows are expressed in local time.

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_HOUR: i64 = 3_600;

/// ISO-8601 UTC layout used by the bundle files.
pub const ISO_UTC_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
/// Event timestamp layout of the Ohio XML files.
pub const OHIO_FORMAT: &str = "%d-%m-%Y %H:%M:%S";

#[inline]
pub fn local_seconds(t_utc: i64, tz_offset_min: i32) -> i64 {
    t_utc + i64::from(tz_offset_min) * 60
}

/// Calendar date of a local timestamp.
pub fn local_date(local: i64) -> NaiveDate {
    let days = local.div_euclid(SECONDS_PER_DAY);
    epoch_date() + Duration::days(days)
}

/// Local seconds at 00:00 of `date`.
pub fn date_start(date: NaiveDate) -> i64 {
    (date - epoch_date()).num_days() * SECONDS_PER_DAY
}

fn epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

pub fn parse_iso_utc(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s, ISO_UTC_FORMAT)
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_iso_utc(t_utc: i64) -> String {
    match DateTime::from_timestamp(t_utc, 0) {
        Some(dt) => dt.format(ISO_UTC_FORMAT).to_string(),
        None => t_utc.to_string(),
    }
}

/// Parses an Ohio event timestamp as a naive wall-clock time, returned as
/// seconds since the epoch with zero offset.
pub fn parse_ohio(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), OHIO_FORMAT)
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_ohio(t: i64) -> String {
    match DateTime::from_timestamp(t, 0) {
        Some(dt) => dt.format(OHIO_FORMAT).to_string(),
        None => t.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip() {
        let t = parse_iso_utc("2021-07-05T08:15:00Z").unwrap();
        assert_eq!(format_iso_utc(t), "2021-07-05T08:15:00Z");
        assert!(parse_iso_utc("2021-07-05 08:15:00").is_none());
        assert!(parse_iso_utc("2021-02-30T08:15:00Z").is_none());
    }

    #[test]
    fn ohio_calendar_validation() {
        assert!(parse_ohio("31-02-2020 01:00:00").is_none());
        let t = parse_ohio("29-02-2020 01:00:00").unwrap();
        assert_eq!(format_ohio(t), "29-02-2020 01:00:00");
    }

    #[test]
    fn local_dates_across_midnight() {
        let t = parse_iso_utc("2021-07-05T23:30:00Z").unwrap();
        let local = local_seconds(t, 120);
        assert_eq!(
            local_date(local),
            NaiveDate::from_ymd_opt(2021, 7, 6).unwrap()
        );
        assert_eq!(local - date_start(local_date(local)), 5400);
        let before_epoch = local_date(-1);
        assert_eq!(before_epoch, NaiveDate::from_ymd_opt(1969, 12, 31).unwrap());
    }
}
