//! Millisecond-precision UTC instants.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TimestampError;

/// A UTC calendar instant with millisecond precision.
///
/// Rendered as ISO-8601 with exactly three fractional digits and a trailing
/// `Z`. Parsing accepts any explicit offset and normalizes to UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

/// Side information produced while parsing a timestamp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseNotes {
    /// The input carried a non-zero UTC offset.
    pub offset_normalized: bool,
    /// The input carried sub-millisecond digits that were dropped.
    pub precision_truncated: bool,
}

impl Timestamp {
    pub const EPOCH: Timestamp = Timestamp(0);

    pub fn from_millis(millis: i64) -> Self {
        Timestamp(millis)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn plus_millis(self, delta: i64) -> Self {
        Timestamp(self.0.saturating_add(delta))
    }

    /// Parses an ISO-8601 / RFC 3339 instant with an explicit offset.
    pub fn parse_with_notes(text: &str) -> Result<(Self, ParseNotes), TimestampError> {
        let parsed = DateTime::parse_from_rfc3339(text.trim())
            .map_err(|_| TimestampError::Invalid(text.to_string()))?;
        let nanos = parsed.timestamp_subsec_nanos() % 1_000_000_000;
        let notes = ParseNotes {
            offset_normalized: parsed.offset().local_minus_utc() != 0
                || !(text.trim_end().ends_with('Z') || text.trim_end().ends_with('z')),
            precision_truncated: nanos % 1_000_000 != 0,
        };
        Ok((Timestamp(parsed.timestamp_millis()), notes))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .expect("millisecond timestamps within chrono range")
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse_with_notes(s).map(|(ts, _)| ts)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            &self
                .to_datetime()
                .to_rfc3339_opts(SecondsFormat::Millis, true),
        )
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
