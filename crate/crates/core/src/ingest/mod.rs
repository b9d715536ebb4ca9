//! Parsers for the two external data layouts (a CSV bundle with one file
//! per record family, and Ohio-style XML event lists) into [`RawCohort`].
//!
//! Rows that fail type or invariant checks are skipped and recorded in a
//! [`ParseReport`]; only structural problems (missing file, bad header,
//! unreadable XML) are fatal.

mod bundle;
mod ohio;
mod records;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub use bundle::{
    bundle_to_strings, parse_inhouse_bundle, parse_inhouse_sources, write_bundle, BundleSources,
    GLUCOSE_HEADER, LOGBOOK_HEADER, METADATA_HEADER, VITALS_HEADER,
};
pub use ohio::{load_ohio_dir, parse_ohio_str, parse_ohio_xml, write_ohio_xml, OhioSplit};
pub use records::*;

/// mg/dL per mmol/L of glucose.
pub const MGDL_PER_MMOL: f64 = 18.016;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing input file {0}")]
    MissingFile(PathBuf),
    #[error("malformed header in {file}: expected `{expected}`, found `{found}`")]
    MalformedHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("negative glucose value {0} mg/dL")]
    NegativeGlucose(f64),
    #[error("xml: {0}")]
    Xml(String),
    #[error("ohio root element carries no patient id")]
    MissingPatientId,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Converts a glucose concentration from mg/dL to mmol/L.
pub fn mgdl_to_mmol(value_mgdl: f64) -> Result<f64, IngestError> {
    if value_mgdl < 0.0 || value_mgdl.is_nan() {
        return Err(IngestError::NegativeGlucose(value_mgdl));
    }
    Ok(value_mgdl / MGDL_PER_MMOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    ParseError,
    InvariantViolation,
    InvalidTimestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub file: String,
    pub line: u64,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    /// Data rows (or XML events) encountered, excluding headers.
    pub rows_read: usize,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl ParseReport {
    pub fn rows_rejected(&self) -> usize {
        self.rejections.len()
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejections
            .iter()
            .filter(|r| r.reason == reason)
            .count()
    }

    pub(crate) fn reject(&mut self, file: &str, line: u64, reason: RejectReason, detail: String) {
        self.rejections.push(Rejection {
            file: file.to_string(),
            line,
            reason,
            detail,
        });
    }

    pub fn absorb(&mut self, other: ParseReport) {
        self.rows_read += other.rows_read;
        self.rejections.extend(other.rejections);
        self.warnings.extend(other.warnings);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversion() {
        assert_eq!(mgdl_to_mmol(0.0).unwrap(), 0.0);
        assert!((mgdl_to_mmol(70.0).unwrap() - 3.8854).abs() < 1e-4);
        assert!((mgdl_to_mmol(180.16).unwrap() - 10.0).abs() < 1e-9);
        assert!(matches!(
            mgdl_to_mmol(-1.0),
            Err(IngestError::NegativeGlucose(_))
        ));
        assert!(mgdl_to_mmol(70.0).unwrap() < 3.9);
    }
}
