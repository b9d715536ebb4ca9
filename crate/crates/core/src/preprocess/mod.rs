//! Day alignment: plausibility filtering, restriction to the 10:00-22:00
//! local window, 15-minute binning (arithmetic mean per bin) and imputation.

mod align;
mod impute;
mod ranges;

use serde::Serialize;
use thiserror::Error;

pub use align::{align_cohort, align_day, AlignedDay, Aligner, LogbookAggregates};
pub use impute::{impute_series, Imputation};
pub use ranges::{
    apply_plausibility, ChannelRange, PlausibilityReport, RangeKey, RangeTable, Ranged,
};

use crate::ingest::VitalChannel;
use crate::time::SECONDS_PER_HOUR;

/// Bins per aligned day.
pub const N_STEPS: usize = 48;
pub const GRID_STEP_S: i64 = 900;
pub const WINDOW_START_S: i64 = 10 * SECONDS_PER_HOUR;
pub const WINDOW_END_S: i64 = 22 * SECONDS_PER_HOUR;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("channel `{0}` has no plausibility range")]
    UnregisteredChannel(String),
    #[error("invalid range for {channel}: [{min}, {max}]")]
    InvalidRange { channel: String, min: f64, max: f64 },
    #[error("drop-day threshold must lie in (0, 1], got {0}")]
    InvalidDropThreshold(f64),
    #[error("configuration: {0}")]
    Config(String),
}

/// A column of the aligned temporal grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TemporalChannel {
    /// CGM/isCGM glucose in mmol/L.
    Glucose,
    /// 1 when the bin shows hypoglycemia evidence (glucose below 3.9 mmol/L,
    /// a reported hypo event, or logged hypo symptoms/correction).
    HypoFlag,
    Vital(VitalChannel),
}

impl TemporalChannel {
    /// Registry order of the aligned grid columns.
    pub fn registry() -> &'static [TemporalChannel] {
        use std::sync::OnceLock;
        static REGISTRY: OnceLock<Vec<TemporalChannel>> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut v = vec![TemporalChannel::Glucose, TemporalChannel::HypoFlag];
            v.extend(
                VitalChannel::ALL
                    .iter()
                    .filter(|&&c| c != VitalChannel::HypoEvent)
                    .map(|&c| TemporalChannel::Vital(c)),
            );
            v
        })
    }

    pub fn index(self) -> usize {
        Self::registry()
            .iter()
            .position(|&c| c == self)
            .expect("channel registered")
    }

    pub fn name(self) -> &'static str {
        match self {
            TemporalChannel::Glucose => "glucose",
            TemporalChannel::HypoFlag => "hypo_flag",
            TemporalChannel::Vital(c) => c.name(),
        }
    }

    pub fn from_name(s: &str) -> Option<TemporalChannel> {
        Self::registry().iter().copied().find(|c| c.name() == s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_shape() {
        let r = TemporalChannel::registry();
        assert_eq!(r.len(), 28);
        assert_eq!(r[0], TemporalChannel::Glucose);
        assert_eq!(
            TemporalChannel::from_name("gsr_electrode").unwrap().index(),
            12
        );
        assert!(TemporalChannel::from_name("hypo_event").is_none());
        assert_eq!(N_STEPS as i64 * GRID_STEP_S, WINDOW_END_S - WINDOW_START_S);
    }
}
