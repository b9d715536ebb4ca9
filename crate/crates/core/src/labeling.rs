//! Night outcome labels.
//!
//! A night (22:00 on the evening's date to 07:00 the next morning, local
//! time) is hypoglycemic when either
//!
//! 1. a run of `k` consecutive CGM/isCGM readings lies strictly below the
//!    threshold with `k * native_interval >= run_minutes`, or
//! 2. any SMBG reading in the window lies strictly below the threshold.
//!
//! The native interval is the median gap of the patient's continuous stream
//! snapped to 5 or 15 minutes. A gap longer than 1.5 intervals breaks a run.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GlucoseSource, RawCohort};
use crate::scalar::median_f64;
use crate::time::{date_start, format_iso_utc, local_date, local_seconds, SECONDS_PER_HOUR};

pub const DEFAULT_THRESHOLD_MMOL: f64 = 3.9;
pub const DEFAULT_RUN_MINUTES: f64 = 15.0;
/// Night window relative to 00:00 of the evening's date.
pub const NIGHT_START_S: i64 = 22 * SECONDS_PER_HOUR;
pub const NIGHT_END_S: i64 = 31 * SECONDS_PER_HOUR;
/// Earliest local time whose samples make a date a candidate night.
const DAY_START_S: i64 = 10 * SECONDS_PER_HOUR;

const SNAP_TARGETS: [(f64, f64); 2] = [(300.0, 90.0), (900.0, 270.0)];
const GAP_FACTOR: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("run length must be positive, got {0} minutes")]
    InvalidRunMinutes(f64),
    #[error("unknown patient {0}")]
    UnknownPatient(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub threshold_mmol: f64,
    pub run_minutes: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            threshold_mmol: DEFAULT_THRESHOLD_MMOL,
            run_minutes: DEFAULT_RUN_MINUTES,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<(), LabelError> {
        if !(self.threshold_mmol > 0.0) {
            return Err(LabelError::InvalidThreshold(self.threshold_mmol));
        }
        if !(self.run_minutes > 0.0) {
            return Err(LabelError::InvalidRunMinutes(self.run_minutes));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Trigger {
    CgmRun,
    SmbgPoint,
    None,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::CgmRun => "CGM_RUN",
            Trigger::SmbgPoint => "SMBG_POINT",
            Trigger::None => "NONE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NightLabel {
    pub patient_id: String,
    /// Local date of the evening.
    pub date: NaiveDate,
    pub label: bool,
    pub trigger: Trigger,
    /// UTC time of the first triggering sample.
    pub evidence_t: Option<i64>,
    /// Number of glucose samples of any source inside the night window.
    pub overnight_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LabelWarning {
    MissingNight { patient_id: String, date: NaiveDate },
    UnsnappableInterval { patient_id: String, median_s: f64 },
}

/// Device sampling period inferred from a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimate {
    pub seconds: f64,
    pub snapped: bool,
}

/// Median positive gap of sorted timestamps, snapped to 5 or 15 minutes
/// when close enough. Streams with fewer than two distinct samples default
/// to 5 minutes (unsnapped).
pub fn native_interval(sorted_times: &[i64]) -> IntervalEstimate {
    let gaps: Vec<f64> = sorted_times
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .filter(|&g| g > 0.0)
        .collect();
    let Some(median) = median_f64(&gaps) else {
        return IntervalEstimate {
            seconds: 300.0,
            snapped: false,
        };
    };
    for (target, tol) in SNAP_TARGETS {
        if (median - target).abs() <= tol {
            return IntervalEstimate {
                seconds: target,
                snapped: true,
            };
        }
    }
    IntervalEstimate {
        seconds: median,
        snapped: false,
    }
}

/// Outcome of the two criteria over one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOutcome {
    pub label: bool,
    pub trigger: Trigger,
    pub evidence_t: Option<i64>,
}

/// Start time of the earliest qualifying sub-threshold run, if any.
///
/// `cgm` holds `(time, value)` pairs sorted by time, already restricted to
/// the window.
pub fn first_qualifying_run(
    cgm: &[(i64, f64)],
    interval_s: f64,
    threshold: f64,
    run_minutes: f64,
) -> Option<i64> {
    let needed = run_minutes * 60.0;
    let max_gap = GAP_FACTOR * interval_s;
    let mut start: Option<i64> = None;
    let mut count = 0usize;
    let mut prev_t = i64::MIN;
    for &(t, v) in cgm {
        if v < threshold {
            let continues = count > 0 && ((t - prev_t) as f64) <= max_gap;
            if !continues {
                start = Some(t);
                count = 0;
            }
            count += 1;
            if count as f64 * interval_s >= needed {
                return start;
            }
        } else {
            count = 0;
        }
        prev_t = t;
    }
    None
}

/// Applies both criteria to samples already restricted to the window.
pub fn label_window(
    cgm: &[(i64, f64)],
    smbg: &[(i64, f64)],
    interval_s: f64,
    cfg: &LabelConfig,
) -> WindowOutcome {
    let run = first_qualifying_run(cgm, interval_s, cfg.threshold_mmol, cfg.run_minutes);
    let point = smbg
        .iter()
        .filter(|(_, v)| *v < cfg.threshold_mmol)
        .map(|(t, _)| *t)
        .min();
    let (trigger, evidence_t) = match (run, point) {
        (Some(r), Some(p)) if p < r => (Trigger::SmbgPoint, Some(p)),
        (Some(r), _) => (Trigger::CgmRun, Some(r)),
        (None, Some(p)) => (Trigger::SmbgPoint, Some(p)),
        (None, None) => (Trigger::None, None),
    };
    WindowOutcome {
        label: trigger != Trigger::None,
        trigger,
        evidence_t,
    }
}

/// One patient's glucose streams as `(utc, local, value)` triples sorted by
/// UTC time.
struct PatientStreams {
    continuous: Vec<(i64, i64, f64)>,
    smbg: Vec<(i64, i64, f64)>,
    interval: IntervalEstimate,
}

impl PatientStreams {
    fn collect(cohort: &RawCohort, patient_id: &str) -> Self {
        let mut continuous = Vec::new();
        let mut smbg = Vec::new();
        for s in cohort.glucose.iter().filter(|s| s.patient_id == patient_id) {
            let entry = (
                s.t_utc,
                local_seconds(s.t_utc, s.tz_offset_min),
                s.value_mmol_l,
            );
            match s.source {
                GlucoseSource::Smbg => smbg.push(entry),
                _ => continuous.push(entry),
            }
        }
        Self::from_parts(continuous, smbg)
    }

    fn from_parts(mut continuous: Vec<(i64, i64, f64)>, mut smbg: Vec<(i64, i64, f64)>) -> Self {
        let key =
            |a: &(i64, i64, f64), b: &(i64, i64, f64)| a.0.cmp(&b.0).then(a.2.total_cmp(&b.2));
        continuous.sort_by(key);
        smbg.sort_by(key);
        let times: Vec<i64> = continuous.iter().map(|e| e.0).collect();
        let interval = native_interval(&times);
        PatientStreams {
            continuous,
            smbg,
            interval,
        }
    }

    fn label(&self, patient_id: &str, date: NaiveDate, cfg: &LabelConfig) -> NightLabel {
        let lo = date_start(date) + NIGHT_START_S;
        let hi = date_start(date) + NIGHT_END_S;
        let in_window = |s: &&(i64, i64, f64)| s.1 >= lo && s.1 < hi;
        let cgm: Vec<(i64, f64)> = self
            .continuous
            .iter()
            .filter(in_window)
            .map(|s| (s.0, s.2))
            .collect();
        let smbg: Vec<(i64, f64)> = self
            .smbg
            .iter()
            .filter(in_window)
            .map(|s| (s.0, s.2))
            .collect();
        let out = label_window(&cgm, &smbg, self.interval.seconds, cfg);
        NightLabel {
            patient_id: patient_id.to_string(),
            date,
            label: out.label,
            trigger: out.trigger,
            evidence_t: out.evidence_t,
            overnight_samples: cgm.len() + smbg.len(),
        }
    }

    fn candidate_dates(&self) -> BTreeSet<NaiveDate> {
        let mut dates = BTreeSet::new();
        for &(_, local, _) in self.continuous.iter().chain(&self.smbg) {
            // A sample at local time t belongs to the evening date d with
            // t in [d 10:00, d+1 07:00).
            let d = local_date(local);
            let since_midnight = local - date_start(d);
            if since_midnight >= DAY_START_S {
                dates.insert(d);
            } else if since_midnight < NIGHT_END_S - 24 * SECONDS_PER_HOUR {
                if let Some(prev) = d.pred_opt() {
                    dates.insert(prev);
                }
            }
        }
        dates
    }
}

/// Labels one night of one patient.
pub fn label_night(
    cohort: &RawCohort,
    patient_id: &str,
    date: NaiveDate,
    cfg: &LabelConfig,
) -> Result<(NightLabel, Vec<LabelWarning>), LabelError> {
    cfg.validate()?;
    if !cohort.meta.contains_key(patient_id)
        && !cohort.glucose.iter().any(|s| s.patient_id == patient_id)
    {
        return Err(LabelError::UnknownPatient(patient_id.to_string()));
    }
    let streams = PatientStreams::collect(cohort, patient_id);
    let label = streams.label(patient_id, date, cfg);
    let mut warnings = interval_warning(patient_id, &streams);
    if label.overnight_samples == 0 {
        warnings.push(LabelWarning::MissingNight {
            patient_id: patient_id.to_string(),
            date,
        });
    }
    Ok((label, warnings))
}

fn interval_warning(patient_id: &str, streams: &PatientStreams) -> Vec<LabelWarning> {
    if streams.interval.snapped || streams.continuous.len() < 2 {
        Vec::new()
    } else {
        vec![LabelWarning::UnsnappableInterval {
            patient_id: patient_id.to_string(),
            median_s: streams.interval.seconds,
        }]
    }
}

/// `(utc, local, value)` glucose sample.
type Stamped = (i64, i64, f64);

/// Labels for every candidate night of a cohort.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LabelRun {
    pub labels: Vec<NightLabel>,
    pub warnings: Vec<LabelWarning>,
}

impl LabelRun {
    /// Nights with at least one overnight sample.
    pub fn usable(&self) -> Vec<NightLabel> {
        self.labels
            .iter()
            .filter(|l| l.overnight_samples > 0)
            .cloned()
            .collect()
    }

    pub fn positives(&self) -> usize {
        self.usable().iter().filter(|l| l.label).count()
    }

    /// `patient_id,date,label,trigger,evidence_t` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("patient_id,date,label,trigger,evidence_t\n");
        for l in &self.labels {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                l.patient_id,
                l.date,
                u8::from(l.label),
                l.trigger.as_str(),
                l.evidence_t.map(format_iso_utc).unwrap_or_default()
            ));
        }
        out
    }
}

/// Labels every night that has glucose data in its day or night window, for
/// every patient, in (patient, date) order.
pub fn label_cohort(cohort: &RawCohort, cfg: &LabelConfig) -> Result<LabelRun, LabelError> {
    cfg.validate()?;
    let mut per_patient: BTreeMap<&str, (Vec<Stamped>, Vec<Stamped>)> = BTreeMap::new();
    for s in &cohort.glucose {
        let entry = per_patient.entry(s.patient_id.as_str()).or_default();
        let e = (
            s.t_utc,
            local_seconds(s.t_utc, s.tz_offset_min),
            s.value_mmol_l,
        );
        if s.source == GlucoseSource::Smbg {
            entry.1.push(e);
        } else {
            entry.0.push(e);
        }
    }
    let mut run = LabelRun::default();
    for (patient_id, (cont, smbg)) in per_patient {
        let streams = PatientStreams::from_parts(cont, smbg);
        run.warnings.extend(interval_warning(patient_id, &streams));
        for date in streams.candidate_dates() {
            let label = streams.label(patient_id, date, cfg);
            if label.overnight_samples == 0 {
                run.warnings.push(LabelWarning::MissingNight {
                    patient_id: patient_id.to_string(),
                    date,
                });
            }
            run.labels.push(label);
        }
    }
    Ok(run)
}
