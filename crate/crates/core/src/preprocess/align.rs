use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::Serialize;

use super::ranges::{apply_plausibility, PlausibilityReport, RangeTable};
use super::{
    impute_series, Imputation, PreprocessError, TemporalChannel, GRID_STEP_S, N_STEPS,
    WINDOW_END_S, WINDOW_START_S,
};
use crate::ingest::{LogbookEntry, RawCohort, VitalChannel};
use crate::labeling::DEFAULT_THRESHOLD_MMOL;
use crate::time::{date_start, local_seconds};

/// Logbook totals over the day window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LogbookAggregates {
    /// Rapid-acting insulin, meal plus correction.
    pub fast_insulin_total: f64,
    pub fast_insulin_max: f64,
    /// Basal (long-acting) insulin.
    pub slow_insulin_total: f64,
    pub slow_insulin_max: f64,
    pub carbs_total: f64,
    pub exercise_minutes: f64,
    pub entries: usize,
}

/// One patient-day on the 48-step, 15-minute grid starting 10:00 local.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDay {
    pub patient_id: String,
    pub date: NaiveDate,
    /// `N_STEPS x registry().len()`; zero wherever `mask` is false.
    pub temporal: Array2<f64>,
    pub mask: Array2<bool>,
    pub static_logbook: LogbookAggregates,
}

impl AlignedDay {
    pub fn empty(patient_id: &str, date: NaiveDate) -> Self {
        let c = TemporalChannel::registry().len();
        AlignedDay {
            patient_id: patient_id.to_string(),
            date,
            temporal: Array2::zeros((N_STEPS, c)),
            mask: Array2::from_elem((N_STEPS, c), false),
            static_logbook: LogbookAggregates::default(),
        }
    }

    pub fn channel(&self, ch: TemporalChannel) -> (Vec<f64>, Vec<bool>) {
        let i = ch.index();
        (
            self.temporal.column(i).to_vec(),
            self.mask.column(i).to_vec(),
        )
    }

    /// Fraction of unobserved bins of a channel.
    pub fn missing_fraction(&self, ch: TemporalChannel) -> f64 {
        let col = self.mask.column(ch.index());
        col.iter().filter(|m| !**m).count() as f64 / N_STEPS as f64
    }
}

#[derive(Default)]
struct PatientSamples {
    /// (local time, mmol/L), continuous sources only, sorted.
    glucose: Vec<(i64, f64)>,
    /// (local time, channel, value), sorted by time.
    vitals: Vec<(i64, VitalChannel, f64)>,
    logbook: Vec<(i64, LogbookEntry)>,
}

/// Pre-filtered, per-patient sample index used to align many days.
pub struct Aligner {
    patients: BTreeMap<String, PatientSamples>,
    pub plausibility: PlausibilityReport,
}

impl Aligner {
    pub fn new(cohort: &RawCohort, ranges: &RangeTable) -> Result<Self, PreprocessError> {
        let (glucose, mut plausibility) = apply_plausibility(&cohort.glucose, ranges)?;
        let (vitals, vital_report) = apply_plausibility(&cohort.vitals, ranges)?;
        for (k, v) in vital_report.removed {
            *plausibility.removed.entry(k).or_default() += v;
        }
        let mut patients: BTreeMap<String, PatientSamples> = cohort
            .meta
            .keys()
            .map(|k| (k.clone(), PatientSamples::default()))
            .collect();
        for s in glucose.iter().filter(|s| s.source.is_continuous()) {
            patients
                .entry(s.patient_id.clone())
                .or_default()
                .glucose
                .push((local_seconds(s.t_utc, s.tz_offset_min), s.value_mmol_l));
        }
        for s in &vitals {
            patients
                .entry(s.patient_id.clone())
                .or_default()
                .vitals
                .push((local_seconds(s.t_utc, s.tz_offset_min), s.channel, s.value));
        }
        for e in &cohort.logbook {
            patients
                .entry(e.patient_id.clone())
                .or_default()
                .logbook
                .push((local_seconds(e.t_utc, e.tz_offset_min), e.clone()));
        }
        for p in patients.values_mut() {
            p.glucose
                .sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            p.vitals
                .sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
            p.logbook.sort_by_key(|e| e.0);
        }
        Ok(Aligner {
            patients,
            plausibility,
        })
    }

    pub fn has_patient(&self, patient_id: &str) -> bool {
        self.patients.contains_key(patient_id)
    }

    /// Aligns one day. Returns `None` only when `DropDay` rejects it.
    pub fn align(
        &self,
        patient_id: &str,
        date: NaiveDate,
        imputation: Imputation,
    ) -> Result<Option<AlignedDay>, PreprocessError> {
        imputation.validate()?;
        let mut day = AlignedDay::empty(patient_id, date);
        let Some(p) = self.patients.get(patient_id) else {
            return Err(PreprocessError::Config(format!(
                "unknown patient {patient_id}"
            )));
        };
        let lo = date_start(date) + WINDOW_START_S;
        let hi = date_start(date) + WINDOW_END_S;
        let bin = |t: i64| ((t - lo) / GRID_STEP_S) as usize;
        let n_ch = TemporalChannel::registry().len();
        let mut sums = vec![0.0f64; N_STEPS * n_ch];
        let mut counts = vec![0usize; N_STEPS * n_ch];
        let mut hypo_evidence = [false; N_STEPS];

        let g0 = p.glucose.partition_point(|s| s.0 < lo);
        let g1 = p.glucose.partition_point(|s| s.0 < hi);
        let gi = TemporalChannel::Glucose.index();
        for &(t, v) in &p.glucose[g0..g1] {
            let k = bin(t) * n_ch + gi;
            sums[k] += v;
            counts[k] += 1;
        }
        let v0 = p.vitals.partition_point(|s| s.0 < lo);
        let v1 = p.vitals.partition_point(|s| s.0 < hi);
        for &(t, ch, v) in &p.vitals[v0..v1] {
            if ch == VitalChannel::HypoEvent {
                hypo_evidence[bin(t)] = true;
                continue;
            }
            let k = bin(t) * n_ch + TemporalChannel::Vital(ch).index();
            sums[k] += v;
            counts[k] += 1;
        }

        let mut agg = LogbookAggregates::default();
        let l0 = p.logbook.partition_point(|e| e.0 < lo);
        let l1 = p.logbook.partition_point(|e| e.0 < hi);
        for (t, e) in &p.logbook[l0..l1] {
            agg.entries += 1;
            if let Some(r) = e.rapid_total() {
                agg.fast_insulin_total += r;
                agg.fast_insulin_max = agg.fast_insulin_max.max(r);
            }
            if let Some(b) = e.basal_insulin {
                agg.slow_insulin_total += b;
                agg.slow_insulin_max = agg.slow_insulin_max.max(b);
            }
            agg.carbs_total += [e.carbs_mixed, e.carbs_fast, e.carbs_slow]
                .iter()
                .flatten()
                .sum::<f64>();
            agg.exercise_minutes += e
                .exercise_duration_min
                .or(e.exercise_duration_est_min)
                .unwrap_or(0.0);
            if e.hypo_symptoms == Some(true) || e.hypo_correction == Some(true) {
                hypo_evidence[bin(*t)] = true;
            }
        }
        day.static_logbook = agg;

        let hi_idx = TemporalChannel::HypoFlag.index();
        for step in 0..N_STEPS {
            for c in 0..n_ch {
                let k = step * n_ch + c;
                if counts[k] > 0 {
                    day.temporal[[step, c]] = sums[k] / counts[k] as f64;
                    day.mask[[step, c]] = true;
                }
            }
            let glucose_seen = day.mask[[step, gi]];
            let low = glucose_seen && day.temporal[[step, gi]] < DEFAULT_THRESHOLD_MMOL;
            if glucose_seen || hypo_evidence[step] {
                day.mask[[step, hi_idx]] = true;
                day.temporal[[step, hi_idx]] = if low || hypo_evidence[step] { 1.0 } else { 0.0 };
            }
        }

        if let Imputation::DropDay(max_missing) = imputation {
            if day.missing_fraction(TemporalChannel::Glucose) > max_missing {
                return Ok(None);
            }
        }
        if !matches!(imputation, Imputation::Zero | Imputation::DropDay(_)) {
            for c in 0..n_ch {
                let mut col: Vec<f64> = day.temporal.column(c).to_vec();
                let mut m: Vec<bool> = day.mask.column(c).to_vec();
                impute_series(&mut col, &mut m, imputation);
                for step in 0..N_STEPS {
                    day.temporal[[step, c]] = col[step];
                    day.mask[[step, c]] = m[step];
                }
            }
        }
        Ok(Some(day))
    }
}

/// Aligns a single day with zero imputation.
pub fn align_day(
    cohort: &RawCohort,
    patient_id: &str,
    date: NaiveDate,
    ranges: &RangeTable,
) -> Result<AlignedDay, PreprocessError> {
    let aligner = Aligner::new(cohort, ranges)?;
    Ok(aligner
        .align(patient_id, date, Imputation::Zero)?
        .expect("zero imputation never drops a day"))
}

/// Aligns a list of (patient, date) keys with the given imputation. Dropped
/// days come back as `None` in the same position.
pub fn align_cohort(
    cohort: &RawCohort,
    keys: &[(String, NaiveDate)],
    ranges: &RangeTable,
    imputation: Imputation,
) -> Result<Vec<Option<AlignedDay>>, PreprocessError> {
    let aligner = Aligner::new(cohort, ranges)?;
    keys.iter()
        .map(|(p, d)| aligner.align(p, *d, imputation))
        .collect()
}
