use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use ndarray::{Array2, Array3, Axis};
use serde::Serialize;

use super::aggregates::{daily_aggregates, DailyAggregates, EVENING};
use super::personalize::{personal_factor, PersonalScale, Personalization};
use super::registry::{AggKind, FeatureSetSpec, StaticFeature, TemporalFeature};
use super::FeatureError;
use crate::ingest::{Gender, PatientMeta, RawCohort};
use crate::labeling::NightLabel;
use crate::preprocess::{AlignedDay, Aligner, Imputation, RangeTable, TemporalChannel, N_STEPS};
use crate::scalar::Real;

/// Model input for a set of labeled nights.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    /// `N x 48 x C_t`.
    pub x_temporal: Array3<T>,
    /// `N x C_s`.
    pub x_static: Array2<T>,
    /// False where a static value is undefined (and stored as 0).
    pub static_defined: Array2<bool>,
    pub y: Vec<bool>,
    pub night_keys: Vec<(String, NaiveDate)>,
    pub temporal_names: Vec<String>,
    pub static_names: Vec<String>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_temporal(&self) -> usize {
        self.x_temporal.len_of(Axis(2))
    }

    pub fn n_static(&self) -> usize {
        self.x_static.ncols()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix<T> {
        DesignMatrix {
            x_temporal: self.x_temporal.select(Axis(0), rows),
            x_static: self.x_static.select(Axis(0), rows),
            static_defined: self.static_defined.select(Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            night_keys: rows.iter().map(|&r| self.night_keys[r].clone()).collect(),
            temporal_names: self.temporal_names.clone(),
            static_names: self.static_names.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> DesignMatrix<U> {
        DesignMatrix {
            x_temporal: self.x_temporal.mapv(|v| U::lit(v.as_f64())),
            x_static: self.x_static.mapv(|v| U::lit(v.as_f64())),
            static_defined: self.static_defined.clone(),
            y: self.y.clone(),
            night_keys: self.night_keys.clone(),
            temporal_names: self.temporal_names.clone(),
            static_names: self.static_names.clone(),
        }
    }

    /// Dense patient index per row, in order of first appearance.
    pub fn patient_groups(&self) -> Vec<usize> {
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        let mut next = 0;
        self.night_keys
            .iter()
            .map(|(p, _)| {
                *ids.entry(p.as_str()).or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.x_temporal
            .iter()
            .chain(self.x_static.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
pub struct FeatureOptions {
    pub personalization: Personalization,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeatureReport {
    /// Nights whose day was dropped by the imputation rule.
    pub dropped_days: Vec<(String, NaiveDate)>,
    /// Patients whose personalized glucose is undefined (set to 0).
    pub undefined_personalization: Vec<String>,
    /// Count of undefined static cells.
    pub undefined_static_cells: usize,
}

/// Labeled nights aligned once, reusable across feature sets.
pub struct PreparedNights {
    pub labels: Vec<NightLabel>,
    pub days: Vec<AlignedDay>,
    meta: BTreeMap<String, PatientMeta>,
    present: BTreeSet<TemporalChannel>,
    pub dropped_days: Vec<(String, NaiveDate)>,
}

pub fn prepare_nights(
    cohort: &RawCohort,
    labels: &[NightLabel],
    ranges: &RangeTable,
    imputation: Imputation,
) -> Result<PreparedNights, FeatureError> {
    let aligner = Aligner::new(cohort, ranges)?;
    let mut kept = Vec::new();
    let mut days = Vec::new();
    let mut dropped = Vec::new();
    for l in labels {
        match aligner.align(&l.patient_id, l.date, imputation)? {
            Some(day) => {
                kept.push(l.clone());
                days.push(day);
            }
            None => dropped.push((l.patient_id.clone(), l.date)),
        }
    }
    let mut present: BTreeSet<TemporalChannel> = cohort
        .present_channels()
        .into_iter()
        .filter_map(|c| {
            TemporalChannel::registry()
                .iter()
                .copied()
                .find(|t| *t == TemporalChannel::Vital(c))
        })
        .collect();
    present.insert(TemporalChannel::HypoFlag);
    if cohort.glucose.iter().any(|g| g.source.is_continuous()) {
        present.insert(TemporalChannel::Glucose);
    }
    Ok(PreparedNights {
        labels: kept,
        days,
        meta: cohort.meta.clone(),
        present,
        dropped_days: dropped,
    })
}

fn meta_value(meta: Option<&PatientMeta>, f: StaticFeature) -> Option<f64> {
    let m = meta?;
    match f {
        StaticFeature::Gender => m.gender.map(|g| if g == Gender::F { 1.0 } else { 0.0 }),
        StaticFeature::Age => m.age,
        StaticFeature::Weight => m.weight,
        StaticFeature::Height => m.height,
        StaticFeature::Bmi => m.bmi,
        StaticFeature::BasalPercentage => m.basal_percentage,
        StaticFeature::BasalTotal => m.basal_total,
        StaticFeature::Hba1c => m.hba1c,
        StaticFeature::Tdd => m.tdd,
        _ => unreachable!("not a metadata feature"),
    }
}

fn aggregate_value(a: &DailyAggregates<f64>, k: AggKind) -> Option<f64> {
    let (v, ok) = match k {
        AggKind::Cv => (a.cv, a.defined),
        AggKind::LiabilityIndex => (a.liability_index, a.defined),
        AggKind::SdFirstDiff => (a.sd_first_diff, a.defined),
        AggKind::DailyMin => (a.daily_min, a.defined),
        AggKind::Slope => (a.linreg_slope, a.defined),
        AggKind::EveningLow => (a.evening_low, a.evening_defined),
        AggKind::EveningPeak => (a.evening_peak, a.evening_defined),
    };
    ok.then_some(v)
}

impl PreparedNights {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn build<T: Real>(
        &self,
        spec: &FeatureSetSpec,
        opts: &FeatureOptions,
    ) -> Result<(DesignMatrix<T>, FeatureReport), FeatureError> {
        for t in &spec.temporal {
            if !self.present.contains(&t.source()) {
                return Err(FeatureError::MissingChannel(t.source().name().to_string()));
            }
        }
        for s in &spec.statics {
            if let StaticFeature::Aggregate(c, _) = s {
                if !self.present.contains(&c.source()) {
                    return Err(FeatureError::MissingChannel(c.source().name().to_string()));
                }
            }
        }
        let n = self.len();
        let ct = spec.temporal.len();
        let cs = spec.statics.len();
        let mut xt = Array3::<T>::zeros((n, N_STEPS, ct));
        let mut xs = Array2::<T>::zeros((n, cs));
        let mut defined = Array2::from_elem((n, cs), true);
        let mut report = FeatureReport {
            dropped_days: self.dropped_days.clone(),
            ..Default::default()
        };
        let scale = match opts.personalization {
            Personalization::Literal => None,
            Personalization::Normalized => PersonalScale::fit(self.meta.values()),
        };
        let mut undefined_patients = BTreeSet::new();

        for (row, day) in self.days.iter().enumerate() {
            let meta = self.meta.get(&day.patient_id);
            for (j, tf) in spec.temporal.iter().enumerate() {
                let col = day.temporal.column(tf.source().index());
                let factor = match tf {
                    TemporalFeature::PersonalizedGlucose => {
                        let f = match &scale {
                            Some(s) => meta.and_then(|m| s.factor(m)),
                            None => meta.and_then(personal_factor),
                        };
                        if f.is_none() {
                            undefined_patients.insert(day.patient_id.clone());
                        }
                        f.unwrap_or(0.0)
                    }
                    TemporalFeature::Channel(_) => 1.0,
                };
                for step in 0..N_STEPS {
                    xt[[row, step, j]] = T::lit(col[step] * factor);
                }
            }
            let mut aggs: BTreeMap<TemporalChannel, DailyAggregates<f64>> = BTreeMap::new();
            for (j, sf) in spec.statics.iter().enumerate() {
                let value = match *sf {
                    StaticFeature::Aggregate(c, k) => {
                        let a = aggs.entry(c.source()).or_insert_with(|| {
                            let (v, m) = day.channel(c.source());
                            daily_aggregates(&v, &m, EVENING)
                        });
                        aggregate_value(a, k)
                    }
                    StaticFeature::MaxInsulinFast => Some(day.static_logbook.fast_insulin_max),
                    StaticFeature::MaxInsulinSlow => Some(day.static_logbook.slow_insulin_max),
                    StaticFeature::TotalInsulinFast => Some(day.static_logbook.fast_insulin_total),
                    StaticFeature::TotalInsulinSlow => Some(day.static_logbook.slow_insulin_total),
                    f => meta_value(meta, f),
                };
                match value {
                    Some(v) => xs[[row, j]] = T::lit(v),
                    None => {
                        defined[[row, j]] = false;
                        report.undefined_static_cells += 1;
                    }
                }
            }
        }
        report.undefined_personalization = undefined_patients.into_iter().collect();
        let dm = DesignMatrix {
            x_temporal: xt,
            x_static: xs,
            static_defined: defined,
            y: self.labels.iter().map(|l| l.label).collect(),
            night_keys: self
                .labels
                .iter()
                .map(|l| (l.patient_id.clone(), l.date))
                .collect(),
            temporal_names: spec.temporal_names(),
            static_names: spec.static_names(),
        };
        Ok((dm, report))
    }
}

/// Aligns the labeled nights and assembles the matrix for one feature set.
pub fn build_design_matrix<T: Real>(
    cohort: &RawCohort,
    labels: &[NightLabel],
    spec: &FeatureSetSpec,
    ranges: &RangeTable,
    imputation: Imputation,
    opts: &FeatureOptions,
) -> Result<(DesignMatrix<T>, FeatureReport), FeatureError> {
    prepare_nights(cohort, labels, ranges, imputation)?.build(spec, opts)
}

/// Per-column shift and scale learned on training rows. Temporal channels
/// use one mean/SD per channel over all steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub static_mean: Vec<f64>,
    pub static_sd: Vec<f64>,
    pub temporal_mean: Vec<f64>,
    pub temporal_sd: Vec<f64>,
}

fn moments(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut ss) = (0usize, 0.0, 0.0);
    let v: Vec<f64> = values.collect();
    for &x in &v {
        n += 1;
        s += x;
    }
    if n == 0 {
        return (0.0, 1.0);
    }
    let m = s / n as f64;
    for &x in &v {
        ss += (x - m) * (x - m);
    }
    let sd = (ss / n as f64).sqrt();
    (m, if sd > 1e-12 { sd } else { 1.0 })
}

impl Standardizer {
    pub fn fit<T: Real>(dm: &DesignMatrix<T>, rows: &[usize]) -> Standardizer {
        let (mut sm, mut ssd) = (Vec::new(), Vec::new());
        for j in 0..dm.n_static() {
            let (m, s) = moments(rows.iter().map(|&r| dm.x_static[[r, j]].as_f64()));
            sm.push(m);
            ssd.push(s);
        }
        let (mut tm, mut tsd) = (Vec::new(), Vec::new());
        for c in 0..dm.n_temporal() {
            let (m, s) = moments(
                rows.iter()
                    .flat_map(|&r| (0..N_STEPS).map(move |k| (r, k)))
                    .map(|(r, k)| dm.x_temporal[[r, k, c]].as_f64()),
            );
            tm.push(m);
            tsd.push(s);
        }
        Standardizer {
            static_mean: sm,
            static_sd: ssd,
            temporal_mean: tm,
            temporal_sd: tsd,
        }
    }

    pub fn apply<T: Real>(&self, dm: &DesignMatrix<T>) -> DesignMatrix<T> {
        let mut out = dm.clone();
        for ((_, j), v) in out.x_static.indexed_iter_mut() {
            *v = T::lit((v.as_f64() - self.static_mean[j]) / self.static_sd[j]);
        }
        for ((_, _, c), v) in out.x_temporal.indexed_iter_mut() {
            *v = T::lit((v.as_f64() - self.temporal_mean[c]) / self.temporal_sd[c]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSetName;
    use crate::labeling::{label_cohort, LabelConfig};
    use crate::synthgen::{generate_cohort, CohortProfile, GlucoseProcessParams};

    fn cohort() -> RawCohort {
        let p = CohortProfile {
            n_patients: 2,
            nights_per_patient: 2,
            ..CohortProfile::inhouse_like(4)
        };
        generate_cohort(&p, &GlucoseProcessParams::default()).unwrap()
    }

    #[test]
    fn all_set_shapes() {
        let c = cohort();
        let labels = label_cohort(&c, &LabelConfig::default()).unwrap().usable();
        let spec = FeatureSetSpec::get(FeatureSetName::All);
        let (dm, _) = build_design_matrix::<f64>(
            &c,
            &labels,
            &spec,
            &RangeTable::default(),
            Imputation::Zero,
            &FeatureOptions::default(),
        )
        .unwrap();
        assert_eq!(dm.x_temporal.dim(), (4, 48, 21));
        assert_eq!(dm.x_static.dim(), (4, 29));
        assert!(dm.is_finite());
        assert_eq!(dm.patient_groups(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn standardized_train_columns() {
        let c = cohort();
        let labels = label_cohort(&c, &LabelConfig::default()).unwrap().usable();
        let spec = FeatureSetSpec::get(FeatureSetName::GlucoseNormal);
        let (dm, _) = build_design_matrix::<f64>(
            &c,
            &labels,
            &spec,
            &RangeTable::default(),
            Imputation::Zero,
            &FeatureOptions::default(),
        )
        .unwrap();
        let st = Standardizer::fit(&dm, &[0, 1, 2, 3]);
        let z = st.apply(&dm);
        for j in 0..z.n_static() {
            let m: f64 = z.x_static.column(j).sum() / 4.0;
            assert!(m.abs() < 1e-9);
        }
    }
}
