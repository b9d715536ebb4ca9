use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Glucose measurement device family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GlucoseSource {
    /// Continuous glucose monitor, ~5 min sampling.
    Cgm,
    /// Intermittently scanned CGM, ~15 min sampling.
    Iscgm,
    /// Finger-prick self-monitoring.
    Smbg,
}

impl GlucoseSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GlucoseSource::Cgm => "CGM",
            GlucoseSource::Iscgm => "ISCGM",
            GlucoseSource::Smbg => "SMBG",
        }
    }

    /// CGM and isCGM feed the temporal channel and the run criterion.
    pub fn is_continuous(self) -> bool {
        !matches!(self, GlucoseSource::Smbg)
    }
}

impl FromStr for GlucoseSource {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "CGM" => Ok(GlucoseSource::Cgm),
            "ISCGM" => Ok(GlucoseSource::Iscgm),
            "SMBG" => Ok(GlucoseSource::Smbg),
            _ => Err(()),
        }
    }
}

macro_rules! channels {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Registered vital-sign channels: the wearable's channels used by
        /// the pipeline, plus the Ohio-style band and pump streams.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum VitalChannel {
            $($variant),+
        }

        impl VitalChannel {
            pub const ALL: &'static [VitalChannel] = &[$(VitalChannel::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(VitalChannel::$variant => $name),+
                }
            }

            pub fn from_name(s: &str) -> Option<VitalChannel> {
                match s {
                    $($name => Some(VitalChannel::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

channels! {
    HeartRate => "heart_rate",
    PerfusionIndex => "perfusion_index",
    MotionActivity => "motion_activity",
    ActivityClassification => "activity_classification",
    HeartRateVariability => "heart_rate_variability",
    RespirationRate => "respiration_rate",
    Energy => "energy",
    CoreTemperature => "core_temperature",
    TemperatureLocal => "temperature_local",
    BarometerPressure => "barometer_pressure",
    GsrElectrode => "gsr_electrode",
    HealthScore => "health_score",
    RelaxStressIntensityScore => "relax_stress_intensity_score",
    TrainingEffectScore => "training_effect_score",
    ActivityScore => "activity_score",
    RichnessScore => "richness_score",
    BloodPulseWave => "blood_pulse_wave",
    NumberOfSteps => "number_of_steps",
    TemperatureObject => "temperature_object",
    TemperatureBarometer => "temperature_barometer",
    BasisGsr => "basis_gsr",
    BasisSkinTemperature => "basis_skin_temperature",
    BasisHeartRate => "basis_heart_rate",
    BasisSteps => "basis_steps",
    Acceleration => "acceleration",
    Basal => "basal",
    HypoEvent => "hypo_event",
}

impl VitalChannel {
    /// Channels recorded by the wrist/arm wearable of the in-house study.
    pub fn is_wearable(self) -> bool {
        (self as usize) <= (VitalChannel::TemperatureBarometer as usize)
    }
}

impl fmt::Display for VitalChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlucoseSample {
    pub patient_id: String,
    pub t_utc: i64,
    pub tz_offset_min: i32,
    pub source: GlucoseSource,
    pub value_mmol_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalSample {
    pub patient_id: String,
    pub t_utc: i64,
    pub tz_offset_min: i32,
    pub channel: VitalChannel,
    pub value: f64,
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SglTrend {
    Rising,
    Falling,
    Stable,
    Unknown,
}

impl SglTrend {
    pub fn as_str(self) -> &'static str {
        match self {
            SglTrend::Rising => "rising",
            SglTrend::Falling => "falling",
            SglTrend::Stable => "stable",
            SglTrend::Unknown => "unknown",
        }
    }
}

impl FromStr for SglTrend {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "rising" => Ok(SglTrend::Rising),
            "falling" => Ok(SglTrend::Falling),
            "stable" => Ok(SglTrend::Stable),
            "unknown" => Ok(SglTrend::Unknown),
            _ => Err(()),
        }
    }
}

/// One manual logbook row. Every clinical field is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogbookEntry {
    pub patient_id: String,
    pub t_utc: i64,
    pub tz_offset_min: i32,
    pub blood_sugar: Option<f64>,
    pub sensor_glucose: Option<f64>,
    pub sgl_trend: Option<SglTrend>,
    pub basal_insulin: Option<f64>,
    pub rapid_insulin_meals: Option<f64>,
    pub rapid_insulin_correction: Option<f64>,
    pub carbs_mixed: Option<f64>,
    pub carbs_fast: Option<f64>,
    pub carbs_slow: Option<f64>,
    pub hypo_correction: Option<bool>,
    pub carb_type: Option<String>,
    pub exercise_duration_min: Option<f64>,
    pub exercise_duration_est_min: Option<f64>,
    pub activity_type: Option<String>,
    pub hypo_symptoms: Option<bool>,
    pub remarks: Option<String>,
}

impl LogbookEntry {
    pub fn new(patient_id: impl Into<String>, t_utc: i64, tz_offset_min: i32) -> Self {
        LogbookEntry {
            patient_id: patient_id.into(),
            t_utc,
            tz_offset_min,
            ..Default::default()
        }
    }

    /// Doses and carbohydrate masses that must be non-negative.
    pub fn non_negative_fields(&self) -> [Option<f64>; 6] {
        [
            self.basal_insulin,
            self.rapid_insulin_meals,
            self.rapid_insulin_correction,
            self.carbs_mixed,
            self.carbs_fast,
            self.carbs_slow,
        ]
    }

    /// Rapid-acting insulin recorded in this entry (meal + correction).
    pub fn rapid_total(&self) -> Option<f64> {
        match (self.rapid_insulin_meals, self.rapid_insulin_correction) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::M => "M",
            Gender::F => "F",
        }
    }
}

/// Per-patient metadata. Ohio-style cohorts carry placeholders with most
/// fields absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PatientMeta {
    pub patient_id: String,
    pub gender: Option<Gender>,
    pub age: Option<f64>,
    pub weight: Option<f64>,
    pub height: Option<f64>,
    pub bmi: Option<f64>,
    pub basal_percentage: Option<f64>,
    pub basal_total: Option<f64>,
    pub hba1c: Option<f64>,
    pub tdd: Option<f64>,
}

impl PatientMeta {
    pub fn placeholder(patient_id: impl Into<String>) -> Self {
        PatientMeta {
            patient_id: patient_id.into(),
            ..Default::default()
        }
    }

    /// Checks the metadata invariants, returning a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("age", self.age),
            ("weight", self.weight),
            ("height", self.height),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(p) = self.basal_percentage {
            if !(0.0..=100.0).contains(&p) {
                return Err(format!("basal_percentage {p} outside [0, 100]"));
            }
        }
        for (name, v) in [
            ("bmi", self.bmi),
            ("basal_total", self.basal_total),
            ("hba1c", self.hba1c),
            ("tdd", self.tdd),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("{name} must be finite and non-negative, got {v}"));
                }
            }
        }
        if let (Some(w), Some(h), Some(b)) = (self.weight, self.height, self.bmi) {
            let expected = w / (h / 100.0).powi(2);
            if ((b - expected) / expected).abs() > 0.05 {
                return Err(format!(
                    "bmi {b} disagrees with weight/height^2 = {expected:.3} by more than 5%"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    InhouseCsv,
    OhioXml,
    Synthetic,
}

/// The unified raw record model. Carries no outcome labels: night status is
/// only ever derived by the labeling stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCohort {
    pub glucose: Vec<GlucoseSample>,
    pub vitals: Vec<VitalSample>,
    pub logbook: Vec<LogbookEntry>,
    pub meta: BTreeMap<String, PatientMeta>,
    pub provenance: Provenance,
}

impl RawCohort {
    pub fn empty(provenance: Provenance) -> Self {
        RawCohort {
            glucose: Vec::new(),
            vitals: Vec::new(),
            logbook: Vec::new(),
            meta: BTreeMap::new(),
            provenance,
        }
    }

    pub fn patient_ids(&self) -> Vec<String> {
        self.meta.keys().cloned().collect()
    }

    /// Adds placeholder metadata for any patient referenced by a sample but
    /// missing from `meta`. Returns the ids that were added.
    pub fn fill_missing_meta(&mut self) -> Vec<String> {
        let referenced = self
            .glucose
            .iter()
            .map(|s| &s.patient_id)
            .chain(self.vitals.iter().map(|s| &s.patient_id))
            .chain(self.logbook.iter().map(|s| &s.patient_id));
        let mut added = Vec::new();
        for id in referenced {
            if !self.meta.contains_key(id) {
                added.push(id.clone());
                self.meta
                    .insert(id.clone(), PatientMeta::placeholder(id.clone()));
            }
        }
        added
    }

    /// Appends every record of `other`; metadata of `self` wins on conflicts.
    pub fn merge(&mut self, other: RawCohort) {
        self.glucose.extend(other.glucose);
        self.vitals.extend(other.vitals);
        self.logbook.extend(other.logbook);
        for (k, v) in other.meta {
            self.meta.entry(k).or_insert(v);
        }
    }

    /// Keeps only records of the listed patients.
    pub fn restrict_to(&self, patients: &[String]) -> RawCohort {
        let keep = |id: &String| patients.contains(id);
        RawCohort {
            glucose: self
                .glucose
                .iter()
                .filter(|s| keep(&s.patient_id))
                .cloned()
                .collect(),
            vitals: self
                .vitals
                .iter()
                .filter(|s| keep(&s.patient_id))
                .cloned()
                .collect(),
            logbook: self
                .logbook
                .iter()
                .filter(|s| keep(&s.patient_id))
                .cloned()
                .collect(),
            meta: self
                .meta
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            provenance: self.provenance,
        }
    }

    /// Set of vital channels that have at least one sample.
    pub fn present_channels(&self) -> Vec<VitalChannel> {
        let mut seen = vec![false; VitalChannel::ALL.len()];
        for v in &self.vitals {
            seen[v.channel as usize] = true;
        }
        VitalChannel::ALL
            .iter()
            .copied()
            .filter(|c| seen[*c as usize])
            .collect()
    }

    /// Sorts every record family into a canonical order, so that two cohorts
    /// holding the same record set compare equal.
    pub fn canonicalize(&mut self) {
        self.glucose.sort_by(|a, b| {
            (&a.patient_id, a.t_utc, a.source)
                .cmp(&(&b.patient_id, b.t_utc, b.source))
                .then(a.value_mmol_l.total_cmp(&b.value_mmol_l))
        });
        self.vitals.sort_by(|a, b| {
            (&a.patient_id, a.channel, a.t_utc)
                .cmp(&(&b.patient_id, b.channel, b.t_utc))
                .then(a.value.total_cmp(&b.value))
        });
        self.logbook.sort_by(|a, b| {
            (&a.patient_id, a.t_utc)
                .cmp(&(&b.patient_id, b.t_utc))
                .then_with(|| format!("{a:?}").cmp(&format!("{b:?}")))
        });
    }
}
