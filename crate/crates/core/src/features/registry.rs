use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::VitalChannel;
use crate::preprocess::TemporalChannel;

/// Bumped whenever a set's membership changes.
pub const REGISTRY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSetName {
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "EVERION_DAILY_ONLY")]
    EverionDailyOnly,
    #[serde(rename = "GLUCOSE_NORMAL")]
    GlucoseNormal,
    #[serde(rename = "GLUCOSE_PERSONALIZED")]
    GlucosePersonalized,
    #[serde(rename = "NON_AGGREGATED_DAILY")]
    NonAggregatedDaily,
    #[serde(rename = "MARX2023")]
    Marx2023,
    #[serde(rename = "REDUCED")]
    Reduced,
}

impl FeatureSetName {
    pub const ALL_SETS: [FeatureSetName; 7] = [
        FeatureSetName::All,
        FeatureSetName::EverionDailyOnly,
        FeatureSetName::GlucoseNormal,
        FeatureSetName::GlucosePersonalized,
        FeatureSetName::NonAggregatedDaily,
        FeatureSetName::Marx2023,
        FeatureSetName::Reduced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetName::All => "ALL",
            FeatureSetName::EverionDailyOnly => "EVERION_DAILY_ONLY",
            FeatureSetName::GlucoseNormal => "GLUCOSE_NORMAL",
            FeatureSetName::GlucosePersonalized => "GLUCOSE_PERSONALIZED",
            FeatureSetName::NonAggregatedDaily => "NON_AGGREGATED_DAILY",
            FeatureSetName::Marx2023 => "MARX2023",
            FeatureSetName::Reduced => "REDUCED",
        }
    }
}

impl fmt::Display for FeatureSetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetName {
    type Err = String;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL_SETS
            .into_iter()
            .find(|n| n.as_str() == norm)
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}

/// One column of the temporal tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TemporalFeature {
    Channel(TemporalChannel),
    /// Glucose scaled by the patient's personalization factor.
    PersonalizedGlucose,
}

impl TemporalFeature {
    pub fn name(self) -> String {
        match self {
            TemporalFeature::Channel(c) => c.name().to_string(),
            TemporalFeature::PersonalizedGlucose => "glucose_personalized".into(),
        }
    }

    /// Grid column the values come from.
    pub fn source(self) -> TemporalChannel {
        match self {
            TemporalFeature::Channel(c) => c,
            TemporalFeature::PersonalizedGlucose => TemporalChannel::Glucose,
        }
    }
}

/// Channels with daily aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AggChannel {
    Glucose,
    HeartRate,
    HeartRateVariability,
    /// The wearable's wellness index.
    RelaxStress,
}

impl AggChannel {
    pub fn source(self) -> TemporalChannel {
        match self {
            AggChannel::Glucose => TemporalChannel::Glucose,
            AggChannel::HeartRate => TemporalChannel::Vital(VitalChannel::HeartRate),
            AggChannel::HeartRateVariability => {
                TemporalChannel::Vital(VitalChannel::HeartRateVariability)
            }
            AggChannel::RelaxStress => {
                TemporalChannel::Vital(VitalChannel::RelaxStressIntensityScore)
            }
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            AggChannel::Glucose => "glucose",
            AggChannel::HeartRate => "heart_rate",
            AggChannel::HeartRateVariability => "heart_rate_variability",
            AggChannel::RelaxStress => "wellness_index",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AggKind {
    Cv,
    LiabilityIndex,
    SdFirstDiff,
    DailyMin,
    EveningLow,
    EveningPeak,
    Slope,
}

impl AggKind {
    fn suffix(self) -> &'static str {
        match self {
            AggKind::Cv => "cv",
            AggKind::LiabilityIndex => "liability_index",
            AggKind::SdFirstDiff => "sd_first_diff",
            AggKind::DailyMin => "daily_min",
            AggKind::EveningLow => "evening_low",
            AggKind::EveningPeak => "evening_peak",
            AggKind::Slope => "linreg_slope",
        }
    }
}

/// One column of the static matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StaticFeature {
    Aggregate(AggChannel, AggKind),
    Gender,
    Age,
    Weight,
    Height,
    Bmi,
    BasalPercentage,
    BasalTotal,
    Hba1c,
    Tdd,
    MaxInsulinFast,
    MaxInsulinSlow,
    TotalInsulinFast,
    TotalInsulinSlow,
}

impl StaticFeature {
    pub fn name(self) -> String {
        match self {
            StaticFeature::Aggregate(c, k) => format!("{}_{}", c.prefix(), k.suffix()),
            StaticFeature::Gender => "gender".into(),
            StaticFeature::Age => "age".into(),
            StaticFeature::Weight => "weight".into(),
            StaticFeature::Height => "height".into(),
            StaticFeature::Bmi => "bmi".into(),
            StaticFeature::BasalPercentage => "basal_percentage".into(),
            StaticFeature::BasalTotal => "basal_total".into(),
            StaticFeature::Hba1c => "hba1c".into(),
            StaticFeature::Tdd => "tdd".into(),
            StaticFeature::MaxInsulinFast => "max_insulin_fast".into(),
            StaticFeature::MaxInsulinSlow => "max_insulin_slow".into(),
            StaticFeature::TotalInsulinFast => "total_insulin_fast".into(),
            StaticFeature::TotalInsulinSlow => "total_insulin_slow".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSetSpec {
    pub name: FeatureSetName,
    pub temporal: Vec<TemporalFeature>,
    pub statics: Vec<StaticFeature>,
}

fn ch(c: VitalChannel) -> TemporalFeature {
    TemporalFeature::Channel(TemporalChannel::Vital(c))
}

const G: TemporalFeature = TemporalFeature::Channel(TemporalChannel::Glucose);
const HYPO: TemporalFeature = TemporalFeature::Channel(TemporalChannel::HypoFlag);

fn glucose_metrics() -> Vec<StaticFeature> {
    use AggKind::*;
    [Slope, EveningLow, EveningPeak, DailyMin, SdFirstDiff, Cv]
        .into_iter()
        .map(|k| StaticFeature::Aggregate(AggChannel::Glucose, k))
        .collect()
}

fn demographics() -> Vec<StaticFeature> {
    use StaticFeature::*;
    vec![
        Gender,
        Age,
        Weight,
        Height,
        Bmi,
        BasalPercentage,
        BasalTotal,
    ]
}

fn insulin4() -> Vec<StaticFeature> {
    use StaticFeature::*;
    vec![
        MaxInsulinFast,
        MaxInsulinSlow,
        TotalInsulinFast,
        TotalInsulinSlow,
    ]
}

fn insulin6() -> Vec<StaticFeature> {
    let mut v = insulin4();
    v.extend([StaticFeature::Hba1c, StaticFeature::Tdd]);
    v
}

/// The twelve channels of the reduced selection, also used by the transfer
/// model.
pub fn reduced_channels() -> Vec<TemporalFeature> {
    use VitalChannel::*;
    let mut v = vec![G, HYPO];
    v.extend(
        [
            ActivityClassification,
            BloodPulseWave,
            CoreTemperature,
            GsrElectrode,
            HeartRate,
            HeartRateVariability,
            MotionActivity,
            NumberOfSteps,
            PerfusionIndex,
            RespirationRate,
        ]
        .map(ch),
    );
    v
}

impl FeatureSetSpec {
    pub fn get(name: FeatureSetName) -> FeatureSetSpec {
        use AggChannel as A;
        use AggKind::*;
        use StaticFeature::Aggregate as Agg;
        use VitalChannel::*;
        let (temporal, statics) = match name {
            FeatureSetName::All => {
                let mut t = vec![G, HYPO];
                t.extend(
                    [
                        HeartRate,
                        HeartRateVariability,
                        MotionActivity,
                        ActivityClassification,
                        NumberOfSteps,
                        PerfusionIndex,
                        RespirationRate,
                        Energy,
                        ActivityScore,
                        RelaxStressIntensityScore,
                        CoreTemperature,
                        TemperatureLocal,
                        TemperatureObject,
                        BarometerPressure,
                        BloodPulseWave,
                        GsrElectrode,
                        HealthScore,
                        TrainingEffectScore,
                        RichnessScore,
                    ]
                    .map(ch),
                );
                let mut s = glucose_metrics();
                s.push(Agg(A::Glucose, LiabilityIndex));
                s.extend([
                    Agg(A::HeartRate, EveningLow),
                    Agg(A::HeartRate, EveningPeak),
                    Agg(A::HeartRate, DailyMin),
                    Agg(A::HeartRateVariability, EveningLow),
                    Agg(A::HeartRateVariability, EveningPeak),
                    Agg(A::HeartRateVariability, DailyMin),
                    Agg(A::RelaxStress, EveningLow),
                    Agg(A::RelaxStress, EveningPeak),
                    Agg(A::RelaxStress, DailyMin),
                ]);
                s.extend(demographics());
                s.extend(insulin6());
                (t, s)
            }
            FeatureSetName::EverionDailyOnly => {
                let mut s = insulin6();
                s.extend(demographics());
                s.extend([
                    Agg(A::HeartRateVariability, EveningLow),
                    Agg(A::HeartRateVariability, EveningPeak),
                    Agg(A::HeartRateVariability, DailyMin),
                ]);
                (vec![G, HYPO], s)
            }
            FeatureSetName::GlucoseNormal => {
                let t = vec![
                    G,
                    HYPO,
                    ch(HeartRate),
                    ch(HeartRateVariability),
                    ch(NumberOfSteps),
                ];
                let mut s = insulin6();
                s.extend(demographics());
                s.extend(glucose_metrics());
                (t, s)
            }
            FeatureSetName::GlucosePersonalized => {
                let t = vec![
                    TemporalFeature::PersonalizedGlucose,
                    HYPO,
                    ch(HeartRate),
                    ch(HeartRateVariability),
                ];
                let mut s = glucose_metrics();
                s.extend(insulin4());
                (t, s)
            }
            FeatureSetName::NonAggregatedDaily => {
                let mut t = vec![G, HYPO];
                t.extend(
                    [
                        HeartRate,
                        PerfusionIndex,
                        MotionActivity,
                        ActivityClassification,
                        HeartRateVariability,
                        RespirationRate,
                        Energy,
                        CoreTemperature,
                        TemperatureLocal,
                        BarometerPressure,
                        GsrElectrode,
                        HealthScore,
                        TrainingEffectScore,
                        ActivityScore,
                        RichnessScore,
                        BloodPulseWave,
                        TemperatureObject,
                        TemperatureBarometer,
                    ]
                    .map(ch),
                );
                (t, insulin4())
            }
            FeatureSetName::Marx2023 => {
                let t = reduced_channels()[2..].to_vec();
                let mut s: Vec<StaticFeature> = demographics()[..5].to_vec();
                s.extend([StaticFeature::BasalPercentage, StaticFeature::BasalTotal]);
                s.extend([StaticFeature::Hba1c, StaticFeature::Tdd]);
                s.extend(insulin4());
                s.extend(glucose_metrics());
                (t, s)
            }
            FeatureSetName::Reduced => {
                let mut s = insulin4();
                s.extend(demographics());
                s.extend([StaticFeature::Hba1c, StaticFeature::Tdd]);
                s.extend(glucose_metrics());
                (reduced_channels(), s)
            }
        };
        FeatureSetSpec {
            name,
            temporal,
            statics,
        }
    }

    pub fn temporal_names(&self) -> Vec<String> {
        self.temporal.iter().map(|t| t.name()).collect()
    }

    pub fn static_names(&self) -> Vec<String> {
        self.statics.iter().map(|s| s.name()).collect()
    }

    /// Plain-text listing for audit.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "feature_set = {}\nregistry_version = {}\ntemporal ({}):\n",
            self.name,
            REGISTRY_VERSION,
            self.temporal.len()
        );
        for n in self.temporal_names() {
            out.push_str(&format!("  {n}\n"));
        }
        out.push_str(&format!("static ({}):\n", self.statics.len()));
        for n in self.static_names() {
            out.push_str(&format!("  {n}\n"));
        }
        out
    }
}
