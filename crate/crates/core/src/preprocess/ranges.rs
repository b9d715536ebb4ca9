use std::collections::BTreeMap;

use serde::Serialize;

use super::PreprocessError;
use crate::ingest::{GlucoseSample, VitalChannel, VitalSample};

/// What a plausibility range applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RangeKey {
    Glucose,
    Vital(VitalChannel),
}

impl RangeKey {
    pub fn name(self) -> &'static str {
        match self {
            RangeKey::Glucose => "glucose",
            RangeKey::Vital(c) => c.name(),
        }
    }

    pub fn from_name(s: &str) -> Option<RangeKey> {
        if s == "glucose" {
            Some(RangeKey::Glucose)
        } else {
            VitalChannel::from_name(s).map(RangeKey::Vital)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelRange {
    pub key: RangeKey,
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    pub fn new(key: RangeKey, min: f64, max: f64) -> Result<Self, PreprocessError> {
        if !(min < max) {
            return Err(PreprocessError::InvalidRange {
                channel: key.name().to_string(),
                min,
                max,
            });
        }
        Ok(ChannelRange { key, min, max })
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Plausibility ranges for every channel.
///
/// The defaults are engineering values chosen for this crate (device
/// technical ranges are not public); override them with a `ranges.toml`
/// holding `channel = [min, max]` lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeTable {
    ranges: BTreeMap<RangeKey, ChannelRange>,
}

const DEFAULTS: &[(&str, f64, f64)] = &[
    ("glucose", 1.0, 35.0),
    ("heart_rate", 30.0, 240.0),
    ("perfusion_index", 0.0, 20.0),
    ("motion_activity", 0.0, 1000.0),
    ("activity_classification", 0.0, 20.0),
    ("heart_rate_variability", 0.0, 300.0),
    ("respiration_rate", 4.0, 60.0),
    ("energy", 0.0, 100.0),
    ("core_temperature", 30.0, 43.0),
    ("temperature_local", 15.0, 45.0),
    ("barometer_pressure", 800.0, 1100.0),
    ("gsr_electrode", 1e-6, 1e6),
    ("health_score", 0.0, 100.0),
    ("relax_stress_intensity_score", 0.0, 100.0),
    ("training_effect_score", 0.0, 100.0),
    ("activity_score", 0.0, 100.0),
    ("richness_score", 0.0, 100.0),
    ("blood_pulse_wave", 0.0, 1000.0),
    ("number_of_steps", 0.0, 1000.0),
    ("temperature_object", 0.0, 50.0),
    ("temperature_barometer", 0.0, 50.0),
    ("basis_gsr", 0.0, 100.0),
    ("basis_skin_temperature", 0.0, 120.0),
    ("basis_heart_rate", 30.0, 240.0),
    ("basis_steps", 0.0, 1000.0),
    ("acceleration", 0.0, 10.0),
    ("basal", 0.0, 10.0),
    ("hypo_event", 0.0, 1.0),
];

impl Default for RangeTable {
    fn default() -> Self {
        let ranges = DEFAULTS
            .iter()
            .map(|&(name, lo, hi)| {
                let key = RangeKey::from_name(name).expect("default channel registered");
                (
                    key,
                    ChannelRange {
                        key,
                        min: lo,
                        max: hi,
                    },
                )
            })
            .collect();
        RangeTable { ranges }
    }
}

impl RangeTable {
    pub fn empty() -> Self {
        RangeTable {
            ranges: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: RangeKey) -> Option<&ChannelRange> {
        self.ranges.get(&key)
    }

    pub fn set(&mut self, range: ChannelRange) {
        self.ranges.insert(range.key, range);
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChannelRange> {
        self.ranges.values()
    }

    /// Applies `channel = [min, max]` overrides from TOML text on top of
    /// this table.
    pub fn with_overrides(mut self, toml_text: &str) -> Result<Self, PreprocessError> {
        let parsed: BTreeMap<String, Vec<f64>> =
            toml::from_str(toml_text).map_err(|e| PreprocessError::Config(e.to_string()))?;
        for (name, bounds) in parsed {
            let key = RangeKey::from_name(&name)
                .ok_or_else(|| PreprocessError::UnregisteredChannel(name.clone()))?;
            let [lo, hi] = bounds[..] else {
                return Err(PreprocessError::Config(format!(
                    "{name}: expected [min, max], got {} values",
                    bounds.len()
                )));
            };
            self.set(ChannelRange::new(key, lo, hi)?);
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        self.ranges
            .values()
            .map(|r| format!("{} = [{:?}, {:?}]\n", r.key.name(), r.min, r.max))
            .collect()
    }
}

/// Something a plausibility range can be applied to.
pub trait Ranged {
    fn range_key(&self) -> RangeKey;
    fn raw_value(&self) -> f64;
}

impl Ranged for GlucoseSample {
    fn range_key(&self) -> RangeKey {
        RangeKey::Glucose
    }
    fn raw_value(&self) -> f64 {
        self.value_mmol_l
    }
}

impl Ranged for VitalSample {
    fn range_key(&self) -> RangeKey {
        RangeKey::Vital(self.channel)
    }
    fn raw_value(&self) -> f64 {
        self.value
    }
}

/// Samples removed per channel by [`apply_plausibility`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlausibilityReport {
    pub removed: BTreeMap<&'static str, usize>,
}

/// Drops samples outside their channel's `[min, max]`.
pub fn apply_plausibility<S: Ranged + Clone>(
    samples: &[S],
    table: &RangeTable,
) -> Result<(Vec<S>, PlausibilityReport), PreprocessError> {
    let mut report = PlausibilityReport::default();
    let mut kept = Vec::with_capacity(samples.len());
    for s in samples {
        let key = s.range_key();
        let range = table
            .get(key)
            .ok_or_else(|| PreprocessError::UnregisteredChannel(key.name().to_string()))?;
        if range.contains(s.raw_value()) {
            kept.push(s.clone());
        } else {
            *report.removed.entry(key.name()).or_default() += 1;
        }
    }
    Ok((kept, report))
}
