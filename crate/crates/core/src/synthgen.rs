//! Seeded synthetic cohorts shaped like the two studies.
//!
//! Glucose follows a mean-reverting diffusion integrated with Euler steps,
//! `G += theta * (mu(t) - G) * dt + sigma * sqrt(dt) * eps`, where the target
//! `mu(t)` carries meal bumps and, between 22:00 and 07:00, a per-night linear
//! drift `r = offset + night_drift * z` with `z ~ N(0, 1)`. The offset is
//! calibrated by bisection on a pilot simulation so that the fraction of
//! nights later labeled hypoglycemic matches the profile's target.
//!
//! `nh_signal_strength` adds an evening ramp `s * night_drift * z * (h - 22)`
//! to the observed readings between 19:00 and 22:00. The ramp vanishes at
//! 22:00 and draws no random numbers, so for a fixed seed the night outcomes
//! do not depend on the strength while the evening slope reveals `z` more
//! clearly as the strength grows.
//!
//! Every patient draws from its own ChaCha streams keyed by
//! `(seed, patient index)`, so parallel and serial generation agree.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    Gender, GlucoseSample, GlucoseSource, LogbookEntry, PatientMeta, Provenance, RawCohort,
    SglTrend, VitalChannel, VitalSample,
};
use crate::labeling::{label_cohort, LabelConfig, DEFAULT_THRESHOLD_MMOL};
use crate::time::{date_start, SECONDS_PER_DAY, SECONDS_PER_HOUR};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),
}

/// Shape of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortProfile {
    pub name: String,
    pub n_patients: usize,
    pub nights_per_patient: usize,
    /// Probability that a patient loses its last night.
    pub truncation_prob: f64,
    pub cgm_interval_s: i64,
    pub vitals_interval_s: i64,
    /// Target minority (hypoglycemic) fraction of nights, in (0, 0.5].
    pub target_imbalance: f64,
    pub nh_signal_strength: f64,
    pub seed: u64,
    pub tz_offset_min: i32,
    pub start_date: NaiveDate,
    pub vital_channels: Vec<VitalChannel>,
    pub with_logbook: bool,
    /// Vitals are not recorded before this local hour (device swap gap).
    pub vitals_start_hour: f64,
    pub age_range: (f64, f64),
}

impl CohortProfile {
    /// 11 children, 6 nights each, isCGM-rate glucose, imbalance 1:5.5.
    pub fn inhouse_like(seed: u64) -> Self {
        CohortProfile {
            name: "inhouse-like".into(),
            n_patients: 11,
            nights_per_patient: 6,
            truncation_prob: 0.0,
            cgm_interval_s: 900,
            vitals_interval_s: 900,
            target_imbalance: 1.0 / 6.5,
            nh_signal_strength: 1.0,
            seed,
            tz_offset_min: 120,
            start_date: NaiveDate::from_ymd_opt(2021, 7, 5).expect("valid date"),
            vital_channels: VitalChannel::ALL
                .iter()
                .copied()
                .filter(|c| c.is_wearable())
                .collect(),
            with_logbook: true,
            vitals_start_hour: 9.5,
            age_range: (7.0, 16.0),
        }
    }

    /// 12 adults, ~26 nights each, 5-minute CGM, imbalance 1:2.1.
    pub fn ohio_like(seed: u64) -> Self {
        CohortProfile {
            name: "ohio-like".into(),
            n_patients: 12,
            nights_per_patient: 26,
            truncation_prob: 1.0 / 3.0,
            cgm_interval_s: 300,
            vitals_interval_s: 900,
            target_imbalance: 1.0 / 3.1,
            nh_signal_strength: 1.0,
            seed,
            tz_offset_min: 0,
            start_date: NaiveDate::from_ymd_opt(2020, 3, 2).expect("valid date"),
            vital_channels: vec![
                VitalChannel::BasisGsr,
                VitalChannel::BasisSkinTemperature,
                VitalChannel::BasisHeartRate,
                VitalChannel::BasisSteps,
                VitalChannel::Basal,
            ],
            with_logbook: false,
            vitals_start_hour: 7.0,
            age_range: (20.0, 80.0),
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Option<Self> {
        match name {
            "inhouse-like" => Some(Self::inhouse_like(seed)),
            "ohio-like" => Some(Self::ohio_like(seed)),
            _ => None,
        }
    }

    pub fn with_signal(mut self, strength: f64) -> Self {
        self.nh_signal_strength = strength;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        if !(self.target_imbalance > 0.0 && self.target_imbalance <= 0.5) {
            return bad(format!(
                "target_imbalance {} outside (0, 0.5]",
                self.target_imbalance
            ));
        }
        if !matches!(self.cgm_interval_s, 300 | 900) {
            return bad(format!(
                "cgm_interval_s {} not in {{300, 900}}",
                self.cgm_interval_s
            ));
        }
        if self.vitals_interval_s <= 0 {
            return bad("vitals_interval_s must be positive".into());
        }
        if self.n_patients == 0 || self.nights_per_patient == 0 {
            return bad("need at least one patient and one night".into());
        }
        if !(self.nh_signal_strength >= 0.0) {
            return bad("nh_signal_strength must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.truncation_prob) {
            return bad("truncation_prob outside [0, 1]".into());
        }
        if !(-720..=840).contains(&self.tz_offset_min) {
            return bad("tz_offset_min outside [-720, 840]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlucoseProcessParams {
    /// Long-run level, mmol/L.
    pub mean_level: f64,
    /// 1/hour.
    pub reversion_rate: f64,
    /// mmol/L per sqrt(hour).
    pub volatility: f64,
    /// Local hours of meals.
    pub meal_times: Vec<f64>,
    /// Peak meal excursion of the target level, mmol/L.
    pub meal_amplitude: f64,
    /// Spread of the per-night drift, mmol/L per hour.
    pub night_drift: f64,
}

impl Default for GlucoseProcessParams {
    fn default() -> Self {
        GlucoseProcessParams {
            mean_level: 7.5,
            reversion_rate: 0.6,
            volatility: 1.0,
            meal_times: vec![8.0, 12.5, 18.5],
            meal_amplitude: 3.0,
            night_drift: 0.35,
        }
    }
}

impl GlucoseProcessParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.reversion_rate > 0.0) {
            return Err(SynthError::InvalidParams(
                "reversion_rate must be positive".into(),
            ));
        }
        if !(self.volatility >= 0.0) {
            return Err(SynthError::InvalidParams(
                "volatility must be non-negative".into(),
            ));
        }
        if !(self.mean_level > 0.0) || !(self.night_drift >= 0.0) {
            return Err(SynthError::InvalidParams(
                "mean_level > 0 and night_drift >= 0".into(),
            ));
        }
        Ok(())
    }
}

const PILOT_NIGHTS: usize = 200;
const BISECTION_STEPS: usize = 30;
const OFFSET_BOUNDS: (f64, f64) = (-2.5, 1.5);
const GLUCOSE_CLAMP: (f64, f64) = (1.5, 30.0);
const MEAL_PEAK_H: f64 = 1.0;
const EXERCISE_HOURS: (f64, f64) = (14.0, 16.0);

/// Generates a cohort. Deterministic in `(profile, params)`.
pub fn generate_cohort(
    profile: &CohortProfile,
    params: &GlucoseProcessParams,
) -> Result<RawCohort, SynthError> {
    profile.validate()?;
    params.validate()?;
    let offset = calibrate_offset(profile, params);
    Ok(assemble(
        profile,
        params,
        offset,
        0,
        profile.n_patients,
        true,
    ))
}

/// Drift offset that makes the pilot's hypoglycemic-night fraction match
/// the target.
pub fn calibrate_offset(profile: &CohortProfile, params: &GlucoseProcessParams) -> f64 {
    let pilot_patients = PILOT_NIGHTS.div_ceil(profile.nights_per_patient);
    let mut pilot = profile.clone();
    pilot.truncation_prob = 0.0;
    pilot.seed = profile.seed ^ 0x9E37_79B9_7F4A_7C15;
    let fraction = |offset: f64| {
        let cohort = assemble(&pilot, params, offset, 1_000_000, pilot_patients, false);
        let run = label_cohort(&cohort, &LabelConfig::default()).expect("default label config");
        let usable = run.usable();
        usable.iter().filter(|l| l.label).count() as f64 / usable.len().max(1) as f64
    };
    let (mut lo, mut hi) = OFFSET_BOUNDS;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        // The fraction decreases as the offset increases.
        if fraction(mid) > profile.target_imbalance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn assemble(
    profile: &CohortProfile,
    params: &GlucoseProcessParams,
    offset: f64,
    index_base: usize,
    n_patients: usize,
    with_vitals: bool,
) -> RawCohort {
    let patients: Vec<PatientRecords> = (0..n_patients)
        .into_par_iter()
        .map(|i| simulate_patient(profile, params, offset, index_base + i, with_vitals))
        .collect();
    let mut cohort = RawCohort::empty(Provenance::Synthetic);
    for p in patients {
        cohort.glucose.extend(p.glucose);
        cohort.vitals.extend(p.vitals);
        cohort.logbook.extend(p.logbook);
        cohort.meta.insert(p.meta.patient_id.clone(), p.meta);
    }
    cohort
}

struct PatientRecords {
    meta: PatientMeta,
    glucose: Vec<GlucoseSample>,
    vitals: Vec<VitalSample>,
    logbook: Vec<LogbookEntry>,
}

fn stream(seed: u64, patient: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(patient as u64 * 4 + lane);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn meal_bump(hour: f64, meal: f64, amplitude: f64) -> f64 {
    let tau = hour - meal;
    if tau <= 0.0 {
        0.0
    } else {
        let x = tau / MEAL_PEAK_H;
        amplitude * x * (1.0 - x).exp()
    }
}

fn activity_level(hour: f64, meals: &[f64]) -> f64 {
    let exercise = if hour >= EXERCISE_HOURS.0 && hour < EXERCISE_HOURS.1 {
        1.0
    } else {
        0.0
    };
    let meal = meals
        .iter()
        .map(|&m| {
            if hour >= m && hour < m + 0.5 {
                0.3
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    f64::max(exercise, meal)
}

fn sample_meta(profile: &CohortProfile, id: &str, rng: &mut ChaCha8Rng) -> PatientMeta {
    let (a0, a1) = profile.age_range;
    let age: f64 = rng.gen_range(a0..=a1);
    let gender = if rng.gen_bool(0.5) {
        Gender::F
    } else {
        Gender::M
    };
    let height = if age < 18.0 {
        120.0 + 5.5 * (age - 7.0) + 6.0 * normal(rng)
    } else {
        172.0 + 9.0 * normal(rng)
    };
    let height = (height * 10.0).round() / 10.0;
    let bmi_target: f64 = if age < 18.0 {
        rng.gen_range(15.0..22.0)
    } else {
        rng.gen_range(20.0..31.0)
    };
    let weight = (bmi_target * (height / 100.0).powi(2) * 10.0).round() / 10.0;
    let bmi = ((weight / (height / 100.0).powi(2)) * 100.0).round() / 100.0;
    let tdd = (rng.gen_range(0.6..1.0) * weight * 10.0).round() / 10.0;
    let basal_percentage = rng.gen_range(35.0f64..55.0).round();
    PatientMeta {
        patient_id: id.to_string(),
        gender: Some(gender),
        age: Some(age.floor()),
        weight: Some(weight),
        height: Some(height),
        bmi: Some(bmi),
        basal_percentage: Some(basal_percentage),
        basal_total: Some((tdd * basal_percentage / 100.0 * 10.0).round() / 10.0),
        hba1c: Some((rng.gen_range(6.3f64..8.5) * 10.0).round() / 10.0),
        tdd: Some(tdd),
    }
}

struct VitalSpec {
    baseline: f64,
    patient_sd: f64,
    noise_sd: f64,
    burst: f64,
    lo: f64,
    hi: f64,
    integer: bool,
}

fn vital_spec(ch: VitalChannel) -> VitalSpec {
    let s = |baseline, patient_sd, noise_sd, burst, lo, hi| VitalSpec {
        baseline,
        patient_sd,
        noise_sd,
        burst,
        lo,
        hi,
        integer: false,
    };
    use VitalChannel::*;
    match ch {
        HeartRate | BasisHeartRate => s(82.0, 8.0, 4.0, 45.0, 35.0, 220.0),
        PerfusionIndex => s(2.5, 0.5, 0.3, 1.0, 0.1, 19.0),
        MotionActivity => s(50.0, 10.0, 10.0, 300.0, 0.0, 990.0),
        ActivityClassification => VitalSpec {
            integer: true,
            ..s(1.0, 0.0, 0.3, 4.0, 0.0, 10.0)
        },
        HeartRateVariability => s(60.0, 10.0, 8.0, -25.0, 5.0, 290.0),
        RespirationRate => s(18.0, 2.0, 1.5, 12.0, 6.0, 58.0),
        Energy => s(2.0, 0.3, 0.3, 6.0, 0.1, 90.0),
        CoreTemperature => s(37.0, 0.2, 0.1, 0.8, 35.0, 41.0),
        TemperatureLocal => s(33.0, 0.5, 0.3, 1.5, 20.0, 42.0),
        BarometerPressure => s(960.0, 5.0, 0.5, 0.0, 850.0, 1080.0),
        GsrElectrode => s(5.0, 1.0, 0.5, 8.0, 0.05, 100.0),
        HealthScore => s(70.0, 5.0, 2.0, -5.0, 1.0, 99.0),
        RelaxStressIntensityScore => s(40.0, 5.0, 5.0, 25.0, 1.0, 99.0),
        TrainingEffectScore => s(10.0, 3.0, 2.0, 30.0, 0.0, 99.0),
        ActivityScore => s(30.0, 5.0, 5.0, 40.0, 0.0, 99.0),
        RichnessScore => s(20.0, 5.0, 3.0, 20.0, 0.0, 99.0),
        BloodPulseWave => s(100.0, 10.0, 5.0, 40.0, 10.0, 900.0),
        NumberOfSteps | BasisSteps => VitalSpec {
            integer: true,
            ..s(5.0, 2.0, 3.0, 120.0, 0.0, 900.0)
        },
        TemperatureObject => s(30.0, 0.5, 0.3, 1.0, 15.0, 45.0),
        TemperatureBarometer => s(28.0, 0.5, 0.3, 1.0, 15.0, 45.0),
        BasisGsr => s(0.5, 0.2, 0.1, 3.0, 0.0, 50.0),
        BasisSkinTemperature => s(88.0, 1.0, 0.5, 2.0, 60.0, 110.0),
        Acceleration => s(1.0, 0.1, 0.05, 1.0, 0.0, 9.0),
        Basal => s(0.9, 0.2, 0.0, 0.0, 0.1, 5.0),
        HypoEvent => s(1.0, 0.0, 0.0, 0.0, 1.0, 1.0),
    }
}

fn simulate_patient(
    profile: &CohortProfile,
    params: &GlucoseProcessParams,
    offset: f64,
    index: usize,
    with_vitals: bool,
) -> PatientRecords {
    let mut meta_rng = stream(profile.seed, index, 0);
    let mut g_rng = stream(profile.seed, index, 1);
    let mut m_rng = stream(profile.seed, index, 2);
    let mut v_rng = stream(profile.seed, index, 3);

    let id = format!("P{:03}", index + 1);
    let meta = sample_meta(profile, &id, &mut meta_rng);
    let nights = if meta_rng.gen_bool(profile.truncation_prob) && profile.nights_per_patient > 1 {
        profile.nights_per_patient - 1
    } else {
        profile.nights_per_patient
    };
    let tz = profile.tz_offset_min;
    let to_utc = |local: i64| local - i64::from(tz) * 60;
    let start = date_start(profile.start_date) + 7 * SECONDS_PER_HOUR;
    let end = start + nights as i64 * SECONDS_PER_DAY;
    let source = if profile.cgm_interval_s == 900 {
        GlucoseSource::Iscgm
    } else {
        GlucoseSource::Cgm
    };

    // Per-day draws: night latent and meal sizes.
    let z: Vec<f64> = (0..nights).map(|_| normal(&mut g_rng)).collect();
    let meal_scale: Vec<Vec<f64>> = (0..nights)
        .map(|_| {
            params
                .meal_times
                .iter()
                .map(|_| g_rng.gen_range(0.6..1.4))
                .collect()
        })
        .collect();

    let theta = params.reversion_rate;
    let sigma = params.volatility;
    let dt_h = profile.cgm_interval_s as f64 / SECONDS_PER_HOUR as f64;
    let stationary_sd = sigma / (2.0 * theta).sqrt();
    let mut g = params.mean_level + stationary_sd * normal(&mut g_rng);

    let mut glucose = Vec::new();
    let mut logbook = Vec::new();
    let mut prev_obs = f64::INFINITY;
    let mut t = start;
    while t < end {
        let day = ((t - start) / SECONDS_PER_DAY) as usize;
        let hour = ((t - start) % SECONDS_PER_DAY) as f64 / 3600.0 + 7.0;
        let hour_of_day = hour % 24.0;
        let mut mu = params.mean_level;
        for (k, &m) in params.meal_times.iter().enumerate() {
            mu += meal_bump(hour, m, params.meal_amplitude * meal_scale[day][k]);
        }
        let night_rate = offset + params.night_drift * z[day];
        if hour >= 22.0 {
            mu += night_rate * (hour - 22.0);
        }
        let mut obs = g;
        if (19.0..22.0).contains(&hour) {
            obs += profile.nh_signal_strength * params.night_drift * z[day] * (hour - 22.0);
        }
        let obs = obs.clamp(GLUCOSE_CLAMP.0, GLUCOSE_CLAMP.1);
        let obs = (obs * 1000.0).round() / 1000.0;
        glucose.push(GlucoseSample {
            patient_id: id.clone(),
            t_utc: to_utc(t),
            tz_offset_min: tz,
            source,
            value_mmol_l: obs,
        });
        // Low readings are confirmed by a finger prick ten minutes later.
        if obs < DEFAULT_THRESHOLD_MMOL && prev_obs >= DEFAULT_THRESHOLD_MMOL {
            let v = (obs + 0.15 * normal(&mut m_rng)).clamp(GLUCOSE_CLAMP.0, GLUCOSE_CLAMP.1);
            glucose.push(GlucoseSample {
                patient_id: id.clone(),
                t_utc: to_utc(t + 600),
                tz_offset_min: tz,
                source: GlucoseSource::Smbg,
                value_mmol_l: (v * 100.0).round() / 100.0,
            });
            if profile.with_logbook && (10.0..22.0).contains(&hour_of_day) {
                let mut e = LogbookEntry::new(id.clone(), to_utc(t + 660), tz);
                e.blood_sugar = Some((v * 100.0).round() / 100.0);
                e.hypo_correction = Some(true);
                e.hypo_symptoms = Some(m_rng.gen_bool(0.5));
                e.carbs_fast = Some(15.0);
                e.carb_type = Some("dextrose".into());
                logbook.push(e);
            }
            if !profile.with_logbook && with_vitals && m_rng.gen_bool(0.5) {
                // Self-reported episode, recorded as a hypo event below.
                logbook.push(LogbookEntry::new(id.clone(), to_utc(t + 600), tz));
            }
        }
        prev_obs = obs;
        let step = theta * (mu - g) * dt_h + sigma * dt_h.sqrt() * normal(&mut g_rng);
        g = (g + step).clamp(GLUCOSE_CLAMP.0, GLUCOSE_CLAMP.1);
        t += profile.cgm_interval_s;
    }

    // Ohio-like cohorts keep self-reported episodes as hypo events, not logbook rows.
    let mut vitals = Vec::new();
    if !profile.with_logbook {
        for e in logbook.drain(..) {
            vitals.push(VitalSample {
                patient_id: id.clone(),
                t_utc: e.t_utc,
                tz_offset_min: tz,
                channel: VitalChannel::HypoEvent,
                value: 1.0,
                quality: None,
            });
        }
    }

    if with_vitals {
        vitals.extend(simulate_vitals(profile, params, &id, nights, &mut v_rng));
        if profile.with_logbook {
            logbook.extend(simulate_logbook(
                profile, params, &meta, &id, nights, &glucose, &mut m_rng,
            ));
        }
    }
    logbook.sort_by_key(|e| e.t_utc);

    PatientRecords {
        meta,
        glucose,
        vitals,
        logbook,
    }
}

fn simulate_vitals(
    profile: &CohortProfile,
    params: &GlucoseProcessParams,
    id: &str,
    nights: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<VitalSample> {
    let tz = profile.tz_offset_min;
    let start = date_start(profile.start_date) + 7 * SECONDS_PER_HOUR;
    let end = start + nights as i64 * SECONDS_PER_DAY;
    let specs: Vec<(VitalChannel, VitalSpec, f64)> = profile
        .vital_channels
        .iter()
        .map(|&c| {
            let spec = vital_spec(c);
            let base = spec.baseline + spec.patient_sd * normal(rng);
            (c, spec, base)
        })
        .collect();
    let mut out = Vec::new();
    let mut t = start;
    while t < end {
        let hour = (((t - start) % SECONDS_PER_DAY) as f64 / 3600.0 + 7.0) % 24.0;
        let recording = hour >= profile.vitals_start_hour || hour < 7.0;
        if recording {
            let activity = activity_level(hour, &params.meal_times);
            let asleep = !(7.0..22.5).contains(&hour);
            for (c, spec, base) in &specs {
                let level = if asleep {
                    -0.15 * spec.burst.abs()
                } else {
                    spec.burst * activity
                };
                let mut v = base + level + spec.noise_sd * normal(rng);
                if spec.integer {
                    v = v.round();
                }
                let v = v.clamp(spec.lo, spec.hi);
                out.push(VitalSample {
                    patient_id: id.to_string(),
                    t_utc: t - i64::from(tz) * 60,
                    tz_offset_min: tz,
                    channel: *c,
                    value: (v * 1000.0).round() / 1000.0,
                    quality: Some(rng.gen_range(60.0f64..100.0).round()),
                });
            }
        }
        t += profile.vitals_interval_s;
    }
    out
}

fn simulate_logbook(
    profile: &CohortProfile,
    params: &GlucoseProcessParams,
    meta: &PatientMeta,
    id: &str,
    nights: usize,
    glucose: &[GlucoseSample],
    rng: &mut ChaCha8Rng,
) -> Vec<LogbookEntry> {
    let tz = profile.tz_offset_min;
    let day0 = date_start(profile.start_date);
    let carb_ratio: f64 = rng.gen_range(10.0..18.0);
    let sensor_at = |t_utc: i64| {
        let i = glucose.partition_point(|s| s.t_utc < t_utc);
        glucose
            .get(i.min(glucose.len().saturating_sub(1)))
            .map(|s| s.value_mmol_l)
    };
    let mut out = Vec::new();
    for day in 0..nights as i64 {
        for &m in &params.meal_times {
            let local = day0 + day * SECONDS_PER_DAY + (m * 3600.0) as i64;
            let t_utc = local - i64::from(tz) * 60;
            let carbs = (rng.gen_range(40.0f64..80.0)).round();
            let mut e = LogbookEntry::new(id, t_utc, tz);
            e.sensor_glucose = sensor_at(t_utc);
            e.sgl_trend = Some(match rng.gen_range(0..4) {
                0 => SglTrend::Rising,
                1 => SglTrend::Falling,
                2 => SglTrend::Stable,
                _ => SglTrend::Unknown,
            });
            e.carbs_mixed = Some(carbs);
            e.carbs_slow = Some((carbs * 0.3).round());
            e.rapid_insulin_meals = Some((carbs / carb_ratio * 2.0).round() / 2.0);
            if let Some(g) = e.sensor_glucose {
                if g > 12.0 {
                    e.rapid_insulin_correction = Some(((g - 8.0) / 3.0 * 2.0).round() / 2.0);
                }
            }
            e.carb_type = Some("meal".into());
            out.push(e);
        }
        let sport_local = day0 + day * SECONDS_PER_DAY + (EXERCISE_HOURS.0 * 3600.0) as i64;
        let mut e = LogbookEntry::new(id, sport_local - i64::from(tz) * 60, tz);
        let minutes = (rng.gen_range(90.0f64..120.0)).round();
        e.exercise_duration_min = Some(minutes);
        e.exercise_duration_est_min = Some((minutes / 15.0).round() * 15.0);
        e.activity_type = Some(if day == 0 { "climbing" } else { "football" }.into());
        out.push(e);
        let basal_local = day0 + day * SECONDS_PER_DAY + 20 * SECONDS_PER_HOUR;
        let mut e = LogbookEntry::new(id, basal_local - i64::from(tz) * 60, tz);
        e.basal_insulin = meta.basal_total;
        e.remarks = Some("evening basal, no issues".into());
        out.push(e);
    }
    out
}
