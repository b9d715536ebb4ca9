use serde::{Deserialize, Serialize};

use crate::ingest::PatientMeta;
use crate::scalar::Real;

/// How the personalized glucose factor combines age, height, weight and BMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Personalization {
    /// `g * (1 + (age + height_cm + weight_kg + bmi))` with raw units.
    #[default]
    Literal,
    /// Same form with each term z-scored over the cohort's patients.
    Normalized,
}

/// Multiplier applied to glucose; `None` when a required field is missing.
pub fn personal_factor(meta: &PatientMeta) -> Option<f64> {
    Some(1.0 + (meta.age? + meta.height? + meta.weight? + meta.bmi?))
}

pub fn personalize_glucose<T: Real>(g: T, meta: &PatientMeta) -> Option<T> {
    personal_factor(meta).map(|f| g * T::lit(f))
}

/// Cohort statistics for the normalized variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonalScale {
    pub mean: [f64; 4],
    pub sd: [f64; 4],
}

fn terms(meta: &PatientMeta) -> Option<[f64; 4]> {
    Some([meta.age?, meta.height?, meta.weight?, meta.bmi?])
}

impl PersonalScale {
    /// Population moments over patients with all four fields. Zero spreads
    /// are replaced by 1 so a constant term contributes 0.
    pub fn fit<'a>(metas: impl IntoIterator<Item = &'a PatientMeta>) -> Option<PersonalScale> {
        let rows: Vec<[f64; 4]> = metas.into_iter().filter_map(terms).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; 4];
        let mut sd = [0.0; 4];
        for k in 0..4 {
            mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            sd[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Some(PersonalScale { mean, sd })
    }

    pub fn factor(&self, meta: &PatientMeta) -> Option<f64> {
        let t = terms(meta)?;
        Some(
            1.0 + (0..4)
                .map(|k| (t[k] - self.mean[k]) / self.sd[k])
                .sum::<f64>(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(a: f64, h: f64, w: f64, b: f64) -> PatientMeta {
        PatientMeta {
            age: Some(a),
            height: Some(h),
            weight: Some(w),
            bmi: Some(b),
            ..PatientMeta::placeholder("p")
        }
    }

    #[test]
    fn literal_factor() {
        let m = meta(10.0, 140.0, 35.0, 17.9);
        assert!((personalize_glucose(5.0f64, &m).unwrap() - 1019.5).abs() < 1e-9);
        assert_eq!(personalize_glucose(0.0, &m), Some(0.0));
        assert_eq!(
            personalize_glucose(5.0, &meta(0.0, 0.0, 0.0, 0.0)),
            Some(5.0)
        );
        assert_eq!(
            personalize_glucose(5.0, &PatientMeta::placeholder("x")),
            None
        );
    }

    #[test]
    fn normalized_centers_terms() {
        let ms = [meta(8.0, 130.0, 30.0, 17.0), meta(14.0, 160.0, 50.0, 19.5)];
        let s = PersonalScale::fit(&ms).unwrap();
        let f: f64 = ms.iter().map(|m| s.factor(m).unwrap()).sum();
        assert!((f - 2.0).abs() < 1e-12);
    }
}
