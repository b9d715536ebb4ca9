use std::ops::Range;

use serde::Serialize;

use crate::scalar::{mean, sample_sd, Real};

/// Evening steps of the 10:00-anchored grid: 19:00 to 22:00.
pub const EVENING: Range<usize> = 36..48;

/// Daily summary statistics of one channel on the 48-step grid.
///
/// Fields are 0 when undefined; `defined` covers the full-day statistics and
/// `evening_defined` the evening peak/low.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DailyAggregates<T> {
    pub cv: T,
    pub liability_index: T,
    pub sd_first_diff: T,
    pub daily_min: T,
    pub evening_peak: T,
    pub evening_low: T,
    pub linreg_slope: T,
    pub defined: bool,
    pub evening_defined: bool,
}

/// Computes the daily aggregates over observed (`mask == true`) samples.
///
/// Consecutive observed samples are treated as adjacent, so the first
/// differences skip gaps. The SD of first differences divides by
/// `m - 1` where `m` is the number of differences.
pub fn daily_aggregates<T: Real>(
    series: &[T],
    mask: &[bool],
    evening: Range<usize>,
) -> DailyAggregates<T> {
    assert_eq!(series.len(), mask.len(), "series and mask lengths differ");
    let obs: Vec<(usize, T)> = series
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (_, &m))| m)
        .map(|(i, (&v, _))| (i, v))
        .collect();
    let mut out = DailyAggregates::default();

    let eve: Vec<T> = obs
        .iter()
        .filter(|(i, _)| evening.contains(i))
        .map(|&(_, v)| v)
        .collect();
    if !eve.is_empty() {
        out.evening_peak = eve.iter().copied().fold(T::neg_infinity(), T::max);
        out.evening_low = eve.iter().copied().fold(T::infinity(), T::min);
        out.evening_defined = true;
    }
    if obs.len() < 2 {
        return out;
    }
    out.defined = true;

    let values: Vec<T> = obs.iter().map(|&(_, v)| v).collect();
    let g_mean = mean(&values).expect("non-empty");
    let sd = sample_sd(&values).expect("two values");
    out.cv = if g_mean == T::zero() {
        T::zero()
    } else {
        (sd / g_mean).abs()
    };

    let diffs: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
    out.liability_index = diffs.iter().map(|&d| d * d).sum::<T>() / T::lit(5.0);
    out.sd_first_diff = sample_sd(&diffs).unwrap_or_else(T::zero);
    out.daily_min = values.iter().copied().fold(T::infinity(), T::min);

    // Centered two-pass OLS; the raw-moment form cancels badly on long days.
    // Glucose is shifted by its first value so a flat day has slope exactly 0.
    let g0 = values[0];
    let dg_mean = values.iter().map(|&g| g - g0).sum::<T>() / T::from_count(values.len());
    let t_mean = mean(
        &obs.iter()
            .map(|&(i, _)| T::from_count(i))
            .collect::<Vec<_>>(),
    )
    .expect("non-empty");
    let (mut stg, mut stt) = (T::zero(), T::zero());
    for &(i, g) in &obs {
        let dt = T::from_count(i) - t_mean;
        stg += dt * (g - g0 - dg_mean);
        stt += dt * dt;
    }
    out.linreg_slope = stg / stt;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let a = daily_aggregates(&[4.0f64, 6.0, 5.0], &[true; 3], 0..3);
        assert!((a.cv - 0.2).abs() < 1e-15);
        assert!((a.liability_index - 1.0).abs() < 1e-15);
        assert!((a.sd_first_diff - 4.5f64.sqrt()).abs() < 1e-12);
        assert!((a.linreg_slope - 0.5).abs() < 1e-15);
        assert_eq!(
            (a.daily_min, a.evening_low, a.evening_peak),
            (4.0, 4.0, 6.0)
        );
    }

    #[test]
    fn constant_series() {
        let a = daily_aggregates(&[6.3f32; 48], &[true; 48], EVENING);
        assert_eq!(a.cv, 0.0);
        assert_eq!(a.liability_index, 0.0);
        assert_eq!(a.sd_first_diff, 0.0);
        assert_eq!(a.linreg_slope, 0.0);
        assert_eq!(a.daily_min, 6.3);
    }

    #[test]
    fn undefined_cases() {
        let mut mask = [false; 48];
        mask[3] = true;
        let a = daily_aggregates(&[1.0; 48], &mask, EVENING);
        assert!(!a.defined && !a.evening_defined);
        mask[40] = true;
        let a = daily_aggregates(&[1.0; 48], &mask, EVENING);
        assert!(a.defined && a.evening_defined);
        // Only one difference: SD undefined, reported as 0.
        assert_eq!(a.sd_first_diff, 0.0);
    }
}
