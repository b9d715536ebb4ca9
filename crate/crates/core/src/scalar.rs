//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that does arithmetic on features, probabilities or network
//! parameters is written against [`Real`], so the same code runs in `f32`
//! for speed and in `f64` for gradient checks and oracles.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Logistic sigmoid, evaluated without overflow for large negative inputs.
#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_count(xs.len()))
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_sd<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    Some((sum_sq_dev(xs) / T::from_count(xs.len() - 1)).sqrt())
}

/// Sum of squared deviations from the mean. Values are shifted by the first
/// element before the two-pass sum, so a constant slice gives exactly 0.
fn sum_sq_dev<T: Real>(xs: &[T]) -> T {
    let shift = xs[0];
    let m = xs.iter().map(|&x| x - shift).sum::<T>() / T::from_count(xs.len());
    xs.iter().map(|&x| (x - shift - m) * (x - shift - m)).sum()
}

/// Population standard deviation (n denominator); `None` for an empty slice.
pub fn population_sd<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some((sum_sq_dev(xs) / T::from_count(xs.len())).sqrt())
}

/// Median of a slice of `f64`; `None` if empty.
pub fn median_f64(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_finite() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        for z in [-800.0f64, -30.0, -1.0, 1.0, 30.0, 800.0] {
            let s = sigmoid(z);
            assert!(s.is_finite());
            assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
        assert!((sigmoid(1.0f32) - 0.731_058_6).abs() < 1e-6);
    }

    #[test]
    fn moments() {
        let xs = [4.0, 6.0, 5.0];
        assert_eq!(mean(&xs), Some(5.0));
        assert_eq!(sample_sd(&xs), Some(1.0));
        assert!(sample_sd(&[1.0f64]).is_none());
        assert_eq!(median_f64(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }
}
