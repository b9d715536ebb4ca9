use serde::{Deserialize, Serialize};

use crate::scalar::{sigmoid, Real};

/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` before the log.
pub const P_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalLossParams {
    /// `alpha_t` for positives; negatives get `1 - alpha_pos`.
    pub alpha_pos: f64,
    pub gamma: f64,
}

impl Default for FocalLossParams {
    fn default() -> Self {
        FocalLossParams {
            alpha_pos: 0.5,
            gamma: 2.0,
        }
    }
}

impl FocalLossParams {
    /// `alpha_pos = N_neg / N`, the inverse class frequency of `y`.
    pub fn inverse_frequency(y: &[bool], gamma: f64) -> Self {
        let n = y.len().max(1) as f64;
        let neg = y.iter().filter(|&&b| !b).count() as f64;
        FocalLossParams {
            alpha_pos: (neg / n).clamp(1e-3, 1.0),
            gamma,
        }
    }

    fn alpha_t(&self, label: bool) -> f64 {
        if label {
            self.alpha_pos
        } else {
            1.0 - self.alpha_pos
        }
    }
}

/// `-alpha_t (1 - p_t)^gamma ln p_t` for a predicted positive probability `p`.
pub fn focal_loss<T: Real>(p: T, label: bool, params: &FocalLossParams) -> T {
    let lo = T::lit(P_CLAMP);
    let p = p.max(lo).min(T::one() - lo);
    let pt = if label { p } else { T::one() - p };
    let alpha = T::lit(params.alpha_t(label));
    -alpha * (T::one() - pt).powf(T::lit(params.gamma)) * pt.ln()
}

/// Loss and its derivative with respect to the logit `z`, where `p = sigmoid(z)`.
/// The derivative is 0 where the clamp is active.
pub fn focal_loss_logit<T: Real>(z: T, label: bool, params: &FocalLossParams) -> (T, T) {
    let p = sigmoid(z);
    let lo = T::lit(P_CLAMP);
    let loss = focal_loss(p, label, params);
    if p < lo || p > T::one() - lo {
        return (loss, T::zero());
    }
    let pt = if label { p } else { T::one() - p };
    let s = if label { T::one() } else { -T::one() };
    let g = T::lit(params.gamma);
    let alpha = T::lit(params.alpha_t(label));
    let q = T::one() - pt;
    let grad = s * alpha * (g * pt * q.powf(g) * pt.ln() - q.powf(g + T::one()));
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let ce = FocalLossParams {
            alpha_pos: 1.0,
            gamma: 0.0,
        };
        assert!((focal_loss(0.5f64, true, &ce) - std::f64::consts::LN_2).abs() < 1e-12);
        let fl = FocalLossParams {
            alpha_pos: 1.0,
            gamma: 2.0,
        };
        assert!((focal_loss(0.5f64, true, &fl) - 0.173287).abs() < 1e-6);
        assert!(focal_loss(1.0f64, true, &fl) <= 1e-6);
    }

    #[test]
    fn gradient_matches_difference() {
        let params = FocalLossParams {
            alpha_pos: 0.3,
            gamma: 2.0,
        };
        for &label in &[true, false] {
            for &z in &[-3.0f64, -0.4, 0.0, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (focal_loss_logit(z + h, label, &params).0
                    - focal_loss_logit(z - h, label, &params).0)
                    / (2.0 * h);
                let an = focal_loss_logit(z, label, &params).1;
                assert!((fd - an).abs() < 1e-7, "z={z} label={label}: {fd} vs {an}");
            }
        }
    }
}
