//! Entropy-driven member weights and the statistical weight floor.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("beta must be greater than 1, got {0}")]
    Beta(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("degrees of freedom must be at least 1")]
    DegreesOfFreedom,
    #[error("weight clamps must satisfy 0 < w_min <= w_init <= w_max")]
    Clamp,
    #[error("deviation must be finite and non-negative, got {0}")]
    Deviation(f64),
}

/// Multiplicative update parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPolicy {
    pub beta: f64,
    pub alpha: f64,
    pub w_init: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl WeightPolicy {
    pub const W_MIN: f64 = 1e-12;
    pub const W_MAX: f64 = 1e12;

    pub fn new(beta: f64, alpha: f64) -> Result<Self, WeightError> {
        let policy = Self {
            beta,
            alpha,
            w_init: 1.0,
            w_min: Self::W_MIN,
            w_max: Self::W_MAX,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(WeightError::Beta(self.beta));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(WeightError::Alpha(self.alpha));
        }
        if !(self.w_min > 0.0 && self.w_min <= self.w_init && self.w_init <= self.w_max) {
            return Err(WeightError::Clamp);
        }
        Ok(())
    }
}

/// `beta` when the member's deviation is exactly zero, `e^-(1 + psi)`
/// otherwise. The jump at zero (from `beta` down to `1/e`) is intended.
pub fn delta_factor(psi: f64, beta: f64) -> Result<f64, WeightError> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(WeightError::Beta(beta));
    }
    if !(psi.is_finite() && psi >= 0.0) {
        return Err(WeightError::Deviation(psi));
    }
    Ok(if psi == 0.0 {
        beta
    } else {
        (-(1.0 + psi)).exp()
    })
}

pub fn update_weight(w: f64, psi: f64, policy: &WeightPolicy) -> Result<f64, WeightError> {
    let factor = delta_factor(psi, policy.beta)?;
    Ok((factor * w).clamp(policy.w_min, policy.w_max))
}

/// Upper-`alpha` quantile of Student's t with `df` degrees of freedom, i.e.
/// the `t` with `P(T > t) = alpha`.
pub fn student_t_quantile(alpha: f64, df: u64) -> Result<f64, WeightError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WeightError::Alpha(alpha));
    }
    if df == 0 {
        return Err(WeightError::DegreesOfFreedom);
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|_| WeightError::DegreesOfFreedom)?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Member weights recorded since the last confirmed drift.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightLedger {
    records: Vec<f64>,
}

impl WeightLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, weight: f64) {
        assert!(
            weight > 0.0,
            "ledger weights must be positive, got {weight}"
        );
        self.records.push(weight);
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[f64] {
        &self.records
    }
}

impl FromIterator<f64> for WeightLedger {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut ledger = Self::new();
        for w in iter {
            ledger.push(w);
        }
        ledger
    }
}

/// Lower bound a member weight should respect under a stable concept:
/// `mean - S / sqrt(n) * t_alpha(n - 1) - 3 S`, with `S` the sample standard
/// deviation of the ledger. `None` when fewer than two weights are recorded.
pub fn weight_floor(ledger: &WeightLedger, alpha: f64) -> Result<Option<f64>, WeightError> {
    let n = ledger.len();
    if n < 2 {
        return Ok(None);
    }
    let t = student_t_quantile(alpha, n as u64 - 1)?;
    let nf = n as f64;
    // Offsets from the first record keep a constant ledger's mean exact.
    let pivot = ledger.records[0];
    let mean = pivot + ledger.records.iter().map(|w| w - pivot).sum::<f64>() / nf;
    let var = ledger
        .records
        .iter()
        .map(|w| (w - mean) * (w - mean))
        .sum::<f64>()
        / (nf - 1.0);
    let s = var.sqrt();
    Ok(Some(mean - s / nf.sqrt() * t - 3.0 * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn delta_examples() {
        assert_eq!(delta_factor(0.0, 2.0).unwrap(), 2.0);
        assert_abs_diff_eq!(delta_factor(0.5, 2.0).unwrap(), 0.223_130, epsilon = 5e-7);
        assert_abs_diff_eq!(delta_factor(1e-12, 2.0).unwrap(), 0.367_879, epsilon = 5e-7);
        assert_eq!(delta_factor(0.1, 1.0), Err(WeightError::Beta(1.0)));
        assert_eq!(delta_factor(0.1, 0.5), Err(WeightError::Beta(0.5)));
        assert_eq!(delta_factor(-0.1, 2.0), Err(WeightError::Deviation(-0.1)));
    }

    #[test]
    fn update_examples() {
        let policy = WeightPolicy::new(2.0, 0.05).unwrap();
        assert_eq!(update_weight(1.0, 0.0, &policy).unwrap(), 2.0);
        assert_abs_diff_eq!(
            update_weight(1.0, 0.5, &policy).unwrap(),
            0.223_130,
            epsilon = 5e-7
        );
        assert_eq!(
            update_weight(policy.w_min, 1.0, &policy).unwrap(),
            policy.w_min
        );
        assert_eq!(
            update_weight(policy.w_max, 0.0, &policy).unwrap(),
            policy.w_max
        );
    }

    #[test]
    fn policy_validation() {
        assert_eq!(WeightPolicy::new(0.5, 0.05), Err(WeightError::Beta(0.5)));
        assert_eq!(WeightPolicy::new(2.0, 1.5), Err(WeightError::Alpha(1.5)));
        let mut p = WeightPolicy::new(2.0, 0.05).unwrap();
        p.w_min = 2.0;
        assert_eq!(p.validate(), Err(WeightError::Clamp));
    }

    #[test]
    fn quantile_examples() {
        assert_abs_diff_eq!(student_t_quantile(0.05, 2).unwrap(), 2.920, epsilon = 0.005);
        assert_abs_diff_eq!(
            student_t_quantile(0.05, 10).unwrap(),
            1.812,
            epsilon = 0.005
        );
        for df in [1, 3, 40, 5000] {
            assert_eq!(student_t_quantile(0.5, df).unwrap(), 0.0);
        }
        assert_eq!(
            student_t_quantile(0.05, 0),
            Err(WeightError::DegreesOfFreedom)
        );
        assert_eq!(student_t_quantile(0.0, 3), Err(WeightError::Alpha(0.0)));
    }

    #[test]
    fn floor_examples() {
        let flat: WeightLedger = [1.0; 5].into_iter().collect();
        assert_eq!(weight_floor(&flat, 0.05).unwrap(), Some(1.0));

        let spread: WeightLedger = [0.8, 1.0, 1.2].into_iter().collect();
        let theta = weight_floor(&spread, 0.05).unwrap().unwrap();
        assert_abs_diff_eq!(theta, 0.06283, epsilon = 1e-3);

        let single: WeightLedger = [3.0].into_iter().collect();
        assert_eq!(weight_floor(&single, 0.05).unwrap(), None);
        assert_eq!(weight_floor(&WeightLedger::new(), 0.05).unwrap(), None);
    }

    #[test]
    fn persistent_deviation_decays_geometrically() {
        let policy = WeightPolicy::new(2.0, 0.05).unwrap();
        let psis = [0.3, 0.1, 0.7, 0.2, 0.1, 0.4];
        let mut w = policy.w_init;
        for (m, psi) in psis.iter().enumerate() {
            w = update_weight(w, *psi, &policy).unwrap();
            let bound = policy.w_init * (-(m as f64 + 1.0) * (1.0 + 0.1)).exp();
            assert!(w <= bound * (1.0 + 1e-12), "block {m}: {w} > {bound}");
        }
        let expected = (-(psis.len() as f64) - psis.iter().sum::<f64>()).exp();
        assert_abs_diff_eq!(w, expected, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn update_strictly_decreasing_in_psi(
            w in 1e-3f64..1e3,
            a in 1e-6f64..5.0,
            gap in 1e-6f64..5.0,
        ) {
            let policy = WeightPolicy::new(2.0, 0.05).unwrap();
            let lo = update_weight(w, a, &policy).unwrap();
            let hi = update_weight(w, a + gap, &policy).unwrap();
            prop_assert!(hi < lo);
            prop_assert!(lo < w / std::f64::consts::E);
        }

        #[test]
        fn zero_variance_floor_is_the_common_weight(w in 1e-6f64..1e6, n in 2usize..50) {
            let ledger: WeightLedger = std::iter::repeat_n(w, n).collect();
            prop_assert_eq!(weight_floor(&ledger, 0.05).unwrap(), Some(w));
        }

        #[test]
        fn floor_nondecreasing_in_alpha(
            records in proptest::collection::vec(0.01f64..10.0, 2..40),
            a in 0.01f64..0.45,
            gap in 0.001f64..0.5,
        ) {
            let ledger: WeightLedger = records.into_iter().collect();
            let lo = weight_floor(&ledger, a).unwrap().unwrap();
            let hi = weight_floor(&ledger, (a + gap).min(0.99)).unwrap().unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
