//! Operation performance index and the OPI-driven update of the region weight.

use crate::energy::{DeltaOrientation, Hyperparameters};
use crate::error::{PicsError, Result};
use crate::scalar::Scalar;

/// Normalized exponential window weights `exp(1 + i d) / sum`, `d = 1/(w-1)`,
/// oldest first; the newest entry carries the most weight.
pub fn opi_weights<T: Scalar>(window: usize) -> Vec<T> {
    let d = T::one() / T::from_count(window - 1);
    let raw: Vec<T> = (0..window).map(|i| (T::one() + T::from_count(i) * d).exp()).collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|r| r / total).collect()
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// OPI at iteration `k` (0-based) over the last `window` differences:
/// `1 - <theta, P> / (2 sum theta)`, `P = sign(dJ_int) - sign(dJ_ext)`.
///
/// Needs `k >= window` so that `window` differences exist.
pub fn compute_opi<T: Scalar>(
    j_int: &[T],
    j_ext: &[T],
    k: usize,
    window: usize,
    orientation: DeltaOrientation,
) -> Result<T> {
    if window < 2 {
        return Err(PicsError::InvalidHyperparameter("opi_window must be >= 2".into()));
    }
    let have = j_int.len().min(j_ext.len());
    if k < window || k >= have {
        return Err(PicsError::InsufficientHistory {
            needed: window + 1,
            have: have.min(k + 1),
        });
    }
    let theta = opi_weights::<T>(window);
    let delta = |series: &[T], i: usize| match orientation {
        DeltaOrientation::Forward => series[i] - series[i - 1],
        DeltaOrientation::Drop => series[i - 1] - series[i],
    };
    let dot: T = theta
        .iter()
        .enumerate()
        .map(|(n, &th)| {
            let i = k + 1 - window + n;
            th * (sign(delta(j_int, i)) - sign(delta(j_ext, i)))
        })
        .sum();
    let total: T = theta.iter().copied().sum();
    Ok(T::one() - dot / (T::lit(2.0) * total))
}

/// The region weight after one OPI check.
///
/// Grows by `2^log10(J_ext / J_int)` when the OPI is below threshold, `J_int`
/// is positive and `J_ext` has not yet reached `mu_cap_ratio * J_int`.
pub fn adapt_mu<T: Scalar>(mu: T, opi: Option<T>, j_ext: T, j_int: T, hyper: &Hyperparameters<T>) -> T {
    let Some(opi) = opi else { return mu };
    if !(opi < hyper.opi_threshold) || !(j_int > T::zero()) {
        return mu;
    }
    if !(j_ext < hyper.mu_cap_ratio * j_int) {
        return mu;
    }
    let inc = T::lit(2.0).powf((j_ext / j_int).log10());
    if inc.is_finite() {
        mu + inc
    } else {
        mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn weights_normalized_and_increasing() {
        let th = opi_weights::<f64>(10);
        assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(th.windows(2).all(|p| p[1] > p[0]));
        // endpoints are exp(1) and exp(2) before normalization
        assert!((th[9] / th[0] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn both_decreasing_is_one() {
        let int = series(|i| 100.0 - i as f64, 12);
        let ext = series(|i| 50.0 - 2.0 * i as f64, 12);
        assert_eq!(compute_opi(&int, &ext, 11, 10, DeltaOrientation::Forward).unwrap(), 1.0);
        assert_eq!(compute_opi(&int, &ext, 10, 10, DeltaOrientation::Drop).unwrap(), 1.0);
    }

    #[test]
    fn constant_int_decreasing_ext_is_half() {
        let int = vec![3.0; 12];
        let ext = series(|i| 50.0 - i as f64, 12);
        let v = compute_opi(&int, &ext, 11, 10, DeltaOrientation::Forward).unwrap();
        assert!((v - 0.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn int_down_ext_up_is_two() {
        let int = series(|i| 100.0 - i as f64, 12);
        let ext = series(|i| i as f64, 12);
        let v = compute_opi(&int, &ext, 11, 10, DeltaOrientation::Forward).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = compute_opi(&int, &ext, 11, 10, DeltaOrientation::Drop).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn history_required() {
        let s = vec![1.0; 10];
        assert!(matches!(
            compute_opi(&s, &s, 9, 10, DeltaOrientation::Forward),
            Err(PicsError::InsufficientHistory { .. })
        ));
        assert!(compute_opi(&s, &s, 12, 10, DeltaOrientation::Forward).is_err());
    }

    #[test]
    fn mu_increments() {
        let h = Hyperparameters::<f64>::default();
        let low = Some(0.1);
        assert!((adapt_mu(1e3, low, 100.0, 100.0, &h) - 1001.0).abs() < 1e-12);
        assert!((adapt_mu(1e3, low, 1e4, 100.0, &h) - 1004.0).abs() < 1e-12);
        assert_eq!(adapt_mu(1e3, low, 1e7, 100.0, &h), 1e3);
        // at threshold or above, or without an OPI yet: unchanged
        assert_eq!(adapt_mu(1e3, Some(0.8), 1e4, 100.0, &h), 1e3);
        assert_eq!(adapt_mu(1e3, None, 1e4, 100.0, &h), 1e3);
        assert_eq!(adapt_mu(1e3, low, 1e4, 0.0, &h), 1e3);
    }
}
