use rayon::prelude::*;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::spline::KnotVector;

/// Central-difference gradient of `loss` with respect to the interleaved
/// knot coordinates `[u0, v0, u1, v1, ...]`.
///
/// Coordinates of pinned knots get an exact zero and are never probed.
/// Probes run on the rayon pool; each component is computed independently,
/// so the result does not depend on the thread count.
pub fn fd_gradient<T, F>(loss: F, knots: &KnotVector<T>, h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&KnotVector<T>) -> Result<T> + Sync,
{
    let base = knots.weights();
    let two_h = h + h;
    (0..base.len())
        .into_par_iter()
        .map(|j| {
            if knots.is_pinned(j / 2) {
                return Ok(T::zero());
            }
            let mut w = base.clone();
            w[j] = base[j] + h;
            let plus = loss(&knots.with_weights(&w)?)?;
            w[j] = base[j] - h;
            let minus = loss(&knots.with_weights(&w)?)?;
            Ok((plus - minus) / two_h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;

    fn knots() -> KnotVector<f64> {
        KnotVector::new(vec![
            Point::new(1.5, -2.0),
            Point::new(4.0, 0.25),
            Point::new(3.0, 5.0),
            Point::new(-1.0, 2.0),
        ])
        .unwrap()
    }

    fn sum_sq(k: &KnotVector<f64>) -> Result<f64> {
        Ok(k.weights().iter().map(|w| w * w).sum())
    }

    #[test]
    fn exact_on_quadratic() {
        let k = knots();
        let g = fd_gradient(sum_sq, &k, 0.5).unwrap();
        for (gi, wi) in g.iter().zip(k.weights()) {
            assert!((gi - 2.0 * wi).abs() < 1e-12);
        }
    }

    #[test]
    fn pinned_components_are_zero() {
        let mut k = knots();
        for i in 0..k.len() {
            k.set_pinned(i, true);
        }
        let g = fd_gradient(sum_sq, &k, 0.5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        k.set_pinned(2, false);
        let g = fd_gradient(sum_sq, &k, 0.5).unwrap();
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn probe_errors_propagate() {
        // stepping knot 0 by +h lands on knot 1
        let k = KnotVector::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(fd_gradient(sum_sq, &k, 1.0).is_err());
    }
}
