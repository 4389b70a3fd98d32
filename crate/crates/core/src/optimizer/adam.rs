use serde::{Deserialize, Serialize};

use crate::error::{PicsError, Result};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::spline::KnotVector;

/// First/second moment estimates over the `2N` knot coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n_coords: usize) -> Self {
        Self {
            m: vec![T::zero(); n_coords],
            v: vec![T::zero(); n_coords],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of the unpinned coordinates, then a
    /// clamp of every moved knot into `[0, bounds.x] x [0, bounds.y]`.
    /// Pinned knots are copied through untouched.
    pub fn step(
        &mut self,
        knots: &KnotVector<T>,
        grad: &[T],
        params: &AdamParams<T>,
        bounds: Option<Point<T>>,
    ) -> Result<KnotVector<T>> {
        let n = knots.len() * 2;
        if grad.len() != n || self.m.len() != n {
            return Err(PicsError::DimensionMismatch(format!(
                "Adam over {} coordinates, gradient {}, knots {}",
                self.m.len(),
                grad.len(),
                n
            )));
        }
        self.t += 1;
        let t = self.t.min(i32::MAX as u64) as i32;
        let bc1 = T::one() - params.beta1.powi(t);
        let bc2 = T::one() - params.beta2.powi(t);

        let mut w = knots.weights();
        for (j, &g) in grad.iter().enumerate() {
            self.m[j] = params.beta1 * self.m[j] + (T::one() - params.beta1) * g;
            self.v[j] = params.beta2 * self.v[j] + (T::one() - params.beta2) * g * g;
            if knots.is_pinned(j / 2) {
                continue;
            }
            let m_hat = self.m[j] / bc1;
            let v_hat = self.v[j] / bc2;
            w[j] = w[j] - params.learning_rate * m_hat / (v_hat.sqrt() + params.eps);
            if let Some(b) = bounds {
                let hi = if j % 2 == 0 { b.x } else { b.y };
                w[j] = w[j].max(T::zero()).min(hi);
            }
        }
        knots.with_weights(&w)
    }
}
