use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::energy::{DeltaOrientation, LossBreakdown};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::spline::KnotVector;

use super::opi::compute_opi;

/// One optimizer iteration: the loss at the knots the gradient was taken at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub loss: LossBreakdown<T>,
    /// Defined once `opi_window` differences are available.
    pub opi: Option<T>,
    /// Region weight used for this iteration's loss.
    pub mu: T,
    /// Largest knot coordinate change produced by this iteration's update.
    pub max_displacement: T,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct OptimizationTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub snapshots: Vec<(usize, KnotVector<T>)>,
}

impl<T: Scalar> OptimizationTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord<T>> {
        self.records.last()
    }

    pub fn j_int(&self) -> Vec<T> {
        self.records.iter().map(|r| r.loss.j_int).collect()
    }

    pub fn j_ext(&self) -> Vec<T> {
        self.records.iter().map(|r| r.loss.j_ext).collect()
    }

    pub fn j_total(&self) -> Vec<T> {
        self.records.iter().map(|r| r.loss.j_total).collect()
    }

    pub fn mu_history(&self) -> Vec<T> {
        self.records.iter().map(|r| r.mu).collect()
    }

    pub fn opi_history(&self) -> Vec<Option<T>> {
        self.records.iter().map(|r| r.opi).collect()
    }

    pub fn compute_opi(&self, k: usize, window: usize, orientation: DeltaOrientation) -> Result<T> {
        compute_opi(&self.j_int(), &self.j_ext(), k, window, orientation)
    }

    /// Mean over iterations that have an OPI value.
    pub fn mean_opi(&self) -> Option<T> {
        let vals: Vec<T> = self.records.iter().filter_map(|r| r.opi).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().copied().sum::<T>() / T::from_count(vals.len()))
        }
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::try_from_secs_f64(secs).unwrap_or_default())
    }
}
