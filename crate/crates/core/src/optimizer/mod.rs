//! Gradient descent on the knot coordinates.
//!
//! Each iteration evaluates the loss at the current knots, updates the OPI
//! and (optionally) the region weight, takes a central-difference gradient
//! and applies one Adam step. Queued knot edits are applied between
//! iterations only.

mod adam;
mod fd;
mod opi;
mod trace;

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use adam::{AdamParams, AdamState};
pub use fd::fd_gradient;
pub use opi::{adapt_mu, compute_opi, opi_weights};
pub use trace::{IterationRecord, OptimizationTrace};

use crate::energy::{Hyperparameters, LossContext};
use crate::error::{PicsError, Result};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::spline::KnotVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    /// Knot displacement stayed under the stall tolerance.
    Stalled,
    /// Best total loss stopped improving.
    Plateau,
    /// Interrupted through the control channel.
    Paused,
}

/// A change to one knot: new position and/or pin flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotEdit<T> {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned: Option<bool>,
}

/// Apply a batch of edits atomically: either every edit lands or none.
/// With `bounds` set, moved knots must stay inside `[0, bounds.x] x [0, bounds.y]`.
pub fn apply_edits<T: Scalar>(
    knots: &KnotVector<T>,
    edits: &[KnotEdit<T>],
    bounds: Option<Point<T>>,
) -> Result<KnotVector<T>> {
    let mut pts = knots.knots().to_vec();
    let mut pins = knots.pinned().to_vec();
    for e in edits {
        if e.index >= pts.len() {
            return Err(PicsError::InvalidEdit(format!(
                "knot index {} out of range (have {})",
                e.index,
                pts.len()
            )));
        }
        if let Some(p) = e.position {
            if let Some(b) = bounds {
                let inside = p.x >= T::zero() && p.y >= T::zero() && p.x <= b.x && p.y <= b.y;
                if !inside {
                    return Err(PicsError::InvalidEdit(format!(
                        "knot {} moved outside the image to ({}, {})",
                        e.index, p.x, p.y
                    )));
                }
            }
            pts[e.index] = p;
        }
        if let Some(pin) = e.pinned {
            pins[e.index] = pin;
        }
    }
    KnotVector::with_pins(pts, pins).map_err(|err| PicsError::InvalidEdit(err.to_string()))
}

/// Pause flag and edit queue shared between an optimization loop and its
/// controller. Edits are applied in arrival order at iteration boundaries.
#[derive(Debug)]
pub struct ControlChannel<T> {
    pause: AtomicBool,
    edits: Mutex<VecDeque<Vec<KnotEdit<T>>>>,
}

impl<T> Default for ControlChannel<T> {
    fn default() -> Self {
        Self {
            pause: AtomicBool::new(false),
            edits: Mutex::new(VecDeque::new()),
        }
    }
}

impl<T: Scalar> ControlChannel<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn request_pause(&self) {
        self.pause.store(true, Ordering::SeqCst);
    }

    pub fn clear_pause(&self) {
        self.pause.store(false, Ordering::SeqCst);
    }

    pub fn pause_requested(&self) -> bool {
        self.pause.load(Ordering::SeqCst)
    }

    pub fn queue_edits(&self, edits: Vec<KnotEdit<T>>) {
        self.edits.lock().expect("edit queue poisoned").push_back(edits);
    }

    /// Take every queued batch, oldest first.
    pub fn drain(&self) -> Vec<Vec<KnotEdit<T>>> {
        self.edits.lock().expect("edit queue poisoned").drain(..).collect()
    }
}

/// Everything an optimization run carries between iterations. Owning it
/// outside the loop lets a caller pause, edit and resume.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct OptimizerState<T> {
    pub knots: KnotVector<T>,
    pub adam: AdamState<T>,
    pub mu: T,
    pub trace: OptimizationTrace<T>,
    pub stop: Option<StopReason>,
    /// Edit batches rejected by the loop.
    pub rejected_edits: usize,
    stalled: usize,
    /// Best loss at the run's starting mu, and the iteration it was seen.
    best: Option<(T, usize)>,
    mu_ref: T,
    iters_this_run: usize,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(init: KnotVector<T>, hyper: &Hyperparameters<T>) -> Self {
        let n = init.len() * 2;
        Self {
            knots: init,
            adam: AdamState::new(n),
            mu: hyper.mu,
            trace: OptimizationTrace::default(),
            stop: None,
            rejected_edits: 0,
            stalled: 0,
            best: None,
            mu_ref: hyper.mu,
            iters_this_run: 0,
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.stop, Some(r) if r != StopReason::Paused)
    }

    /// Clear the stop state so that `step` may continue, e.g. after a pause
    /// or to refine a finished run. Moments and mu are kept.
    pub fn resume(&mut self) {
        self.stop = None;
        self.stalled = 0;
        self.best = None;
        self.mu_ref = self.mu;
        self.iters_this_run = 0;
    }

    pub fn apply_edits(&mut self, edits: &[KnotEdit<T>], bounds: Option<Point<T>>) -> Result<()> {
        let next = apply_edits(&self.knots, edits, bounds)?;
        self.knots = next;
        Ok(())
    }

    /// One iteration. `observer` sees the record together with the knots
    /// the loss was evaluated at.
    pub fn step(
        &mut self,
        ctx: &LossContext<T>,
        hyper: &Hyperparameters<T>,
        observer: &mut dyn FnMut(&IterationRecord<T>, &KnotVector<T>),
    ) -> Result<&IterationRecord<T>> {
        let started = Instant::now();
        let hyper_now = Hyperparameters {
            mu: self.mu,
            ..hyper.clone()
        };
        let loss = ctx.loss(&self.knots, &hyper_now)?;

        let k = self.trace.len();
        let mut j_int = self.trace.j_int();
        let mut j_ext = self.trace.j_ext();
        j_int.push(loss.j_int);
        j_ext.push(loss.j_ext);
        let opi = if k >= hyper.opi_window {
            Some(compute_opi(&j_int, &j_ext, k, hyper.opi_window, hyper.opi_delta)?)
        } else {
            None
        };

        let mu_used = self.mu;
        if hyper.adaptive_mu {
            self.mu = adapt_mu(self.mu, opi, loss.j_ext, loss.j_int, hyper);
        }

        let grad_hyper = Hyperparameters {
            mu: self.mu,
            ..hyper.clone()
        };
        let grad = fd_gradient(|kv| Ok(ctx.loss(kv, &grad_hyper)?.j_total), &self.knots, hyper.fd_step)?;
        let params = AdamParams {
            learning_rate: hyper.learning_rate,
            beta1: hyper.adam_beta1,
            beta2: hyper.adam_beta2,
            eps: hyper.adam_eps,
        };
        let img = ctx.image();
        let bounds = Point::new(T::from_count(img.width()), T::from_count(img.height()));
        let next = self.adam.step(&self.knots, &grad, &params, Some(bounds))?;
        let max_displacement = self
            .knots
            .weights()
            .iter()
            .zip(next.weights())
            .map(|(a, b)| (*a - b).abs())
            .fold(T::zero(), T::max);

        let record = IterationRecord {
            iter: k,
            loss,
            opi,
            mu: mu_used,
            max_displacement,
            wall_time: started.elapsed(),
        };
        observer(&record, &self.knots);
        if hyper.snapshot_every > 0 && k.is_multiple_of(hyper.snapshot_every) {
            self.trace.snapshots.push((k, self.knots.clone()));
        }
        self.trace.records.push(record);
        self.knots = next;
        self.iters_this_run += 1;
        self.update_stop(hyper);
        Ok(self.trace.last().expect("record just pushed"))
    }

    fn update_stop(&mut self, hyper: &Hyperparameters<T>) {
        let rec = self.trace.last().expect("called after a step");
        let k = rec.iter;

        if rec.max_displacement < hyper.stall_tolerance {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }

        // Plateau tracking uses the run's starting mu so that mu adaptation
        // alone never looks like progress or regress.
        let l = &rec.loss;
        let reference =
            hyper.alpha * l.j_psi_s + hyper.beta * l.j_psi_ss + self.mu_ref * l.j_cv + hyper.sigma * l.curv_penalty;
        match self.best {
            Some((best, _)) if !(reference < best - hyper.plateau_rel_tol * best.abs()) => {}
            _ => self.best = Some((reference, k)),
        }

        self.stop = if self.iters_this_run >= hyper.max_iters {
            Some(StopReason::MaxIters)
        } else if hyper.stall_iters > 0 && self.stalled >= hyper.stall_iters {
            Some(StopReason::Stalled)
        } else if hyper.plateau_iters > 0 && self.best.is_some_and(|(_, at)| k - at >= hyper.plateau_iters) {
            Some(StopReason::Plateau)
        } else {
            None
        };
    }
}

/// Final state of an optimization run.
#[derive(Clone, Debug)]
pub struct Optimized<T> {
    pub knots: KnotVector<T>,
    pub trace: OptimizationTrace<T>,
    pub stop: StopReason,
    pub mu: T,
}

/// Run the loop from `init` until a stop rule fires.
///
/// With a control channel, queued edit batches are applied before each
/// iteration; a batch that fails validation is dropped whole and counted in
/// `OptimizerState::rejected_edits`. A pause request ends the run with
/// [`StopReason::Paused`].
pub fn optimize<T: Scalar>(
    ctx: &LossContext<T>,
    init: KnotVector<T>,
    hyper: &Hyperparameters<T>,
    observer: &mut dyn FnMut(&IterationRecord<T>, &KnotVector<T>),
    control: Option<&ControlChannel<T>>,
) -> Result<Optimized<T>> {
    hyper.validate()?;
    let mut state = OptimizerState::new(init, hyper);
    run(ctx, &mut state, hyper, observer, control)?;
    Ok(Optimized {
        knots: state.knots,
        trace: state.trace,
        stop: state.stop.expect("run ends with a stop reason"),
        mu: state.mu,
    })
}

/// Drive an existing state until it stops or is paused.
pub fn run<T: Scalar>(
    ctx: &LossContext<T>,
    state: &mut OptimizerState<T>,
    hyper: &Hyperparameters<T>,
    observer: &mut dyn FnMut(&IterationRecord<T>, &KnotVector<T>),
    control: Option<&ControlChannel<T>>,
) -> Result<StopReason> {
    let img = ctx.image();
    let bounds = Point::new(T::from_count(img.width()), T::from_count(img.height()));
    if state.stop.is_some() {
        state.resume();
    }
    loop {
        if let Some(ch) = control {
            for batch in ch.drain() {
                if state.apply_edits(&batch, Some(bounds)).is_err() {
                    state.rejected_edits += 1;
                }
            }
            if ch.pause_requested() {
                state.stop = Some(StopReason::Paused);
                return Ok(StopReason::Paused);
            }
        }
        state.step(ctx, hyper, observer)?;
        if let Some(reason) = state.stop {
            return Ok(reason);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GrayImage;

    fn square_knots() -> KnotVector<f64> {
        KnotVector::new(vec![
            Point::new(10.0, 10.0),
            Point::new(20.0, 10.0),
            Point::new(20.0, 20.0),
            Point::new(10.0, 20.0),
        ])
        .unwrap()
    }

    #[test]
    fn edits_are_atomic() {
        let k = square_knots();
        let bounds = Some(Point::new(32.0, 32.0));
        let bad = [
            KnotEdit {
                index: 0,
                position: Some(Point::new(5.0, 5.0)),
                pinned: Some(true),
            },
            KnotEdit {
                index: 1,
                position: Some(Point::new(40.0, 5.0)),
                pinned: None,
            },
        ];
        assert!(matches!(apply_edits(&k, &bad, bounds), Err(PicsError::InvalidEdit(_))));
        let dup = [KnotEdit {
            index: 1,
            position: Some(Point::new(10.0, 10.0)),
            pinned: None,
        }];
        assert!(apply_edits(&k, &dup, bounds).is_err());
        let oob = [KnotEdit {
            index: 7,
            position: None,
            pinned: Some(true),
        }];
        assert!(apply_edits(&k, &oob, bounds).is_err());
        let ok = apply_edits(&k, &bad[..1], bounds).unwrap();
        assert_eq!(ok.knots()[0], Point::new(5.0, 5.0));
        assert!(ok.is_pinned(0));
    }

    #[test]
    fn zero_weights_stop_by_displacement() {
        let img = GrayImage::from_fn(32, 32, |x, _| if x > 15 { 1.0 } else { 0.0 }).unwrap();
        let ctx = LossContext::new(img);
        let mut h = Hyperparameters::with_weights(0.0, 0.0, 0.0, 0.0, 0.0);
        h.plateau_iters = 0;
        let init = square_knots();
        let out = optimize(&ctx, init.clone(), &h, &mut |_, _| {}, None).unwrap();
        assert_eq!(out.stop, StopReason::Stalled);
        assert_eq!(out.trace.len(), h.stall_iters);
        assert_eq!(out.knots, init);
    }

    #[test]
    fn pause_request_stops_before_next_iteration() {
        let img = GrayImage::uniform(16, 16, 0.5).unwrap();
        let ctx = LossContext::new(img);
        let h = Hyperparameters::<f64>::default();
        let ch = ControlChannel::new();
        let mut seen = 0;
        let out = optimize(
            &ctx,
            square_knots().map_points(|p| p * 0.5).unwrap(),
            &h,
            &mut |_, _| {
                seen += 1;
                if seen == 3 {
                    ch.request_pause();
                }
            },
            Some(&ch),
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::Paused);
        assert_eq!(out.trace.len(), 3);
    }
}
