//! Per-session state. A session owns its image stack and at most one
//! optimizer; while a run is in flight the optimizer lives on a blocking
//! worker and the session keeps only what the loop reports back.

use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use pics_core::optimizer::run;
use pics_core::{
    apply_edits, ControlChannel, GrayImage, Hyperparameters, ImageStack, IterationRecord, KnotEdit, KnotVector,
    LossContext, OptimizerState, Point, StopReason,
};
use pics_io::{KnotEntry, TraceRow};

use crate::error::{ApiError, ApiResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Idle,
    Running,
    Paused,
    Done,
}

pub fn knot_entries(knots: &KnotVector<f64>) -> Vec<KnotEntry> {
    knots
        .knots()
        .iter()
        .zip(knots.pinned())
        .map(|(p, &pinned)| KnotEntry { x: p.x, y: p.y, pinned })
        .collect()
}

/// One streamed iteration. Loss fields mean exactly what the trace CSV
/// columns of the same name mean; `knots` are the positions the loss was
/// evaluated at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub iter: usize,
    pub knots: Vec<KnotEntry>,
    pub j_int: f64,
    pub j_ext: f64,
    pub j_shape: f64,
    pub j_total: f64,
    pub opi: Option<f64>,
    pub mu: f64,
}

impl IterationEvent {
    pub fn new(rec: &IterationRecord<f64>, knots: &KnotVector<f64>) -> Self {
        let row = TraceRow::from(rec);
        Self {
            iter: row.iteration,
            knots: knot_entries(knots),
            j_int: row.j_int,
            j_ext: row.j_ext,
            j_shape: row.j_shape,
            j_total: row.j_total,
            opi: row.opi,
            mu: row.mu,
        }
    }
}

/// Payload of the terminal `done` event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub state: RunState,
    pub stop: Option<StopReason>,
    /// Length of the accumulated trace.
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceHistory {
    pub slice: usize,
    pub iterations: usize,
    pub stop: Option<StopReason>,
}

pub struct Session {
    pub id: String,
    pub image_ids: Vec<String>,
    pub stack: ImageStack<f64>,
    pub slice: usize,
    pub ctx: Arc<LossContext<f64>>,
    pub hyper: Hyperparameters<f64>,
    /// `None` before init and while a worker owns it.
    opt: Option<OptimizerState<f64>>,
    /// Latest known knots; tracks the worker during a run.
    pub knots: Option<KnotVector<f64>>,
    pub mu: f64,
    pub trace_len: usize,
    pub state: RunState,
    pub control: Arc<ControlChannel<f64>>,
    /// Events of the current (or most recent) run.
    pub events: Vec<IterationEvent>,
    pub outcome: Option<RunOutcome>,
    /// Incremented whenever a run starts.
    pub epoch: u64,
    pub history: Vec<SliceHistory>,
}

impl Session {
    pub fn new(id: String, image_ids: Vec<String>, stack: ImageStack<f64>, hyper: Hyperparameters<f64>) -> Self {
        let ctx = Arc::new(LossContext::new(stack.slices()[0].clone()));
        Self {
            id,
            image_ids,
            stack,
            slice: 0,
            ctx,
            mu: hyper.mu,
            hyper,
            opt: None,
            knots: None,
            trace_len: 0,
            state: RunState::Idle,
            control: Arc::new(ControlChannel::new()),
            events: Vec::new(),
            outcome: None,
            epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn image(&self) -> &GrayImage<f64> {
        &self.stack.slices()[self.slice]
    }

    pub fn bounds(&self) -> Point<f64> {
        Point::new(self.stack.width() as f64, self.stack.height() as f64)
    }

    fn ensure_not_running(&self, what: &str) -> ApiResult<()> {
        if self.state == RunState::Running {
            return Err(ApiError::Conflict(format!(
                "cannot {what} while the optimizer is running"
            )));
        }
        Ok(())
    }

    fn require_knots(&self) -> ApiResult<&KnotVector<f64>> {
        self.knots
            .as_ref()
            .ok_or_else(|| ApiError::Conflict("session has no contour yet; call init first".into()))
    }

    fn reset_run(&mut self) {
        self.events.clear();
        self.outcome = None;
        self.state = RunState::Idle;
    }

    /// Start over on the current slice from `knots`.
    pub fn initialize(&mut self, knots: KnotVector<f64>, hyper: Hyperparameters<f64>) -> ApiResult<()> {
        self.ensure_not_running("re-initialize")?;
        let opt = OptimizerState::new(knots.clone(), &hyper);
        self.mu = opt.mu;
        self.trace_len = 0;
        self.hyper = hyper;
        self.knots = Some(knots);
        self.opt = Some(opt);
        self.reset_run();
        Ok(())
    }

    /// Validate `edits` against the current knots. Idle or stopped sessions
    /// take them at once; a running loop picks them up at its next
    /// iteration boundary. Returns the resulting knots.
    pub fn edit(&mut self, edits: Vec<KnotEdit<f64>>) -> ApiResult<(KnotVector<f64>, bool)> {
        let next = apply_edits(self.require_knots()?, &edits, Some(self.bounds()))?;
        if self.state == RunState::Running {
            self.control.queue_edits(edits);
            return Ok((next, false));
        }
        let opt = self.opt.as_mut().expect("stopped session owns its optimizer");
        opt.knots = next.clone();
        self.knots = Some(next.clone());
        Ok((next, true))
    }

    /// Hand the optimizer to a new run. Replacing the hyperparameters also
    /// resets mu to the new starting value.
    fn begin_run(&mut self, hyper: Option<Hyperparameters<f64>>) -> ApiResult<OptimizerState<f64>> {
        if self.state == RunState::Running {
            return Err(ApiError::Conflict("already running".into()));
        }
        self.require_knots()?;
        let mut opt = self.opt.take().expect("stopped session owns its optimizer");
        if let Some(h) = hyper {
            opt.mu = h.mu;
            self.hyper = h;
        }
        self.mu = opt.mu;
        self.control.clear_pause();
        self.reset_run();
        self.state = RunState::Running;
        self.epoch += 1;
        Ok(opt)
    }

    fn record(&mut self, rec: &IterationRecord<f64>, knots: &KnotVector<f64>) {
        self.events.push(IterationEvent::new(rec, knots));
        self.knots = Some(knots.clone());
        self.mu = rec.mu;
        self.trace_len = rec.iter + 1;
    }

    fn finish(&mut self, mut opt: OptimizerState<f64>, result: pics_core::Result<StopReason>) {
        // Edits that arrived after the loop's last boundary still land.
        for batch in self.control.drain() {
            if opt.apply_edits(&batch, Some(self.bounds())).is_err() {
                opt.rejected_edits += 1;
            }
        }
        let (state, error) = match &result {
            Ok(StopReason::Paused) => (RunState::Paused, None),
            Ok(_) => (RunState::Done, None),
            Err(e) => (RunState::Done, Some(e.to_string())),
        };
        self.state = state;
        self.outcome = Some(RunOutcome {
            state,
            stop: opt.stop,
            iterations: opt.trace.len(),
            error,
        });
        self.knots = Some(opt.knots.clone());
        self.mu = opt.mu;
        self.trace_len = opt.trace.len();
        self.opt = Some(opt);
    }

    /// Warm-start the next slice from the current knots.
    pub fn advance(&mut self) -> ApiResult<()> {
        self.ensure_not_running("change slice")?;
        let knots = self.require_knots()?.clone();
        if self.slice + 1 >= self.stack.len() {
            return Err(ApiError::Conflict(format!(
                "already on the last slice ({} of {})",
                self.slice + 1,
                self.stack.len()
            )));
        }
        let opt = self.opt.as_ref().expect("stopped session owns its optimizer");
        self.history.push(SliceHistory {
            slice: self.slice,
            iterations: opt.trace.len(),
            stop: opt.stop,
        });
        self.slice += 1;
        self.ctx = Arc::new(LossContext::new(self.image().clone()));
        let hyper = self.hyper.clone();
        self.initialize(knots, hyper)
    }
}

/// A session plus the change counter that stream subscribers wait on.
pub struct SessionHandle {
    inner: Mutex<Session>,
    changed: watch::Sender<u64>,
}

impl SessionHandle {
    pub fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            inner: Mutex::new(session),
            changed: watch::Sender::new(0),
        })
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn notify(&self) {
        self.changed.send_modify(|v| *v = v.wrapping_add(1));
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.changed.subscribe()
    }

    /// Start the optimizer on a blocking worker.
    pub fn start(self: &Arc<Self>, hyper: Option<Hyperparameters<f64>>) -> ApiResult<()> {
        let (mut opt, ctx, hyper, control) = {
            let mut s = self.lock();
            let opt = s.begin_run(hyper)?;
            (opt, s.ctx.clone(), s.hyper.clone(), s.control.clone())
        };
        self.notify();
        let handle = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut observer = |rec: &IterationRecord<f64>, knots: &KnotVector<f64>| {
                handle.lock().record(rec, knots);
                handle.notify();
            };
            let result = run(&ctx, &mut opt, &hyper, &mut observer, Some(&control));
            handle.lock().finish(opt, result);
            handle.notify();
        });
        Ok(())
    }

    /// Ask a running loop to stop and wait until it has.
    pub async fn pause(&self) -> ApiResult<RunOutcome> {
        let mut rx = self.subscribe();
        {
            let s = self.lock();
            if s.state != RunState::Running {
                return Err(ApiError::Conflict(
                    format!("cannot pause a {:?} session", s.state).to_lowercase(),
                ));
            }
            s.control.request_pause();
        }
        loop {
            rx.borrow_and_update();
            if let Some(outcome) = self.lock().outcome.clone() {
                return Ok(outcome);
            }
            if rx.changed().await.is_err() {
                return Err(ApiError::Conflict("session closed".into()));
            }
        }
    }
}
