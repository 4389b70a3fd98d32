use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::Json;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};

use pics_core::{init_from_click, Hyperparameters, ImageStack, KnotEdit, Point, StopReason};
use pics_io::{decode_gray, encode_mask_png, export_annotation, save_mask, AnnotationRecord, ImageRef, KnotEntry};

use crate::error::{ApiError, ApiResult};
use crate::session::{knot_entries, RunOutcome, RunState, Session, SessionHandle, SliceHistory};
use crate::AppState;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Upload {
    #[serde(default)]
    pub name: Option<String>,
    /// Base64 of a PGM or PNG file.
    pub data: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub images: Vec<Upload>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct Descriptor {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub slices: usize,
    pub slice: usize,
    pub image_ids: Vec<String>,
    pub state: RunState,
    pub knots: Option<Vec<KnotEntry>>,
    pub iterations: usize,
    pub mu: f64,
    pub hyperparameters: Hyperparameters<f64>,
    pub history: Vec<SliceHistory>,
}

impl Descriptor {
    fn of(s: &Session) -> Self {
        Self {
            id: s.id.clone(),
            width: s.stack.width(),
            height: s.stack.height(),
            slices: s.stack.len(),
            slice: s.slice,
            image_ids: s.image_ids.clone(),
            state: s.state,
            knots: s.knots.as_ref().map(knot_entries),
            iterations: s.trace_len,
            mu: s.mu,
            hyperparameters: s.hyper.clone(),
            history: s.history.clone(),
        }
    }
}

/// Hyperparameters from a preset name or an explicit set, at most one.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub hyperparameters: Option<Hyperparameters<f64>>,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

impl Tuning {
    fn resolve(&self, app: &AppState, base: &Hyperparameters<f64>) -> ApiResult<Option<Hyperparameters<f64>>> {
        let mut hyper = match (&self.preset, &self.hyperparameters) {
            (Some(_), Some(_)) => {
                return Err(ApiError::Invalid(
                    "give either a preset or hyperparameters, not both".into(),
                ))
            }
            (Some(name), None) => Some(app.presets.get(name)?.hyperparameters.clone()),
            (None, Some(h)) => Some(h.clone()),
            (None, None) => None,
        };
        if let Some(n) = self.max_iters {
            hyper.get_or_insert_with(|| base.clone()).max_iters = n;
        }
        if let Some(h) = &hyper {
            h.validate()?;
        }
        Ok(hyper)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitRequest {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub n_knots: Option<usize>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub hyperparameters: Option<Hyperparameters<f64>>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct KnotsResponse {
    pub knots: Vec<KnotEntry>,
    /// False when the edit waits for the running loop's next iteration.
    pub applied: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchRequest {
    pub edits: Vec<KnotEdit<f64>>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct StateResponse {
    pub state: RunState,
    pub iterations: usize,
    #[serde(default)]
    pub stop: Option<StopReason>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct MaskPayload {
    pub width: usize,
    pub height: usize,
    /// Base64 of an 8-bit PNG, 255 inside.
    pub png: String,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct ExportResponse {
    pub annotation: AnnotationRecord,
    pub mask: MaskPayload,
    /// Files written to the working directory, if one is configured.
    #[serde(default)]
    pub files: Vec<PathBuf>,
}

fn session(app: &AppState, id: &str) -> ApiResult<Arc<SessionHandle>> {
    app.sessions
        .read()
        .unwrap_or_else(|p| p.into_inner())
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(id.to_string()))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Invalid(format!("request body: {e}")))
}

fn parse_optional<T: for<'de> Deserialize<'de> + Default>(body: &[u8]) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

pub async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Descriptor>)> {
    let req: CreateSession = parse(&body)?;
    if req.images.is_empty() {
        return Err(ApiError::Invalid("no images uploaded".into()));
    }
    let mut slices = Vec::with_capacity(req.images.len());
    let mut ids = Vec::with_capacity(req.images.len());
    for (i, up) in req.images.iter().enumerate() {
        let name = up.name.clone().unwrap_or_else(|| format!("slice_{i:03}"));
        let bytes = B64
            .decode(up.data.trim())
            .map_err(|e| ApiError::Invalid(format!("{name}: bad base64: {e}")))?;
        slices.push(decode_gray(&bytes, &name)?);
        ids.push(name);
    }
    let stack = ImageStack::new(slices)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let s = Session::new(id.clone(), ids, stack, Hyperparameters::default());
    let descriptor = Descriptor::of(&s);
    app.sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id, SessionHandle::new(s));
    Ok((StatusCode::CREATED, Json(descriptor)))
}

pub async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Descriptor>> {
    let h = session(&app, &id)?;
    let d = Descriptor::of(&h.lock());
    Ok(Json(d))
}

pub async fn post_init(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<KnotsResponse>> {
    let req: InitRequest = parse(&body)?;
    let h = session(&app, &id)?;
    let knots = {
        let mut s = h.lock();
        let tuning = Tuning {
            preset: req.preset,
            hyperparameters: req.hyperparameters,
            max_iters: None,
        };
        let mut hyper = tuning.resolve(&app, &s.hyper)?.unwrap_or_else(|| s.hyper.clone());
        if let Some(r) = req.radius {
            hyper.init_radius = r;
        }
        if let Some(n) = req.n_knots {
            hyper.n_knots = n;
        }
        hyper.validate()?;
        let knots = init_from_click(
            Point::new(req.x, req.y),
            hyper.init_radius,
            hyper.n_knots,
            s.stack.width(),
            s.stack.height(),
        )?;
        s.initialize(knots.clone(), hyper)?;
        knots
    };
    h.notify();
    Ok(Json(KnotsResponse {
        knots: knot_entries(&knots),
        applied: true,
    }))
}

pub async fn post_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<StateResponse>> {
    let tuning: Tuning = parse_optional(&body)?;
    let h = session(&app, &id)?;
    let hyper = {
        let s = h.lock();
        tuning.resolve(&app, &s.hyper)?
    };
    h.start(hyper)?;
    let s = h.lock();
    Ok(Json(StateResponse {
        state: RunState::Running,
        iterations: s.trace_len,
        stop: None,
    }))
}

pub async fn post_pause(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<StateResponse>> {
    let h = session(&app, &id)?;
    let outcome = h.pause().await?;
    Ok(Json(StateResponse {
        state: outcome.state,
        iterations: outcome.iterations,
        stop: outcome.stop,
    }))
}

pub async fn patch_knots(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<KnotsResponse>> {
    let req: PatchRequest = parse(&body)?;
    let h = session(&app, &id)?;
    let (knots, applied) = h.lock().edit(req.edits)?;
    h.notify();
    Ok(Json(KnotsResponse {
        knots: knot_entries(&knots),
        applied,
    }))
}

pub async fn get_export(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExportResponse>> {
    let h = session(&app, &id)?;
    let (record, mask, stem) = {
        let s = h.lock();
        let knots = s
            .knots
            .clone()
            .ok_or_else(|| ApiError::Conflict("nothing to export; call init first".into()))?;
        let hyper = Hyperparameters {
            mu: s.mu,
            ..s.hyper.clone()
        };
        let loss = s.ctx.loss(&knots, &hyper)?;
        let mask = s.ctx.mask_for(&knots, hyper.samples_per_segment)?;
        let image = ImageRef {
            id: s.image_ids[s.slice].clone(),
            width: s.stack.width(),
            height: s.stack.height(),
        };
        (
            AnnotationRecord::new(image, &knots, hyper, loss, None),
            mask,
            format!("slice_{:03}", s.slice),
        )
    };
    let mut files = Vec::new();
    if let Some(dir) = &app.workdir {
        let dir = dir.join(&id);
        std::fs::create_dir_all(&dir).map_err(|e| pics_io::IoError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, export_annotation(&record)?).map_err(|e| pics_io::IoError::Io {
            path: json.clone(),
            source: e,
        })?;
        let png = dir.join(format!("{stem}_mask.png"));
        save_mask(&png, &mask)?;
        files = vec![json, png];
    }
    Ok(Json(ExportResponse {
        annotation: record,
        mask: MaskPayload {
            width: mask.width(),
            height: mask.height(),
            png: B64.encode(encode_mask_png(&mask)?),
        },
        files,
    }))
}

pub async fn post_next_slice(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Descriptor>> {
    let h = session(&app, &id)?;
    let d = {
        let mut s = h.lock();
        s.advance()?;
        Descriptor::of(&s)
    };
    h.notify();
    Ok(Json(d))
}

pub async fn get_presets(State(app): State<AppState>) -> Json<pics_io::PresetCatalogue> {
    Json(app.presets.as_ref().clone())
}

/// Which run a subscriber follows, and how far it has read.
struct Cursor {
    handle: Arc<SessionHandle>,
    rx: tokio::sync::watch::Receiver<u64>,
    epoch: u64,
    next: usize,
    stride: usize,
    closed: bool,
}

enum Step {
    Emit(Event),
    Close(Event),
    Wait,
}

impl Cursor {
    fn poll(&mut self) -> Step {
        let s = self.handle.lock();
        if s.epoch < self.epoch {
            return Step::Wait;
        }
        if s.epoch > self.epoch {
            // A newer run replaced the one being followed.
            return Step::Close(done_event(&RunOutcome {
                state: s.state,
                stop: None,
                iterations: s.trace_len,
                error: Some("superseded by a newer run".into()),
            }));
        }
        while self.next < s.events.len() {
            let ev = &s.events[self.next];
            let newest = self.next + 1 == s.events.len();
            if !ev.iter.is_multiple_of(self.stride) && newest && s.outcome.is_none() {
                // Might turn out to be the final iteration; decide later.
                return Step::Wait;
            }
            self.next += 1;
            if ev.iter.is_multiple_of(self.stride) || newest {
                return Step::Emit(
                    Event::default()
                        .event("iteration")
                        .json_data(ev)
                        .expect("event serializes"),
                );
            }
        }
        match &s.outcome {
            Some(outcome) => Step::Close(done_event(outcome)),
            None => Step::Wait,
        }
    }
}

fn done_event(outcome: &RunOutcome) -> Event {
    Event::default()
        .event("done")
        .json_data(outcome)
        .expect("outcome serializes")
}

/// Replays the current run from its first iteration, then follows it live
/// until a terminal `done` event. An idle session's stream waits for the
/// next run.
pub async fn get_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let handle = session(&app, &id)?;
    let rx = handle.subscribe();
    let epoch = {
        let s = handle.lock();
        if s.state == RunState::Running || s.outcome.is_some() {
            s.epoch
        } else {
            s.epoch + 1
        }
    };
    let cursor = Cursor {
        handle,
        rx,
        epoch,
        next: 0,
        stride: app.event_stride.max(1),
        closed: false,
    };
    let events = stream::unfold(cursor, |mut c| async move {
        if c.closed {
            return None;
        }
        loop {
            c.rx.borrow_and_update();
            match c.poll() {
                Step::Emit(ev) => return Some((Ok(ev), c)),
                Step::Close(ev) => {
                    c.closed = true;
                    return Some((Ok(ev), c));
                }
                Step::Wait => {
                    if c.rx.changed().await.is_err() {
                        return None;
                    }
                }
            }
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
