//! HTTP front end for interactive segmentation sessions.
//!
//! Routes (JSON bodies, one server-sent event stream per session):
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | upload base64 PGM/PNG slices |
//! | GET | `/sessions/{id}` | session descriptor |
//! | POST | `/sessions/{id}/init` | circle of knots about a click |
//! | POST | `/sessions/{id}/run` | start or resume the optimizer |
//! | POST | `/sessions/{id}/pause` | stop at the next iteration boundary |
//! | PATCH | `/sessions/{id}/knots` | move and pin knots |
//! | GET | `/sessions/{id}/events` | iteration stream ending in `done` |
//! | GET | `/sessions/{id}/export` | annotation document and mask |
//! | POST | `/sessions/{id}/next-slice` | warm-start the next slice |
//! | GET | `/presets` | hyperparameter catalogue |

pub mod api;
pub mod error;
pub mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::routing::{get, patch, post};
use axum::Router;
use tower_http::cors::CorsLayer;

use pics_io::{builtin_presets, PresetCatalogue};

pub use api::{Descriptor, ExportResponse, KnotsResponse, StateResponse};
pub use error::ApiError;
pub use session::{IterationEvent, RunOutcome, RunState};

#[derive(Clone, Debug)]
pub struct Config {
    /// Exports are also written under `<workdir>/<session id>/`.
    pub workdir: Option<PathBuf>,
    pub presets: PresetCatalogue,
    /// Stream every n-th iteration (the last one is always sent).
    pub event_stride: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            workdir: None,
            presets: builtin_presets(),
            event_stride: 1,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<session::SessionHandle>>>>,
    presets: Arc<PresetCatalogue>,
    workdir: Option<PathBuf>,
    event_stride: usize,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        Self {
            sessions: Arc::default(),
            presets: Arc::new(config.presets),
            workdir: config.workdir,
            event_stride: config.event_stride,
        }
    }
}

pub fn router(config: Config) -> Router {
    Router::new()
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/init", post(api::post_init))
        .route("/sessions/{id}/run", post(api::post_run))
        .route("/sessions/{id}/pause", post(api::post_pause))
        .route("/sessions/{id}/knots", patch(api::patch_knots))
        .route("/sessions/{id}/events", get(api::get_events))
        .route("/sessions/{id}/export", get(api::get_export))
        .route("/sessions/{id}/next-slice", post(api::post_next_slice))
        .route("/presets", get(api::get_presets))
        .layer(CorsLayer::permissive())
        .with_state(AppState::new(config))
}
