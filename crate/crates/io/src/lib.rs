//! File formats for the pics segmentation engine: grayscale PGM/PNG images
//! and stacks, binary masks, versioned JSON annotations, the hyperparameter
//! preset catalogue and CSV traces.

mod annotation;
mod error;
mod image_io;
mod presets;
mod trace_csv;

pub use annotation::{export_annotation, import_annotation, AnnotationRecord, ImageRef, KnotEntry, SCHEMA};
pub use error::{IoError, Result};
pub use image_io::{
    decode_gray, encode_mask_png, load_gray, load_mask, load_stack, load_stack_dir, save_gray, save_mask, BitDepth,
};
pub use presets::{builtin_presets, Normalization, Preset, PresetCatalogue};
pub use trace_csv::{write_summary_csv, write_trace_csv, TraceRow, TRACE_COLUMNS};

/// Version string recorded in exported documents.
pub const TOOL_VERSION: &str = concat!("pics ", env!("CARGO_PKG_VERSION"));
