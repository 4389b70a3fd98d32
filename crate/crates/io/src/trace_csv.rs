use std::io::Write;

use serde::Serialize;

use pics_core::{IterationRecord, OptimizationTrace, Scalar, SliceSummary};

use crate::error::{IoError, Result};

pub const TRACE_COLUMNS: [&str; 7] = ["iteration", "j_int", "j_ext", "j_shape", "j_total", "opi", "mu"];

/// One trace line. `opi` is empty until the window has filled.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub j_int: f64,
    pub j_ext: f64,
    pub j_shape: f64,
    pub j_total: f64,
    pub opi: Option<f64>,
    pub mu: f64,
}

impl<T: Scalar> From<&IterationRecord<T>> for TraceRow {
    fn from(r: &IterationRecord<T>) -> Self {
        Self {
            iteration: r.iter,
            j_int: r.loss.j_int.to_f64_lossy(),
            j_ext: r.loss.j_ext.to_f64_lossy(),
            j_shape: r.loss.j_shape.to_f64_lossy(),
            j_total: r.loss.j_total.to_f64_lossy(),
            opi: r.opi.map(Scalar::to_f64_lossy),
            mu: r.mu.to_f64_lossy(),
        }
    }
}

fn csv_err(e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::io("<trace>", io),
        other => IoError::MalformedDocument(format!("{other:?}")),
    }
}

pub fn write_trace_csv<T: Scalar, W: Write>(out: W, trace: &OptimizationTrace<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &trace.records {
        w.serialize(TraceRow::from(r)).map_err(csv_err)?;
    }
    if trace.records.is_empty() {
        w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    }
    w.flush().map_err(|e| IoError::io("<trace>", e))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    slice: usize,
    iterations: usize,
    final_loss: f64,
    mean_opi: Option<f64>,
    stop: &'a str,
    iou: Option<f64>,
    collapsed: bool,
}

/// Per-slice table: slice, iterations, final_loss, mean_opi, stop, iou, collapsed.
pub fn write_summary_csv<W: Write>(out: W, rows: &[SliceSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in rows {
        let stop = serde_json::to_value(s.stop).expect("stop reason serializes");
        w.serialize(SummaryRow {
            slice: s.slice,
            iterations: s.iterations,
            final_loss: s.final_loss,
            mean_opi: s.mean_opi,
            stop: stop.as_str().unwrap_or_default(),
            iou: s.iou,
            collapsed: s.collapsed,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| IoError::io("<summary>", e))
}
