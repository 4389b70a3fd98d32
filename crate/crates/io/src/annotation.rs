use serde::{Deserialize, Serialize};

use pics_core::{Hyperparameters, KnotVector, LossBreakdown, Point};

use crate::error::{IoError, Result};

/// Schema tag written into, and required from, every annotation document.
pub const SCHEMA: &str = "pics-annotation/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRef {
    pub id: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotEntry {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub pinned: bool,
}

/// A finished (or in-progress) contour together with everything needed to
/// reproduce or refine it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub schema: String,
    pub tool_version: String,
    pub image: ImageRef,
    pub knots: Vec<KnotEntry>,
    pub hyperparameters: Hyperparameters<f64>,
    pub loss: LossBreakdown<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

impl AnnotationRecord {
    pub fn new(
        image: ImageRef,
        knots: &KnotVector<f64>,
        hyperparameters: Hyperparameters<f64>,
        loss: LossBreakdown<f64>,
        iou: Option<f64>,
    ) -> Self {
        let knots = knots
            .knots()
            .iter()
            .zip(knots.pinned())
            .map(|(p, &pinned)| KnotEntry { x: p.x, y: p.y, pinned })
            .collect();
        Self {
            schema: SCHEMA.to_string(),
            tool_version: crate::TOOL_VERSION.to_string(),
            image,
            knots,
            hyperparameters,
            loss,
            iou,
        }
    }

    /// Rebuild the validated knot vector.
    pub fn knot_vector(&self) -> Result<KnotVector<f64>> {
        let pts = self.knots.iter().map(|k| Point::new(k.x, k.y)).collect();
        let pins = self.knots.iter().map(|k| k.pinned).collect();
        Ok(KnotVector::with_pins(pts, pins)?)
    }

    fn check(&self) -> Result<()> {
        self.knot_vector()
            .map_err(|e| IoError::MalformedDocument(format!("knots: {e}")))?;
        self.hyperparameters
            .validate()
            .map_err(|e| IoError::MalformedDocument(format!("hyperparameters: {e}")))?;
        if self.image.width == 0 || self.image.height == 0 {
            return Err(IoError::MalformedDocument("image dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Pretty-printed JSON. Floats use the shortest representation that reads
/// back to the identical value.
pub fn export_annotation(record: &AnnotationRecord) -> Result<String> {
    record.check()?;
    serde_json::to_string_pretty(record).map_err(|e| IoError::MalformedDocument(e.to_string()))
}

pub fn import_annotation(text: &str) -> Result<AnnotationRecord> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::MalformedDocument(e.to_string()))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(SCHEMA) => {}
        Some(other) => {
            return Err(IoError::SchemaVersionMismatch {
                expected: SCHEMA.to_string(),
                found: other.to_string(),
            })
        }
        None => return Err(IoError::MalformedDocument("missing \"schema\"".into())),
    }
    let record: AnnotationRecord =
        serde_json::from_value(value).map_err(|e| IoError::MalformedDocument(e.to_string()))?;
    record.check()?;
    Ok(record)
}
