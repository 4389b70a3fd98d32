//! Interactive contour segmentation with spline control knots as the
//! trainable weights.
//!
//! A closed periodic cubic spline is fitted through `N` knots, rasterized to
//! a mask and scored by a region (Chan-Vese) energy plus smoothness and
//! curvature priors. Knots move by Adam on central-difference gradients;
//! an operation performance index (OPI) watches the balance between the
//! internal and external energies and raises the region weight when the
//! optimization stalls. Stacks are segmented slice by slice, each slice
//! warm-started from the previous optimum.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the type for callers that do not care.

// `!(a < b)` is used on purpose: it is also true for NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod fixtures;
pub mod optimizer;
pub mod point;
pub mod raster;
pub mod scalar;
pub mod spline;
pub mod volume;

pub use energy::{
    chan_vese_energy, internal_energy, shape_penalty, total_loss, DeltaOrientation, Hyperparameters, LossBreakdown,
    LossContext,
};
pub use error::{PicsError, Result};
pub use optimizer::{
    adapt_mu, apply_edits, compute_opi, fd_gradient, optimize, AdamParams, AdamState, ControlChannel, IterationRecord,
    KnotEdit, OptimizationTrace, Optimized, OptimizerState, StopReason,
};
pub use point::Point;
pub use raster::{image_gradient, rasterize_mask, region_means, GradField, GrayImage, Mask, RegionStats};
pub use scalar::Scalar;
pub use spline::{fit_periodic_spline, CubicSegment, KnotVector, PeriodicSpline};
pub use volume::{init_from_click, iou, segment_volume, ImageStack, SliceResult, SliceSummary, VolumeResult};

pub type Point64 = Point<f64>;
pub type KnotVector64 = KnotVector<f64>;
pub type PeriodicSpline64 = PeriodicSpline<f64>;
pub type GrayImage64 = GrayImage<f64>;
pub type Hyperparameters64 = Hyperparameters<f64>;
pub type LossBreakdown64 = LossBreakdown<f64>;
pub type LossContext64 = LossContext<f64>;
pub type OptimizationTrace64 = OptimizationTrace<f64>;
pub type ImageStack64 = ImageStack<f64>;

pub type Point32 = Point<f32>;
pub type KnotVector32 = KnotVector<f32>;
pub type PeriodicSpline32 = PeriodicSpline<f32>;
pub type GrayImage32 = GrayImage<f32>;
pub type Hyperparameters32 = Hyperparameters<f32>;
