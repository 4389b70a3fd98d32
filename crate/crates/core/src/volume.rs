//! Slice-by-slice segmentation of a stack with warm-started knots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{Hyperparameters, LossBreakdown, LossContext};
use crate::error::{PicsError, Result};
use crate::optimizer::{optimize, IterationRecord, OptimizationTrace, StopReason};
use crate::point::Point;
use crate::raster::{rasterize_mask, GrayImage, Mask};
use crate::scalar::Scalar;
use crate::spline::{KnotVector, PeriodicSpline};

/// Contours enclosing less than this area (px^2) are flagged as collapsed.
pub const COLLAPSE_AREA: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack<T> {
    slices: Vec<GrayImage<T>>,
    /// Informational only.
    pub spacing: Option<f64>,
}

impl<T: Scalar> ImageStack<T> {
    pub fn new(slices: Vec<GrayImage<T>>) -> Result<Self> {
        let first = slices.first().ok_or(PicsError::EmptyStack)?;
        let (w, h) = (first.width(), first.height());
        if let Some((i, s)) = slices
            .iter()
            .enumerate()
            .find(|(_, s)| s.width() != w || s.height() != h)
        {
            return Err(PicsError::DimensionMismatch(format!(
                "slice {i} is {}x{}, slice 0 is {w}x{h}",
                s.width(),
                s.height()
            )));
        }
        Ok(Self { slices, spacing: None })
    }

    pub fn slices(&self) -> &[GrayImage<T>] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.slices[0].width()
    }

    pub fn height(&self) -> usize {
        self.slices[0].height()
    }
}

/// `n_knots` points on a circle about the click, counter-clockwise in the
/// (x, y) frame, the first one at angle 0.
pub fn init_from_click<T: Scalar>(
    click: Point<T>,
    radius: T,
    n_knots: usize,
    width: usize,
    height: usize,
) -> Result<KnotVector<T>> {
    let inside = click.x >= T::zero()
        && click.y >= T::zero()
        && click.x < T::from_count(width)
        && click.y < T::from_count(height);
    if !inside {
        return Err(PicsError::OutOfBounds {
            x: click.x.to_f64_lossy(),
            y: click.y.to_f64_lossy(),
            width,
            height,
        });
    }
    if !(radius > T::zero()) {
        return Err(PicsError::InvalidHyperparameter("init radius must be > 0".into()));
    }
    let step = T::TAU() / T::from_count(n_knots.max(1));
    let knots = (0..n_knots)
        .map(|k| {
            let (s, c) = (step * T::from_count(k)).sin_cos();
            Point::new(click.x + radius * c, click.y + radius * s)
        })
        .collect();
    KnotVector::new(knots)
}

/// `|A ∩ B| / |A ∪ B|`; 1 when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(PicsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Shoelace area of a closed polygon.
pub fn polygon_area<T: Scalar>(poly: &[Point<T>]) -> T {
    let n = poly.len();
    let twice: T = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    (twice / T::lit(2.0)).abs()
}

#[derive(Clone, Debug)]
pub struct SliceResult<T> {
    pub index: usize,
    pub initial_knots: KnotVector<T>,
    pub knots: KnotVector<T>,
    pub mask: Mask,
    pub iterations: usize,
    pub final_loss: LossBreakdown<T>,
    pub mean_opi: Option<T>,
    pub stop: StopReason,
    pub iou: Option<f64>,
    /// Contour collapsed below [`COLLAPSE_AREA`]; likely a topology change.
    pub collapsed: bool,
    pub trace: OptimizationTrace<T>,
}

/// Compact per-slice row for tables and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub mean_opi: Option<f64>,
    pub stop: StopReason,
    pub iou: Option<f64>,
    pub collapsed: bool,
}

impl<T: Scalar> SliceResult<T> {
    pub fn summary(&self) -> SliceSummary {
        SliceSummary {
            slice: self.index,
            iterations: self.iterations,
            final_loss: self.final_loss.j_total.to_f64_lossy(),
            mean_opi: self.mean_opi.map(Scalar::to_f64_lossy),
            stop: self.stop,
            iou: self.iou,
            collapsed: self.collapsed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VolumeResult<T> {
    pub slices: Vec<SliceResult<T>>,
}

impl<T: Scalar> VolumeResult<T> {
    pub fn summaries(&self) -> Vec<SliceSummary> {
        self.slices.iter().map(SliceResult::summary).collect()
    }
}

/// Optimize one slice from `init` and package the result.
pub fn segment_slice<T: Scalar>(
    image: &GrayImage<T>,
    init: KnotVector<T>,
    hyper: &Hyperparameters<T>,
    reference: Option<&Mask>,
    index: usize,
    observer: &mut dyn FnMut(&IterationRecord<T>, &KnotVector<T>),
) -> Result<SliceResult<T>> {
    let ctx = LossContext::new(image.clone());
    let out = optimize(&ctx, init.clone(), hyper, observer, None)?;
    let final_hyper = Hyperparameters {
        mu: out.mu,
        ..hyper.clone()
    };
    let final_loss = ctx.loss(&out.knots, &final_hyper)?;
    let spline = PeriodicSpline::fit(&out.knots)?;
    let poly = spline.sample_polygon(hyper.samples_per_segment);
    let mask = rasterize_mask(&poly, image.width(), image.height());
    let iou = reference.map(|r| iou(&mask, r)).transpose()?;
    Ok(SliceResult {
        index,
        initial_knots: init,
        knots: out.knots,
        mask,
        iterations: out.trace.len(),
        final_loss,
        mean_opi: out.trace.mean_opi(),
        stop: out.stop,
        iou,
        collapsed: polygon_area(&poly) < T::lit(COLLAPSE_AREA),
        trace: out.trace,
    })
}

/// Per-iteration callback of a volume run; the first argument is the slice.
pub type VolumeObserver<'a, T> = dyn FnMut(usize, &IterationRecord<T>, &KnotVector<T>) + 'a;

/// Segment every slice in order: slice 0 starts from a circle about the
/// click, each later slice from the previous slice's optimized knots.
pub fn segment_volume<T: Scalar>(
    stack: &ImageStack<T>,
    click: Point<T>,
    hyper: &Hyperparameters<T>,
    references: Option<&[Mask]>,
    observer: &mut VolumeObserver<'_, T>,
) -> Result<VolumeResult<T>> {
    segment_volume_with_overrides(stack, click, hyper, &BTreeMap::new(), references, observer)
}

/// As [`segment_volume`], with per-slice hyperparameter replacements.
pub fn segment_volume_with_overrides<T: Scalar>(
    stack: &ImageStack<T>,
    click: Point<T>,
    hyper: &Hyperparameters<T>,
    overrides: &BTreeMap<usize, Hyperparameters<T>>,
    references: Option<&[Mask]>,
    observer: &mut VolumeObserver<'_, T>,
) -> Result<VolumeResult<T>> {
    if let Some(refs) = references {
        if refs.len() != stack.len() {
            return Err(PicsError::DimensionMismatch(format!(
                "{} reference masks for {} slices",
                refs.len(),
                stack.len()
            )));
        }
    }
    let wrap = |index: usize| {
        move |e: PicsError| PicsError::Slice {
            index,
            source: Box::new(e),
        }
    };
    let mut slices: Vec<SliceResult<T>> = Vec::with_capacity(stack.len());
    for (i, image) in stack.slices().iter().enumerate() {
        let h = overrides.get(&i).unwrap_or(hyper);
        let init = match slices.last() {
            None => init_from_click(click, h.init_radius, h.n_knots, image.width(), image.height()).map_err(wrap(i))?,
            Some(prev) => prev.knots.clone(),
        };
        let reference = references.map(|r| &r[i]);
        let res = segment_slice(image, init, h, reference, i, &mut |rec, k| observer(i, rec, k)).map_err(wrap(i))?;
        slices.push(res);
    }
    Ok(VolumeResult { slices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_init_geometry() {
        let k: KnotVector<f64> = init_from_click(Point::new(50.0, 50.0), 5.0, 10, 100, 100).unwrap();
        assert_eq!(k.len(), 10);
        assert!(k.knots()[0].dist(Point::new(55.0, 50.0)) < 1e-12);
        for (i, p) in k.knots().iter().enumerate() {
            let ang = (p.y - 50.0).atan2(p.x - 50.0).rem_euclid(std::f64::consts::TAU);
            let expect = (36.0 * i as f64).to_radians();
            assert!((ang - expect).abs() < 1e-9, "knot {i}");
            assert!((p.dist(Point::new(50.0, 50.0)) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn click_init_errors() {
        assert!(matches!(
            init_from_click(Point::new(50.0, 50.0), 5.0, 3, 100, 100),
            Err(PicsError::TooFewKnots(3))
        ));
        assert!(matches!(
            init_from_click(Point::new(100.0, 5.0), 5.0, 10, 100, 100),
            Err(PicsError::OutOfBounds { .. })
        ));
        assert!(init_from_click(Point::new(-0.5, 5.0), 5.0, 10, 100, 100).is_err());
    }

    #[test]
    fn click_init_area() {
        let r = 12.0;
        let k = init_from_click(Point::new(32.0, 32.0), r, 10, 64, 64).unwrap();
        let poly = PeriodicSpline::fit(&k).unwrap().sample_polygon(16);
        let m = rasterize_mask(&poly, 64, 64);
        let oracle = std::f64::consts::PI * r * r;
        assert!((m.count() as f64 - oracle).abs() / oracle < 0.05, "{}", m.count());
    }

    #[test]
    fn iou_cases() {
        let a = Mask::from_fn(30, 30, |x, y| x < 10 && y < 10);
        let b = Mask::from_fn(30, 30, |x, y| (5..15).contains(&x) && y < 10);
        let d = Mask::from_fn(30, 30, |x, y| x > 20 && y > 20);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &d).unwrap(), 0.0);
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&Mask::empty(4, 4), &Mask::empty(4, 4)).unwrap(), 1.0);
        assert!(matches!(
            iou(&a, &Mask::empty(4, 4)),
            Err(PicsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn stack_validation() {
        let a = GrayImage::uniform(8, 8, 0.0).unwrap();
        let b = GrayImage::uniform(8, 9, 0.0).unwrap();
        assert!(matches!(ImageStack::<f64>::new(vec![]), Err(PicsError::EmptyStack)));
        assert!(matches!(
            ImageStack::new(vec![a.clone(), b]),
            Err(PicsError::DimensionMismatch(_))
        ));
        assert_eq!(ImageStack::new(vec![a.clone(), a]).unwrap().len(), 2);
    }

    #[test]
    fn shoelace() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(3.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert_eq!(polygon_area(&sq), 6.0);
    }
}
