use pics_core::fixtures::{make_fixture, Fixture, FixtureSpec, STACK_SLICES};
use pics_core::optimizer::optimize;
use pics_core::volume::segment_volume_with_overrides;
use pics_core::{
    init_from_click, iou, segment_volume, Hyperparameters, ImageStack, KnotVector, LossContext, Mask, PicsError,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn quiet(_: usize, _: &pics_core::IterationRecord<f64>, _: &KnotVector<f64>) {}

fn disk_stack(size: usize, n: usize) -> (ImageStack<f64>, Fixture<f64>) {
    let f: Fixture<f64> = make_fixture(
        "disk",
        FixtureSpec {
            size,
            ..Default::default()
        },
    )
    .unwrap();
    let stack = ImageStack::new(vec![f.images[0].clone(); n]).unwrap();
    (stack, f)
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        let (ma, mb) = (Mask::from_vec(8, 8, a).unwrap(), Mask::from_vec(8, 8, b).unwrap());
        let (x, y) = (iou(&ma, &mb).unwrap(), iou(&mb, &ma).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(iou(&ma, &ma).unwrap(), 1.0);
    }
}

#[test]
fn iou_reference_values() {
    let full = Mask::from_fn(6, 6, |_, _| true);
    let left = Mask::from_fn(6, 6, |x, _| x < 3);
    let right = Mask::from_fn(6, 6, |x, _| x >= 3);
    let (a, b) = (
        Mask::from_fn(6, 6, |x, _| x < 2),
        Mask::from_fn(6, 6, |x, _| (1..3).contains(&x)),
    );
    assert_eq!(iou(&left, &right).unwrap(), 0.0);
    assert_eq!(iou(&left, &full).unwrap(), 0.5);
    assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(
        iou(&left, &Mask::empty(5, 6)),
        Err(PicsError::DimensionMismatch(_))
    ));
}

#[test]
fn single_slice_volume_equals_plain_optimize() {
    let (stack, f) = disk_stack(64, 1);
    let hyper = Hyperparameters {
        init_radius: 6.0,
        max_iters: 80,
        ..Default::default()
    };
    let vol = segment_volume(&stack, f.click, &hyper, Some(&f.truths), &mut quiet).unwrap();
    let init = init_from_click(f.click, 6.0, hyper.n_knots, 64, 64).unwrap();
    let ctx = LossContext::new(f.images[0].clone());
    let direct = optimize(&ctx, init, &hyper, &mut |_, _| {}, None).unwrap();
    assert_eq!(vol.slices.len(), 1);
    assert_eq!(vol.slices[0].knots, direct.knots);
    assert_eq!(vol.slices[0].iterations, direct.trace.len());
    assert!(vol.slices[0].iou.unwrap() > 0.9);
}

#[test]
fn warm_start_begins_below_cold_start() {
    let (stack, f) = disk_stack(64, 3);
    let hyper = Hyperparameters {
        init_radius: 6.0,
        ..Default::default()
    };
    let vol = segment_volume(&stack, f.click, &hyper, None, &mut quiet).unwrap();
    let cold = vol.slices[0].trace.records[0].loss.j_total;
    for s in &vol.slices[1..] {
        assert_eq!(s.initial_knots, vol.slices[s.index - 1].knots);
        assert!(s.trace.records[0].loss.j_total <= cold);
        assert!(s.iterations < vol.slices[0].iterations);
    }
}

#[test]
fn translating_disk_is_tracked() {
    let f: Fixture<f64> = make_fixture(
        "translating-stack",
        FixtureSpec {
            size: 64,
            ..Default::default()
        },
    )
    .unwrap();
    let stack = ImageStack::new(f.images.clone()).unwrap();
    let hyper = Hyperparameters {
        init_radius: 6.0,
        ..Default::default()
    };
    let vol = segment_volume(&stack, f.click, &hyper, Some(&f.truths), &mut quiet).unwrap();
    assert_eq!(vol.slices.len(), STACK_SLICES);
    for s in vol.summaries() {
        assert!(s.iou.unwrap() > 0.9, "slice {}: {:?}", s.slice, s.iou);
        assert!(!s.collapsed);
    }
}

#[test]
fn per_slice_overrides_apply() {
    let (stack, f) = disk_stack(64, 2);
    let hyper = Hyperparameters {
        init_radius: 6.0,
        max_iters: 30,
        ..Default::default()
    };
    let mut overrides = BTreeMap::new();
    overrides.insert(
        1,
        Hyperparameters {
            max_iters: 3,
            stall_iters: 0,
            plateau_iters: 0,
            ..hyper.clone()
        },
    );
    let vol = segment_volume_with_overrides(&stack, f.click, &hyper, &overrides, None, &mut quiet).unwrap();
    assert_eq!(vol.slices[1].iterations, 3);
}

#[test]
fn slice_errors_carry_their_index() {
    let (stack, f) = disk_stack(64, 2);
    let refs = vec![f.truths[0].clone()];
    assert!(matches!(
        segment_volume(&stack, f.click, &Hyperparameters::default(), Some(&refs), &mut quiet),
        Err(PicsError::DimensionMismatch(_))
    ));
    let outside = pics_core::Point::new(500.0, 2.0);
    assert!(matches!(
        segment_volume(&stack, outside, &Hyperparameters::default(), None, &mut quiet),
        Err(PicsError::Slice { index: 0, .. })
    ));
}
