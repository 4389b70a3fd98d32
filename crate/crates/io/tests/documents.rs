use pics_core::{Hyperparameters, KnotVector, LossBreakdown, OptimizationTrace, Point};
use pics_io::{
    builtin_presets, export_annotation, import_annotation, write_trace_csv, AnnotationRecord, ImageRef, IoError,
    PresetCatalogue, SCHEMA, TRACE_COLUMNS,
};
use proptest::prelude::*;

fn record(pts: Vec<(f64, f64)>, pins: Vec<bool>, w: [f64; 5], iou: Option<f64>) -> AnnotationRecord {
    let knots = KnotVector::with_pins(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect(), pins).unwrap();
    let hyper = Hyperparameters::with_weights(w[0], w[1], w[2], w[3], w[4]);
    let loss = LossBreakdown::assemble(1.5, 0.25, 1234.5678901234, 1e-3, &hyper);
    AnnotationRecord::new(
        ImageRef {
            id: "case-01.png".into(),
            width: 128,
            height: 96,
        },
        &knots,
        hyper,
        loss,
        iou,
    )
}

proptest! {
    #[test]
    fn annotation_round_trip_is_exact(
        seed_pts in prop::collection::vec((0.0f64..128.0, 0.0f64..96.0), 4..20),
        w in prop::array::uniform5(0.0f64..1e9),
        iou in prop::option::of(0.0f64..1.0),
    ) {
        // Spread the points apart so the knot-distance invariant holds.
        let pts: Vec<_> = seed_pts.iter().enumerate().map(|(i, &(x, y))| (x + i as f64 * 1000.0, y)).collect();
        let pins = (0..pts.len()).map(|i| i % 3 == 0).collect();
        let rec = record(pts, pins, w, iou);
        let text = export_annotation(&rec).unwrap();
        let back = import_annotation(&text).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(export_annotation(&back).unwrap(), text);
    }
}

#[test]
fn minimal_hand_written_document() {
    let text = r#"{
        "schema": "pics-annotation/1",
        "tool_version": "by hand",
        "image": {"id": "x", "width": 64, "height": 64},
        "knots": [{"x": 10, "y": 10}, {"x": 20, "y": 10, "pinned": true}, {"x": 20, "y": 20}, {"x": 10, "y": 20}],
        "hyperparameters": {"alpha": 0.5, "beta": 0.05, "mu": 1000, "gamma": 0, "sigma": 0},
        "loss": {"j_psi_s": 0, "j_psi_ss": 0, "j_cv": 0, "curv_penalty": 0,
                 "j_int": 0, "j_ext": 0, "j_shape": 0, "j_total": 0}
    }"#;
    let rec = import_annotation(text).unwrap();
    let k = rec.knot_vector().unwrap();
    assert_eq!(k.len(), 4);
    assert!(k.is_pinned(1) && !k.is_pinned(0));
    assert_eq!(rec.hyperparameters.beta, 0.05);
    assert_eq!(
        rec.hyperparameters.max_iters,
        Hyperparameters::<f64>::default().max_iters
    );
    assert_eq!(rec.iou, None);
}

#[test]
fn schema_and_shape_errors() {
    let rec = record(
        vec![(1.0, 1.0), (9.0, 1.0), (9.0, 9.0), (1.0, 9.0)],
        vec![false; 4],
        [0.5, 0.01, 1e3, 0.0, 0.0],
        None,
    );
    let text = export_annotation(&rec).unwrap();
    assert!(text.contains(SCHEMA));
    let v2 = text.replace(SCHEMA, "pics-annotation/2");
    assert!(matches!(
        import_annotation(&v2),
        Err(IoError::SchemaVersionMismatch { .. })
    ));
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("image");
    assert!(matches!(
        import_annotation(&v.to_string()),
        Err(IoError::MalformedDocument(_))
    ));
    let three: serde_json::Value = {
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["knots"].as_array_mut().unwrap().pop();
        v
    };
    assert!(matches!(
        import_annotation(&three.to_string()),
        Err(IoError::MalformedDocument(_))
    ));
    assert!(matches!(
        import_annotation("not json"),
        Err(IoError::MalformedDocument(_))
    ));
    assert!(matches!(import_annotation("{}"), Err(IoError::MalformedDocument(_))));
}

#[test]
fn coordinates_keep_full_precision() {
    let x = 12.345678912345678;
    let rec = record(
        vec![(x, 1.0), (40.0, 1.0), (40.0, 30.0), (1.0, 30.0)],
        vec![false; 4],
        [0.5, 0.01, 1e3, 0.0, 0.0],
        None,
    );
    let text = export_annotation(&rec).unwrap();
    assert!(text.contains("12.345678912345678"));
}

#[test]
fn builtin_catalogue_matches_published_weights() {
    let cat = builtin_presets();
    let w = |n: &str| cat.get(n).unwrap().hyperparameters.weights();
    assert_eq!(w("hydrocephalus"), [5e-1, 5e-2, 1e3, 0.0, 0.0]);
    assert_eq!(w("distorted-disk"), [5e-1, 1e-2, 1e4, 0.0, 0.0]);
    assert_eq!(w("distorted-disk-shape"), [5e-1, 1e-2, 1e4, 0.0, 1e8]);
    assert_eq!(w("lv-ed"), [5e-1, 1e-3, 1e4, 0.0, 0.0]);
    assert_eq!(w("lv-ed-shape"), [5e-1, 1e-3, 1e4, 0.0, 1e8]);
    assert_eq!(w("acdc-normal"), [1e-1, 1e-2, 1e4, 1e-5, 1e7]);
    assert_eq!(w("acdc-indistinct"), [1e-1, 1e-2, 1e4, 1e-5, 1e8]);
    let thin = w("acdc-thin-myocardium");
    assert_eq!(thin[3], 1e-5 * 100.0);
    assert!(matches!(cat.get("nope"), Err(IoError::UnknownPreset(_))));
}

#[test]
fn catalogue_json_is_editable() {
    let cat = builtin_presets();
    let back = PresetCatalogue::from_json(&cat.to_json()).unwrap();
    assert_eq!(back, cat);
    let user = r#"{"mine": {"hyperparameters": {"alpha": 1, "beta": 0, "mu": 10, "gamma": 0, "sigma": 0}}}"#;
    let mut merged = builtin_presets();
    merged.merge(PresetCatalogue::from_json(user).unwrap());
    assert_eq!(merged.len(), cat.len() + 1);
    assert_eq!(merged.get("mine").unwrap().hyperparameters.mu, 10.0);
    let dup = r#"{"a": {"hyperparameters": {}}, "a": {"hyperparameters": {}}}"#;
    assert!(matches!(
        PresetCatalogue::from_json(dup),
        Err(IoError::InvalidCatalogue(_))
    ));
    let neg = r#"{"a": {"hyperparameters": {"alpha": -1}}}"#;
    assert!(matches!(
        PresetCatalogue::from_json(neg),
        Err(IoError::InvalidCatalogue(_))
    ));
}

#[test]
fn trace_csv_header_and_empty_opi() {
    let mut trace = OptimizationTrace::<f64>::default();
    let mut out = Vec::new();
    write_trace_csv(&mut out, &trace).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().trim(), TRACE_COLUMNS.join(","));

    let hyper = Hyperparameters::with_weights(0.5, 0.01, 1e3, 0.0, 0.0);
    for (i, opi) in [(0, None), (1, Some(0.5))] {
        trace.records.push(pics_core::IterationRecord {
            iter: i,
            loss: LossBreakdown::assemble(2.0, 1.0, 0.5, 0.0, &hyper),
            opi,
            mu: 1e3,
            max_displacement: 0.1,
            wall_time: std::time::Duration::ZERO,
        });
    }
    let mut out = Vec::new();
    write_trace_csv(&mut out, &trace).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "iteration,j_int,j_ext,j_shape,j_total,opi,mu");
    assert_eq!(lines[1], "0,1.01,500.0,0.0,501.01,,1000.0");
    assert_eq!(lines[2], "1,1.01,500.0,0.0,501.01,0.5,1000.0");
}
