use pics_core::{KnotVector, PeriodicSpline, Point};
use pics_testkit::{dense_periodic_cubic, eval_cubic, random_star, to_knots};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn knot_sets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (4usize..24, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_star(&mut rng, n, (64.0, 64.0), 50.0)
    })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coefficients_match_dense_solve(pts in knot_sets()) {
        let spline = PeriodicSpline::fit(&to_knots(&pts)).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (ox, oy) = (dense_periodic_cubic(&xs), dense_periodic_cubic(&ys));
        let scale = spline.segments().iter().map(|s| s.a.abs().max(s.e.abs())).fold(1.0, f64::max);
        for (i, seg) in spline.segments().iter().enumerate() {
            for (got, want) in [seg.a, seg.b, seg.c, seg.d].iter().zip(ox[i]) {
                prop_assert!(close(*got, want, scale), "x seg {i}: {got} vs {want}");
            }
            for (got, want) in [seg.e, seg.f, seg.g, seg.h].iter().zip(oy[i]) {
                prop_assert!(close(*got, want, scale), "y seg {i}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn interpolates_and_joins_smoothly(pts in knot_sets()) {
        let spline = PeriodicSpline::fit(&to_knots(&pts)).unwrap();
        let n = pts.len();
        let h = spline.spacing();
        for i in 0..n {
            let p = spline.eval(spline.knot_parameter(i));
            prop_assert!((p.x - pts[i].0).abs() <= 1e-9 && (p.y - pts[i].1).abs() <= 1e-9);
            let (seg, next) = (spline.segments()[i], spline.segments()[(i + 1) % n]);
            let end = seg.point(h);
            prop_assert!((end.x - pts[(i + 1) % n].0).abs() <= 1e-9);
            let (d1a, d1b) = (seg.first_derivative(h), next.first_derivative(0.0));
            let (d2a, d2b) = (seg.second_derivative(h), next.second_derivative(0.0));
            let s1 = d1a.norm().max(1.0);
            let s2 = d2a.norm().max(1.0);
            prop_assert!((d1a - d1b).norm() <= 1e-9 * s1, "C1 at {i}");
            prop_assert!((d2a - d2b).norm() <= 1e-9 * s2, "C2 at {i}");
        }
    }

    #[test]
    fn rigid_motion_commutes_with_fit(pts in knot_sets(), angle in -3.0f64..3.0, dx in -10.0f64..10.0) {
        let k = to_knots(&pts);
        let moved = k.map_points(|p| p.rotate(angle) + Point::new(dx, 0.5)).unwrap();
        let (a, b) = (PeriodicSpline::fit(&k).unwrap(), PeriodicSpline::fit(&moved).unwrap());
        for j in 0..37 {
            let s = j as f64 / 37.0;
            let want = a.eval(s).rotate(angle) + Point::new(dx, 0.5);
            prop_assert!(b.eval(s).dist(want) < 1e-9);
        }
    }

    #[test]
    fn fit_is_linear_in_knots(pts in knot_sets(), c in 0.2f64..3.0) {
        let k = to_knots(&pts);
        let scaled = k.map_points(|p| p * c).unwrap();
        let (a, b) = (PeriodicSpline::fit(&k).unwrap(), PeriodicSpline::fit(&scaled).unwrap());
        for (sa, sb) in a.segments().iter().zip(b.segments()) {
            prop_assert!((sa.a * c - sb.a).abs() <= 1e-8 * sb.a.abs().max(1.0));
            prop_assert!((sa.f * c - sb.f).abs() <= 1e-8 * sb.f.abs().max(1.0));
        }
    }
}

#[test]
fn derivatives_match_oracle_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = random_star(&mut rng, 9, (40.0, 40.0), 30.0);
    let spline = PeriodicSpline::fit(&to_knots(&pts)).unwrap();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ox = dense_periodic_cubic(&xs);
    for j in 0..200 {
        let s = j as f64 / 200.0;
        let (i, t) = spline.locate(s);
        let (x, dx, ddx) = eval_cubic(ox[i], t);
        let (d1, d2) = spline.eval_derivatives(s);
        assert!((spline.eval(s).x - x).abs() < 1e-9);
        assert!((d1.x - dx).abs() < 1e-7 * dx.abs().max(1.0));
        assert!((d2.x - ddx).abs() < 1e-7 * ddx.abs().max(1.0));
    }
}

#[test]
fn circle_curvature() {
    let n = 16;
    let pts: Vec<_> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Point::new(50.0 + 10.0 * a.cos(), 50.0 + 10.0 * a.sin())
        })
        .collect();
    let spline = PeriodicSpline::fit(&KnotVector::new(pts).unwrap()).unwrap();
    for kappa in spline.curvature_at_knots().unwrap() {
        assert!((kappa.abs() - 0.1).abs() <= 0.005, "{kappa}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts = random_star(&mut rng, 12, (64.0, 64.0), 40.0);
    let k64 = to_knots(&pts);
    let k32 = KnotVector::new(pts.iter().map(|&(x, y)| Point::new(x as f32, y as f32)).collect()).unwrap();
    let (a, b) = (PeriodicSpline::fit(&k64).unwrap(), PeriodicSpline::fit(&k32).unwrap());
    for j in 0..50 {
        let s = j as f64 / 50.0;
        let (p, q) = (a.eval(s), b.eval(s as f32));
        assert!((p.x - q.x as f64).abs() < 1e-3 && (p.y - q.y as f64).abs() < 1e-3);
    }
}
