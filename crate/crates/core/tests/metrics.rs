use lidar_cbf::metrics::{correlation, frechet, frechet_distance, Polyline, DEFAULT_RESAMPLE};
use lidar_cbf::Point;
use proptest::prelude::*;

fn polyline() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..30)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

proptest! {
    #[test]
    fn frechet_bounds_endpoint_gaps(a in polyline(), b in polyline()) {
        let f = frechet_distance(&a, &b);
        let start = (a[0] - b[0]).norm();
        let end = (a[a.len() - 1] - b[b.len() - 1]).norm();
        prop_assert!(f >= start.max(end) - 1e-12);
    }

    #[test]
    fn frechet_bounded_by_worst_pair(a in polyline(), b in polyline()) {
        let worst = a.iter()
            .flat_map(|p| b.iter().map(move |q| (p - q).norm()))
            .fold(0.0, f64::max);
        prop_assert!(frechet_distance(&a, &b) <= worst + 1e-12);
    }

    #[test]
    fn frechet_is_translation_invariant(a in polyline(), b in polyline(), dx in -3.0..3.0f64, dy in -3.0..3.0f64) {
        let shift = Point::new(dx, dy);
        let a2: Vec<Point> = a.iter().map(|p| p + shift).collect();
        let b2: Vec<Point> = b.iter().map(|p| p + shift).collect();
        prop_assert!((frechet_distance(&a, &b) - frechet_distance(&a2, &b2)).abs() < 1e-9);
    }

    #[test]
    fn correlation_survives_positive_affine_maps(a in polyline(), s in 0.1..10.0f64, dx in -3.0..3.0f64, dy in -3.0..3.0f64) {
        let a = Polyline::new(a).unwrap();
        prop_assume!(a.arc_length() > 1e-6);
        let moved: Vec<Point> = a.points().iter().map(|p| p * s + Point::new(dx, dy)).collect();
        let moved = Polyline::new(moved).unwrap();
        let r = correlation(&a, &moved, DEFAULT_RESAMPLE).unwrap();
        prop_assert!((r - 1.0).abs() < 1e-9, "{}", r);
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(a in polyline(), b in polyline()) {
        let (a, b) = (Polyline::new(a).unwrap(), Polyline::new(b).unwrap());
        let ab = correlation(&a, &b, 64).unwrap();
        let ba = correlation(&b, &a, 64).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}

#[test]
fn reversed_straight_line_anticorrelates() {
    let a = Polyline::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)]).unwrap();
    let b = Polyline::new(vec![Point::new(1.0, 1.0), Point::new(0.0, 0.0)]).unwrap();
    assert!((correlation(&a, &b, DEFAULT_RESAMPLE).unwrap() + 1.0).abs() < 1e-12);
    assert!((frechet(&a, &b) - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn short_polylines_are_rejected() {
    assert!(Polyline::new(vec![Point::zeros()]).is_err());
    assert!(Polyline::new(vec![Point::zeros(), Point::new(f64::NAN, 0.0)]).is_err());
}
