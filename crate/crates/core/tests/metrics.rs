mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use sbtrack::metrics::{curve_to_curve_distance, match_paths, max_error_free_length, resample_polyline};
use sbtrack::polyline::{dist, point_segment, Polyline};

fn random_walk(seed: u64, n: usize) -> Polyline {
    let mut r = rng(seed);
    let mut p = [0.0f64; 3];
    let mut pts = vec![p];
    for _ in 1..n {
        for a in &mut p {
            *a += r.random_range(-8.0..8.0);
        }
        p[0] += 4.0;
        pts.push(p);
    }
    Polyline::new(pts).unwrap()
}

fn resampled(seed: u64, n: usize) -> Polyline {
    resample_polyline(&random_walk(seed, n), 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resampling_keeps_a_uniform_step(seed in any::<u64>(), step in 0.3f64..5.0) {
        let line = random_walk(seed, 20);
        let out = resample_polyline(&line, step).unwrap();
        let pts = out.points();
        prop_assert_eq!(pts[0], line.first());
        prop_assert_eq!(out.last(), line.last());
        let expected = (line.length() / step).ceil() as usize + 1;
        prop_assert!(out.len() == expected || out.len() + 1 == expected);
        let segments = line.points();
        for w in pts[..pts.len() - 1].windows(2) {
            let d = dist(w[0], w[1]);
            prop_assert!(d <= step + 1e-6);
            let same_segment = segments
                .windows(2)
                .any(|s| point_segment(w[0], s[0], s[1]).0 < 1e-9 && point_segment(w[1], s[0], s[1]).0 < 1e-9);
            if same_segment {
                prop_assert!((d - step).abs() <= 1e-6, "gap {} for step {}", d, step);
            }
        }
        prop_assert!(dist(pts[pts.len() - 2], pts[pts.len() - 1]) <= step + 1e-6);
        // Each interior vertex can shorten the chord path by at most one step.
        let corners = (line.len() - 2) as f64;
        prop_assert!(out.length() <= line.length() + 1e-9);
        prop_assert!(out.length() >= line.length() - step * corners.max(1.0));
    }

    #[test]
    fn curve_distance_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let (p, q) = (resampled(a, 12), resampled(b, 15));
        let d = curve_to_curve_distance(&p, &q);
        prop_assert!((d - curve_to_curve_distance(&q, &p)).abs() <= 1e-9);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(curve_to_curve_distance(&p, &p), 0.0);
    }

    #[test]
    fn larger_tolerance_never_loses_matches(a in any::<u64>(), b in any::<u64>(), t in 0.0f64..20.0, dt in 0.0f64..20.0) {
        let (p, q) = (resampled(a, 12), resampled(b, 12));
        let lo = match_paths(&p, &q, t);
        let hi = match_paths(&p, &q, t + dt);
        prop_assert!(hi.tp >= lo.tp);
        prop_assert!(hi.recall >= lo.recall);
        prop_assert!(hi.fn_ <= lo.fn_);
        for m in [lo, hi] {
            prop_assert_eq!(m.tp + m.fp, p.len());
            prop_assert!((0.0..=100.0).contains(&m.precision) && (0.0..=100.0).contains(&m.recall));
            prop_assert!((m.precision - 100.0 * m.tp as f64 / p.len() as f64).abs() < 1e-9);
            prop_assert!((m.recall - 100.0 * (q.len() - m.fn_) as f64 / q.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_ignore_common_translation(a in any::<u64>(), b in any::<u64>(), shift in prop::array::uniform3(-1000i32..1000)) {
        // Eighth-millimetre coordinates keep every difference exact after an integer shift.
        let dyadic = |l: Polyline| Polyline::from_points_dedup(l.points().iter().map(|p| p.map(|x| (x * 8.0).round() / 8.0)).collect()).unwrap();
        let (p, q) = (dyadic(resampled(a, 10)), dyadic(resampled(b, 10)));
        let by = shift.map(|s| s as f64);
        let (ps, qs) = (p.translated(by), q.translated(by));
        for tol in [3.0, 10.0] {
            prop_assert_eq!(match_paths(&p, &q, tol), match_paths(&ps, &qs, tol));
            prop_assert_eq!(max_error_free_length(&p, &q, tol), max_error_free_length(&ps, &qs, tol));
        }
        prop_assert_eq!(curve_to_curve_distance(&p, &q), curve_to_curve_distance(&ps, &qs));
    }

    #[test]
    fn error_free_length_is_bounded_by_the_reference(a in any::<u64>(), b in any::<u64>()) {
        let (p, q) = (resampled(a, 12), resampled(b, 12));
        let len = max_error_free_length(&p, &q, 10.0);
        prop_assert!(len >= 0.0 && len <= q.length() + 1e-9);
        prop_assert!((max_error_free_length(&q, &q, 10.0) - q.length()).abs() <= 1e-9);
    }
}

#[test]
fn zero_tolerance_on_a_different_curve_recalls_nothing() {
    let gt = resample_polyline(&Polyline::new(vec![[0.0; 3], [50.0, 0.0, 0.0]]).unwrap(), 1.0).unwrap();
    let pred = gt.translated([0.0, 0.5, 0.0]);
    let m = match_paths(&pred, &gt, 0.0);
    assert_eq!(m.recall, 0.0);
    assert_eq!(m.precision, 0.0);
}
