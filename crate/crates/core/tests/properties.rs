use std::f64::consts::{FRAC_PI_2, PI};

use bernoulli_lab::conformal::{hhp_forward, hhp_inverse};
use bernoulli_lab::geometry::{flux_balance, hausdorff, FreeBoundary, PolyCurve};
use bernoulli_lab::io::{fmt17, polylines_csv, read_polylines};
use bernoulli_lab::{AnalyticSolution, Family, Point2, RigidMotion};
use num_complex::Complex64;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::HalfPlane),
        (0.1..2.0f64).prop_map(|a| Family::TwoPlane { a }),
        (0.1..1.0f64).prop_map(|s| Family::Wedge { s }),
        (0.2..2.0f64).prop_map(|a| Family::Hairpin { a }),
        (0.3..2.0f64).prop_map(|r| Family::DiskComplement { r }),
        (0.2..0.8f64, 0.5..1.5f64).prop_map(|(s, a)| Family::Scherk { s, a }),
    ]
}

fn point(r: f64) -> impl Strategy<Value = Point2> {
    (-r..r, -r..r).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn moving_the_solution_moves_its_values(
        f in family(),
        angle in -PI..PI,
        shift in point(2.0),
        p in point(3.0),
    ) {
        let u = AnalyticSolution::new(f).unwrap();
        let m = RigidMotion::new(angle, shift);
        let moved = u.apply_motion(&m);
        let a = u.eval_u(p).unwrap();
        let b = moved.eval_u(m.apply(p)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn rescaling_is_the_blow_up(f in family(), r in 0.25..4.0f64, p in point(2.0)) {
        let u = AnalyticSolution::new(f).unwrap();
        let ur = u.rescale(r).unwrap();
        let direct = u.eval_u(p * r).unwrap() / r;
        let scaled = ur.eval_u(p).unwrap();
        prop_assert!((direct - scaled).abs() <= 1e-9 * (1.0 + direct.abs()), "{direct} vs {scaled}");
    }

    #[test]
    fn gradient_in_the_positive_phase_respects_the_lipschitz_bound(f in family(), p in point(4.0)) {
        let u = AnalyticSolution::new(f).unwrap();
        prop_assume!(u.is_positive(p).unwrap());
        let g = u.eval_grad(p).unwrap();
        prop_assert!(g.norm() <= u.lipschitz_bound() * (1.0 + 1e-9), "{}", g.norm());
    }

    #[test]
    fn hairpin_is_symmetric_in_both_axes(a in 0.2..2.0f64, p in point(5.0)) {
        let u = AnalyticSolution::hairpin(a).unwrap();
        let v = u.eval_u(p).unwrap();
        for q in [Point2::new(-p.x, p.y), Point2::new(p.x, -p.y), Point2::new(-p.x, -p.y)] {
            let w = u.eval_u(q).unwrap();
            prop_assert!((v - w).abs() <= 1e-10 * (1.0 + v.abs()), "{v} vs {w}");
        }
    }

    #[test]
    fn strip_chart_round_trips(x in -4.0..4.0f64, y in -0.999..0.999f64) {
        let zeta = Complex64::new(x, y * FRAC_PI_2);
        let back = hhp_inverse(hhp_forward(zeta).unwrap()).unwrap();
        prop_assert!((back - zeta).norm() <= 1e-10 * (1.0 + zeta.norm()), "{zeta} -> {back}");
    }

    #[test]
    fn fmt17_round_trips_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt17(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn hausdorff_of_a_translated_segment_is_the_shift(
        a in point(3.0),
        b in point(3.0),
        t in 0.01..1.0f64,
    ) {
        prop_assume!(a.dist(b) > 0.1);
        // Shifting along the normal keeps every point at distance t from the other line.
        let n = (b - a).perp() * (1.0 / a.dist(b));
        let c0 = [PolyCurve::open(vec![a, b])];
        let c1 = [PolyCurve::open(vec![a + n * t, b + n * t])];
        let d = hausdorff(&c0, &c1, 0.01).unwrap();
        prop_assert!((d - t).abs() <= 1e-12, "{d} vs {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polylines_survive_a_csv_round_trip(
        comps in prop::collection::vec(prop::collection::vec(point(10.0), 1..20), 0..4),
    ) {
        let fb = FreeBoundary { components: comps.iter().cloned().map(PolyCurve::open).collect() };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.csv");
        std::fs::write(&path, polylines_csv(&fb)).unwrap();
        let back = read_polylines(&path).unwrap();
        let got: Vec<Vec<Point2>> = back.components.into_iter().map(|c| c.points).collect();
        prop_assert_eq!(got, comps);
    }

    #[test]
    fn rotated_half_plane_flux_balances(angle in -PI..PI, half in 0.5..2.0f64) {
        let u = AnalyticSolution::half_plane().with_motion(RigidMotion::rotation(angle));
        let square = [
            Point2::new(-half, -half),
            Point2::new(half, -half),
            Point2::new(half, half),
            Point2::new(-half, half),
        ];
        let rep = flux_balance(&u, &square, 0.05).unwrap();
        // The free boundary is a line through the centre: its chord, and half the perimeter.
        let dir = RigidMotion::rotation(angle).rotate(Point2::new(0.0, 1.0));
        let chord = 2.0 * half / dir.x.abs().max(dir.y.abs());
        prop_assert!((rep.fb_measure - chord).abs() <= 1e-9 * chord, "{} vs {chord}", rep.fb_measure);
        prop_assert!((rep.rest_measure - 4.0 * half).abs() <= 1e-9 * half);
        prop_assert!((rep.fb_flux.abs() - chord).abs() <= 1e-9 * chord);
        prop_assert!(rep.net_flux.abs() <= 1e-9 * chord, "{}", rep.net_flux);
        prop_assert!(rep.inequality_holds);
    }
}
