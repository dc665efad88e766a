use std::f64::consts::{PI, TAU};

use anisoflow::geometry::{perimeter, signed_area};
use anisoflow::image::mask_from_intensity;
use anisoflow::stability::{eigen_bound, StabilityInputs};
use anisoflow::{local_frames, tangential_coefficients, DiscreteCurve, Vec2};
use nalgebra::Rotation2;
use proptest::prelude::*;

// Star-shaped polygon with sorted random angles and jittered radii.
fn star_curve() -> impl Strategy<Value = DiscreteCurve> {
    (6usize..48)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.2..0.8f64, n),
                prop::collection::vec(0.7..1.3f64, n),
                -5.0..5.0f64,
                -5.0..5.0f64,
            )
        })
        .prop_map(|(gaps, radii, cx, cy)| {
            let total: f64 = gaps.iter().sum();
            let mut theta: f64 = 0.0;
            let pts = gaps
                .iter()
                .zip(&radii)
                .map(|(g, r)| {
                    let p = Vec2::new(cx + r * theta.cos(), cy + r * theta.sin());
                    theta += TAU * g / total;
                    p
                })
                .collect();
            DiscreteCurve::new(pts).unwrap()
        })
}

proptest! {
    #[test]
    fn tangential_equations_hold(curve in star_curve(), dt in 1e-6..1.0f64) {
        let lengths = curve.segment_lengths();
        let a = tangential_coefficients(&curve, dt).unwrap();
        prop_assert!(a.max_relative_residual(&lengths, dt) <= 1e-10);
        let amax = a.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(a.sum().abs() <= 1e-10 * curve.len() as f64 * amax.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn rigid_motion_keeps_length_and_area(
        curve in star_curve(),
        angle in 0.0..TAU,
        dx in -100.0..100.0f64,
        dy in -100.0..100.0f64,
    ) {
        let rot = Rotation2::new(angle);
        let shift = Vec2::new(dx, dy);
        let moved: Vec<Vec2> = curve.points().iter().map(|p| rot * p + shift).collect();
        let l0 = curve.perimeter();
        let a0 = curve.enclosed_area();
        prop_assert!((perimeter(&moved) - l0).abs() <= 1e-10 * l0);
        prop_assert!((signed_area(&moved) - a0).abs() <= 1e-10 * a0);
    }

    #[test]
    fn frames_are_orthonormal(curve in star_curve(), mu in 0.0..=1.0f64) {
        let f = local_frames(&curve, mu).unwrap();
        for (t, n) in f.tangents.iter().zip(&f.normals) {
            prop_assert!((t.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((n.norm() - 1.0).abs() <= 1e-12);
            prop_assert!(t.dot(n).abs() <= 1e-12);
        }
    }

    #[test]
    fn eigen_bound_monotonicity(
        v in -100.0..100.0f64,
        dv in 0.0..10.0f64,
        length in 0.1..100.0f64,
        dl in 0.0..10.0f64,
        n1 in 5usize..2000,
        n2 in 5usize..1000,
        dn in 0usize..100,
        dt in 1e-6..1e-1f64,
    ) {
        let base = StabilityInputs { v_star: v, length, n1, n2, dt };
        let b = eigen_bound(&base);
        let more_points = eigen_bound(&StabilityInputs { n2: n2 + dn, ..base });
        let faster = eigen_bound(&StabilityInputs { v_star: v.abs() + dv, ..base });
        let longer = eigen_bound(&StabilityInputs { length: length + dl, ..base });
        prop_assert!(more_points >= b);
        prop_assert!(faster >= b);
        prop_assert!(longer <= b);
    }

    #[test]
    fn mask_is_a_monotone_unit_map(a in any::<u8>(), b in any::<u8>()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (mlo, mhi) = (mask_from_intensity(lo), mask_from_intensity(hi));
        prop_assert!((0.0..=1.0).contains(&mlo) && (0.0..=1.0).contains(&mhi));
        prop_assert!(mlo <= mhi);
    }
}

// Arc-length samples of the ellipse x = a cos θ, y = b sin θ, returned with
// the parameter θ of each sample.
fn ellipse_by_arc_length(a: f64, b: f64, n: usize) -> (Vec<Vec2>, Vec<f64>) {
    let fine = 200_000;
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let mut s = vec![0.0; fine + 1];
    for k in 0..fine {
        let t0 = TAU * k as f64 / fine as f64;
        let t1 = TAU * (k + 1) as f64 / fine as f64;
        s[k + 1] = s[k] + 0.5 * (speed(t0) + speed(t1)) * (t1 - t0);
    }
    let total = s[fine];
    let mut pts = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    let mut k = 0;
    for j in 0..n {
        let target = total * j as f64 / n as f64;
        while s[k + 1] < target {
            k += 1;
        }
        let frac = (target - s[k]) / (s[k + 1] - s[k]);
        let theta = TAU * (k as f64 + frac) / fine as f64;
        pts.push(Vec2::new(a * theta.cos(), b * theta.sin()));
        thetas.push(theta);
    }
    (pts, thetas)
}

#[test]
fn ellipse_curvature_within_two_percent() {
    let (a, b) = (2.0, 1.0);
    let (pts, thetas) = ellipse_by_arc_length(a, b, 128);
    let curve = DiscreteCurve::new(pts).unwrap();
    let f = local_frames(&curve, 0.15).unwrap();
    for (k, t) in f.curvature.iter().zip(&thetas) {
        let exact = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
        assert!((k - exact).abs() / exact <= 0.02, "θ = {t}: {k} vs {exact}");
    }
}

#[test]
fn circle_of_radius_eight_area() {
    let c = DiscreteCurve::circle(Vec2::zeros(), 8.0, 64).unwrap();
    assert!((c.enclosed_area() - 64.0 * PI).abs() / (64.0 * PI) <= 0.005);
}
