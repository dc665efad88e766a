use std::f64::consts::TAU;

use anisoflow::boundary::BoundarySystem;
use anisoflow::{local_frames, Charge, ChargeSet, DiscreteCurve, Vec2};
use nalgebra::Rotation2;

fn wobbly(n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|j| {
            let t = TAU * j as f64 / n as f64;
            let r = 1.5 + 0.2 * (3.0 * t).cos() + 0.1 * (2.0 * t).sin();
            Vec2::new(r * t.cos() + 0.3, r * t.sin() - 0.1)
        })
        .collect()
}

fn solve_on(points: Vec<Vec2>, charges: &ChargeSet, mask: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = DiscreteCurve::new(points).unwrap();
    let f = local_frames(&c, 0.15).unwrap();
    let sys = BoundarySystem::new(&c, &f).unwrap();
    let kappa: Vec<f64> = f.curvature.iter().zip(mask).map(|(k, m)| k * m).collect();
    let sol = sys.solve(&kappa, charges, mask).unwrap();
    (sol.u, sol.v)
}

#[test]
fn rigid_rotation_leaves_u_and_v_unchanged() {
    let n = 48;
    let pts = wobbly(n);
    let mask: Vec<f64> = (0..n).map(|j| if j % 5 == 0 { 0.4 } else { 1.0 }).collect();
    let p = Vec2::new(0.5, 0.2);
    let charges = ChargeSet::new(vec![Charge::new(-1.0, p)]);
    let (u0, v0) = solve_on(pts.clone(), &charges, &mask);

    let rot = Rotation2::new(0.7);
    let shift = Vec2::new(-2.0, 4.0);
    let moved: Vec<Vec2> = pts.iter().map(|q| rot * q + shift).collect();
    let moved_charges = ChargeSet::new(vec![Charge::new(-1.0, rot * p + shift)]);
    let (u1, v1) = solve_on(moved, &moved_charges, &mask);

    for j in 0..n {
        assert!((u0[j] - u1[j]).abs() <= 1e-8, "u at {j}: {} vs {}", u0[j], u1[j]);
        assert!((v0[j] - v1[j]).abs() <= 1e-8, "v at {j}: {} vs {}", v0[j], v1[j]);
    }
}

#[test]
fn circle_potential_converges_under_refinement() {
    let mean_u = |n: usize| {
        let c = DiscreteCurve::circle(Vec2::zeros(), 2.0, n).unwrap();
        let f = local_frames(&c, 0.15).unwrap();
        let u = BoundarySystem::new(&c, &f).unwrap().solve_stage1(&vec![0.5; n]).unwrap();
        u.iter().sum::<f64>() / n as f64
    };
    let (u32, u64, u128) = (mean_u(32), mean_u(64), mean_u(128));
    assert!((u128 - u64).abs() < (u64 - u32).abs());
}

#[test]
fn condition_grows_as_charge_nears_the_curve() {
    let radius = 2.0;
    let c = DiscreteCurve::circle(Vec2::zeros(), radius, 64).unwrap();
    let f = local_frames(&c, 0.15).unwrap();
    let sys = BoundarySystem::new(&c, &f).unwrap();
    let dir = Vec2::new(-3.5, -5.0).normalize();
    let conds: Vec<f64> = (0..=9)
        .map(|k| {
            let charges = ChargeSet::new(vec![Charge::new(-1.0, dir * (0.1 * k as f64 * radius))]);
            sys.conditions(&charges).unwrap().1.condition
        })
        .collect();
    assert!(conds.windows(2).all(|w| w[1] >= w[0]), "{conds:?}");
    assert!(conds[9] > conds[0]);
    let stage1 = sys.conditions(&ChargeSet::default()).unwrap().0;
    assert!(stage1.condition >= 1.0);
}

#[test]
fn masked_nodes_get_zero_speed() {
    let n = 40;
    let mask: Vec<f64> = (0..n).map(|j| if j < 10 { 0.0 } else { 1.0 }).collect();
    let charges = ChargeSet::new(vec![Charge::new(-1.0, Vec2::new(0.3, 0.0))]);
    let (_, v) = solve_on(wobbly(n), &charges, &mask);
    assert!(v[..10].iter().all(|x| *x == 0.0));
    assert!(v[10..].iter().all(|x| *x != 0.0));
}
