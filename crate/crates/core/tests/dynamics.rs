mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use common::{calibration_tables, close_rel, fd_jacobian, random_point, rng};
use proptest::prelude::*;
use umbrella_core::*;

fn table_index() -> impl Strategy<Value = usize> {
    0..6usize
}

fn point_in(table: &BilliardTable, u: f64, v: f64) -> Option<PhasePoint> {
    let s = u * table.total_length();
    let theta = v * PI;
    (table.corner_distance(s) > 1e-6 && theta.sin() > 1e-6).then(|| PhasePoint::new(s, theta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn measure_is_preserved(i in table_index(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let tables = calibration_tables();
        let t = &tables[i].1;
        let Some(x) = point_in(t, u, v) else { return Ok(()) };
        let Ok(ev) = billiard_map(t, x) else { return Ok(()) };
        let dt = tangent_map(t, x).unwrap();
        prop_assert!((dt.det() * ev.next.theta.sin() - x.theta.sin()).abs() < 1e-9);
    }

    #[test]
    fn map_is_time_reversible(i in table_index(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let tables = calibration_tables();
        let t = &tables[i].1;
        let Some(x) = point_in(t, u, v) else { return Ok(()) };
        let Ok(ev) = billiard_map(t, x) else { return Ok(()) };
        let back = billiard_map(t, ev.next.reversed()).unwrap().next.reversed();
        prop_assert!(t.s_difference(back.s, x.s).abs() < 1e-9);
        prop_assert!((back.theta - x.theta).abs() < 1e-9);
    }

    #[test]
    fn tangent_map_matches_finite_differences(i in table_index(), u in 0.0..1.0f64, v in 0.02..0.98f64) {
        let tables = calibration_tables();
        let t = &tables[i].1;
        let Some(x) = point_in(t, u, v) else { return Ok(()) };
        let Some(fd) = fd_jacobian(t, x, 1e-7) else { return Ok(()) };
        let dt = tangent_map(t, x).unwrap();
        prop_assert!(close_rel(dt, fd, 1e-5), "{:?} vs {:?}", dt, fd);
    }

    #[test]
    fn flights_obey_reflection_and_stay_inside(i in table_index(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let tables = calibration_tables();
        let t = &tables[i].1;
        let Some(x) = point_in(t, u, v) else { return Ok(()) };
        let orbit = iterate(t, x, 20);
        let dirs: Vec<Vec2> = orbit.points.windows(2).map(|w| {
            let a = dynamics::position(t, w[0]).unwrap();
            let b = dynamics::position(t, w[1]).unwrap();
            for f in [0.25, 0.5, 0.75] {
                assert!(t.contains(a + (b - a) * f));
            }
            (b - a).normalized()
        }).collect();
        for (k, d) in dirs.iter().enumerate() {
            // Outgoing angle measured from the positive tangent.
            let here = t.eval(orbit.points[k].s).unwrap();
            prop_assert!((d.dot(here.tangent) - orbit.points[k].theta.cos()).abs() < 1e-9);
            prop_assert!((d.dot(here.normal()) - orbit.points[k].theta.sin()).abs() < 1e-9);
            // Specular reflection keeps the tangential component.
            if let Some(next) = dirs.get(k + 1) {
                let there = t.eval(orbit.points[k + 1].s).unwrap();
                prop_assert!((d.dot(there.tangent) - next.dot(there.tangent)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn circle_conserves_angle() {
    let t = build_table(&TableSpec::circle(1.0)).unwrap();
    let orbit = iterate(&t, PhasePoint::new(0.3, 1.0), 10_000);
    assert_eq!(orbit.terminated, Termination::Completed);
    for p in &orbit.points {
        assert!((p.theta - 1.0).abs() < 1e-12);
    }
}

#[test]
fn measure_preserved_on_random_sample() {
    let mut r = rng(7);
    for (name, t) in calibration_tables() {
        for _ in 0..2000 {
            let x = random_point(&t, &mut r);
            if let Ok(ev) = billiard_map(&t, x) {
                let det = tangent_map(&t, x).unwrap().det();
                assert!((det * ev.next.theta.sin() - x.theta.sin()).abs() < 1e-9, "{name} at {x:?}");
            }
        }
    }
}

#[test]
fn lemon_axial_orbit_returns_every_two_steps() {
    let t = build_table(&TableSpec::lemon(1.0, 1.35)).unwrap();
    let x = periodic::axial_two_periodic(&t).unwrap();
    let ev = billiard_map(&t, x).unwrap();
    assert_abs_diff_eq!(ev.free_path, 0.65, epsilon = 1e-12);
    let orbit = iterate(&t, x, 100);
    assert_eq!(orbit.terminated, Termination::Completed);
    for pair in orbit.points.chunks(2) {
        assert!(t.s_difference(pair[0].s, x.s).abs() < 1e-9);
        assert!((pair[0].theta - FRAC_PI_2).abs() < 1e-9);
    }
}

#[test]
fn lemon_axial_tangent_map_matches_finite_differences() {
    let t = build_table(&TableSpec::lemon(1.0, 1.35)).unwrap();
    let x = periodic::axial_two_periodic(&t).unwrap();
    let fd = fd_jacobian(&t, x, 1e-7).unwrap();
    assert!(close_rel(tangent_map(&t, x).unwrap(), fd, 1e-5));
}

#[test]
fn flight_into_a_corner_terminates() {
    let t = build_table(&TableSpec::lemon(1.0, 1.35)).unwrap();
    let corner = t.corner_points()[1];
    // Launch from the middle of the first arc straight at the other corner.
    let s = 0.5 * t.arc_start(1);
    let here = t.eval(s).unwrap();
    let d = (corner - here.point).normalized();
    let theta = d.dot(here.normal()).atan2(d.dot(here.tangent));
    let orbit = iterate(&t, PhasePoint::new(s, theta), 10);
    assert_eq!(orbit.terminated, Termination::CornerHit);
    assert_eq!(orbit.points.len(), 1);
}
