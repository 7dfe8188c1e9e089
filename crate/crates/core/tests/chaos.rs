use std::f64::consts::FRAC_PI_2;

use umbrella_core::chaos::*;
use umbrella_core::*;

fn table(spec: TableSpec) -> BilliardTable {
    build_table(&spec).unwrap()
}

/// Two-orbit indicator written out directly from the definition.
fn li_oracle(t: &BilliardTable, x: PhasePoint, dx: f64, n: usize) -> f64 {
    let l = t.total_length();
    let mut a = x;
    let mut b = PhasePoint::new(t.wrap_s(x.s + dx * l), x.theta);
    for _ in 0..n {
        a = billiard_map(t, a).unwrap().next;
        b = billiard_map(t, b).unwrap().next;
    }
    let ds = t.s_difference(a.s, b.s) / l;
    let dt = (a.theta - b.theta) / std::f64::consts::PI;
    (ds.hypot(dt) / dx).ln() / n as f64
}

#[test]
fn indicator_matches_definition() {
    let cfg = LyapunovConfig::default();
    let t = table(TableSpec::moon(1.0, 1.5));
    for x in [PhasePoint::new(0.5, 1.0), PhasePoint::new(2.0, 0.7)] {
        let li = lyapunov_indicator(&t, x, &cfg).unwrap();
        assert!(li.complete);
        assert!((li.value - li_oracle(&t, x, cfg.dx, cfg.n)).abs() < 1e-12);
        assert!(li.value > 0.0);
    }
}

#[test]
fn circle_indicator_stays_small() {
    let t = table(TableSpec::circle(1.0));
    for theta in [0.3, 1.0, 2.0] {
        let li = lyapunov_indicator(&t, PhasePoint::new(1.0, theta), &LyapunovConfig::default()).unwrap();
        assert!(li.value < 0.3);
    }
}

#[test]
fn indicator_inside_lemon_island_is_near_zero() {
    let t = table(TableSpec::lemon(1.0, 1.35));
    let axial = periodic::axial_two_periodic(&t).unwrap();
    let x = PhasePoint::new(axial.s + 0.02, FRAC_PI_2);
    let cfg = LyapunovConfig { n: 1000, ..Default::default() };
    let li = lyapunov_indicator(&t, x, &cfg).unwrap();
    assert!(li.value.abs() < 0.01, "{li:?}");
    assert!((li.value - li_oracle(&t, x, cfg.dx, cfg.n)).abs() < 1e-12);
}

#[test]
fn corner_seed_is_degenerate() {
    let t = table(TableSpec::moon(1.2, 1.3));
    let r = lyapunov_indicator(&t, PhasePoint::new(t.corners()[1], 1.0), &LyapunovConfig::default());
    assert_eq!(r, Err(Error::DegenerateSeed));
}

#[test]
fn grid_average_signs() {
    let cfg = LyapunovConfig::default();
    let circle = scaled_lyapunov(&table(TableSpec::circle(1.0)), &cfg).unwrap();
    assert!(circle.lambda_bar < 0.3);
    assert_eq!(circle.skipped, 0);
    let moon = scaled_lyapunov(&table(TableSpec::moon(1.0, 1.5)), &cfg).unwrap();
    assert!(moon.lambda_bar > 0.0);
    assert_eq!(moon.used + moon.skipped, 1600);
    let weighted = scaled_lyapunov_weighted(&table(TableSpec::moon(1.0, 1.5)), &cfg, GridWeighting::Measure).unwrap();
    assert!(weighted.lambda_bar > 0.0);
}

#[test]
fn grid_average_is_bitwise_reproducible_across_pools() {
    let t = table(TableSpec::moon1(1.0, 0.8, 0.4));
    let cfg = LyapunovConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scaled_lyapunov(&t, &cfg).unwrap())
    };
    let one = run(1);
    for threads in [2, 4, 8] {
        let other = run(threads);
        assert_eq!(one.lambda_bar.to_bits(), other.lambda_bar.to_bits());
        assert_eq!(one.skipped, other.skipped);
    }
}

#[test]
fn umbrella_moon_gains_chaos_at_low_offsets() {
    let cfg = LyapunovConfig::default();
    let lam = |spec: TableSpec| scaled_lyapunov(&table(spec), &cfg).unwrap().lambda_bar;
    for b in [0.6, 1.0] {
        assert!(lam(TableSpec::moon1(1.0, b, 0.4)) > lam(TableSpec::moon1(1.0, b, 0.0)), "B={b}");
    }
}

#[test]
fn umbrella_lemon_gains_chaos_below_the_parabolic_case() {
    let cfg = LyapunovConfig::default();
    let lam = |b: f64, b1: f64| scaled_lyapunov(&table(TableSpec::umbrella_lemon(1.0, b, b1)), &cfg).unwrap().lambda_bar;
    for b in [0.4, 0.6, 0.8] {
        assert!(lam(b, 0.4) > lam(b, 0.0), "B={b}");
    }
}

#[test]
fn moon_curve_is_positive_past_orthogonality() {
    let curve = lyapunov_curve(
        &TableSpec::moon1(1.0, 1.45, 0.0),
        &ParamRange::new(1.45, 1.9, 0.05),
        &LyapunovConfig::default(),
    )
    .unwrap();
    assert_eq!(curve.points.len(), 10);
    assert!(curve.invalid.is_empty());
    assert!(curve.points.iter().all(|p| p.lambda_bar > 0.0));
    assert!(curve.points.windows(2).all(|w| w[0].b < w[1].b));
}

#[test]
fn curve_skips_invalid_tables() {
    let curve = lyapunov_curve(
        &TableSpec::lemon(1.0, 1.0),
        &ParamRange::new(1.8, 2.2, 0.1),
        &LyapunovConfig { k: 6, ..Default::default() },
    )
    .unwrap();
    assert_eq!(curve.points.len(), 2);
    assert_eq!(curve.invalid.len(), 3);
    assert!(lyapunov_curve(&TableSpec::lemon(1.0, 1.0), &ParamRange::new(1.0, 0.5, 0.1), &LyapunovConfig::default()).is_err());
}

#[test]
fn circle_is_all_regular() {
    let cfg = IslandConfig { grid: 10, n_long: 1000, ..Default::default() };
    let r = island_detect(&table(TableSpec::circle(1.0)), &cfg).unwrap();
    assert!((r.regular_fraction - 1.0).abs() < 1e-12);
    assert!(r.islands_found);
}

#[test]
fn small_moon_offset_has_islands() {
    let r = island_detect(&table(TableSpec::moon(1.2, 0.21)), &IslandConfig::default()).unwrap();
    assert!(r.islands_found);
    assert!(r.regular_fraction > 0.5);
}

#[test]
fn longer_runs_never_create_regular_seeds() {
    let short = IslandConfig { grid: 12, ..Default::default() };
    let long = IslandConfig { n_long: 10_000, ..short };
    for b in [0.21, 1.5] {
        let t = table(TableSpec::moon(1.2, b));
        let a = island_detect(&t, &short).unwrap();
        let z = island_detect(&t, &long).unwrap();
        for (x, y) in a.cells.iter().zip(&z.cells) {
            assert!(!(*x == SeedVerdict::Chaotic && *y == SeedVerdict::Regular), "B={b}");
        }
    }
}

#[test]
fn region_two_range_has_no_transition() {
    let cfg = ScanConfig {
        islands: IslandConfig { grid: 16, n_long: 1000, ..Default::default() },
        ..Default::default()
    };
    assert_eq!(
        ergodic_boundary_scan(2.3, 0.0, (0.2, 0.4), 0.01, &cfg),
        Err(Error::NoTransition)
    );
}

#[test]
fn scan_brackets_are_one_step_wide_and_refine_consistently() {
    let cfg = ScanConfig {
        islands: IslandConfig { grid: 16, n_long: 1000, ..Default::default() },
        ..Default::default()
    };
    let line = 2.0 - FRAC_PI_2;
    let range = (line - 0.2, line + 0.3);
    let coarse = ergodic_boundary_scan(2.0, 0.0, range, 0.004, &cfg).unwrap();
    let fine = ergodic_boundary_scan(2.0, 0.0, range, 0.002, &cfg).unwrap();
    assert!((coarse.theta1_high - coarse.theta1_low - 0.004).abs() < 1e-12);
    assert!((fine.theta1_high - fine.theta1_low - 0.002).abs() < 1e-12);
    let island = |th1: f64| {
        let t = build_table(&scan_spec(th1, 2.0, 0.0, Family::UmbrellaMoon1).unwrap()).unwrap();
        island_detect(&t, &cfg.islands).unwrap().islands_found
    };
    assert_ne!(island(fine.theta1_low), island(fine.theta1_high));
    assert!((coarse.midpoint() - fine.midpoint()).abs() <= 0.004 + 1e-12);
}

#[test]
fn scan_rejects_bad_ranges() {
    let cfg = ScanConfig::default();
    assert!(matches!(ergodic_boundary_scan(2.0, 0.0, (0.5, 0.4), 0.001, &cfg), Err(Error::InvalidSpec(_))));
    assert!(matches!(ergodic_boundary_scan(2.0, 0.0, (0.4, 0.5), 0.0, &cfg), Err(Error::InvalidSpec(_))));
}
