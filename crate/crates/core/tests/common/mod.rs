//! Calibration tables and independent oracles shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use umbrella_core::*;

/// One table of each family used for calibration.
pub fn calibration_tables() -> Vec<(&'static str, BilliardTable)> {
    [
        ("lemon", TableSpec::lemon(1.0, 1.35)),
        ("moon", TableSpec::moon(1.2, 1.3)),
        ("umbrella lemon", TableSpec::umbrella_lemon(1.0, 1.35, 0.3)),
        ("umbrella moon 1", TableSpec::moon1(1.2, 1.3, 0.2)),
        ("umbrella moon 2", TableSpec::moon2(1.2, 1.3, 0.8)),
        ("circle", TableSpec::circle(1.0)),
    ]
    .into_iter()
    .map(|(name, spec)| (name, build_table(&spec).unwrap()))
    .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform phase point away from corners and grazing.
pub fn random_point(table: &BilliardTable, rng: &mut impl Rng) -> PhasePoint {
    loop {
        let s = rng.gen_range(0.0..table.total_length());
        let theta = rng.gen_range(0.0..PI);
        if table.corner_distance(s) > 1e-6 && theta.sin() > 1e-6 {
            return PhasePoint::new(s, theta);
        }
    }
}

/// Central differences of the billiard map, or `None` if the stencil
/// straddles a singularity (an error or a change of target arc).
pub fn fd_jacobian(table: &BilliardTable, x: PhasePoint, h: f64) -> Option<Mat2> {
    let base = billiard_map(table, x).ok()?;
    let probe = |ds: f64, dt: f64| -> Option<PhasePoint> {
        let ev = billiard_map(table, PhasePoint::new(table.wrap_s(x.s + ds), x.theta + dt)).ok()?;
        (ev.arc_index == base.arc_index).then_some(ev.next)
    };
    let (sp, sm) = (probe(h, 0.0)?, probe(-h, 0.0)?);
    let (tp, tm) = (probe(0.0, h)?, probe(0.0, -h)?);
    let d = |a: PhasePoint, b: PhasePoint| {
        (table.s_difference(a.s, b.s) / (2.0 * h), (a.theta - b.theta) / (2.0 * h))
    };
    let (a, c) = d(sp, sm);
    let (b, dd) = d(tp, tm);
    Some(Mat2 { a, b, c, d: dd })
}

/// `|a - b| ≤ tol · max(|b|, 1)` entrywise.
pub fn close_rel(a: Mat2, b: Mat2, tol: f64) -> bool {
    a.entries()
        .iter()
        .zip(b.entries())
        .all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
}
