//! Periodic orbits: Newton refinement on `T^k(x) = x` and linear stability.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{billiard_map, position, tangent_map_with, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::tables::{BilliardTable, Family, Orientation};

/// Default half-width of the parabolic band around `|tr| = 2`.
pub const PARABOLIC_TOL: f64 = 1e-8;
/// Residual `‖T^k(x) - x‖` accepted as periodic.
pub const PERIODIC_RESIDUAL: f64 = 1e-9;
const NEWTON_STEPS: usize = 50;
const STEP_HALVINGS: usize = 20;
/// Converged cycles with a shorter flight are corner artefacts.
const MIN_CYCLE_FLIGHT: f64 = 1e-6;
const RADIAL_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    Hyperbolic,
    Parabolic,
    Elliptic,
}

impl StabilityClass {
    pub fn from_trace(trace: f64, tol: f64) -> Self {
        let t = trace.abs();
        if t > 2.0 + tol {
            StabilityClass::Hyperbolic
        } else if t < 2.0 - tol {
            StabilityClass::Elliptic
        } else {
            StabilityClass::Parabolic
        }
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityClass::Hyperbolic => "Hyperbolic",
            StabilityClass::Parabolic => "Parabolic",
            StabilityClass::Elliptic => "Elliptic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub cycle: Vec<PhasePoint>,
    pub period: usize,
    /// Trace of the ordered product of tangent matrices along the cycle.
    pub trace: f64,
    pub classification: StabilityClass,
    pub residual: f64,
}

impl PeriodicOrbit {
    /// Cartesian collision points, closed back onto the first one.
    pub fn polyline(&self, table: &BilliardTable) -> Result<Vec<Vec2>> {
        let mut pts = self
            .cycle
            .iter()
            .map(|&x| position(table, x))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
        Ok(pts)
    }
}

/// `T^k(x)`, the ordered product `D T^k`, and the visited points
/// `x, T x, …, T^{k-1} x`.
pub fn map_power(table: &BilliardTable, x: PhasePoint, k: usize) -> Result<(PhasePoint, Mat2, Vec<PhasePoint>)> {
    let mut cur = x;
    let mut m = Mat2::IDENTITY;
    let mut visited = Vec::with_capacity(k);
    for _ in 0..k {
        let ev = billiard_map(table, cur)?;
        m = tangent_map_with(table, cur, &ev) * m;
        visited.push(cur);
        cur = ev.next;
    }
    Ok((cur, m, visited))
}

fn displacement(table: &BilliardTable, from: PhasePoint, to: PhasePoint) -> [f64; 2] {
    [table.s_difference(to.s, from.s), to.theta - from.theta]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// `‖T^k(x) - x‖` with the `s` difference taken around the boundary.
pub fn periodic_residual(table: &BilliardTable, x: PhasePoint, k: usize) -> Result<f64> {
    let (y, _, _) = map_power(table, x, k)?;
    Ok(norm(displacement(table, x, y)))
}

fn singular(e: Error) -> Error {
    if e.is_singular() {
        Error::SingularOrbit(e.to_string())
    } else {
        e
    }
}

/// Newton can settle next to a corner, where flights shrink to nothing and
/// `T^k(x) ≈ x` trivially. Such limits are singular, not periodic.
fn away_from_corners(table: &BilliardTable, x: PhasePoint, k: usize) -> Result<PhasePoint> {
    let mut cur = x;
    for _ in 0..k {
        let ev = billiard_map(table, cur).map_err(singular)?;
        if ev.free_path < MIN_CYCLE_FLIGHT {
            return Err(Error::SingularOrbit(format!(
                "cycle collapses into a corner near s={}",
                cur.s
            )));
        }
        cur = ev.next;
    }
    Ok(x)
}

/// Damped Newton iteration for a fixed point of `T^k`.
pub fn refine_periodic(table: &BilliardTable, seed: PhasePoint, k: usize) -> Result<PhasePoint> {
    if k == 0 {
        return Err(Error::NotFound("period must be positive".into()));
    }
    let mut x = seed;
    let (y, mut jac, _) = map_power(table, x, k).map_err(singular)?;
    let mut f = displacement(table, x, y);
    let mut r = norm(f);
    for _ in 0..NEWTON_STEPS {
        if r < PERIODIC_RESIDUAL {
            return away_from_corners(table, x, k);
        }
        let step = (jac - Mat2::IDENTITY).solve([-f[0], -f[1]]);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=STEP_HALVINGS {
            let trial = PhasePoint::new(
                table.wrap_s(x.s + lambda * step[0]),
                x.theta + lambda * step[1],
            );
            if trial.theta > 0.0 && trial.theta < PI {
                if let Ok((ty, tjac, _)) = map_power(table, trial, k) {
                    let tf = displacement(table, trial, ty);
                    if norm(tf) < r {
                        accepted = Some((trial, tjac, tf));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        let Some((nx, njac, nf)) = accepted else {
            return Err(Error::NoConvergence {
                steps: NEWTON_STEPS,
                residual: r,
            });
        };
        x = nx;
        jac = njac;
        f = nf;
        r = norm(f);
    }
    if r < PERIODIC_RESIDUAL {
        away_from_corners(table, x, k)
    } else {
        Err(Error::NoConvergence {
            steps: NEWTON_STEPS,
            residual: r,
        })
    }
}

/// Refines `x` as a `k`-periodic point and classifies its stability.
pub fn classify(table: &BilliardTable, x: PhasePoint, k: usize, tol: f64) -> Result<PeriodicOrbit> {
    let start = match refine_periodic(table, x, k) {
        Ok(p) => p,
        Err(Error::NoConvergence { residual, .. }) => return Err(Error::NotPeriodic { residual }),
        Err(e) => return Err(e),
    };
    let (end, m, cycle) = map_power(table, start, k).map_err(singular)?;
    let residual = norm(displacement(table, start, end));
    if residual >= PERIODIC_RESIDUAL {
        return Err(Error::NotPeriodic { residual });
    }
    let trace = m.trace();
    Ok(PeriodicOrbit {
        cycle,
        period: k,
        trace,
        classification: StabilityClass::from_trace(trace, tol),
        residual,
    })
}

/// Smallest divisor `d` of `orbit.period` with `T^d(x) = x`.
pub fn minimal_period(table: &BilliardTable, orbit: &PeriodicOrbit) -> usize {
    let x = orbit.cycle[0];
    (1..orbit.period)
        .filter(|&d| orbit.period.is_multiple_of(d))
        .find(|&d| matches!(periodic_residual(table, x, d), Ok(r) if r < 1e-7))
        .unwrap_or(orbit.period)
}

/// The 2-periodic point on the centre axis of a lemon table: the
/// perpendicular bounce at the unit-circle vertex `(1, 0)`.
pub fn axial_two_periodic(table: &BilliardTable) -> Result<PhasePoint> {
    let spec = table.spec();
    if spec.family != Family::Lemon && !(spec.family == Family::UmbrellaLemon && spec.b1 == 0.0) {
        return Err(Error::InvalidSpec(format!(
            "axial orbit needs an undeformed lemon, got {} with B1={}",
            spec.family, spec.b1
        )));
    }
    let s = table
        .locate_point(Vec2::new(table.scale(), 0.0))
        .ok_or_else(|| Error::InvalidSpec("axis does not meet the unit arc".into()))?;
    Ok(PhasePoint::new(s, FRAC_PI_2))
}

/// The 2-periodic orbits that replace the axial orbit of a lemon once the
/// unit disk is split into copies: one orbit along the line joining each
/// copy's centre to the radius-`R` centre.
pub fn split_pair(table: &BilliardTable) -> Result<Vec<PeriodicOrbit>> {
    let spec = table.spec();
    if spec.family != Family::UmbrellaLemon || spec.b1 <= 0.0 {
        return Err(Error::InvalidSpec("split_pair needs an umbrella lemon with B1 > 0".into()));
    }
    let disks = table.disks();
    let scale = table.scale();
    let big = disks[0].center * scale;
    (1..disks.len())
        .map(|j| {
            let c = disks[j].center * scale;
            let toward = (big - c).normalized();
            let p = c + toward * (disks[j].radius * scale);
            let s = table
                .locate_point(p)
                .ok_or_else(|| Error::NotFound(format!("copy {j}: normal line misses its arc")))?;
            let (arc, _) = table.locate(s)?;
            if table.arcs()[arc].circle != j {
                return Err(Error::NotFound(format!("copy {j}: normal foot lies on another arc")));
            }
            classify(table, PhasePoint::new(s, FRAC_PI_2), 2, PARABOLIC_TOL)
                .map_err(|e| Error::NotFound(format!("copy {j}: {e}")))
        })
        .collect()
}

/// Shooting residual of a launch at `s` perpendicular to a dispersing arc:
/// `cos θ` at the first dispersing collision after exactly `m` focusing ones.
fn radial_miss(table: &BilliardTable, s: f64, m: usize) -> Option<f64> {
    let arcs = table.arcs();
    let mut x = PhasePoint::new(s, FRAC_PI_2);
    for step in 0..=m {
        let ev = billiard_map(table, x).ok()?;
        let focusing = arcs[ev.arc_index].orientation == Orientation::Focusing;
        if focusing != (step < m) {
            return None;
        }
        x = ev.next;
    }
    Some(x.theta.cos())
}

/// Periodic orbit that leaves a dispersing arc perpendicularly, slides
/// along the focusing arcs for `m` collisions, and meets a dispersing arc
/// perpendicularly again before retracing itself.
///
/// The launch point is found by bisection over the one-parameter family of
/// perpendicular launches, then refined as a `2(m + 1)`-periodic point.
pub fn radial_orbit(table: &BilliardTable, m: usize) -> Result<PeriodicOrbit> {
    if !table.spec().family.is_moon_type() {
        return Err(Error::InvalidSpec("radial orbits need a moon-type table".into()));
    }
    if m == 0 {
        return Err(Error::InvalidSpec("sliding count must be at least 1".into()));
    }
    let k = 2 * (m + 1);
    let mut launches = Vec::new();
    for (i, arc) in table.arcs().iter().enumerate() {
        if arc.orientation != Orientation::Dispersing {
            continue;
        }
        let len = arc.length();
        for j in 1..RADIAL_SAMPLES {
            launches.push(table.arc_start(i) + len * j as f64 / RADIAL_SAMPLES as f64);
        }
    }
    let misses: Vec<Option<f64>> = launches.iter().map(|&s| radial_miss(table, s, m)).collect();
    for w in 0..launches.len().saturating_sub(1) {
        let (Some(f0), Some(f1)) = (misses[w], misses[w + 1]) else {
            continue;
        };
        if f0.signum() == f1.signum() && f0 != 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (launches[w], launches[w + 1], f0);
        let mut ok = true;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match radial_miss(table, mid, m) {
                Some(fm) if fm.signum() == flo.signum() && fm != 0.0 => {
                    lo = mid;
                    flo = fm;
                }
                Some(_) => hi = mid,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let seed = PhasePoint::new(0.5 * (lo + hi), FRAC_PI_2);
        if let Ok(orbit) = classify(table, seed, k, PARABOLIC_TOL) {
            return Ok(orbit);
        }
    }
    Err(Error::NotFound(format!(
        "no perpendicular orbit with {m} sliding collisions"
    )))
}
