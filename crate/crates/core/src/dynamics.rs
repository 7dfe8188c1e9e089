//! The billiard map in Birkhoff coordinates and its derivative.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::tables::{BilliardTable, Orientation};

/// Flights closer than this to a corner (in arc-length) are singular.
pub const CORNER_TOL: f64 = 1e-12;
/// Collisions with `|sin θ|` below this are grazing.
pub const GRAZING_TOL: f64 = 1e-12;
/// Shortest accepted flight; rejects the departure point itself.
pub const MIN_FLIGHT: f64 = 1e-12;

/// Birkhoff coordinates: arc-length `s` and the angle `theta` in `(0, π)`
/// from the positive tangent to the outgoing velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub s: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub const fn new(s: f64, theta: f64) -> Self {
        Self { s, theta }
    }

    /// Time-reversed point `(s, π - θ)`.
    pub fn reversed(self) -> Self {
        Self::new(self.s, PI - self.theta)
    }

    /// `(s / |∂Q|, θ / π)`.
    pub fn normalized(self, table: &BilliardTable) -> (f64, f64) {
        (self.s / table.total_length(), self.theta / PI)
    }

    pub fn from_normalized(table: &BilliardTable, s_norm: f64, theta_norm: f64) -> Self {
        Self::new(table.wrap_s(s_norm * table.total_length()), theta_norm * PI)
    }
}

/// The outcome of one application of the billiard map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub next: PhasePoint,
    /// Euclidean length of the flight.
    pub free_path: f64,
    /// Arc hit by the flight.
    pub arc_index: usize,
}

/// `∂(s₁, θ₁) / ∂(s, θ)`.
pub type TangentMatrix = Mat2;

fn check_regular(table: &BilliardTable, x: PhasePoint) -> Result<()> {
    if !(x.theta > 0.0 && x.theta < PI) || x.theta.sin() < GRAZING_TOL {
        return Err(Error::Grazing { s: x.s });
    }
    if !(x.s >= 0.0 && x.s < table.total_length()) {
        return Err(Error::OutOfRange {
            s: x.s,
            length: table.total_length(),
        });
    }
    if table.corner_distance(x.s) < CORNER_TOL {
        return Err(Error::CornerHit { s: x.s });
    }
    Ok(())
}

/// Departure point and velocity of a regular phase point.
fn launch(table: &BilliardTable, x: PhasePoint) -> Result<(Vec2, Vec2, usize)> {
    check_regular(table, x)?;
    let (i, u) = table.locate(x.s)?;
    let bp = table.eval_arc(i, u);
    let v = bp.tangent * x.theta.cos() + bp.normal() * x.theta.sin();
    Ok((bp.point, v, i))
}

/// Straight flight from `x` to the next wall collision, then specular
/// reflection.
pub fn billiard_map(table: &BilliardTable, x: PhasePoint) -> Result<CollisionEvent> {
    let (p, v, from) = launch(table, x)?;
    let arcs = table.arcs();
    let home = arcs[from].circle;

    let mut best: Option<(f64, usize, f64)> = None;
    let mut runner_up = f64::INFINITY;
    for (j, arc) in arcs.iter().enumerate() {
        let w = p - arc.center;
        let b = w.dot(v);
        let roots: [f64; 2] = if arc.circle == home {
            // p lies on this circle: the other root is exact.
            [-2.0 * b, f64::NAN]
        } else {
            let disc = b * b - (w.norm_sq() - arc.radius * arc.radius);
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            [-b - sq, -b + sq]
        };
        for tau in roots {
            if !(tau > MIN_FLIGHT) {
                continue;
            }
            let u = arc.local_param(p + v * tau);
            if u < -CORNER_TOL || u > arc.length() + CORNER_TOL {
                continue;
            }
            match best {
                Some((t, _, _)) if tau >= t => runner_up = runner_up.min(tau),
                _ => {
                    if let Some((t, _, _)) = best {
                        runner_up = runner_up.min(t);
                    }
                    best = Some((tau, j, u));
                }
            }
            break;
        }
    }

    let (tau, j, u) = best.ok_or(Error::NumericFailure { s: x.s })?;
    let arc = &arcs[j];
    let near_corner = !arc.is_full_circle() && (u < CORNER_TOL || u > arc.length() - CORNER_TOL);
    if near_corner || runner_up - tau < CORNER_TOL {
        return Err(Error::CornerHit { s: x.s });
    }
    let hit = table.eval_arc(j, u);
    let cos1 = v.dot(hit.tangent);
    let sin1 = -v.dot(hit.normal());
    if sin1 < GRAZING_TOL {
        return Err(Error::Grazing { s: x.s });
    }
    // A chord of one circle meets it at equal angles at both ends; using
    // that exactly keeps long whispering-gallery runs free of drift.
    let theta1 = if arc.circle == home && arc.orientation == Orientation::Focusing {
        x.theta
    } else {
        sin1.atan2(cos1)
    };
    let s1 = table.wrap_s(table.arc_start(j) + u);
    Ok(CollisionEvent {
        next: PhasePoint::new(s1, theta1),
        free_path: tau,
        arc_index: j,
    })
}

/// Derivative of the billiard map at `x`, given the collision it produces.
pub fn tangent_map_with(table: &BilliardTable, x: PhasePoint, event: &CollisionEvent) -> TangentMatrix {
    let (from, _) = table.locate(x.s).expect("regular point");
    let k0 = table.arcs()[from].curvature();
    let k1 = table.arcs()[event.arc_index].curvature();
    let tau = event.free_path;
    let (sin0, sin1) = (x.theta.sin(), event.next.theta.sin());
    Mat2::new(
        (tau * k0 - sin0) / sin1,
        tau / sin1,
        (tau * k0 * k1 - k0 * sin1 - k1 * sin0) / sin1,
        (tau * k1 - sin1) / sin1,
    )
}

/// Derivative of the billiard map at `x` in `(s, θ)` coordinates.
pub fn tangent_map(table: &BilliardTable, x: PhasePoint) -> Result<TangentMatrix> {
    let event = billiard_map(table, x)?;
    Ok(tangent_map_with(table, x, &event))
}

/// How an orbit ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    CornerHit,
    Grazing,
    NumericFailure,
}

impl Termination {
    fn from_error(e: &Error) -> Self {
        match e {
            Error::CornerHit { .. } => Termination::CornerHit,
            Error::Grazing { .. } => Termination::Grazing,
            _ => Termination::NumericFailure,
        }
    }
}

/// A finite orbit segment. `points[0]` is the seed; `arcs[k]` is the arc
/// carrying `points[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub points: Vec<PhasePoint>,
    pub arcs: Vec<usize>,
    pub terminated: Termination,
}

impl Orbit {
    /// Number of completed map applications.
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }
}

/// Applies the billiard map up to `n` times, stopping at the first
/// singularity.
pub fn iterate(table: &BilliardTable, x: PhasePoint, n: usize) -> Orbit {
    let mut points = Vec::with_capacity(n + 1);
    let mut arcs = Vec::with_capacity(n + 1);
    let first_arc = match check_regular(table, x).and_then(|_| table.locate(x.s)) {
        Ok((i, _)) => i,
        Err(e) => {
            return Orbit {
                points: vec![x],
                arcs: vec![table.locate(table.wrap_s(x.s)).map(|(i, _)| i).unwrap_or(0)],
                terminated: Termination::from_error(&e),
            }
        }
    };
    points.push(x);
    arcs.push(first_arc);
    let mut current = x;
    for _ in 0..n {
        match billiard_map(table, current) {
            Ok(ev) => {
                points.push(ev.next);
                arcs.push(ev.arc_index);
                current = ev.next;
            }
            Err(e) => {
                return Orbit {
                    points,
                    arcs,
                    terminated: Termination::from_error(&e),
                }
            }
        }
    }
    Orbit {
        points,
        arcs,
        terminated: Termination::Completed,
    }
}

/// Orbits of many seeds, computed in parallel and returned in seed order.
pub fn portrait(table: &BilliardTable, seeds: &[PhasePoint], n: usize) -> Vec<Orbit> {
    seeds.par_iter().map(|&x| iterate(table, x, n)).collect()
}

/// Unnormalized density `sin θ` of the invariant measure.
pub fn measure_density(x: PhasePoint) -> f64 {
    x.theta.sin()
}

/// Cartesian position of a phase point's base.
pub fn position(table: &BilliardTable, x: PhasePoint) -> Result<Vec2> {
    Ok(table.eval(table.wrap_s(x.s))?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{build_table, TableSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, TAU};

    fn circle() -> BilliardTable {
        build_table(&TableSpec::circle(1.0)).unwrap()
    }

    #[test]
    fn circle_diameter() {
        let ev = billiard_map(&circle(), PhasePoint::new(0.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(ev.next.s, PI, epsilon = 1e-14);
        assert_abs_diff_eq!(ev.next.theta, FRAC_PI_2, epsilon = 1e-14);
        assert_abs_diff_eq!(ev.free_path, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn circle_chord() {
        let ev = billiard_map(&circle(), PhasePoint::new(0.0, FRAC_PI_3)).unwrap();
        assert_abs_diff_eq!(ev.next.s, 2.0 * FRAC_PI_3, epsilon = 1e-14);
        assert_abs_diff_eq!(ev.next.theta, FRAC_PI_3, epsilon = 1e-14);
        assert_abs_diff_eq!(ev.free_path, 3f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn circle_tangent_map_is_shear() {
        let t = circle();
        for x in [PhasePoint::new(0.3, 0.4), PhasePoint::new(5.0, 2.9)] {
            let m = tangent_map(&t, x).unwrap();
            assert_abs_diff_eq!(m.a, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.b, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.c, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.d, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.det(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_orbit_alternates() {
        let orbit = iterate(&circle(), PhasePoint::new(0.0, FRAC_PI_2), 4);
        assert_eq!(orbit.terminated, Termination::Completed);
        let expected = [0.0, PI, 0.0, PI, 0.0];
        for (p, e) in orbit.points.iter().zip(expected) {
            let d = (p.s - e).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-12);
        }
    }

    #[test]
    fn lemon_axial_chord() {
        let t = build_table(&TableSpec::lemon(1.0, 1.35)).unwrap();
        let s = t.locate_point(Vec2::new(0.35, 0.0)).unwrap();
        let ev = billiard_map(&t, PhasePoint::new(s, FRAC_PI_2)).unwrap();
        let q = position(&t, ev.next).unwrap();
        assert_abs_diff_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev.next.theta, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ev.free_path, 0.65, epsilon = 1e-12);
    }

    #[test]
    fn measure_density_values() {
        assert_eq!(measure_density(PhasePoint::new(0.0, FRAC_PI_2)), 1.0);
        assert_abs_diff_eq!(measure_density(PhasePoint::new(0.0, PI / 6.0)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(measure_density(PhasePoint::new(0.0, 1e-300)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_inputs() {
        let t = build_table(&TableSpec::lemon(1.0, 1.0)).unwrap();
        assert!(matches!(
            billiard_map(&t, PhasePoint::new(0.0, 1.0)),
            Err(Error::CornerHit { .. })
        ));
        assert!(matches!(
            billiard_map(&t, PhasePoint::new(0.5, 0.0)),
            Err(Error::Grazing { .. })
        ));
        assert!(matches!(
            billiard_map(&t, PhasePoint::new(100.0, 1.0)),
            Err(Error::OutOfRange { .. })
        ));
    }
}
