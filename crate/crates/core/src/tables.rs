//! Construction of circular-arc billiard tables.
//!
//! Every table is a boolean combination of disks in a fixed frame: the unit
//! disk is centred at the origin and the radius-`R` disk at `(B, 0)`. Umbrella
//! families replace one of the two disks by `n` copies whose centres are
//! spread evenly along the vertical line through the original centre,
//! spanning a total width `B1`.
//!
//! The boundary is recovered from the disk arrangement: each circle is split
//! at its intersections with the others and an arc is kept when the region
//! changes membership across it. Kept arcs are oriented so that the table lies
//! on their left and chained into a single counterclockwise loop.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_tau, Vec2};

/// Distance within which two arc endpoints count as the same point.
pub const ENDPOINT_TOL: f64 = 1e-10;

const MAX_OFFSET_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// A single disk of radius `R`.
    Circle,
    /// Intersection of the unit disk and the radius-`R` disk.
    Lemon,
    /// Unit disk minus the radius-`R` disk.
    Moon,
    /// Union of the two disks.
    Flower,
    /// Radius-`R` disk intersected with the union of the unit-disk copies.
    UmbrellaLemon,
    /// Unit disk minus the union of the radius-`R` copies.
    #[serde(rename = "moon1", alias = "umbrella_moon1")]
    UmbrellaMoon1,
    /// Union of the unit-disk copies minus the radius-`R` disk.
    #[serde(rename = "moon2", alias = "umbrella_moon2")]
    UmbrellaMoon2,
}

impl Family {
    pub fn is_umbrella(self) -> bool {
        matches!(
            self,
            Family::UmbrellaLemon | Family::UmbrellaMoon1 | Family::UmbrellaMoon2
        )
    }

    pub fn is_moon_type(self) -> bool {
        matches!(
            self,
            Family::Moon | Family::UmbrellaMoon1 | Family::UmbrellaMoon2
        )
    }

    pub fn is_lemon_type(self) -> bool {
        matches!(self, Family::Lemon | Family::UmbrellaLemon)
    }

    /// The two-arc family an umbrella table deforms.
    pub fn base(self) -> Family {
        match self {
            Family::UmbrellaLemon => Family::Lemon,
            Family::UmbrellaMoon1 | Family::UmbrellaMoon2 => Family::Moon,
            f => f,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Circle => "circle",
            Family::Lemon => "lemon",
            Family::Moon => "moon",
            Family::Flower => "flower",
            Family::UmbrellaLemon => "umbrella_lemon",
            Family::UmbrellaMoon1 => "moon1",
            Family::UmbrellaMoon2 => "moon2",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "circle" => Family::Circle,
            "lemon" => Family::Lemon,
            "moon" => Family::Moon,
            "flower" => Family::Flower,
            "umbrella_lemon" | "lemon_umbrella" => Family::UmbrellaLemon,
            "moon1" | "umbrella_moon1" => Family::UmbrellaMoon1,
            "moon2" | "umbrella_moon2" => Family::UmbrellaMoon2,
            other => return Err(Error::InvalidSpec(format!("unknown family `{other}`"))),
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_copies() -> usize {
    2
}

/// Parameters of a table: `Q(R, B, B1)` plus the number of duplicated disks.
///
/// `n = 2` is the ordinary umbrella; larger `n` gives the n-umbrella.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub family: Family,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "B", default)]
    pub b: f64,
    #[serde(rename = "B1", default)]
    pub b1: f64,
    #[serde(default = "default_copies")]
    pub n: usize,
}

impl TableSpec {
    pub fn new(family: Family, r: f64, b: f64, b1: f64) -> Self {
        Self {
            family,
            r,
            b,
            b1,
            n: 2,
        }
    }

    pub fn circle(radius: f64) -> Self {
        Self::new(Family::Circle, radius, 0.0, 0.0)
    }

    pub fn lemon(r: f64, b: f64) -> Self {
        Self::new(Family::Lemon, r, b, 0.0)
    }

    pub fn moon(r: f64, b: f64) -> Self {
        Self::new(Family::Moon, r, b, 0.0)
    }

    pub fn flower(r: f64, b: f64) -> Self {
        Self::new(Family::Flower, r, b, 0.0)
    }

    pub fn umbrella_lemon(r: f64, b: f64, b1: f64) -> Self {
        Self::new(Family::UmbrellaLemon, r, b, b1)
    }

    pub fn moon1(r: f64, b: f64, b1: f64) -> Self {
        Self::new(Family::UmbrellaMoon1, r, b, b1)
    }

    pub fn moon2(r: f64, b: f64, b1: f64) -> Self {
        Self::new(Family::UmbrellaMoon2, r, b, b1)
    }

    pub fn with_copies(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_b1(mut self, b1: f64) -> Self {
        self.b1 = b1;
        self
    }

    /// The undeformed two-arc table (`B1 = 0`, base family).
    pub fn base(&self) -> TableSpec {
        TableSpec::new(self.family.base(), self.r, self.b, 0.0)
    }

    /// Number of boundary arcs (and corners) a valid table of this spec has.
    pub fn expected_corners(&self) -> usize {
        match self.family {
            Family::Circle => 0,
            f if f.is_umbrella() && self.b1 > 0.0 => self.n + 1,
            _ => 2,
        }
    }

    /// Checks parameter ranges; geometric validity is checked by [`build_table`].
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.r.is_finite() && self.b.is_finite() && self.b1.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.r <= 0.0 {
            return bad(format!("R must be positive, got {}", self.r));
        }
        if self.family == Family::Circle {
            if self.b1 != 0.0 {
                return bad("B1 must be 0 for a circle".into());
            }
            return Ok(());
        }
        if self.b <= 0.0 {
            return bad(format!("B must be positive, got {}", self.b));
        }
        // Moon tables reached through the angle parametrization may carry a
        // removed disk smaller than the unit disk; lemons and flowers can
        // always be relabelled so that R >= 1.
        if !self.family.is_moon_type() && self.r < 1.0 {
            return bad(format!("R must be at least 1 for {}, got {}", self.family, self.r));
        }
        if self.b1 < 0.0 {
            return bad(format!("B1 must be nonnegative, got {}", self.b1));
        }
        if self.family.is_umbrella() {
            if self.n < 2 {
                return bad(format!("umbrella tables need at least 2 copies, got {}", self.n));
            }
            if self.b1 >= 2.0 {
                return bad(format!("B1 must be below 2, got {}", self.b1));
            }
        } else if self.b1 != 0.0 {
            return bad(format!("B1 must be 0 for {}", self.family));
        }
        Ok(())
    }

    fn disks_and_region(&self) -> (Vec<Disk>, Region) {
        let unit = |y: f64| Disk {
            center: Vec2::new(0.0, y),
            radius: 1.0,
        };
        let big = |y: f64| Disk {
            center: Vec2::new(self.b, y),
            radius: self.r,
        };
        let offsets: Vec<f64> = if self.family.is_umbrella() && self.b1 > 0.0 {
            (0..self.n)
                .map(|j| -0.5 * self.b1 + self.b1 * j as f64 / (self.n - 1) as f64)
                .collect()
        } else {
            vec![0.0]
        };
        let copies = |first: usize| Region::Union((first..first + offsets.len()).map(Region::Disk).collect());
        match self.family {
            Family::Circle => (
                vec![Disk {
                    center: Vec2::new(0.0, 0.0),
                    radius: self.r,
                }],
                Region::Disk(0),
            ),
            Family::Lemon => (vec![unit(0.0), big(0.0)], Region::Intersection(vec![Region::Disk(0), Region::Disk(1)])),
            Family::Moon => (
                vec![unit(0.0), big(0.0)],
                Region::Difference(Box::new(Region::Disk(0)), Box::new(Region::Disk(1))),
            ),
            Family::Flower => (vec![unit(0.0), big(0.0)], Region::Union(vec![Region::Disk(0), Region::Disk(1)])),
            Family::UmbrellaLemon => {
                let mut disks = vec![big(0.0)];
                disks.extend(offsets.iter().map(|&y| unit(y)));
                (disks, Region::Intersection(vec![Region::Disk(0), copies(1)]))
            }
            Family::UmbrellaMoon1 => {
                let mut disks = vec![unit(0.0)];
                disks.extend(offsets.iter().map(|&y| big(y)));
                (disks, Region::Difference(Box::new(Region::Disk(0)), Box::new(copies(1))))
            }
            Family::UmbrellaMoon2 => {
                let mut disks = vec![big(0.0)];
                disks.extend(offsets.iter().map(|&y| unit(y)));
                (disks, Region::Difference(Box::new(copies(1)), Box::new(Region::Disk(0))))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm_sq() < self.radius * self.radius
    }
}

/// Boolean combination of disks, referenced by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Disk(usize),
    Union(Vec<Region>),
    Intersection(Vec<Region>),
    Difference(Box<Region>, Box<Region>),
}

impl Region {
    fn eval(&self, inside: &impl Fn(usize) -> bool) -> bool {
        match self {
            Region::Disk(i) => inside(*i),
            Region::Union(parts) => parts.iter().any(|p| p.eval(inside)),
            Region::Intersection(parts) => parts.iter().all(|p| p.eval(inside)),
            Region::Difference(a, b) => a.eval(inside) && !b.eval(inside),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// The table lies on the centre side of the arc.
    Focusing,
    /// The table lies outside the arc's disk.
    Dispersing,
}

/// A boundary arc, traversed from `angle_start` to `angle_end` (polar angles
/// about `center`). Focusing arcs run counterclockwise about their centre,
/// dispersing ones clockwise, so the table is always on the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSegment {
    pub center: Vec2,
    pub radius: f64,
    pub angle_start: f64,
    pub angle_end: f64,
    pub orientation: Orientation,
    /// Index of the generating disk.
    pub circle: usize,
}

impl ArcSegment {
    pub fn sweep(&self) -> f64 {
        self.angle_end - self.angle_start
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep().abs()
    }

    pub fn is_full_circle(&self) -> bool {
        (self.sweep().abs() - TAU).abs() < 1e-12
    }

    fn sign(&self) -> f64 {
        match self.orientation {
            Orientation::Focusing => 1.0,
            Orientation::Dispersing => -1.0,
        }
    }

    pub fn curvature(&self) -> f64 {
        self.sign() / self.radius
    }

    fn polar(&self, u: f64) -> f64 {
        self.angle_start + self.sign() * u / self.radius
    }

    /// Point at arc-length `u` from the start of the arc.
    pub fn point_at(&self, u: f64) -> Vec2 {
        self.center + Vec2::from_angle(self.polar(u)) * self.radius
    }

    /// Unit tangent in the direction of traversal.
    pub fn tangent_at(&self, u: f64) -> Vec2 {
        Vec2::from_angle(self.polar(u)).perp() * self.sign()
    }

    pub fn start_point(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end_point(&self) -> Vec2 {
        self.point_at(self.length())
    }

    /// Signed arc-length parameter of a point on (or near) the arc's circle.
    ///
    /// The result lies in a window of width `2π r` centred on the arc, so
    /// points just before the start come back slightly negative.
    pub fn local_param(&self, q: Vec2) -> f64 {
        let psi = (q - self.center).angle();
        let mut delta = (self.sign() * (psi - self.angle_start)).rem_euclid(TAU);
        if !self.is_full_circle() && delta > PI + 0.5 * self.sweep().abs() {
            delta -= TAU;
        }
        delta * self.radius
    }
}

/// Which arc to use when an arc-length value sits exactly on a corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The arc ending at the corner.
    Before,
    /// The arc starting at the corner.
    After,
}

/// Local frame and signed curvature at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vec2,
    pub tangent: Vec2,
    pub curvature: f64,
    pub arc: usize,
}

impl BoundaryPoint {
    /// Inward unit normal.
    pub fn normal(&self) -> Vec2 {
        self.tangent.perp()
    }
}

/// An immutable billiard table with an arc-length parametrized boundary.
#[derive(Debug, Clone)]
pub struct BilliardTable {
    arcs: Vec<ArcSegment>,
    starts: Vec<f64>,
    total_length: f64,
    corners: Vec<f64>,
    disks: Vec<Disk>,
    region: Region,
    spec: TableSpec,
    scale: f64,
}

impl BilliardTable {
    pub fn arcs(&self) -> &[ArcSegment] {
        &self.arcs
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arc-length positions of the corners, sorted; `corners()[0] == 0`.
    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn corner_points(&self) -> Vec<Vec2> {
        self.corners.iter().map(|&s| self.eval_side(s, Side::After).unwrap().point).collect()
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    /// Length unit of the table relative to the parameter frame.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    /// Arc-length at which arc `i` starts.
    pub fn arc_start(&self, i: usize) -> f64 {
        self.starts[i]
    }

    /// Reduces an arc-length value into `[0, |∂Q|)`.
    pub fn wrap_s(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.total_length);
        if w >= self.total_length {
            0.0
        } else {
            w
        }
    }

    /// Signed shortest difference `a - b` on the boundary circle.
    pub fn s_difference(&self, a: f64, b: f64) -> f64 {
        let l = self.total_length;
        let d = (a - b).rem_euclid(l);
        if d > 0.5 * l {
            d - l
        } else {
            d
        }
    }

    /// Distance from `s` to the nearest corner, along the boundary.
    pub fn corner_distance(&self, s: f64) -> f64 {
        self.corners
            .iter()
            .map(|&c| self.s_difference(s, c).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Strict interior test.
    pub fn contains(&self, p: Vec2) -> bool {
        let p = p * (1.0 / self.scale);
        self.region.eval(&|i| self.disks[i].contains(p))
    }

    /// Arc index and local parameter of `s`, taking the arc that starts at a
    /// corner.
    pub fn locate(&self, s: f64) -> Result<(usize, f64)> {
        self.locate_side(s, Side::After)
    }

    pub fn locate_side(&self, s: f64, side: Side) -> Result<(usize, f64)> {
        if !(s.is_finite() && s >= 0.0 && s < self.total_length) {
            return Err(Error::OutOfRange {
                s,
                length: self.total_length,
            });
        }
        let mut i = match self.starts.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let mut u = s - self.starts[i];
        if side == Side::Before && u == 0.0 && !self.corners.is_empty() {
            i = (i + self.arcs.len() - 1) % self.arcs.len();
            u = self.arcs[i].length();
        }
        Ok((i, u))
    }

    /// Boundary frame at arc-length `s`.
    pub fn eval(&self, s: f64) -> Result<BoundaryPoint> {
        self.eval_side(s, Side::After)
    }

    pub fn eval_side(&self, s: f64, side: Side) -> Result<BoundaryPoint> {
        let (i, u) = self.locate_side(s, side)?;
        Ok(self.eval_arc(i, u))
    }

    pub fn eval_arc(&self, i: usize, u: f64) -> BoundaryPoint {
        let arc = &self.arcs[i];
        BoundaryPoint {
            point: arc.point_at(u),
            tangent: arc.tangent_at(u),
            curvature: arc.curvature(),
            arc: i,
        }
    }

    /// Arc-length of a boundary point given on arc `i`.
    pub fn s_of_point(&self, i: usize, q: Vec2) -> f64 {
        let u = self.arcs[i].local_param(q).clamp(0.0, self.arcs[i].length());
        self.wrap_s(self.starts[i] + u)
    }

    /// Finds the boundary arc-length of a point lying on the boundary.
    pub fn locate_point(&self, q: Vec2) -> Option<f64> {
        self.arcs.iter().enumerate().find_map(|(i, arc)| {
            let on_circle = ((q - arc.center).norm() - arc.radius).abs() < 1e-9 * arc.radius.max(1.0);
            let u = arc.local_param(q);
            (on_circle && u >= -1e-12 && u <= arc.length() + 1e-12).then(|| self.s_of_point(i, q))
        })
    }

    /// Closed polyline tracing the boundary, `per_arc` segments per arc.
    pub fn outline(&self, per_arc: usize) -> Vec<Vec2> {
        let per_arc = per_arc.max(1);
        let mut pts = Vec::with_capacity(self.arcs.len() * per_arc + 1);
        for arc in &self.arcs {
            for k in 0..per_arc {
                pts.push(arc.point_at(arc.length() * k as f64 / per_arc as f64));
            }
        }
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
        pts
    }
}

/// Builds the table described by `spec`.
pub fn build_table(spec: &TableSpec) -> Result<BilliardTable> {
    build_scaled(spec, 1.0)
}

/// Builds `spec` with every length multiplied by `scale`.
pub fn build_scaled(spec: &TableSpec, scale: f64) -> Result<BilliardTable> {
    spec.validate()?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidSpec(format!("scale must be positive, got {scale}")));
    }
    let (disks, region) = spec.disks_and_region();
    let arcs = arrange(&disks, &region)?;
    let expected = spec.expected_corners();
    let arc_count_ok = if expected == 0 { arcs.len() == 1 } else { arcs.len() == expected };
    if !arc_count_ok {
        return Err(Error::InvalidSpec(format!(
            "{} with R={}, B={}, B1={}, n={} has {} boundary arcs, expected {}",
            spec.family,
            spec.r,
            spec.b,
            spec.b1,
            spec.n,
            arcs.len(),
            expected.max(1)
        )));
    }
    let arcs: Vec<ArcSegment> = arcs
        .into_iter()
        .map(|a| ArcSegment {
            center: a.center * scale,
            radius: a.radius * scale,
            ..a
        })
        .collect();
    let mut starts = Vec::with_capacity(arcs.len());
    let mut acc = 0.0;
    for arc in &arcs {
        starts.push(acc);
        acc += arc.length();
    }
    let corners = if expected == 0 { Vec::new() } else { starts.clone() };
    Ok(BilliardTable {
        arcs,
        starts,
        total_length: acc,
        corners,
        disks,
        region,
        spec: *spec,
        scale,
    })
}

fn circle_intersections(a: &Disk, b: &Disk) -> Option<(Vec2, Vec2)> {
    let d = b.center - a.center;
    let dist = d.norm();
    if dist == 0.0 || dist >= a.radius + b.radius || dist <= (a.radius - b.radius).abs() {
        return None;
    }
    let along = (a.radius * a.radius - b.radius * b.radius + dist * dist) / (2.0 * dist);
    let h = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let e = d * (1.0 / dist);
    let base = a.center + e * along;
    Some((base + e.perp() * h, base - e.perp() * h))
}

struct Candidate {
    arc: ArcSegment,
    from: Option<usize>,
    to: Option<usize>,
}

/// Extracts the oriented boundary loop of `region`, starting at the corner
/// with the smallest `y` (then smallest `x`).
fn arrange(disks: &[Disk], region: &Region) -> Result<Vec<ArcSegment>> {
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut on_circle: Vec<Vec<(f64, usize)>> = vec![Vec::new(); disks.len()];
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            if let Some((p, q)) = circle_intersections(&disks[i], &disks[j]) {
                for v in [p, q] {
                    let id = vertices.len();
                    vertices.push(v);
                    on_circle[i].push((wrap_tau((v - disks[i].center).angle()), id));
                    on_circle[j].push((wrap_tau((v - disks[j].center).angle()), id));
                }
            }
        }
    }

    let mut kept: Vec<Candidate> = Vec::new();
    for (i, disk) in disks.iter().enumerate() {
        let mut verts = on_circle[i].clone();
        verts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let pieces: Vec<(f64, f64, Option<usize>, Option<usize>)> = if verts.is_empty() {
            vec![(0.0, TAU, None, None)]
        } else {
            (0..verts.len())
                .map(|k| {
                    let (a0, v0) = verts[k];
                    let (mut a1, v1) = verts[(k + 1) % verts.len()];
                    if k + 1 == verts.len() {
                        a1 += TAU;
                    }
                    (a0, a1, Some(v0), Some(v1))
                })
                .collect()
        };
        for (a0, a1, v0, v1) in pieces {
            if a1 - a0 <= 1e-14 {
                continue;
            }
            let mid = disk.center + Vec2::from_angle(0.5 * (a0 + a1)) * disk.radius;
            let member = |own: bool| {
                region.eval(&|j| if j == i { own } else { disks[j].contains(mid) })
            };
            let (inside, outside) = (member(true), member(false));
            if inside == outside {
                continue;
            }
            let arc = if inside {
                Candidate {
                    arc: ArcSegment {
                        center: disk.center,
                        radius: disk.radius,
                        angle_start: a0,
                        angle_end: a1,
                        orientation: Orientation::Focusing,
                        circle: i,
                    },
                    from: v0,
                    to: v1,
                }
            } else {
                Candidate {
                    arc: ArcSegment {
                        center: disk.center,
                        radius: disk.radius,
                        angle_start: a1,
                        angle_end: a0,
                        orientation: Orientation::Dispersing,
                        circle: i,
                    },
                    from: v1,
                    to: v0,
                }
            };
            kept.push(arc);
        }
    }

    if kept.is_empty() {
        return Err(Error::InvalidSpec("region has no boundary".into()));
    }
    if kept.iter().any(|c| c.from.is_none()) {
        if kept.len() == 1 {
            return Ok(vec![kept[0].arc]);
        }
        return Err(Error::InvalidSpec("boundary is not a single closed curve".into()));
    }

    let mut by_start: HashMap<usize, usize> = HashMap::new();
    for (k, c) in kept.iter().enumerate() {
        if by_start.insert(c.from.unwrap(), k).is_some() {
            return Err(Error::InvalidSpec("boundary touches itself".into()));
        }
    }
    let mut chain = vec![0usize];
    let mut used = vec![false; kept.len()];
    used[0] = true;
    loop {
        let last = &kept[*chain.last().unwrap()];
        let next = *by_start
            .get(&last.to.unwrap())
            .ok_or_else(|| Error::InvalidSpec("boundary is not closed".into()))?;
        if next == chain[0] {
            break;
        }
        if used[next] {
            return Err(Error::InvalidSpec("boundary is not a simple loop".into()));
        }
        used[next] = true;
        chain.push(next);
    }
    if chain.len() != kept.len() {
        return Err(Error::InvalidSpec(
            "boundary has several components (table is not simply connected)".into(),
        ));
    }

    // Consecutive pieces of one circle meet smoothly: merge them.
    let mut merged: Vec<(ArcSegment, usize)> = Vec::new();
    for &k in &chain {
        let c = &kept[k];
        match merged.last_mut() {
            Some((prev, _)) if prev.circle == c.arc.circle && prev.orientation == c.arc.orientation => {
                prev.angle_end += c.arc.angle_end - c.arc.angle_start;
            }
            _ => merged.push((c.arc, c.from.unwrap())),
        }
    }
    if merged.len() > 1 {
        let (first, _) = merged[0];
        let (last, _) = *merged.last().unwrap();
        if first.circle == last.circle && first.orientation == last.orientation {
            let (mut tail, v) = merged.pop().unwrap();
            tail.angle_end += first.angle_end - first.angle_start;
            merged[0] = (tail, v);
        }
    }
    if merged.len() == 1 {
        // Smooth closed curve made of one circle.
        let (arc, _) = merged[0];
        return Ok(vec![ArcSegment {
            angle_start: 0.0,
            angle_end: arc.sign() * TAU,
            ..arc
        }]);
    }

    let anchor = (0..merged.len())
        .min_by(|&a, &b| {
            let (pa, pb) = (vertices[merged[a].1], vertices[merged[b].1]);
            (pa.y, pa.x).partial_cmp(&(pb.y, pb.x)).unwrap()
        })
        .unwrap();
    merged.rotate_left(anchor);
    let arcs: Vec<ArcSegment> = merged.into_iter().map(|(a, _)| a).collect();
    for (k, arc) in arcs.iter().enumerate() {
        let next = &arcs[(k + 1) % arcs.len()];
        if arc.end_point().distance(next.start_point()) > ENDPOINT_TOL {
            return Err(Error::InvalidSpec("arc endpoints do not match".into()));
        }
        if arc.length() <= 1e-14 {
            return Err(Error::InvalidSpec("zero-length boundary arc".into()));
        }
    }
    Ok(arcs)
}

/// Largest `B1` for which an umbrella spec stays a single simply connected
/// table with the umbrella's corner structure. Found by bisection on
/// [`build_table`] validity over `[0, 2]`.
pub fn max_offset(spec: &TableSpec) -> Result<f64> {
    if !spec.family.is_umbrella() {
        return Err(Error::InvalidSpec(format!(
            "max_offset needs an umbrella family, got {}",
            spec.family
        )));
    }
    build_table(&spec.base())?;
    let valid = |b1: f64| build_table(&spec.with_b1(b1)).is_ok();
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    if !valid(1e-9) {
        return Err(Error::InvalidSpec("no positive B1 gives a valid umbrella table".into()));
    }
    for _ in 0..MAX_OFFSET_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if valid(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Signed tangent angles of the two arcs of a two-arc table at its left
/// vertex, with the vertices on a horizontal line.
///
/// Angles are measured counterclockwise from the positive horizontal axis.
/// The fundamental domain is `θ1 ≤ θ2`, `θ1 + θ2 ≥ 0`, `|θ| < π`; the four
/// relabel/reflection images of a pair are reduced into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPair {
    pub theta1: f64,
    pub theta2: f64,
}

impl ThetaPair {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self { theta1, theta2 }
    }

    /// Representative in the fundamental triangle.
    pub fn reduced(self) -> ThetaPair {
        let (a, b) = (self.theta1, self.theta2);
        let tol = 1e-13;
        [(a, b), (b, a), (-b, -a), (-a, -b)]
            .into_iter()
            .find(|&(x, y)| x <= y + tol && x + y >= -tol)
            .map(|(x, y)| ThetaPair::new(x, y))
            .unwrap_or(self)
    }

    /// Interior angle of the table at each vertex.
    pub fn corner_angle(&self) -> f64 {
        self.theta2 - self.theta1
    }
}

fn chord_geometry(spec: &TableSpec) -> Result<(f64, f64)> {
    let (r, b) = (spec.r, spec.b);
    if b >= r + 1.0 || b <= (r - 1.0).abs() {
        return Err(Error::InvalidSpec(format!(
            "circles with R={r}, B={b} do not cross"
        )));
    }
    let x0 = (1.0 + b * b - r * r) / (2.0 * b);
    Ok((x0, (1.0 - x0 * x0).sqrt()))
}

/// `θ` of an arc whose circle centre sits `offset` beyond the chord on the
/// bulge side; `h` is the half-chord.
fn arc_angle(offset: f64, h: f64) -> f64 {
    FRAC_PI_2 + offset.atan2(h)
}

/// Tangent-angle pair of a two-arc table.
pub fn theta_of_table(spec: &TableSpec) -> Result<ThetaPair> {
    spec.validate()?;
    if spec.b1 > 0.0 {
        return Err(Error::InvalidSpec(
            "angle parameters are defined for B1 = 0; pass the base spec".into(),
        ));
    }
    let (x0, h) = chord_geometry(spec)?;
    let b = spec.b;
    // Rotating the frame a quarter turn clockwise puts the chord horizontal;
    // arcs bulging towards -x then bulge upwards (positive angle).
    let (unit, other) = match spec.family.base() {
        Family::Lemon => (-arc_angle(-x0, h), arc_angle(x0 - b, h)),
        Family::Moon => (arc_angle(x0, h), arc_angle(x0 - b, h)),
        Family::Flower => (arc_angle(x0, h), -arc_angle(b - x0, h)),
        f => {
            return Err(Error::InvalidSpec(format!(
                "{f} is not a two-arc family"
            )))
        }
    };
    Ok(ThetaPair::new(unit, other).reduced())
}

/// Canonical spec (smaller circle or focusing circle of unit radius) of the
/// two-arc table with tangent angles `pair`.
pub fn table_of_theta(pair: ThetaPair) -> Result<TableSpec> {
    let ThetaPair { theta1: a, theta2: b } = pair.reduced();
    let eps = 1e-12;
    if !(a.is_finite() && b.is_finite()) || a.abs() >= PI || b.abs() >= PI {
        return Err(Error::InvalidSpec("angles must lie in (-π, π)".into()));
    }
    if a.abs() < eps || b.abs() < eps {
        return Err(Error::InvalidSpec("straight arcs (zero tangent angle) are not circular".into()));
    }
    if b - a < eps || ((b - a) - PI).abs() < eps {
        return Err(Error::InvalidSpec("arcs coincide or close into a single circle".into()));
    }
    if a > 0.0 {
        // Moon: the upper arc (θ2) is the focusing unit circle.
        return Ok(TableSpec::moon(b.sin() / a.sin(), (b - a).sin() / a.sin()));
    }
    // Half-chord 1: radii 1/|sin θ|, centres at -cot θ on the vertical axis.
    let (ra, rb) = (1.0 / a.sin().abs(), 1.0 / b.sin().abs());
    let dist = (1.0 / b.tan() - 1.0 / a.tan()).abs();
    let unit = ra.min(rb);
    let family = if b - a < PI { Family::Lemon } else { Family::Flower };
    Ok(TableSpec::new(family, ra.max(rb) / unit, dist / unit, 0.0))
}

/// Builds the two-arc table of `pair`, scaled so the `θ1` arc has unit radius.
pub fn build_theta_table(pair: ThetaPair) -> Result<BilliardTable> {
    let pair = pair.reduced();
    let spec = table_of_theta(pair)?;
    let (_, h) = chord_geometry(&spec)?;
    build_scaled(&spec, pair.theta1.sin().abs() / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lemon_unit_unit_corners() {
        let t = build_table(&TableSpec::lemon(1.0, 1.0)).unwrap();
        assert_eq!(t.arcs().len(), 2);
        let pts = t.corner_points();
        assert_eq!(pts.len(), 2);
        let h = 3f64.sqrt() / 2.0;
        assert_abs_diff_eq!(pts[0].x, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pts[0].y, -h, epsilon = 1e-14);
        assert_abs_diff_eq!(pts[1].x, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pts[1].y, h, epsilon = 1e-14);
        assert_eq!(t.corners()[0], 0.0);
        // two arcs of angle 2π/3 each
        assert_abs_diff_eq!(t.total_length(), 4.0 * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_lemon_is_rejected() {
        assert!(matches!(
            build_table(&TableSpec::lemon(1.0, 2.5)),
            Err(Error::InvalidSpec(_))
        ));
        // nested disks
        assert!(build_table(&TableSpec::lemon(2.0, 0.5)).is_err());
        assert!(build_table(&TableSpec::moon(2.0, 0.5)).is_err());
    }

    #[test]
    fn fig6_moon_builds() {
        let t = build_table(&TableSpec::moon(1.2, 0.21)).unwrap();
        assert_eq!(t.corners().len(), 2);
        let kinds: Vec<_> = t.arcs().iter().map(|a| a.orientation).collect();
        assert!(kinds.contains(&Orientation::Focusing) && kinds.contains(&Orientation::Dispersing));
    }

    #[test]
    fn unit_circle_chart() {
        let t = build_table(&TableSpec::circle(1.0)).unwrap();
        assert!(t.corners().is_empty());
        let p = t.eval(0.0).unwrap();
        assert_abs_diff_eq!(p.point.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.tangent.y, 1.0, epsilon = 1e-15);
        assert_eq!(p.curvature, 1.0);
        let q = t.eval(PI).unwrap();
        assert_abs_diff_eq!(q.point.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.tangent.y, -1.0, epsilon = 1e-15);
        assert!(matches!(t.eval(TAU), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.eval(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn moon_curvature_flips_at_corners() {
        let t = build_table(&TableSpec::moon(1.2, 1.5)).unwrap();
        for &c in t.corners() {
            let before = t.eval_side(c, Side::Before).unwrap().curvature;
            let after = t.eval_side(c, Side::After).unwrap().curvature;
            assert!(before * after < 0.0);
            let mut ks = [before, after];
            ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_abs_diff_eq!(ks[0], -1.0 / 1.2, epsilon = 1e-15);
            assert_abs_diff_eq!(ks[1], 1.0, epsilon = 1e-15);
        }
        // The dispersing arc's interior side is outside the removed disk.
        for arc in t.arcs() {
            let u = 0.5 * arc.length();
            let inward = arc.tangent_at(u).perp();
            let probe = arc.point_at(u) + inward * 1e-6;
            assert!(t.contains(probe));
            let toward_center = (arc.center - arc.point_at(u)).dot(inward) > 0.0;
            assert_eq!(toward_center, arc.orientation == Orientation::Focusing);
        }
    }

    #[test]
    fn umbrella_families_have_three_corners() {
        for spec in [
            TableSpec::umbrella_lemon(1.0, 1.35, 0.1),
            TableSpec::moon1(1.2, 1.3, 0.2),
            TableSpec::moon2(1.2, 1.3, 1.8),
            TableSpec::umbrella_lemon(1.3, 1.5, 1.2),
            TableSpec::moon1(1.0, 1.4, 1.0),
            TableSpec::moon2(1.3, 1.3, 1.6),
        ] {
            let t = build_table(&spec).unwrap_or_else(|e| panic!("{spec:?}: {e}"));
            assert_eq!(t.corners().len(), 3, "{spec:?}");
        }
    }

    #[test]
    fn n_umbrella_corners() {
        let t = build_table(&TableSpec::umbrella_lemon(1.0, 1.2, 0.3).with_copies(4)).unwrap();
        assert_eq!(t.corners().len(), 5);
        assert!(matches!(
            build_table(&TableSpec::umbrella_lemon(1.0, 1.2, 0.3).with_copies(1)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn max_offset_examples() {
        let lemon = max_offset(&TableSpec::umbrella_lemon(1.0, 1.0, 0.0)).unwrap();
        assert!(lemon > 0.0 && lemon <= 2.0);
        assert!(max_offset(&TableSpec::moon1(1.2, 1.3, 0.0)).unwrap() >= 0.2);
        assert!(max_offset(&TableSpec::moon2(1.2, 1.3, 0.0)).unwrap() >= 1.8);
        assert!(max_offset(&TableSpec::lemon(1.0, 1.0)).is_err());
    }

    #[test]
    fn symmetric_lemon_angles() {
        let p = theta_of_table(&TableSpec::lemon(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p.theta1, -PI / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.theta2, PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn theta_rejects_umbrella_offset() {
        assert!(theta_of_table(&TableSpec::umbrella_lemon(1.0, 1.0, 0.1)).is_err());
        assert!(theta_of_table(&TableSpec::umbrella_lemon(1.0, 1.0, 0.0)).is_ok());
    }

    #[test]
    fn degenerate_pairs_rejected() {
        assert!(table_of_theta(ThetaPair::new(0.5, 0.5)).is_err());
        assert!(table_of_theta(ThetaPair::new(0.0, 1.0)).is_err());
        assert!(table_of_theta(ThetaPair::new(-1.0, PI - 1.0)).is_err());
    }

    #[test]
    fn flower_region_gives_flower() {
        let spec = table_of_theta(ThetaPair::new(-2.5, 2.7)).unwrap();
        assert_eq!(spec.family, Family::Flower);
        let t = build_table(&spec).unwrap();
        assert_eq!(t.corners().len(), 2);
    }

    #[test]
    fn spec_json_record() {
        let spec = TableSpec::moon1(1.2, 1.3, 0.2);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"moon1","R":1.2,"B":1.3,"B1":0.2,"n":2}"#);
        let back: TableSpec = serde_json::from_str(r#"{"family":"lemon","R":1,"B":1}"#).unwrap();
        assert_eq!(back, TableSpec::lemon(1.0, 1.0));
    }
}
