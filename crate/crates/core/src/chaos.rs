//! Lyapunov indicators and the search for elliptic islands.
//!
//! Separations are measured in normalized phase coordinates
//! `(s / |∂Q|, θ / π)` with the `s` difference taken around the boundary,
//! so tables of different perimeter are comparable.
//!
//! All grid computations run data-parallel but collect per-seed results by
//! index and reduce them serially, so results do not depend on the number of
//! worker threads.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{billiard_map, PhasePoint, CORNER_TOL};
use crate::error::{Error, Result};
use crate::tables::{build_table, table_of_theta, BilliardTable, Family, TableSpec, ThetaPair};

/// Shift applied to grid seeds that sit on a singularity.
pub const SINGULAR_SHIFT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Initial separation `‖η₀‖` in normalized coordinates.
    pub dx: f64,
    /// Iterations per indicator.
    pub n: usize,
    /// Side of the seed grid.
    pub k: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            dx: 1e-6,
            n: 10,
            k: 40,
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(Error::InvalidSpec(format!("dx must be positive, got {}", self.dx)));
        }
        if self.n < 1 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidSpec(format!("k must be at least 2, got {}", self.k)));
        }
        Ok(())
    }
}

/// Distance between two phase points in normalized coordinates.
pub fn phase_distance(table: &BilliardTable, a: PhasePoint, b: PhasePoint) -> f64 {
    let ds = table.s_difference(a.s, b.s) / table.total_length();
    let dt = (a.theta - b.theta) / PI;
    ds.hypot(dt)
}

/// Companion point displaced by `dx` along `+s` (normalized).
fn companion(table: &BilliardTable, x: PhasePoint, dx: f64) -> PhasePoint {
    PhasePoint::new(table.wrap_s(x.s + dx * table.total_length()), x.theta)
}

/// A finite-time Lyapunov indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    /// `(1/n) ln(‖η_n‖ / ‖η₀‖)` over the completed steps.
    pub value: f64,
    pub steps: usize,
    /// False when either orbit stopped at a singularity before `n` steps.
    pub complete: bool,
}

/// Two-orbit finite-time Lyapunov indicator of `x`.
pub fn lyapunov_indicator(table: &BilliardTable, x: PhasePoint, cfg: &LyapunovConfig) -> Result<Indicator> {
    cfg.validate()?;
    let mut a = x;
    let mut b = companion(table, x, cfg.dx);
    let d0 = phase_distance(table, a, b);
    for step in 0..cfg.n {
        match (billiard_map(table, a), billiard_map(table, b)) {
            (Ok(ea), Ok(eb)) => {
                a = ea.next;
                b = eb.next;
            }
            _ if step == 0 => return Err(Error::DegenerateSeed),
            _ => {
                return Ok(Indicator {
                    value: log_ratio(phase_distance(table, a, b), d0) / step as f64,
                    steps: step,
                    complete: false,
                })
            }
        }
    }
    Ok(Indicator {
        value: log_ratio(phase_distance(table, a, b), d0) / cfg.n as f64,
        steps: cfg.n,
        complete: true,
    })
}

fn log_ratio(d: f64, d0: f64) -> f64 {
    (d.max(f64::MIN_POSITIVE) / d0).ln()
}

/// How grid indicators are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridWeighting {
    /// Plain mean over the `k × k` grid.
    #[default]
    Uniform,
    /// Mean weighted by the invariant density `sin θ`.
    Measure,
}

/// Cell-centred seed `(i, j)` of a `k × k` grid in `(s, θ)`.
pub fn grid_point(table: &BilliardTable, k: usize, i: usize, j: usize) -> PhasePoint {
    let s = table.total_length() * (i as f64 + 0.5) / k as f64;
    let theta = PI * (j as f64 + 0.5) / k as f64;
    PhasePoint::new(s, theta)
}

/// Grid seed moved off singularities: seeds on a corner, or whose first
/// flight (or their companion's) is singular, are shifted by
/// [`SINGULAR_SHIFT`] in `s`. The flag reports whether a shift happened.
pub fn regular_seed(table: &BilliardTable, x: PhasePoint, dx: f64) -> (PhasePoint, bool) {
    let singular = |p: PhasePoint| {
        table.corner_distance(p.s) < CORNER_TOL
            || billiard_map(table, p).is_err()
            || billiard_map(table, companion(table, p, dx)).is_err()
    };
    if singular(x) {
        (PhasePoint::new(table.wrap_s(x.s + SINGULAR_SHIFT), x.theta), true)
    } else {
        (x, false)
    }
}

/// Grid-averaged Lyapunov indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledLyapunov {
    pub lambda_bar: f64,
    /// Seeds entering the average.
    pub used: usize,
    /// Seeds excluded because an orbit stopped early.
    pub skipped: usize,
    /// Seeds shifted off a singularity before use.
    pub perturbed: usize,
}

/// Mean indicator over the `k × k` uniform grid of phase space.
pub fn scaled_lyapunov(table: &BilliardTable, cfg: &LyapunovConfig) -> Result<ScaledLyapunov> {
    scaled_lyapunov_weighted(table, cfg, GridWeighting::Uniform)
}

pub fn scaled_lyapunov_weighted(
    table: &BilliardTable,
    cfg: &LyapunovConfig,
    weighting: GridWeighting,
) -> Result<ScaledLyapunov> {
    grid_lyapunov(table, cfg, weighting, 0.0)
}

/// Grid average with every seed moved by `offset` in `s`.
fn grid_lyapunov(
    table: &BilliardTable,
    cfg: &LyapunovConfig,
    weighting: GridWeighting,
    offset: f64,
) -> Result<ScaledLyapunov> {
    cfg.validate()?;
    let k = cfg.k;
    let per_seed: Vec<(Option<(f64, f64)>, bool)> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let mut x = grid_point(table, k, idx / k, idx % k);
            x.s = table.wrap_s(x.s + offset);
            let (seed, shifted) = regular_seed(table, x, cfg.dx);
            let weight = match weighting {
                GridWeighting::Uniform => 1.0,
                GridWeighting::Measure => seed.theta.sin(),
            };
            let li = lyapunov_indicator(table, seed, cfg)
                .ok()
                .filter(|li| li.complete)
                .map(|li| (li.value, weight));
            (li, shifted)
        })
        .collect();
    let (mut sum, mut wsum) = (0.0, 0.0);
    let (mut used, mut skipped, mut perturbed) = (0, 0, 0);
    for (li, shifted) in &per_seed {
        perturbed += *shifted as usize;
        match li {
            Some((v, w)) => {
                sum += v * w;
                wsum += w;
                used += 1;
            }
            None => skipped += 1,
        }
    }
    Ok(ScaledLyapunov {
        lambda_bar: if wsum > 0.0 { sum / wsum } else { f64::NAN },
        used,
        skipped,
        perturbed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslandConfig {
    /// Side of the seed grid.
    pub grid: usize,
    /// Orbit length per seed.
    pub n_long: usize,
    /// Long-run indicator below which a seed may be regular.
    pub li_threshold: f64,
    /// Side of the coverage grid over normalized phase space.
    pub coverage_cells: usize,
    /// Fraction of coverage cells below which a seed may be regular.
    pub coverage_threshold: f64,
    /// Measure-weighted regular fraction above which islands are reported.
    pub detection_threshold: f64,
    /// Separation of the shadow orbit.
    pub dx: f64,
}

impl Default for IslandConfig {
    fn default() -> Self {
        Self {
            grid: 40,
            n_long: 5000,
            li_threshold: 0.05,
            coverage_cells: 100,
            coverage_threshold: 0.1,
            detection_threshold: 0.005,
            dx: 1e-6,
        }
    }
}

impl IslandConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 1 || self.coverage_cells < 1 {
            return Err(Error::InvalidSpec("grid sizes must be positive".into()));
        }
        if self.n_long < 1000 {
            return Err(Error::InvalidSpec(format!(
                "n_long must be at least 1000, got {}",
                self.n_long
            )));
        }
        if !(self.dx > 0.0 && self.li_threshold.is_finite() && self.coverage_threshold > 0.0) {
            return Err(Error::InvalidSpec("thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedVerdict {
    Regular,
    Chaotic,
    /// The orbit stopped at a singularity; excluded from the fraction.
    Terminated,
}

/// Long-run behaviour of one orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRun {
    /// Renormalized shadow-orbit Lyapunov estimate.
    pub lyapunov: f64,
    /// Fraction of coverage cells visited.
    pub coverage: f64,
    pub steps: usize,
}

/// Follows `x` for `n_long` steps with a shadow orbit that is pulled back to
/// distance `dx` after every step, and records which coverage cells the
/// orbit visits. Returns `None` when the orbit itself hits a singularity.
pub fn long_run(table: &BilliardTable, x: PhasePoint, cfg: &IslandConfig) -> Option<LongRun> {
    let cells = cfg.coverage_cells;
    let mut visited = vec![false; cells * cells];
    let mut count = 0usize;
    let mut mark = |p: PhasePoint| {
        let (sn, tn) = p.normalized(table);
        let ci = ((sn * cells as f64) as usize).min(cells - 1);
        let cj = ((tn * cells as f64) as usize).min(cells - 1);
        let slot = &mut visited[ci * cells + cj];
        if !*slot {
            *slot = true;
            count += 1;
        }
    };
    let l = table.total_length();
    let mut a = x;
    let mut b = companion(table, a, cfg.dx);
    let mut log_sum = 0.0;
    let mut counted = 0usize;
    mark(a);
    for _ in 0..cfg.n_long {
        let ea = billiard_map(table, a).ok()?;
        match billiard_map(table, b) {
            Ok(eb) => {
                let d = phase_distance(table, ea.next, eb.next);
                log_sum += log_ratio(d, cfg.dx);
                counted += 1;
                let ds = table.s_difference(eb.next.s, ea.next.s) / l;
                let dt = (eb.next.theta - ea.next.theta) / PI;
                let f = if d > 0.0 { cfg.dx / d } else { 0.0 };
                let (sn, tn) = (f * ds, f * dt);
                let theta = (ea.next.theta + tn * PI).clamp(1e-9, PI - 1e-9);
                b = if d > 0.0 {
                    PhasePoint::new(table.wrap_s(ea.next.s + sn * l), theta)
                } else {
                    companion(table, ea.next, cfg.dx)
                };
            }
            // The shadow crossed a singularity: restart it next to the orbit.
            Err(_) => b = companion(table, ea.next, cfg.dx),
        }
        a = ea.next;
        mark(a);
    }
    Some(LongRun {
        lyapunov: if counted > 0 { log_sum / counted as f64 } else { 0.0 },
        coverage: count as f64 / (cells * cells) as f64,
        steps: cfg.n_long,
    })
}

/// Per-seed verdicts and the measure-weighted regular fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandReport {
    pub regular_fraction: f64,
    pub islands_found: bool,
    pub grid: usize,
    /// Verdict of seed `(i, j)` at `cells[i * grid + j]`, `i` indexing `s`
    /// and `j` indexing `θ`.
    pub cells: Vec<SeedVerdict>,
}

impl IslandReport {
    pub fn verdict(&self, i: usize, j: usize) -> SeedVerdict {
        self.cells[i * self.grid + j]
    }

    pub fn count(&self, v: SeedVerdict) -> usize {
        self.cells.iter().filter(|&&c| c == v).count()
    }
}

/// Classifies a grid of seeds as regular or chaotic. A seed is regular when
/// its long-run Lyapunov estimate is below `li_threshold` and its orbit
/// visits less than `coverage_threshold` of the coverage cells.
pub fn island_detect(table: &BilliardTable, cfg: &IslandConfig) -> Result<IslandReport> {
    cfg.validate()?;
    let k = cfg.grid;
    let verdicts: Vec<(SeedVerdict, f64)> = (0..k * k)
        .into_par_iter()
        .map(|idx| {
            let (seed, _) = regular_seed(table, grid_point(table, k, idx / k, idx % k), cfg.dx);
            let weight = seed.theta.sin();
            let verdict = match long_run(table, seed, cfg) {
                None => SeedVerdict::Terminated,
                Some(run) if run.lyapunov < cfg.li_threshold && run.coverage < cfg.coverage_threshold => {
                    SeedVerdict::Regular
                }
                Some(_) => SeedVerdict::Chaotic,
            };
            (verdict, weight)
        })
        .collect();
    let (mut regular, mut total) = (0.0, 0.0);
    for &(v, w) in &verdicts {
        match v {
            SeedVerdict::Regular => {
                regular += w;
                total += w;
            }
            SeedVerdict::Chaotic => total += w,
            SeedVerdict::Terminated => {}
        }
    }
    let regular_fraction = if total > 0.0 { regular / total } else { 0.0 };
    Ok(IslandReport {
        regular_fraction,
        islands_found: regular_fraction > cfg.detection_threshold,
        grid: k,
        cells: verdicts.into_iter().map(|(v, _)| v).collect(),
    })
}

/// Bracket of the island/no-island transition along `θ1` at fixed `θ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub theta2: f64,
    pub theta1_low: f64,
    pub theta1_high: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
}

impl BoundaryEstimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.theta1_low + self.theta1_high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Umbrella family used when `B1 > 0` for moon-type pairs.
    pub moon_umbrella: Family,
    pub islands: IslandConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            moon_umbrella: Family::UmbrellaMoon1,
            islands: IslandConfig::default(),
        }
    }
}

/// Spec of the table at `(θ1, θ2)` deformed by `b1`: moon-type pairs become
/// `moon_umbrella`, lemon-type ones umbrella lemons.
pub fn scan_spec(theta1: f64, theta2: f64, b1: f64, moon_umbrella: Family) -> Result<TableSpec> {
    let base = table_of_theta(ThetaPair::new(theta1, theta2))?;
    if b1 == 0.0 {
        return Ok(base);
    }
    let family = match base.family {
        Family::Moon => moon_umbrella,
        Family::Lemon => Family::UmbrellaLemon,
        f => {
            return Err(Error::InvalidSpec(format!("no umbrella deformation of {f}")));
        }
    };
    Ok(TableSpec::new(family, base.r, base.b, b1))
}

/// Locates where elliptic islands disappear along `θ1 ∈ range` at fixed
/// `θ2`, by bisection on the island verdict over the lattice
/// `range.0 + i * step`. The returned bracket is one lattice step wide.
/// The verdict need not be monotone in `θ1`; when it flips more than once
/// the bracket holds one of the flips.
pub fn ergodic_boundary_scan(
    theta2: f64,
    b1: f64,
    range: (f64, f64),
    step: f64,
    cfg: &ScanConfig,
) -> Result<BoundaryEstimate> {
    let (lo, hi) = range;
    if !(step > 0.0 && hi > lo) {
        return Err(Error::InvalidSpec("scan needs step > 0 and a nonempty range".into()));
    }
    let steps = ((hi - lo) / step).round() as i64;
    if steps < 1 {
        return Err(Error::InvalidSpec("scan range is shorter than one step".into()));
    }
    let at = |i: i64| lo + i as f64 * step;
    let verdict = |i: i64| -> Result<bool> {
        let table = build_table(&scan_spec(at(i), theta2, b1, cfg.moon_umbrella)?)?;
        Ok(island_detect(&table, &cfg.islands)?.islands_found)
    };
    let v_lo = verdict(0)?;
    if verdict(steps)? == v_lo {
        return Err(Error::NoTransition);
    }
    // Bisect over a power-of-two index range, indices past the end taking the
    // end verdict. Probes are then dyadic, so halving the step replays the
    // same probes and refines inside the previous bracket.
    let (mut i_lo, mut i_hi) = (0_i64, (steps as u64).next_power_of_two() as i64);
    while i_hi - i_lo > 1 {
        let mid = (i_lo + i_hi) / 2;
        if mid < steps && verdict(mid)? == v_lo {
            i_lo = mid;
        } else {
            i_hi = mid;
        }
    }
    Ok(BoundaryEstimate {
        theta2,
        theta1_low: at(i_lo),
        theta1_high: at(i_hi),
        b1,
    })
}

/// Inclusive arithmetic range `start, start + step, …, ≤ end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidSpec("range bounds must be finite".into()));
        }
        if self.step <= 0.0 || self.end < self.start {
            return Err(Error::InvalidSpec(format!(
                "empty range {}:{}:{}",
                self.start, self.end, self.step
            )));
        }
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

impl std::str::FromStr for ParamRange {
    type Err = Error;

    /// Parses `start:end:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidSpec(format!("expected start:end:step, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        Ok(ParamRange::new(num(parts[0])?, num(parts[1])?, num(parts[2])?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    pub lambda_bar: f64,
    pub skipped_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCurve {
    pub points: Vec<CurvePoint>,
    /// `B` values whose table was invalid.
    pub invalid: Vec<f64>,
}

/// `λ̄` as a function of `B` for the family of `template` (its `R`, `B1`,
/// and copy count are kept).
pub fn lyapunov_curve(template: &TableSpec, range: &ParamRange, cfg: &LyapunovConfig) -> Result<LyapunovCurve> {
    lyapunov_curve_weighted(template, range, cfg, GridWeighting::Uniform)
}

pub fn lyapunov_curve_weighted(
    template: &TableSpec,
    range: &ParamRange,
    cfg: &LyapunovConfig,
    weighting: GridWeighting,
) -> Result<LyapunovCurve> {
    cfg.validate()?;
    let bs = range.values()?;
    let results: Vec<(f64, Option<ScaledLyapunov>)> = bs
        .par_iter()
        .map(|&b| {
            let spec = TableSpec { b, ..*template };
            let res = build_table(&spec)
                .ok()
                .and_then(|t| scaled_lyapunov_weighted(&t, cfg, weighting).ok());
            (b, res)
        })
        .collect();
    let mut curve = LyapunovCurve {
        points: Vec::new(),
        invalid: Vec::new(),
    };
    for (b, res) in results {
        match res {
            Some(sl) => curve.points.push(CurvePoint {
                b,
                b1: template.b1,
                lambda_bar: sl.lambda_bar,
                skipped_seeds: sl.skipped,
            }),
            None => curve.invalid.push(b),
        }
    }
    Ok(curve)
}
