//! Plain-text output formats. Tables of numbers go to CSV headed by a
//! `# config:` comment; rasters go to ASCII PGM.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce identical bytes.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::json;

use crate::chaos::{BoundaryEstimate, IslandReport, LyapunovCurve, SeedVerdict};
use crate::dynamics::{Orbit, PhasePoint};
use crate::geometry::Vec2;
use crate::periodic::PeriodicOrbit;
use crate::tables::BilliardTable;

/// The `# config: {...}` line that heads every CSV file.
pub fn config_comment<C: Serialize + ?Sized>(config: &C) -> String {
    let json = serde_json::to_string(config).unwrap_or_else(|_| "null".into());
    format!("# config: {json}")
}

/// CSV writer that emits the config comment and header on creation.
pub struct CsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvWriter<W> {
    pub fn new<C: Serialize + ?Sized>(mut out: W, config: &C, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", config_comment(config))?;
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        Ok(self.inner.write_record(fields)?)
    }

    pub fn finish(self) -> io::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

/// One row per orbit point: `step,s,theta,arc_index`. With `normalized`
/// the coordinates are `s / |∂Q|` and `θ / π`.
pub fn write_orbit_csv<W: Write, C: Serialize + ?Sized>(
    out: W,
    config: &C,
    table: &BilliardTable,
    orbit: &Orbit,
    normalized: bool,
) -> io::Result<W> {
    let mut csv = CsvWriter::new(out, config, &["step", "s", "theta", "arc_index"])?;
    for (step, p) in orbit.points.iter().enumerate() {
        let (s, theta) = if normalized { p.normalized(table) } else { (p.s, p.theta) };
        csv.row(&[step.to_string(), s.to_string(), theta.to_string(), orbit.arcs[step].to_string()])?;
    }
    csv.finish()
}

/// Phase portrait rows `seed,step,s,theta`, or `seed,step,s_norm,theta_norm`
/// when normalized.
pub fn write_portrait_csv<W: Write, C: Serialize + ?Sized>(
    out: W,
    config: &C,
    table: &BilliardTable,
    orbits: &[Orbit],
    normalized: bool,
) -> io::Result<W> {
    let header = if normalized {
        ["seed", "step", "s_norm", "theta_norm"]
    } else {
        ["seed", "step", "s", "theta"]
    };
    let mut csv = CsvWriter::new(out, config, &header)?;
    for (seed, orbit) in orbits.iter().enumerate() {
        for (step, p) in orbit.points.iter().enumerate() {
            let (s, theta) = if normalized { p.normalized(table) } else { (p.s, p.theta) };
            csv.row(&[seed.to_string(), step.to_string(), s.to_string(), theta.to_string()])?;
        }
    }
    csv.finish()
}

pub fn write_curve_csv<W: Write, C: Serialize + ?Sized>(out: W, config: &C, curve: &LyapunovCurve) -> io::Result<W> {
    let mut csv = CsvWriter::new(out, config, &["B", "B1", "lambda_bar", "skipped_seeds"])?;
    for p in &curve.points {
        csv.row(&[
            p.b.to_string(),
            p.b1.to_string(),
            p.lambda_bar.to_string(),
            p.skipped_seeds.to_string(),
        ])?;
    }
    csv.finish()
}

pub fn write_boundary_csv<W: Write, C: Serialize + ?Sized>(
    out: W,
    config: &C,
    estimates: &[BoundaryEstimate],
) -> io::Result<W> {
    let mut csv = CsvWriter::new(out, config, &["theta2", "theta1_low", "theta1_high", "B1"])?;
    for e in estimates {
        csv.row(&[
            e.theta2.to_string(),
            e.theta1_low.to_string(),
            e.theta1_high.to_string(),
            e.b1.to_string(),
        ])?;
    }
    csv.finish()
}

pub fn write_polyline_csv<W: Write, C: Serialize + ?Sized>(out: W, config: &C, points: &[Vec2]) -> io::Result<W> {
    let mut csv = CsvWriter::new(out, config, &["x", "y"])?;
    for p in points {
        csv.row(&[p.x.to_string(), p.y.to_string()])?;
    }
    csv.finish()
}

/// `{period, trace, class, cycle, residual}`.
pub fn periodic_json(orbit: &PeriodicOrbit) -> serde_json::Value {
    let cycle: Vec<[f64; 2]> = orbit.cycle.iter().map(|p| [p.s, p.theta]).collect();
    json!({
        "period": orbit.period,
        "trace": orbit.trace,
        "class": orbit.classification,
        "cycle": cycle,
        "residual": orbit.residual,
    })
}

/// ASCII PGM (`P2`); `pixels` is row-major, top row first.
pub fn write_pgm<W: Write>(mut out: W, width: usize, height: usize, pixels: &[u16], maxval: u16) -> io::Result<W> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match raster size");
    writeln!(out, "P2")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "{maxval}")?;
    for row in pixels.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(out)
}

/// Island verdict raster: `s` to the right, `θ` upward; regular seeds are
/// white, chaotic black, terminated mid-grey.
pub fn write_island_pgm<W: Write>(out: W, report: &IslandReport) -> io::Result<W> {
    let k = report.grid;
    let mut pixels = vec![0u16; k * k];
    for i in 0..k {
        for j in 0..k {
            pixels[(k - 1 - j) * k + i] = match report.verdict(i, j) {
                SeedVerdict::Regular => 255,
                SeedVerdict::Chaotic => 0,
                SeedVerdict::Terminated => 128,
            };
        }
    }
    write_pgm(out, k, k, &pixels, 255)
}

/// Visit-count raster of phase points over normalized `(s, θ)`, darker
/// where denser.
pub fn write_density_pgm<W: Write>(
    out: W,
    table: &BilliardTable,
    points: impl IntoIterator<Item = PhasePoint>,
    width: usize,
    height: usize,
) -> io::Result<W> {
    let mut counts = vec![0u32; width * height];
    for p in points {
        let (sn, tn) = p.normalized(table);
        let col = ((sn * width as f64) as usize).min(width - 1);
        let row = height - 1 - ((tn * height as f64) as usize).min(height - 1);
        counts[row * width + col] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let pixels: Vec<u16> = counts
        .iter()
        .map(|&c| if c == 0 { 255 } else { (200.0 * (1.0 - (c as f64).ln_1p() / max.ln_1p())) as u16 })
        .collect();
    write_pgm(out, width, height, &pixels, 255)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_config_and_header() {
        let cfg = json!({"family": "lemon", "R": 1.0});
        let out = write_polyline_csv(Vec::new(), &cfg, &[Vec2::new(0.5, -1.0)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"# config: {"R":1.0,"family":"lemon"}"#);
        assert_eq!(lines[1], "x,y");
        assert_eq!(lines[2], "0.5,-1");
    }

    #[test]
    fn pgm_layout() {
        let out = write_pgm(Vec::new(), 2, 2, &[0, 255, 255, 0], 255).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "P2\n2 2\n255\n0 255\n255 0\n");
    }
}
