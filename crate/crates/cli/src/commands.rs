use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use umbrella_core::chaos::{
    ergodic_boundary_scan, island_detect, lyapunov_curve_weighted, scaled_lyapunov_weighted, CurvePoint,
    LyapunovCurve, ScanConfig,
};
use umbrella_core::export::{
    periodic_json, write_boundary_csv, write_curve_csv, write_density_pgm, write_island_pgm, write_orbit_csv,
    write_polyline_csv, write_portrait_csv,
};
use umbrella_core::periodic::{axial_two_periodic, radial_orbit, split_pair};
use umbrella_core::{
    build_table, classify, iterate, max_offset, portrait, refine_periodic, theta_of_table, PeriodicOrbit,
    PhasePoint, StabilityClass, TableSpec, Termination,
};

use crate::args::*;
use crate::config::*;
use crate::seeds::SeedSpec;

/// Segments per arc in the written table outline.
const OUTLINE_SEGMENTS: usize = 64;

pub fn run(command: Command, file: Option<&Value>) -> Result<()> {
    match command {
        Command::Portrait(a) => run_portrait(&a, resolve(file, &a)?),
        Command::Classify(a) => run_classify(&a, resolve(file, &a)?),
        Command::Orbit(a) => run_orbit(&a, resolve(file, &a)?),
        Command::Lyapunov(a) => run_lyapunov(&a, resolve(file, &a)?),
        Command::Sweep(a) => run_sweep(&a, resolve(file, &a)?),
        Command::Scan(a) => run_scan(&a, resolve(file, &a)?),
        Command::Islands(a) => run_islands(&a, resolve(file, &a)?),
        Command::Validate(a) => run_validate(resolve(file, &a)?),
    }
}

/// Buffered file, or stdout when no path is given.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(out: io::Result<Box<dyn Write>>) -> Result<()> {
    out?.flush()?;
    Ok(())
}

fn print_json(path: Option<&PathBuf>, value: &Value) -> Result<()> {
    let mut out = sink(path.map(PathBuf::as_path))?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    finish(Ok(out))
}

fn run_portrait(args: &PortraitArgs, cfg: PortraitConfig) -> Result<()> {
    let seeds: SeedSpec = cfg.seeds.parse()?;
    if cfg.steps == 0 || cfg.pgm_size == 0 {
        return Err(bad("steps and pgm_size must be positive"));
    }
    let (_, table) = cfg.table.build()?;
    let points = seeds.points(&table)?;
    let orbits = portrait(&table, &points, cfg.steps);
    for (i, orbit) in orbits.iter().enumerate() {
        if orbit.terminated != Termination::Completed {
            eprintln!("seed {i}: {:?} after {} steps", orbit.terminated, orbit.steps());
        }
    }
    let header = describe("portrait", &cfg);
    finish(write_portrait_csv(sink(args.output.as_deref())?, &header, &table, &orbits, true))?;
    if let Some(path) = &args.pgm {
        let all = orbits.iter().flat_map(|o| o.points.iter().copied());
        finish(write_density_pgm(sink(Some(path))?, &table, all, cfg.pgm_size, cfg.pgm_size))?;
    }
    if let Some(path) = &args.outline {
        finish(write_polyline_csv(sink(Some(path))?, &header, &table.outline(OUTLINE_SEGMENTS)))?;
    }
    Ok(())
}

fn run_classify(args: &ClassifyArgs, cfg: ClassifyConfig) -> Result<()> {
    if !(cfg.tol.is_finite() && cfg.tol >= 0.0) {
        return Err(bad("tol must be nonnegative"));
    }
    let (_, table) = cfg.table.build()?;
    let reclassify = |mut o: PeriodicOrbit| {
        o.classification = StabilityClass::from_trace(o.trace, cfg.tol);
        o
    };
    let parts: Vec<&str> = cfg.orbit.split(':').collect();
    let orbits: Vec<PeriodicOrbit> = match parts[..] {
        ["axial2"] => vec![classify(&table, axial_two_periodic(&table)?, 2, cfg.tol)?],
        ["split"] => split_pair(&table)?.into_iter().map(reclassify).collect(),
        ["radial", m] => {
            let m = m.parse().map_err(|_| bad(format!("bad sliding count `{m}`")))?;
            vec![reclassify(radial_orbit(&table, m)?)]
        }
        [s, theta, k] => {
            let num = |p: &str| p.parse::<f64>().map_err(|_| bad(format!("bad orbit `{}`", cfg.orbit)));
            let k: usize = k.parse().map_err(|_| bad(format!("bad period `{k}`")))?;
            if k == 0 {
                return Err(bad("period must be positive"));
            }
            let x = PhasePoint::new(num(s)?, num(theta)?);
            let x = refine_periodic(&table, x, k)?;
            vec![classify(&table, x, k, cfg.tol)?]
        }
        _ => return Err(bad(format!("unknown orbit `{}`", cfg.orbit))),
    };
    let records: Vec<Value> = orbits.iter().map(periodic_json).collect();
    let header = describe("classify", &cfg);
    print_json(args.output.as_ref(), &json!({ "config": header, "orbits": records }))?;
    if let Some(path) = &args.polyline {
        finish(write_polyline_csv(sink(Some(path))?, &header, &orbits[0].polyline(&table)?))?;
    }
    Ok(())
}

fn run_orbit(args: &OrbitArgs, cfg: OrbitConfig) -> Result<()> {
    let (s, theta) = match (cfg.s, cfg.theta) {
        (Some(s), Some(t)) => (s, t),
        _ => return Err(bad("orbit needs --s and --theta")),
    };
    let steps = cfg.steps.unwrap_or(1000);
    let (_, table) = cfg.table.build()?;
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(bad(format!("theta must lie in (0, pi), got {theta}")));
    }
    if !(0.0..table.total_length()).contains(&s) {
        return Err(bad(format!("s must lie in [0, {}), got {s}", table.total_length())));
    }
    let orbit = iterate(&table, PhasePoint::new(s, theta), steps);
    if orbit.terminated != Termination::Completed {
        eprintln!("orbit stopped: {:?} after {} steps", orbit.terminated, orbit.steps());
    }
    let header = describe("orbit", &OrbitConfig { steps: Some(steps), ..cfg.clone() });
    finish(write_orbit_csv(sink(args.output.as_deref())?, &header, &table, &orbit, cfg.normalized))
}

fn run_lyapunov(args: &LyapunovArgs, cfg: LyapunovRunConfig) -> Result<()> {
    let (lc, weighting) = cfg.lyapunov.config()?;
    let curve = match &cfg.b_range {
        Some(r) => {
            let range = parse_range(r)?;
            let template = cfg.table.spec_with(Some(range.start))?;
            lyapunov_curve_weighted(&template, &range, &lc, weighting)?
        }
        None => {
            let (spec, table) = cfg.table.build()?;
            let sl = scaled_lyapunov_weighted(&table, &lc, weighting)?;
            LyapunovCurve {
                points: vec![CurvePoint {
                    b: spec.b,
                    b1: spec.b1,
                    lambda_bar: sl.lambda_bar,
                    skipped_seeds: sl.skipped,
                }],
                invalid: Vec::new(),
            }
        }
    };
    report_invalid(&curve);
    finish(write_curve_csv(sink(args.output.as_deref())?, &describe("lyapunov", &cfg), &curve))
}

fn report_invalid(curve: &LyapunovCurve) {
    for b in &curve.invalid {
        eprintln!("skipped B={b}: no valid table");
    }
}

fn run_sweep(args: &SweepArgs, cfg: SweepConfig) -> Result<()> {
    let (lc, weighting) = cfg.lyapunov.config()?;
    let range = parse_range(cfg.b_range.as_deref().ok_or_else(|| bad("sweep needs --B-range"))?)?;
    let b1s = parse_list(&cfg.b1_values)?;
    if b1s.is_empty() {
        return Err(bad("sweep needs at least one B1 value"));
    }
    let mut all = LyapunovCurve {
        points: Vec::new(),
        invalid: Vec::new(),
    };
    for b1 in b1s {
        let template = TableConfig { b1, ..cfg.table.clone() }.spec_with(Some(range.start))?;
        let curve = lyapunov_curve_weighted(&template, &range, &lc, weighting)?;
        for b in &curve.invalid {
            eprintln!("skipped B={b}, B1={b1}: no valid table");
        }
        all.points.extend(curve.points);
    }
    finish(write_curve_csv(sink(args.output.as_deref())?, &describe("sweep", &cfg), &all))
}

fn run_scan(args: &ScanArgs, cfg: ScanRunConfig) -> Result<()> {
    let scan = ScanConfig {
        moon_umbrella: cfg.umbrella()?,
        islands: cfg.islands.config()?,
    };
    if !(cfg.step.is_finite() && cfg.step > 0.0) {
        return Err(bad("step must be positive"));
    }
    let jobs = cfg
        .theta2_values()?
        .into_iter()
        .map(|t2| cfg.range_for(t2).map(|r| (t2, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut estimates = Vec::with_capacity(jobs.len());
    for (theta2, range) in jobs {
        let est = ergodic_boundary_scan(theta2, cfg.b1, range, cfg.step, &scan)
            .with_context(|| format!("theta2 = {theta2}"))?;
        estimates.push(est);
    }
    finish(write_boundary_csv(sink(args.output.as_deref())?, &describe("scan", &cfg), &estimates))
}

fn run_islands(args: &IslandsArgs, cfg: IslandsConfig) -> Result<()> {
    let icfg = cfg.islands.config()?;
    let (_, table) = cfg.table.build()?;
    let report = island_detect(&table, &icfg)?;
    if let Some(path) = &args.pgm {
        finish(write_island_pgm(sink(Some(path))?, &report))?;
    }
    let counts = |v| report.count(v);
    use umbrella_core::chaos::SeedVerdict::*;
    print_json(
        args.output.as_ref(),
        &json!({
            "config": describe("islands", &cfg),
            "regular_fraction": report.regular_fraction,
            "islands_found": report.islands_found,
            "regular": counts(Regular),
            "chaotic": counts(Chaotic),
            "terminated": counts(Terminated),
        }),
    )
}

fn run_validate(cfg: ValidateConfig) -> Result<()> {
    let spec = cfg.table.spec()?;
    let table = build_table(&spec)?;
    let arcs: Vec<Value> = table
        .arcs()
        .iter()
        .map(|a| {
            json!({
                "circle": a.circle,
                "radius": a.radius,
                "orientation": a.orientation,
                "length": a.length(),
            })
        })
        .collect();
    let base = spec.base();
    let theta = if matches!(base.family, umbrella_core::Family::Lemon | umbrella_core::Family::Moon) {
        theta_of_table(&TableSpec { b1: 0.0, ..base }).ok()
    } else {
        None
    };
    let offset = spec.family.is_umbrella().then(|| max_offset(&spec).ok()).flatten();
    print_json(
        None,
        &json!({
            "spec": spec,
            "total_length": table.total_length(),
            "corners": table.corners(),
            "arcs": arcs,
            "theta": theta,
            "max_offset": offset,
        }),
    )
}
