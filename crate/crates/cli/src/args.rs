//! Command-line surface. Every numeric flag is optional here: missing values
//! come from `--config` and then from built-in defaults (see `config`).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "umbrella", version, about = "Billiards in tables bounded by circular arcs")]
pub struct Cli {
    /// Worker threads. Output does not depend on it.
    #[arg(long, global = true, env = "UMBRELLA_THREADS")]
    pub threads: Option<usize>,

    /// JSON file supplying defaults for any flag (flags win).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate many seeds and write the phase portrait.
    Portrait(PortraitArgs),
    /// Refine a periodic orbit and report its stability.
    Classify(ClassifyArgs),
    /// Write a single orbit.
    Orbit(OrbitArgs),
    /// Scaled Lyapunov exponent of one table or along a range of B.
    Lyapunov(LyapunovArgs),
    /// Scaled Lyapunov exponent over a grid of B and B1.
    Sweep(SweepArgs),
    /// Bracket the ergodic boundary along theta1 at fixed theta2.
    Scan(ScanArgs),
    /// Classify a grid of seeds as regular or chaotic.
    Islands(IslandsArgs),
    /// Check a table and print its geometry.
    Validate(ValidateArgs),
}

/// Table selection, either by `(R, B, B1)` or by the tangent angles.
#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct TableArgs {
    /// circle, lemon, moon, flower, umbrella_lemon, moon1 or moon2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,

    /// Radius of the second circle.
    #[arg(long = "R")]
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,

    /// Distance between the centres.
    #[arg(long = "B")]
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,

    /// Offset of the duplicated disk.
    #[arg(long = "B1")]
    #[serde(rename = "B1", skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,

    /// Number of disk copies in an umbrella.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Tangent angle at the corner, used with --theta2 instead of R and B.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
}

#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct LyapunovFlags {
    /// Side of the seed grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Iterations per indicator.
    #[arg(long = "steps")]
    #[serde(rename = "steps", skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    /// Initial separation in normalized coordinates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,

    /// uniform or measure.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighting: Option<String>,
}

#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct IslandFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_long: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub li_threshold: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_cells: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_threshold: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_threshold: Option<f64>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct PortraitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    /// grid:K, random:COUNT:SEED, or normalized pairs `s,theta;s,theta`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<String>,

    /// Collisions per seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    /// CSV output (stdout when absent).
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,

    /// Also write a density image.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub pgm: Option<PathBuf>,

    /// Pixels per side of the density image.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgm_size: Option<usize>,

    /// Also write the table outline as x,y.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub outline: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    /// axial2, split, radial:M, or s:theta:k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit: Option<String>,

    /// Half-width of the parabolic band around |trace| = 2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    /// JSON output (stdout when absent).
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,

    /// Also write the orbit as a closed x,y polyline.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub polyline: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    /// Initial arc-length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,

    /// Initial angle with the tangent, in (0, pi).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    /// Write s/|boundary| and theta/pi.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub normalized: bool,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct LyapunovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub lyapunov: LyapunovFlags,

    /// start:end:step; without it only the table's own B is used.
    #[arg(long = "B-range")]
    #[serde(rename = "B_range", skip_serializing_if = "Option::is_none")]
    pub b_range: Option<String>,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub lyapunov: LyapunovFlags,

    /// start:end:step.
    #[arg(long = "B-range")]
    #[serde(rename = "B_range", skip_serializing_if = "Option::is_none")]
    pub b_range: Option<String>,

    /// Comma-separated offsets, one curve each.
    #[arg(long = "B1-values")]
    #[serde(rename = "B1_values", skip_serializing_if = "Option::is_none")]
    pub b1_values: Option<String>,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ScanArgs {
    /// Comma-separated theta2 values.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<String>,

    #[arg(long = "B1")]
    #[serde(rename = "B1", skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,

    /// theta1 interval lo:hi; defaults to the right-angle line -0.2/+0.3.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,

    /// Umbrella used for moon-type tables: moon1 or moon2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub umbrella: Option<String>,

    #[command(flatten)]
    #[serde(flatten)]
    pub islands: IslandFlags,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct IslandsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub islands: IslandFlags,

    /// Verdict image.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub pgm: Option<PathBuf>,

    /// JSON summary (stdout when absent).
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,
}
