//! Run configuration: a JSON file overlaid with the flags that were given,
//! then resolved against defaults and validated before any computation.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use umbrella_core::chaos::{scan_spec, GridWeighting, IslandConfig, LyapunovConfig, ParamRange};
use umbrella_core::{build_table, BilliardTable, Family, TableSpec};

/// Bad user input; maps to exit code 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Exit status for a failed run: 2 for invalid input, 3 for a computation
/// that could not produce its result.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<umbrella_core::Error>() {
            return if matches!(e, umbrella_core::Error::InvalidSpec(_)) { 2 } else { 3 };
        }
    }
    3
}

pub fn load_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(bad(format!("{}: expected a JSON object", path.display())));
    }
    Ok(value)
}

/// Overlays the flags that were set onto the file, then fills defaults.
pub fn resolve<F: Serialize, R: DeserializeOwned>(file: Option<&Value>, flags: &F) -> Result<R> {
    let mut merged = match file {
        Some(Value::Object(m)) => m.clone(),
        _ => Map::new(),
    };
    if let Value::Object(set) = serde_json::to_value(flags)? {
        merged.extend(set);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| bad(format!("invalid configuration: {e}")))
}

/// The resolved config as it appears in output headers.
pub fn describe<C: Serialize>(command: &str, config: &C) -> Value {
    let mut value = serde_json::to_value(config).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut value {
        m.insert("command".into(), Value::String(command.into()));
    }
    value
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "B1")]
    pub b1: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            family: None,
            r: None,
            b: None,
            b1: 0.0,
            n: 2,
            theta1: None,
            theta2: None,
        }
    }
}

impl TableConfig {
    fn family(&self) -> Result<Option<Family>> {
        self.family.as_deref().map(|f| f.parse::<Family>()).transpose().map_err(Into::into)
    }

    /// The table spec, with `B` taken from `b_override` when given.
    pub fn spec_with(&self, b_override: Option<f64>) -> Result<TableSpec> {
        let family = self.family()?;
        if let (Some(t1), Some(t2)) = (self.theta1, self.theta2) {
            if self.r.is_some() || self.b.is_some() {
                return Err(bad("give either theta1/theta2 or R/B, not both"));
            }
            let umbrella = match family {
                Some(f @ Family::UmbrellaMoon2) | Some(f @ Family::UmbrellaMoon1) => f,
                _ => Family::UmbrellaMoon1,
            };
            let spec = scan_spec(t1, t2, self.b1, umbrella)?.with_copies(self.n);
            return Ok(match b_override {
                Some(b) => TableSpec { b, ..spec },
                None => spec,
            });
        }
        if self.theta1.is_some() || self.theta2.is_some() {
            return Err(bad("theta1 and theta2 must be given together"));
        }
        let family = family.ok_or_else(|| bad("missing --family (or --theta1/--theta2)"))?;
        let r = self.r.ok_or_else(|| bad("missing --R"))?;
        let b = match (b_override, self.b, family) {
            (Some(b), _, _) | (None, Some(b), _) => b,
            (None, None, Family::Circle) => 0.0,
            (None, None, _) => return Err(bad("missing --B")),
        };
        let family = match family {
            // A lemon with an offset is the umbrella lemon.
            Family::Lemon if self.b1 != 0.0 => Family::UmbrellaLemon,
            Family::Moon if self.b1 != 0.0 => {
                return Err(bad("a moon with B1 > 0 is ambiguous, use moon1 or moon2"));
            }
            f => f,
        };
        Ok(TableSpec::new(family, r, b, self.b1).with_copies(self.n))
    }

    pub fn spec(&self) -> Result<TableSpec> {
        self.spec_with(None)
    }

    pub fn build(&self) -> Result<(TableSpec, BilliardTable)> {
        let spec = self.spec()?;
        let table = build_table(&spec)?;
        Ok((spec, table))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovSettings {
    pub k: usize,
    pub steps: usize,
    pub dx: f64,
    pub weighting: String,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        let d = LyapunovConfig::default();
        Self {
            k: d.k,
            steps: d.n,
            dx: d.dx,
            weighting: "uniform".into(),
        }
    }
}

impl LyapunovSettings {
    pub fn config(&self) -> Result<(LyapunovConfig, GridWeighting)> {
        let cfg = LyapunovConfig {
            dx: self.dx,
            n: self.steps,
            k: self.k,
        };
        cfg.validate()?;
        let weighting = match self.weighting.as_str() {
            "uniform" => GridWeighting::Uniform,
            "measure" => GridWeighting::Measure,
            other => return Err(bad(format!("unknown weighting `{other}`, expected uniform or measure"))),
        };
        Ok((cfg, weighting))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IslandSettings {
    pub grid: usize,
    pub n_long: usize,
    pub li_threshold: f64,
    pub coverage_cells: usize,
    pub coverage_threshold: f64,
    pub detection_threshold: f64,
}

impl Default for IslandSettings {
    fn default() -> Self {
        let d = IslandConfig::default();
        Self {
            grid: d.grid,
            n_long: d.n_long,
            li_threshold: d.li_threshold,
            coverage_cells: d.coverage_cells,
            coverage_threshold: d.coverage_threshold,
            detection_threshold: d.detection_threshold,
        }
    }
}

impl IslandSettings {
    pub fn config(&self) -> Result<IslandConfig> {
        let cfg = IslandConfig {
            grid: self.grid,
            n_long: self.n_long,
            li_threshold: self.li_threshold,
            coverage_cells: self.coverage_cells,
            coverage_threshold: self.coverage_threshold,
            detection_threshold: self.detection_threshold,
            ..IslandConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PortraitConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    pub seeds: String,
    pub steps: usize,
    pub pgm_size: usize,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            table: TableConfig::default(),
            seeds: "random:200:1".into(),
            steps: 5000,
            pgm_size: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    pub orbit: String,
    pub tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            table: TableConfig::default(),
            orbit: "axial2".into(),
            tol: umbrella_core::periodic::PARABOLIC_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    pub s: Option<f64>,
    pub theta: Option<f64>,
    pub steps: Option<usize>,
    pub normalized: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovRunConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    #[serde(flatten)]
    pub lyapunov: LyapunovSettings,
    #[serde(rename = "B_range", skip_serializing_if = "Option::is_none")]
    pub b_range: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    #[serde(flatten)]
    pub lyapunov: LyapunovSettings,
    #[serde(rename = "B_range", skip_serializing_if = "Option::is_none")]
    pub b_range: Option<String>,
    #[serde(rename = "B1_values")]
    pub b1_values: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            table: TableConfig::default(),
            lyapunov: LyapunovSettings::default(),
            b_range: None,
            b1_values: "0".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanRunConfig {
    /// A number or a list (JSON array or comma-separated string).
    pub theta2: Value,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
    pub step: f64,
    pub umbrella: String,
    #[serde(flatten)]
    pub islands: IslandSettings,
}

impl Default for ScanRunConfig {
    fn default() -> Self {
        Self {
            theta2: Value::Null,
            b1: 0.0,
            range: None,
            step: 0.001,
            umbrella: "moon1".into(),
            islands: IslandSettings::default(),
        }
    }
}

impl ScanRunConfig {
    pub fn theta2_values(&self) -> Result<Vec<f64>> {
        let values = match &self.theta2 {
            Value::Null => return Err(bad("missing --theta2")),
            Value::Number(n) => vec![n.as_f64().unwrap_or(f64::NAN)],
            Value::Array(items) => items.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect(),
            Value::String(s) => parse_list(s)?,
            other => return Err(bad(format!("theta2 must be a number or a list, got {other}"))),
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(bad("theta2 values must be finite numbers"));
        }
        Ok(values)
    }

    /// The θ1 interval for one θ2: either the given one or a window around
    /// the right-angle line `θ1 = θ2 − π/2`, kept inside the moon region.
    pub fn range_for(&self, theta2: f64) -> Result<(f64, f64)> {
        let (lo, hi) = match &self.range {
            Some(r) => {
                let parts = parse_list(&r.replace(':', ","))?;
                match parts[..] {
                    [lo, hi] => (lo, hi),
                    _ => return Err(bad(format!("expected lo:hi, got `{r}`"))),
                }
            }
            None => {
                let line = theta2 - FRAC_PI_2;
                ((line - 0.2).max(-theta2 + 1e-3), (line + 0.3).min(theta2 - 1e-3))
            }
        };
        if !(hi > lo) {
            return Err(bad(format!("empty theta1 range [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }

    pub fn umbrella(&self) -> Result<Family> {
        match self.umbrella.parse::<Family>()? {
            f @ (Family::UmbrellaMoon1 | Family::UmbrellaMoon2) => Ok(f),
            other => Err(bad(format!("umbrella must be moon1 or moon2, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IslandsConfig {
    #[serde(flatten)]
    pub table: TableConfig,
    #[serde(flatten)]
    pub islands: IslandSettings,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    #[serde(flatten)]
    pub table: TableConfig,
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad(format!("not a number: `{p}`"))))
        .collect()
}

pub fn parse_range(s: &str) -> Result<ParamRange> {
    let range: ParamRange = s.parse()?;
    range.values()?;
    Ok(range)
}
