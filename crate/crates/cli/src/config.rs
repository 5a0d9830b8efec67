//! Run configuration: one JSON file describes one command.
//!
//! Overrides are applied to the raw JSON before it is parsed, so a
//! `--set model.level=0.03` flag and an edited file behave the same.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use fracaffine::field::{FieldGrid, OUState};
use fracaffine::mc::McConfig;
use fracaffine::measure::{discretize, discretize_pair, GridConfig, GridScheme, MeasureSpec};
use fracaffine::rates::{CapKind, CapSchedule, RateKind};

/// Bad or incomplete configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SimulateFbm,
    PriceZcb,
    PriceCap,
    FwdCurve,
    SteinSim,
    SteinIv,
    SteinCdf,
    AffineEval,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateFbm => "simulate-fbm",
            Command::PriceZcb => "price-zcb",
            Command::PriceCap => "price-cap",
            Command::FwdCurve => "fwd-curve",
            Command::SteinSim => "stein-sim",
            Command::SteinIv => "stein-iv",
            Command::SteinCdf => "stein-cdf",
            Command::AffineEval => "affine-eval",
            Command::Validate => "validate",
        }
    }

    /// Tabular commands default to CSV, the others to JSON.
    pub fn default_format(self) -> Format {
        match self {
            Command::SteinIv | Command::AffineEval | Command::Validate => Format::Json,
            _ => Format::Csv,
        }
    }

    pub fn needs_grid(self) -> bool {
        !matches!(self, Command::Validate)
    }

    pub fn needs_model(self) -> bool {
        !matches!(self, Command::Validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A grid function given either as one constant or as one value per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridFunction {
    Constant(f64),
    Values(Vec<f64>),
}

impl GridFunction {
    pub fn resolve(&self, field: &str, n: usize) -> anyhow::Result<Vec<f64>> {
        match self {
            GridFunction::Constant(c) => Ok(vec![*c; n]),
            GridFunction::Values(v) if v.len() == n => Ok(v.clone()),
            GridFunction::Values(v) => Err(config_error(format!(
                "`{field}` has {} values but the grid has {n} atoms",
                v.len()
            ))),
        }
    }
}

fn resolve_or_zero(f: &Option<GridFunction>, field: &str, n: usize) -> anyhow::Result<Vec<f64>> {
    match f {
        Some(g) => g.resolve(field, n),
        None => Ok(vec![0.0; n]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<MeasureSpec>,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_x_min() -> f64 {
    GridConfig::default().x_min
}

fn default_x_max() -> f64 {
    GridConfig::default().x_max
}

fn default_n() -> usize {
    GridConfig::default().n
}

impl GridBlock {
    pub fn spacing(&self) -> GridConfig {
        GridConfig {
            x_min: self.x_min,
            x_max: self.x_max,
            n: self.n,
            scheme: GridScheme::Geometric,
        }
    }

    /// Discretizes the configured measures onto one union grid.
    pub fn field_grid(&self) -> anyhow::Result<FieldGrid> {
        let cfg = self.spacing();
        Ok(match (&self.mu, &self.nu) {
            (Some(mu), Some(nu)) => {
                let (gm_mu, gm_nu) = discretize_pair(mu, nu, &cfg)?;
                FieldGrid::new(&gm_mu, Some(&gm_nu))
            }
            (Some(mu), None) => FieldGrid::new(&discretize(mu, &cfg)?, None),
            (None, Some(nu)) => FieldGrid::nu_only(&discretize(nu, &cfg)?),
            (None, None) => return Err(config_error("`grid` needs at least one of `grid.mu`, `grid.nu`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Phi,
    BigPhi,
}

/// Model parameters. Each command reads the fields it needs and reports
/// the first missing one by its dotted name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<GridFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<GridFunction>,
    /// Initial state; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<GridFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<GridFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<CapSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_kind: Option<CapKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
}

pub fn require<'a, T>(value: &'a Option<T>, field: &str) -> anyhow::Result<&'a T> {
    value.as_ref().ok_or_else(|| config_error(format!("missing `{field}`")))
}

impl ModelBlock {
    pub fn grid_fn(&self, which: &str, n: usize) -> anyhow::Result<Vec<f64>> {
        let f = match which {
            "u" => &self.u,
            "v" => &self.v,
            "y" => &self.y,
            _ => &self.z,
        };
        resolve_or_zero(f, &format!("model.{which}"), n)
    }

    pub fn state(&self, grid: &FieldGrid) -> anyhow::Result<OUState> {
        let n = grid.len();
        let y = self.grid_fn("y", n)?;
        let z = if grid.track_z { self.grid_fn("z", n)? } else { vec![] };
        Ok(OUState { t: 0.0, y, z })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Default Monte Carlo budget when the config has no `mc` block.
pub const DEFAULT_PATHS: usize = 10_000;

impl RunConfig {
    pub fn from_value(value: Value) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| config_error(e.to_string()))?;
        cfg.check_blocks()?;
        Ok(cfg)
    }

    fn check_blocks(&self) -> anyhow::Result<()> {
        if self.command.needs_grid() && self.grid.is_none() {
            return Err(config_error(format!("`{}` needs a `grid` block", self.command.name())));
        }
        if self.command.needs_model() && self.model.is_none() {
            return Err(config_error(format!("`{}` needs a `model` block", self.command.name())));
        }
        Ok(())
    }

    pub fn grid(&self) -> anyhow::Result<&GridBlock> {
        require(&self.grid, "grid")
    }

    pub fn model(&self) -> anyhow::Result<&ModelBlock> {
        require(&self.model, "model")
    }

    pub fn format(&self) -> Format {
        self.output.format.unwrap_or(self.command.default_format())
    }

    pub fn mc(&self) -> McConfig {
        self.mc.unwrap_or_else(|| McConfig::new(DEFAULT_PATHS, 0))
    }
}

/// Sets `path = raw` inside a JSON object, creating objects along the way.
/// `raw` is parsed as JSON when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> anyhow::Result<()> {
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut keys = path.split('.').peekable();
    let mut node = root;
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(config_error(format!("empty key in override `{path}`")));
        }
        let obj = match node {
            Value::Object(map) => map,
            _ => {
                return Err(config_error(format!(
                    "override `{path}`: `{key}` is inside a non-object"
                )))
            }
        };
        if keys.peek().is_none() {
            obj.insert(key.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_objects() {
        let mut v = serde_json::json!({"command": "price-zcb"});
        apply_override(&mut v, "model.level", "0.03").unwrap();
        apply_override(&mut v, "model.kind", "short_rate").unwrap();
        assert_eq!(v["model"]["level"], 0.03);
        assert_eq!(v["model"]["kind"], "short_rate");
    }

    #[test]
    fn missing_grid_is_named() {
        let err =
            RunConfig::from_value(serde_json::json!({"command": "simulate-fbm", "model": {"hurst": 0.3}})).unwrap_err();
        assert!(err.to_string().contains("grid"));
    }

    #[test]
    fn grid_functions_check_length() {
        assert_eq!(GridFunction::Constant(2.0).resolve("u", 3).unwrap(), vec![2.0; 3]);
        assert!(GridFunction::Values(vec![1.0]).resolve("u", 3).is_err());
    }
}
