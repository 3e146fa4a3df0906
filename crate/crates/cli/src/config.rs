//! Experiment configuration: a JSON document, optionally patched by
//! `key=value` overrides on dotted paths.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Lp,
    Norms,
    Approx,
    Hodge,
    Probe,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Lp => "lp",
            Self::Norms => "norms",
            Self::Approx => "approx",
            Self::Hodge => "hodge",
            Self::Probe => "probe",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub period: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d: 2, n: 64, period: 2.0 * PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TlConfig {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl Default for TlConfig {
    fn default() -> Self {
        Self { alpha: 1.0, p: 2.0, q: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    pub delta: f64,
    /// Overrides the `σ` derived from `δ`.
    pub sigma: Option<u32>,
    /// 0-based; defaults to the first `κ` axes.
    pub good_dirs: Option<Vec<usize>>,
    /// Extra `σ` values run after the main one and tabulated.
    pub sigma_sweep: Vec<u32>,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self { delta: 0.5, sigma: None, good_dirs: None, sigma_sweep: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    RandomBandlimited,
    GaussianBump,
    SingleMode,
    Spike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub generator: Generator,
    pub seed: u64,
    pub bands: Vec<i32>,
    pub amplitude: f64,
    /// Gaussian width.
    pub width: f64,
    /// Gaussian center; the middle of the box when absent.
    pub center: Option<Vec<f64>>,
    /// Frequency of `single-mode`.
    pub xi: Vec<i64>,
    /// Grid index of `spike`.
    pub at: Vec<usize>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            generator: Generator::RandomBandlimited,
            seed: 0,
            bands: vec![1, 2, 3, 4],
            amplitude: 1.0,
            width: 0.5,
            center: None,
            xi: vec![1, 0],
            at: vec![0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HodgeConfig {
    /// Degree of `φ`.
    pub l: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub escalate: bool,
    pub sigma_limit: u32,
    pub force: bool,
}

impl Default for HodgeConfig {
    fn default() -> Self {
        let o = lp_hodge::hodge::SolveOptions::default();
        Self { l: 1, tol: o.tol, max_iter: o.max_iter, escalate: o.escalate, sigma_limit: o.sigma_limit, force: o.force }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Shift lengths along the first axis.
    pub shifts: Vec<f64>,
    pub slack: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { shifts: vec![4.0, 16.0, 64.0], slack: lp_hodge::probe::DEFAULT_SLACK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub dump_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), dump_fields: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub command: Command,
    pub grid: GridConfig,
    pub tl: TlConfig,
    pub approx: ApproxConfig,
    pub input: InputConfig,
    pub hodge: HodgeConfig,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
    /// Worker threads; `None` leaves the choice to rayon.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: Command::Approx,
            grid: GridConfig::default(),
            tl: TlConfig::default(),
            approx: ApproxConfig::default(),
            input: InputConfig::default(),
            hodge: HodgeConfig::default(),
            probe: ProbeConfig::default(),
            output: OutputConfig::default(),
            threads: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("override path {0:?} does not name a config table")]
    Path(String),
}

impl ExperimentConfig {
    /// Loads `path` (or the defaults) and applies the overrides in order.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                serde_json::from_str::<Value>(&text)?
            }
            None => serde_json::to_value(Self::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Sets `a.b.c=v`, reading `v` as JSON and falling back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(spec.into()));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let table = node.as_object_mut().ok_or_else(|| ConfigError::Path(key.into()))?;
        if parts.peek().is_none() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table.entry(part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}
