//! Flat `key = value` text configs with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use fld_core::{FluxLimiter, Precision, SolverConfig};

use crate::error::{CliError, CliResult};

/// Parsed key/value pairs, kept sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("line {}: expected key = value, got '{raw}'", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(CliError::usage(format!("line {}: empty key", n + 1)));
            }
            let value = v.trim().trim_matches('"').trim().to_string();
            if entries.insert(key.to_string(), value).is_some() {
                return Err(CliError::usage(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Parses `key` if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::usage(format!("bad value '{v}' for {key}: {e}")))
            })
            .transpose()
    }

    /// Whitespace-separated triple.
    pub fn triple(&self, key: &str) -> CliResult<Option<[f64; 3]>> {
        self.get(key).map(|v| parse_triple(v).map_err(|e| CliError::usage(format!("{key}: {e}")))).transpose()
    }

    /// Serializes as sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ',').filter(|p| !p.is_empty()).collect();
    if parts.len() != 3 {
        return Err(format!("expected three numbers, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    /// `None` uses half the medium voxel size.
    pub step: Option<f64>,
    pub exposure: f64,
    pub gamma: f64,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub jitter: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            step: None,
            exposure: 1.0,
            gamma: 2.2,
            width: None,
            height: None,
            jitter: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathtraceSettings {
    pub spp: usize,
    pub seed: u64,
    pub max_bounces: usize,
}

impl Default for PathtraceSettings {
    fn default() -> Self {
        Self {
            spp: 16,
            seed: 0,
            max_bounces: 256,
        }
    }
}

/// Everything a pipeline run reads from its config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub render: RenderSettings,
    pub pathtrace: PathtraceSettings,
    pub downsample: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            render: RenderSettings::default(),
            pathtrace: PathtraceSettings::default(),
            downsample: 1,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "limiter",
    "omega",
    "sigma_eps",
    "eps",
    "conv_tol",
    "max_iters",
    "boundary_margin",
    "precision",
    "downsample",
    "step",
    "exposure",
    "gamma",
    "width",
    "height",
    "jitter",
    "spp",
    "seed",
    "max_bounces",
];

impl PipelineConfig {
    pub fn from_key_values(kv: &KeyValues) -> CliResult<Self> {
        if let Some(k) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(CliError::usage(format!("unknown config key '{k}'")));
        }
        let mut cfg = Self::default();
        let s = &mut cfg.solver;
        if let Some(l) = kv.parsed::<FluxLimiter>("limiter")? {
            s.limiter = l;
        }
        if let Some(p) = kv.parsed::<Precision>("precision")? {
            *s = s.clone().with_precision(p);
        }
        if let Some(v) = kv.parsed("omega")? {
            s.omega = v;
        }
        if let Some(v) = kv.parsed("sigma_eps")? {
            s.sigma_eps = v;
        }
        if let Some(v) = kv.parsed("eps")? {
            s.eps = v;
        }
        if let Some(v) = kv.parsed("conv_tol")? {
            s.conv_tol = v;
        }
        if let Some(v) = kv.parsed("max_iters")? {
            s.max_iters = v;
        }
        if let Some(v) = kv.parsed("boundary_margin")? {
            s.boundary_margin = v;
        }
        s.validate()?;
        if let Some(v) = kv.parsed("downsample")? {
            cfg.downsample = v;
        }
        let r = &mut cfg.render;
        r.step = kv.parsed("step")?;
        if let Some(v) = kv.parsed("exposure")? {
            r.exposure = v;
        }
        if let Some(v) = kv.parsed("gamma")? {
            r.gamma = v;
        }
        r.width = kv.parsed("width")?;
        r.height = kv.parsed("height")?;
        if let Some(v) = kv.parsed("jitter")? {
            r.jitter = v;
        }
        let p = &mut cfg.pathtrace;
        if let Some(v) = kv.parsed("spp")? {
            p.spp = v;
        }
        if let Some(v) = kv.parsed("seed")? {
            p.seed = v;
        }
        if let Some(v) = kv.parsed("max_bounces")? {
            p.max_bounces = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_key_values(&KeyValues::load(path)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        if self.downsample < 1 {
            return Err(CliError::usage("downsample factor must be >= 1"));
        }
        let r = &self.render;
        if !(r.exposure > 0.0 && r.gamma > 0.0) {
            return Err(CliError::usage("exposure and gamma must be positive"));
        }
        if r.step.is_some_and(|s| !(s > 0.0)) {
            return Err(CliError::usage("render step must be positive"));
        }
        if self.pathtrace.spp < 1 {
            return Err(CliError::usage("spp must be >= 1"));
        }
        Ok(())
    }
}
