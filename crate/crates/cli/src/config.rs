use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::Result;
use ecbe::generators::GeneratorConfig;
use ecbe::EcbeConfig;
use serde::Deserialize;

/// Bad flags or a bad config file. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }
}

impl Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Ensemble settings at the top level, plus an optional `generator` table.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    #[serde(flatten)]
    pub ensemble: EcbeConfig,
    pub tolerance_blocks: Option<usize>,
    pub generator: Option<GeneratorConfig>,
}

impl FileConfig {
    /// TOML when the extension says so, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let parsed = if is_toml {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| ConfigError::new(format!("{}: {e}", path.display())).into())
    }
}

pub fn parse_list<T: FromStr>(text: &str, flag: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| ConfigError::new(format!("{flag}: `{}`: {e}", s.trim())).into())
        })
        .collect()
}

/// `1,2,5`, `800..2400` (five evenly spaced points) or `800..2400:400`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let Some((lo, rest)) = text.split_once("..") else {
        return parse_list(text, "--values");
    };
    let (hi, step) = match rest.split_once(':') {
        Some((hi, step)) => (hi, Some(step)),
        None => (rest, None),
    };
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| ConfigError::new(format!("--values: `{s}`: {e}")).into())
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ConfigError::new(format!("--values: empty range {text}")).into());
    }
    let values = match step {
        None if lo == hi => vec![lo],
        None => (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect(),
        Some(step) => {
            let step = num(step)?;
            if !(step > 0.0 && step.is_finite()) {
                return Err(ConfigError::new("--values: step must be positive").into());
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=count).map(|i| lo + step * i as f64).collect()
        }
    };
    Ok(values)
}
