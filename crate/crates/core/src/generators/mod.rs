//! Seeded synthetic streams with known drift points.
//!
//! Every generator is a plain iterator over [`Instance`]s driven by a
//! `ChaCha8` RNG, so a seed pins the stream bit for bit. [`generate`] builds a
//! configured stream, applies the label-swap and label-noise wrappers, and
//! returns a [`DriftManifest`] with the ground-truth drift positions.

mod hyperplane;
mod led;
mod rbf;
mod sea;
mod wrappers;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hyperplane::{HyperplaneGenerator, HyperplaneParams};
pub use led::{LedGenerator, LedParams, SEGMENTS};
pub use rbf::{Centroid, RbfGenerator, RbfParams};
pub use sea::{SeaGenerator, SeaParams};
pub use wrappers::{add_label_noise, inject_abrupt_drift};

use crate::stream::{Instance, StreamError, StreamSource};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("manifest i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest format: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<(), GeneratorError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GeneratorError::Param(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorKind {
    Sea(SeaParams),
    Hyperplane(HyperplaneParams),
    Led(LedParams),
    Rbf(RbfParams),
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Sea(_) => "sea",
            GeneratorKind::Hyperplane(_) => "hyperplane",
            GeneratorKind::Led(_) => "led",
            GeneratorKind::Rbf(_) => "rbf",
        }
    }
}

/// Label swaps toggled at the given instance positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapSchedule {
    pub positions: Vec<usize>,
    pub swap: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub seed: u64,
    pub instances: usize,
    /// Probability of replacing each label with a different random label.
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default)]
    pub drift: Option<SwapSchedule>,
}

impl GeneratorConfig {
    pub fn new(kind: GeneratorKind, seed: u64, instances: usize) -> Self {
        Self {
            kind,
            seed,
            instances,
            label_noise: 0.0,
            drift: None,
        }
    }

    pub fn with_label_noise(mut self, p: f64) -> Self {
        self.label_noise = p;
        self
    }

    pub fn with_swaps(mut self, positions: Vec<usize>, swap: (usize, usize)) -> Self {
        self.drift = Some(SwapSchedule { positions, swap });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// The generating concept itself changed (e.g. a new SEA threshold).
    Concept,
    LabelSwap,
}

/// Ground truth written next to every generated stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftManifest {
    pub seed: u64,
    pub config: GeneratorConfig,
    /// Instance positions where a new concept starts, ascending.
    pub drift_positions: Vec<usize>,
    pub drift_kinds: Vec<DriftKind>,
}

impl DriftManifest {
    /// Block indices containing each drift position.
    pub fn drift_blocks(&self, winsize: usize) -> Vec<usize> {
        self.drift_positions.iter().map(|p| p / winsize).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeneratorError> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeneratorError> {
        let file = BufReader::new(File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

fn take_source<G>(generator: G, instances: usize, name: &str) -> StreamSource
where
    G: Iterator<Item = Instance> + Send + 'static + HasSchema,
{
    let schema = generator.schema();
    StreamSource::from_iter(
        schema,
        crate::stream::Origin::Generator(name.to_string()),
        generator.take(instances),
    )
}

pub(crate) trait HasSchema {
    fn schema(&self) -> std::sync::Arc<crate::stream::Schema>;
}

pub fn sea_stream(
    params: &SeaParams,
    seed: u64,
    instances: usize,
) -> Result<StreamSource, GeneratorError> {
    let generator = SeaGenerator::new(params.clone(), seed, instances)?;
    Ok(take_source(generator, instances, "sea"))
}

pub fn hyperplane_stream(
    params: &HyperplaneParams,
    seed: u64,
    instances: usize,
) -> Result<StreamSource, GeneratorError> {
    let generator = HyperplaneGenerator::new(params.clone(), seed)?;
    Ok(take_source(generator, instances, "hyperplane"))
}

pub fn led_stream(
    params: &LedParams,
    seed: u64,
    instances: usize,
) -> Result<StreamSource, GeneratorError> {
    let generator = LedGenerator::new(params.clone(), seed)?;
    Ok(take_source(generator, instances, "led"))
}

pub fn rbf_stream(
    params: &RbfParams,
    seed: u64,
    instances: usize,
) -> Result<StreamSource, GeneratorError> {
    let generator = RbfGenerator::new(params, seed)?;
    Ok(take_source(generator, instances, "rbf"))
}

/// Builds the configured stream and its drift manifest.
pub fn generate(config: &GeneratorConfig) -> Result<(StreamSource, DriftManifest), GeneratorError> {
    if config.instances == 0 {
        return Err(GeneratorError::Param("instances must be positive".into()));
    }
    check_probability("label noise", config.label_noise)?;
    let mut drifts: Vec<(usize, DriftKind)> = Vec::new();
    let mut source = match &config.kind {
        GeneratorKind::Sea(p) => {
            drifts.extend(
                sea::concept_boundaries(&p.thresholds, config.instances)
                    .into_iter()
                    .map(|pos| (pos, DriftKind::Concept)),
            );
            sea_stream(p, config.seed, config.instances)?
        }
        GeneratorKind::Hyperplane(p) => hyperplane_stream(p, config.seed, config.instances)?,
        GeneratorKind::Led(p) => led_stream(p, config.seed, config.instances)?,
        GeneratorKind::Rbf(p) => rbf_stream(p, config.seed, config.instances)?,
    };
    if let Some(schedule) = &config.drift {
        source = inject_abrupt_drift(source, &schedule.positions, schedule.swap)?;
        drifts.extend(
            schedule
                .positions
                .iter()
                .filter(|&&p| p < config.instances)
                .map(|&p| (p, DriftKind::LabelSwap)),
        );
    }
    if config.label_noise > 0.0 {
        source = add_label_noise(source, config.label_noise, noise_seed(config.seed))?;
    }
    drifts.sort_by_key(|(pos, _)| *pos);
    drifts.dedup_by_key(|(pos, _)| *pos);
    let manifest = DriftManifest {
        seed: config.seed,
        config: config.clone(),
        drift_positions: drifts.iter().map(|d| d.0).collect(),
        drift_kinds: drifts.iter().map(|d| d.1).collect(),
    };
    Ok((source, manifest))
}

/// Seed for the label-noise wrapper, decorrelated from the base generator.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}
