use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prequential_run, HarnessError, RunOptions, RunSummary};
use crate::ensemble::EcbeConfig;
use crate::generators::{add_label_noise, generate, noise_seed, GeneratorConfig};
use crate::stream::{open_csv, open_csv_with_schema, LabelColumn, Schema, StreamSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Winsize,
    Noise,
    Alpha,
    Beta,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Winsize => "winsize",
            SweepParam::Noise => "noise",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::K => "k",
        }
    }

    fn check(self, value: f64) -> Result<(), HarnessError> {
        let ok = match self {
            SweepParam::Winsize | SweepParam::K => value >= 1.0 && value.fract() == 0.0,
            SweepParam::Noise => (0.0..=1.0).contains(&value),
            SweepParam::Alpha => value > 0.0 && value < 1.0,
            SweepParam::Beta => value > 1.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!(
                "{} cannot take value {value}",
                self.name()
            )))
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "winsize" => Ok(SweepParam::Winsize),
            "noise" => Ok(SweepParam::Noise),
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            "k" => Ok(SweepParam::K),
            other => Err(format!("unknown sweep parameter `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// One run per seed for every value.
    pub seeds: Vec<u64>,
}

/// Where each sweep cell gets its stream from.
#[derive(Debug, Clone)]
pub enum SourceTemplate {
    /// The cell's seed replaces the generator seed; a noise sweep sets the
    /// label-noise probability.
    Generator(GeneratorConfig),
    /// The cell's seed only drives injected label noise.
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
        schema: Option<Schema>,
    },
}

impl SourceTemplate {
    fn instantiate(
        &self,
        noise: Option<f64>,
        seed: u64,
    ) -> Result<(StreamSource, Option<crate::generators::DriftManifest>), HarnessError> {
        match self {
            SourceTemplate::Generator(base) => {
                let mut cfg = base.clone();
                cfg.seed = seed;
                if let Some(p) = noise {
                    cfg.label_noise = p;
                }
                let (source, manifest) = generate(&cfg)?;
                Ok((source, Some(manifest)))
            }
            SourceTemplate::Csv {
                path,
                label_column,
                schema,
            } => {
                let mut source = match schema {
                    Some(s) => open_csv_with_schema(path, label_column.clone(), s.clone())?,
                    None => open_csv(path, label_column.clone())?,
                };
                if let Some(p) = noise {
                    source = add_label_noise(source, p, noise_seed(seed))?;
                }
                Ok((source, None))
            }
        }
    }
}

/// One sweep result. `seed` is `None` on the per-value mean rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub seed: Option<u64>,
    pub average_accuracy: Option<f64>,
    pub blocks: f64,
    pub drifts_flagged: f64,
    pub true_detections: Option<f64>,
    pub false_alarms: Option<f64>,
    pub missed: Option<f64>,
    pub wallclock_seconds: f64,
}

impl SweepRow {
    fn from_summary(param: SweepParam, value: f64, seed: u64, s: &RunSummary) -> Self {
        Self {
            param,
            value,
            seed: Some(seed),
            average_accuracy: s.average_accuracy,
            blocks: s.blocks as f64,
            drifts_flagged: s.drifts_flagged as f64,
            true_detections: s.detection.map(|d| d.true_detections as f64),
            false_alarms: s.detection.map(|d| d.false_alarms as f64),
            missed: s.detection.map(|d| d.missed as f64),
            wallclock_seconds: s.wallclock_seconds,
        }
    }

    fn mean_of(rows: &[SweepRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&SweepRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let mean_opt = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Option<f64> {
            rows.iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / n)
        };
        Self {
            param: rows[0].param,
            value: rows[0].value,
            seed: None,
            average_accuracy: mean_opt(&|r| r.average_accuracy),
            blocks: mean(&|r| r.blocks),
            drifts_flagged: mean(&|r| r.drifts_flagged),
            true_detections: mean_opt(&|r| r.true_detections),
            false_alarms: mean_opt(&|r| r.false_alarms),
            missed: mean_opt(&|r| r.missed),
            wallclock_seconds: mean(&|r| r.wallclock_seconds),
        }
    }
}

fn apply(param: SweepParam, value: f64, base: &EcbeConfig) -> EcbeConfig {
    let mut cfg = base.clone();
    match param {
        SweepParam::Winsize => cfg.winsize = value as usize,
        SweepParam::K => cfg.k = value as usize,
        SweepParam::Alpha => cfg.alpha = value,
        SweepParam::Beta => cfg.beta = value,
        SweepParam::Noise => {}
    }
    cfg
}

/// Runs every `(value, seed)` cell in parallel. Rows come back grouped by
/// value in the order given: the per-seed rows, then their mean.
pub fn sweep(
    spec: &SweepSpec,
    base: &EcbeConfig,
    template: &SourceTemplate,
    options: &RunOptions,
) -> Result<Vec<SweepRow>, HarnessError> {
    if spec.values.is_empty() || spec.seeds.is_empty() {
        return Err(HarnessError::Config(
            "a sweep needs at least one value and one seed".into(),
        ));
    }
    for &v in &spec.values {
        spec.param.check(v)?;
    }
    let cells: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(value, seed)| {
            let cfg = apply(spec.param, value, base);
            let noise = (spec.param == SweepParam::Noise).then_some(value);
            let (source, manifest) = template.instantiate(noise, seed)?;
            let opts = RunOptions {
                manifest: manifest.or_else(|| options.manifest.clone()),
                tolerance_blocks: options.tolerance_blocks,
            };
            let out = prequential_run(&cfg, source, &opts)?;
            Ok(SweepRow::from_summary(
                spec.param,
                value,
                seed,
                &out.summary,
            ))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::with_capacity(results.len() + spec.values.len());
    for chunk in results.chunks(spec.seeds.len()) {
        rows.extend_from_slice(chunk);
        rows.push(SweepRow::mean_of(chunk));
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), csv::Error> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "param",
        "value",
        "seed",
        "average_accuracy",
        "blocks",
        "drifts_flagged",
        "true_detections",
        "false_alarms",
        "missed",
        "wallclock_seconds",
    ])?;
    for r in rows {
        out.write_record([
            r.param.name().to_string(),
            r.value.to_string(),
            r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            opt(r.average_accuracy),
            r.blocks.to_string(),
            r.drifts_flagged.to_string(),
            opt(r.true_detections),
            opt(r.false_alarms),
            opt(r.missed),
            format!("{:.6}", r.wallclock_seconds),
        ])?;
    }
    out.flush()?;
    Ok(())
}
