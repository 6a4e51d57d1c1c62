//! Prequential evaluation: every block is classified before it is used for
//! training, and accuracy is counted on those pre-training predictions.

mod baseline;
mod sweep;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::MajorityEnsemble;
pub use sweep::{sweep, write_sweep_csv, SourceTemplate, SweepParam, SweepRow, SweepSpec};

use crate::ensemble::{BlockReport, EcbeConfig, Ensemble, EnsembleError};
use crate::entropy::DriftRecord;
use crate::generators::{DriftManifest, GeneratorError};
use crate::learner::{BaseLearner, GaussianNaiveBayes};
use crate::stream::{StreamError, StreamSource};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stream produced no instances")]
    EmptyStream,
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Ensemble(EnsembleError::Config(_))
                | HarnessError::Generator(GeneratorError::Param(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ecbe,
    MajorityBaseline,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_detections: usize,
    pub false_alarms: usize,
    pub missed: usize,
}

/// Matches flagged blocks to ground-truth drift blocks. A flag at block `f`
/// detects truth `t` when `t <= f <= t + tolerance_blocks`; each truth is
/// matched at most once, earliest first. Unmatched flags are false alarms.
pub fn score_detections(
    flagged_blocks: &[usize],
    truth_blocks: &[usize],
    tolerance_blocks: usize,
) -> DetectionScore {
    let mut flags = flagged_blocks.to_vec();
    flags.sort_unstable();
    let mut truths = truth_blocks.to_vec();
    truths.sort_unstable();
    let mut matched = vec![false; truths.len()];
    let mut score = DetectionScore::default();
    for f in flags {
        let hit = truths
            .iter()
            .enumerate()
            .find(|(i, &t)| !matched[*i] && t <= f && f <= t + tolerance_blocks)
            .map(|(i, _)| i);
        match hit {
            Some(i) => {
                matched[i] = true;
                score.true_detections += 1;
            }
            None => score.false_alarms += 1,
        }
    }
    score.missed = truths.len() - score.true_detections;
    score
}

/// Scores a detector log against a manifest of instance positions.
pub fn score_drift_log(
    log: &[DriftRecord],
    manifest: &DriftManifest,
    winsize: usize,
    tolerance_blocks: usize,
) -> DetectionScore {
    let flags: Vec<usize> = log
        .iter()
        .filter(|r| r.decision.is_drift())
        .map(|r| r.block_index)
        .collect();
    score_detections(&flags, &manifest.drift_blocks(winsize), tolerance_blocks)
}

/// Blocks after `drift_block` until accuracy is back within `slack` of the
/// mean over the `window` evaluated blocks before it. `None` when that does
/// not happen within `horizon` blocks or no pre-drift blocks exist.
pub fn recovery_blocks(
    accuracies: &[Option<f64>],
    drift_block: usize,
    window: usize,
    slack: f64,
    horizon: usize,
) -> Option<usize> {
    let before: Vec<f64> = accuracies[..drift_block.min(accuracies.len())]
        .iter()
        .rev()
        .filter_map(|a| *a)
        .take(window)
        .collect();
    if before.is_empty() {
        return None;
    }
    let target = before.iter().sum::<f64>() / before.len() as f64 - slack;
    (1..=horizon).find(|&d| {
        accuracies
            .get(drift_block + d)
            .copied()
            .flatten()
            .is_some_and(|a| a >= target)
    })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub manifest: Option<DriftManifest>,
    pub tolerance_blocks: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            manifest: None,
            tolerance_blocks: 3,
        }
    }
}

/// One line of the per-block CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block_index: usize,
    pub n: usize,
    pub accuracy: Option<f64>,
    pub psi_prev: Option<f64>,
    pub psi_curr: Option<f64>,
    pub epsilon: Option<f64>,
    pub drift: bool,
    pub theta_weight: Option<f64>,
    pub ensemble_size: usize,
    pub deleted_floor: usize,
    pub deleted_drift: usize,
    pub deleted_capacity: usize,
    pub wallclock_ms: f64,
}

impl BlockRow {
    fn from_report(report: &BlockReport, wallclock_ms: f64) -> Self {
        let record = report.drift_record.as_ref();
        Self {
            block_index: report.block_index,
            n: report.n,
            accuracy: report.accuracy,
            psi_prev: record.and_then(|r| r.psi_prev),
            psi_curr: record.map(|r| r.psi_curr),
            epsilon: record.map(|r| r.epsilon),
            drift: report.drift,
            theta_weight: report.theta_weight,
            ensemble_size: report.ensemble_size,
            deleted_floor: report.deleted.floor,
            deleted_drift: report.deleted.drift,
            deleted_capacity: report.deleted.capacity,
            wallclock_ms,
        }
    }
}

pub const BLOCK_CSV_COLUMNS: [&str; 13] = [
    "block_index",
    "n",
    "accuracy",
    "psi_prev",
    "psi_curr",
    "epsilon",
    "drift",
    "theta_weight",
    "ensemble_size",
    "deleted_floor",
    "deleted_drift",
    "deleted_capacity",
    "wallclock_ms",
];

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the per-block log. With `timings` off the `wallclock_ms` column is
/// left empty so that reruns produce identical bytes.
pub fn write_block_csv<W: Write>(
    rows: &[BlockRow],
    writer: W,
    timings: bool,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(BLOCK_CSV_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.block_index.to_string(),
            r.n.to_string(),
            opt(r.accuracy),
            opt(r.psi_prev),
            opt(r.psi_curr),
            opt(r.epsilon),
            u8::from(r.drift).to_string(),
            opt(r.theta_weight),
            r.ensemble_size.to_string(),
            r.deleted_floor.to_string(),
            r.deleted_drift.to_string(),
            r.deleted_capacity.to_string(),
            if timings {
                format!("{:.3}", r.wallclock_ms)
            } else {
                String::new()
            },
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    /// Accuracy pooled over every evaluated instance, i.e. the block-size
    /// weighted mean of block accuracies. Absent when no block was evaluated.
    pub average_accuracy: Option<f64>,
    pub block_accuracies: Vec<Option<f64>>,
    pub blocks: usize,
    pub instances: usize,
    pub evaluated_instances: usize,
    pub drifts_flagged: usize,
    pub flagged_blocks: Vec<usize>,
    pub detection: Option<DetectionScore>,
    pub wallclock_seconds: f64,
    pub config: EcbeConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub rows: Vec<BlockRow>,
    pub reports: Vec<BlockReport>,
    pub drift_log: Vec<DriftRecord>,
}

impl RunOutput {
    pub fn write_block_csv<W: Write>(&self, writer: W, timings: bool) -> Result<(), csv::Error> {
        write_block_csv(&self.rows, writer, timings)
    }
}

trait BlockProcessor {
    fn process(&mut self, block: &crate::stream::DataBlock) -> Result<BlockReport, EnsembleError>;
    fn drift_log(&self) -> Vec<DriftRecord>;
}

impl<L: BaseLearner> BlockProcessor for Ensemble<L> {
    fn process(&mut self, block: &crate::stream::DataBlock) -> Result<BlockReport, EnsembleError> {
        self.process_block(block)
    }
    fn drift_log(&self) -> Vec<DriftRecord> {
        self.detector().log().to_vec()
    }
}

impl<L: BaseLearner> BlockProcessor for MajorityEnsemble<L> {
    fn process(&mut self, block: &crate::stream::DataBlock) -> Result<BlockReport, EnsembleError> {
        self.process_block(block)
    }
    fn drift_log(&self) -> Vec<DriftRecord> {
        Vec::new()
    }
}

fn drive<P: BlockProcessor>(
    processor: &mut P,
    method: Method,
    config: &EcbeConfig,
    mut source: StreamSource,
    options: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    loop {
        let block_started = Instant::now();
        let Some(block) = source.next_block(config.winsize)? else {
            break;
        };
        let report = processor.process(&block)?;
        let ms = block_started.elapsed().as_secs_f64() * 1e3;
        rows.push(BlockRow::from_report(&report, ms));
        reports.push(report);
    }
    let wallclock_seconds = started.elapsed().as_secs_f64();
    if reports.is_empty() {
        return Err(HarnessError::EmptyStream);
    }

    let mut correct = 0;
    let mut evaluated = 0;
    for r in &reports {
        if let Some(c) = r.correct {
            correct += c;
            evaluated += r.n;
        }
    }
    let drift_log = processor.drift_log();
    let flagged_blocks: Vec<usize> = reports
        .iter()
        .filter(|r| r.drift)
        .map(|r| r.block_index)
        .collect();
    let detection = options.manifest.as_ref().map(|m| {
        score_detections(
            &flagged_blocks,
            &m.drift_blocks(config.winsize),
            options.tolerance_blocks,
        )
    });
    let summary = RunSummary {
        method,
        average_accuracy: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        block_accuracies: reports.iter().map(|r| r.accuracy).collect(),
        blocks: reports.len(),
        instances: reports.iter().map(|r| r.n).sum(),
        evaluated_instances: evaluated,
        drifts_flagged: flagged_blocks.len(),
        flagged_blocks,
        detection,
        wallclock_seconds,
        config: config.clone(),
    };
    Ok(RunOutput {
        summary,
        rows,
        reports,
        drift_log,
    })
}

/// Runs the entropy-weighted ensemble over the whole source.
pub fn prequential_run(
    config: &EcbeConfig,
    source: StreamSource,
    options: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    prequential_run_with::<GaussianNaiveBayes>(config, source, options)
}

pub fn prequential_run_with<L: BaseLearner>(
    config: &EcbeConfig,
    source: StreamSource,
    options: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    let mut ensemble = Ensemble::<L>::new(std::sync::Arc::clone(source.schema()), config.clone())?;
    drive(&mut ensemble, Method::Ecbe, config, source, options)
}

/// Same harness with an unweighted majority-vote ensemble that replaces its
/// oldest member and has no drift handling.
pub fn run_baseline(
    config: &EcbeConfig,
    source: StreamSource,
    options: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let mut ensemble = MajorityEnsemble::<GaussianNaiveBayes>::new(
        std::sync::Arc::clone(source.schema()),
        config.k,
    );
    drive(
        &mut ensemble,
        Method::MajorityBaseline,
        config,
        source,
        options,
    )
}
