//! Label-histogram entropy and the block-wise drift test built on it.
//!
//! For each block the detector receives the entropy deviation
//! `psi = |H(predicted) - H(true)|`. Two adjacent blocks are compared against
//! twice the Hoeffding radius `eps = sqrt(R^2 ln(1/alpha) / (2n))`: drift is
//! declared when `|psi_prev - psi_curr| > 2 eps`, or when either deviation on
//! its own exceeds `2 eps`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::label_counts;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("probability vector has invalid entry {0}")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
    #[error("label sequences differ in length ({predicted} vs {truth})")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("label sequences are empty")]
    Empty,
    #[error("label {label} outside domain of size {label_count}")]
    LabelOutOfRange { label: usize, label_count: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("entropy range must be finite and non-negative, got {0}")]
    Range(f64),
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("deviation must be finite and non-negative, got {0}")]
    Deviation(f64),
    #[error("block {got} observed after block {last}")]
    OutOfOrder { last: usize, got: usize },
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64, EntropyError> {
    let mut sum = 0.0;
    for &pj in p {
        if !(0.0..=1.0).contains(&pj) {
            return Err(EntropyError::InvalidProbability(pj));
        }
        sum += pj;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EntropyError::BadSum(sum));
    }
    Ok(-p
        .iter()
        .filter(|&&pj| pj > 0.0)
        .map(|&pj| pj * pj.ln())
        .sum::<f64>())
}

pub(crate) fn entropy_of_counts(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Entropy of the empirical distribution of `labels` over `0..label_count`.
pub fn label_entropy(labels: &[usize], label_count: usize) -> Result<f64, EntropyError> {
    if labels.is_empty() {
        return Err(EntropyError::Empty);
    }
    let counts = label_counts(labels.iter().copied(), label_count)
        .map_err(|label| EntropyError::LabelOutOfRange { label, label_count })?;
    Ok(entropy_of_counts(&counts, labels.len()))
}

/// `|H(predicted) - H(truth)|`. This compares label distributions, not
/// per-instance agreement: any permutation of `truth` has deviation zero.
pub fn entropy_deviation(
    predicted: &[usize],
    truth: &[usize],
    label_count: usize,
) -> Result<f64, EntropyError> {
    if predicted.len() != truth.len() {
        return Err(EntropyError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    Ok((label_entropy(predicted, label_count)? - label_entropy(truth, label_count)?).abs())
}

pub fn hoeffding_epsilon(range: f64, alpha: f64, n: usize) -> Result<f64, EntropyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EntropyError::Alpha(alpha));
    }
    if !(range.is_finite() && range >= 0.0) {
        return Err(EntropyError::Range(range));
    }
    if n == 0 {
        return Err(EntropyError::ZeroSamples);
    }
    Ok((range * range * (1.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftDecision {
    Stable,
    Drift,
}

impl DriftDecision {
    pub fn is_drift(self) -> bool {
        self == DriftDecision::Drift
    }
}

/// One observed block. `psi_prev` is absent for the first observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub block_index: usize,
    pub psi_prev: Option<f64>,
    pub psi_curr: f64,
    pub epsilon: f64,
    pub decision: DriftDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub alpha: f64,
    /// Range `R` of the deviation; `ln |y|` bounds it.
    pub range: f64,
    /// Scales the block size before it enters the Hoeffding radius.
    pub n_multiplier: usize,
    /// Forget the previous deviation after a drift, so the block that follows
    /// is recorded without a decision. Off by default.
    #[serde(default)]
    pub rearm_after_drift: bool,
}

impl DetectorConfig {
    pub fn for_labels(label_count: usize, alpha: f64) -> Self {
        Self {
            alpha,
            range: (label_count as f64).ln(),
            n_multiplier: 1,
            rearm_after_drift: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriftDetector {
    config: DetectorConfig,
    prev_deviation: Option<f64>,
    log: Vec<DriftRecord>,
}

impl DriftDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, EntropyError> {
        // Validates alpha and range up front.
        hoeffding_epsilon(config.range, config.alpha, 1)?;
        if config.n_multiplier == 0 {
            return Err(EntropyError::ZeroSamples);
        }
        Ok(Self {
            config,
            prev_deviation: None,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn prev_deviation(&self) -> Option<f64> {
        self.prev_deviation
    }

    pub fn log(&self) -> &[DriftRecord] {
        &self.log
    }

    pub fn epsilon(&self, n: usize) -> Result<f64, EntropyError> {
        hoeffding_epsilon(
            self.config.range,
            self.config.alpha,
            n * self.config.n_multiplier,
        )
    }

    /// Records the deviation of block `block_index` (of size `n`) and decides
    /// whether a drift occurred between it and the previously observed block.
    pub fn observe(
        &mut self,
        block_index: usize,
        psi_curr: f64,
        n: usize,
    ) -> Result<DriftRecord, EntropyError> {
        if !(psi_curr.is_finite() && psi_curr >= 0.0) {
            return Err(EntropyError::Deviation(psi_curr));
        }
        if let Some(last) = self.log.last() {
            if block_index <= last.block_index {
                return Err(EntropyError::OutOfOrder {
                    last: last.block_index,
                    got: block_index,
                });
            }
        }
        let epsilon = self.epsilon(n)?;
        let threshold = 2.0 * epsilon;
        let decision = match self.prev_deviation {
            None => DriftDecision::Stable,
            Some(psi_prev) => {
                let delta = (psi_prev - psi_curr).abs();
                if delta > threshold || psi_prev > threshold || psi_curr > threshold {
                    DriftDecision::Drift
                } else {
                    DriftDecision::Stable
                }
            }
        };
        let record = DriftRecord {
            block_index,
            psi_prev: self.prev_deviation,
            psi_curr,
            epsilon,
            decision,
        };
        self.prev_deviation = if decision.is_drift() && self.config.rearm_after_drift {
            None
        } else {
            Some(psi_curr)
        };
        self.log.push(record.clone());
        Ok(record)
    }

    pub fn reset(&mut self) {
        self.prev_deviation = None;
        self.log.clear();
    }

    pub fn flagged_blocks(&self) -> Vec<usize> {
        self.log
            .iter()
            .filter(|r| r.decision.is_drift())
            .map(|r| r.block_index)
            .collect()
    }

    /// Writes the log as CSV, see [`write_drift_log_csv`].
    pub fn write_log_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        write_drift_log_csv(&self.log, writer)
    }
}

/// Columns `block_index,psi_prev,psi_curr,epsilon,decision`; `psi_prev` is
/// empty on the first record.
pub fn write_drift_log_csv<W: Write>(log: &[DriftRecord], writer: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["block_index", "psi_prev", "psi_curr", "epsilon", "decision"])?;
    for r in log {
        out.write_record([
            r.block_index.to_string(),
            r.psi_prev.map(|p| p.to_string()).unwrap_or_default(),
            r.psi_curr.to_string(),
            r.epsilon.to_string(),
            match r.decision {
                DriftDecision::Stable => "stable".to_string(),
                DriftDecision::Drift => "drift".to_string(),
            },
        ])?;
    }
    out.flush()?;
    Ok(())
}
