//! The entropy-weighted ensemble and its per-block update loop.
//!
//! Each block is handled in a fixed order: classify with the weights as they
//! stood on arrival, rescale every member by how far its predicted-label
//! entropy strays from the true-label entropy, test for drift, prune, add a
//! member trained on the block, then train everyone on the block.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{entropy_of_counts, DetectorConfig, DriftDetector, DriftRecord, EntropyError};
use crate::learner::{BaseLearner, GaussianNaiveBayes, LearnerError};
use crate::stream::{label_counts, DataBlock, Schema};
use crate::weighting::{update_weight, weight_floor, WeightError, WeightLedger, WeightPolicy};

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ensemble has no members")]
    Empty,
    #[error("vote and weight counts differ ({votes} vs {weights})")]
    VoteMismatch { votes: usize, weights: usize },
    #[error("vote for label {label} outside domain of size {label_count}")]
    VoteOutOfRange { label: usize, label_count: usize },
    #[error("block is empty")]
    EmptyBlock,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcbeConfig {
    /// Maximum number of members.
    pub k: usize,
    pub winsize: usize,
    /// Confidence for both the Hoeffding radius and the weight floor.
    pub alpha: f64,
    /// Growth factor for members whose deviation is exactly zero.
    pub beta: f64,
    /// Range of the entropy deviation; `ln |y|` when unset.
    pub range: Option<f64>,
    pub hoeffding_n_multiplier: usize,
    /// See [`DetectorConfig::rearm_after_drift`].
    pub rearm_after_drift: bool,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for EcbeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            winsize: 2000,
            alpha: 0.05,
            beta: 2.0,
            range: None,
            hoeffding_n_multiplier: 1,
            rearm_after_drift: false,
            w_min: WeightPolicy::W_MIN,
            w_max: WeightPolicy::W_MAX,
        }
    }
}

impl EcbeConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.k == 0 {
            return Err(EnsembleError::Config("k must be at least 1".into()));
        }
        if self.winsize == 0 {
            return Err(EnsembleError::Config("winsize must be at least 1".into()));
        }
        if self.hoeffding_n_multiplier == 0 {
            return Err(EnsembleError::Config(
                "hoeffding_n_multiplier must be at least 1".into(),
            ));
        }
        if let Some(range) = self.range {
            if !(range.is_finite() && range >= 0.0) {
                return Err(EnsembleError::Config(format!(
                    "invalid entropy range {range}"
                )));
            }
        }
        self.policy()
            .validate()
            .map_err(|e| EnsembleError::Config(e.to_string()))
    }

    pub fn policy(&self) -> WeightPolicy {
        WeightPolicy {
            beta: self.beta,
            alpha: self.alpha,
            w_init: 1.0,
            w_min: self.w_min,
            w_max: self.w_max,
        }
    }

    fn detector_config(&self, label_count: usize) -> DetectorConfig {
        DetectorConfig {
            alpha: self.alpha,
            range: self.range.unwrap_or_else(|| (label_count as f64).ln()),
            n_multiplier: self.hoeffding_n_multiplier,
            rearm_after_drift: self.rearm_after_drift,
        }
    }
}

/// Weighted plurality vote. Ties go to the smallest label.
pub fn weighted_vote(
    votes: &[usize],
    weights: &[f64],
    label_count: usize,
) -> Result<usize, EnsembleError> {
    if votes.is_empty() {
        return Err(EnsembleError::Empty);
    }
    if votes.len() != weights.len() {
        return Err(EnsembleError::VoteMismatch {
            votes: votes.len(),
            weights: weights.len(),
        });
    }
    let mut tally = vec![0.0; label_count];
    for (&label, &w) in votes.iter().zip(weights) {
        *tally
            .get_mut(label)
            .ok_or(EnsembleError::VoteOutOfRange { label, label_count })? += w;
    }
    Ok(argmax_first(&tally))
}

fn argmax_first(tally: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in tally.iter().enumerate().skip(1) {
        if v > tally[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Member<L> {
    pub learner: L,
    pub weight: f64,
    /// Creation sequence number; lower is older.
    pub id: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deletions {
    /// Removed for falling below the weight floor.
    pub floor: usize,
    /// Minimum-weight member removed because a drift was confirmed.
    pub drift: usize,
    /// Minimum-weight member removed to make room for the new member.
    pub capacity: usize,
}

impl Deletions {
    pub fn total(&self) -> usize {
        self.floor + self.drift + self.capacity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block_index: usize,
    pub n: usize,
    /// The block went to growing the ensemble rather than the full update.
    pub warmup: bool,
    /// Pre-training predictions; absent when no member existed yet.
    pub predictions: Option<Vec<usize>>,
    pub correct: Option<usize>,
    pub accuracy: Option<f64>,
    /// Detector record; absent on warm-up blocks.
    pub drift_record: Option<DriftRecord>,
    /// Per-member deviations, oldest member first, for members present on arrival.
    pub member_psi: Vec<f64>,
    pub drift: bool,
    pub theta_weight: Option<f64>,
    pub ledger_len: usize,
    pub deleted: Deletions,
    pub ensemble_size_before: usize,
    pub ensemble_size: usize,
}

/// Entropy-weighted ensemble of incremental learners.
#[derive(Debug, Clone)]
pub struct Ensemble<L = GaussianNaiveBayes> {
    schema: Arc<Schema>,
    config: EcbeConfig,
    policy: WeightPolicy,
    members: Vec<Member<L>>,
    ledger: WeightLedger,
    theta_weight: Option<f64>,
    detector: DriftDetector,
    next_id: u64,
}

impl<L: BaseLearner> Ensemble<L> {
    pub fn new(schema: Arc<Schema>, config: EcbeConfig) -> Result<Self, EnsembleError> {
        config.validate()?;
        let detector = DriftDetector::new(config.detector_config(schema.label_count()))?;
        Ok(Self {
            policy: config.policy(),
            schema,
            config,
            members: Vec::new(),
            ledger: WeightLedger::new(),
            theta_weight: None,
            detector,
            next_id: 0,
        })
    }

    pub fn config(&self) -> &EcbeConfig {
        &self.config
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn members(&self) -> &[Member<L>] {
        &self.members
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ledger(&self) -> &WeightLedger {
        &self.ledger
    }

    pub fn theta_weight(&self) -> Option<f64> {
        self.theta_weight
    }

    pub fn detector(&self) -> &DriftDetector {
        &self.detector
    }

    /// Drops all members and history, keeping the configuration.
    pub fn reset(&mut self) {
        self.members.clear();
        self.ledger.clear();
        self.theta_weight = None;
        self.detector.reset();
        self.next_id = 0;
    }

    /// Sets member weights directly, oldest first. Values are clamped.
    pub fn set_weights(&mut self, weights: &[f64]) {
        for (m, &w) in self.members.iter_mut().zip(weights) {
            m.weight = w.clamp(self.policy.w_min, self.policy.w_max);
        }
    }

    fn member_predictions(&self, block: &DataBlock) -> Vec<Vec<usize>> {
        self.members
            .par_iter()
            .map(|m| m.learner.predict_block(block))
            .collect()
    }

    fn vote(&self, member_preds: &[Vec<usize>], n: usize) -> Vec<usize> {
        let label_count = self.schema.label_count();
        let mut tally = vec![0.0; label_count];
        (0..n)
            .map(|i| {
                tally.iter_mut().for_each(|t| *t = 0.0);
                for (preds, m) in member_preds.iter().zip(&self.members) {
                    tally[preds[i]] += m.weight;
                }
                argmax_first(&tally)
            })
            .collect()
    }

    /// Weighted-vote predictions under the current weights.
    pub fn classify_block(&self, block: &DataBlock) -> Result<Vec<usize>, EnsembleError> {
        if self.members.is_empty() {
            return Err(EnsembleError::Empty);
        }
        Ok(self.vote(&self.member_predictions(block), block.len()))
    }

    fn spawn_member(&mut self, block: &DataBlock) -> Result<Member<L>, EnsembleError> {
        let mut learner = L::new_learner(Arc::clone(&self.schema));
        learner.train_block(block)?;
        let id = self.next_id;
        self.next_id += 1;
        Ok(Member {
            learner,
            weight: self.policy.w_init,
            id,
        })
    }

    /// Index of the minimum-weight member, oldest among ties.
    fn min_weight_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, m) in self.members.iter().enumerate() {
            match best {
                Some(b) if self.members[b].weight <= m.weight => {}
                _ => best = Some(i),
            }
        }
        best
    }

    fn delete_min_weight(&mut self) -> bool {
        match self.min_weight_index() {
            Some(i) => {
                self.members.remove(i);
                true
            }
            None => false,
        }
    }

    /// Removes members below `theta`, always keeping the heaviest one.
    fn prune_below(&mut self, theta: f64) -> usize {
        let before = self.members.len();
        if self.members.iter().all(|m| m.weight < theta) {
            if let Some(keep) = self.max_weight_index() {
                let survivor = self.members.swap_remove(keep);
                self.members = vec![survivor];
            }
        } else {
            self.members.retain(|m| m.weight >= theta);
        }
        before - self.members.len()
    }

    fn max_weight_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, m) in self.members.iter().enumerate() {
            match best {
                Some(b) if self.members[b].weight >= m.weight => {}
                _ => best = Some(i),
            }
        }
        best
    }

    fn train_all(&mut self, block: &DataBlock) -> Result<(), EnsembleError> {
        self.members
            .par_iter_mut()
            .try_for_each(|m| m.learner.train_block(block))?;
        Ok(())
    }

    /// Runs one block through the ensemble and reports what happened.
    pub fn process_block(&mut self, block: &DataBlock) -> Result<BlockReport, EnsembleError> {
        let n = block.len();
        if n == 0 {
            return Err(EnsembleError::EmptyBlock);
        }
        let label_count = self.schema.label_count();
        let truth: Vec<usize> = block.labels().collect();
        let size_before = self.members.len();

        if self.members.len() < self.config.k {
            // Warm-up: score with whatever members exist, then grow by one.
            let predictions = if self.members.is_empty() {
                None
            } else {
                Some(self.classify_block(block)?)
            };
            let member = self.spawn_member(block)?;
            self.members.push(member);
            let correct = predictions.as_ref().map(|p| count_correct(p, &truth));
            return Ok(BlockReport {
                block_index: block.block_index,
                n,
                warmup: true,
                accuracy: correct.map(|c| c as f64 / n as f64),
                predictions,
                correct,
                drift_record: None,
                member_psi: Vec::new(),
                drift: false,
                theta_weight: self.theta_weight,
                ledger_len: self.ledger.len(),
                deleted: Deletions::default(),
                ensemble_size_before: size_before,
                ensemble_size: self.members.len(),
            });
        }

        let member_preds = self.member_predictions(block);
        let predictions = self.vote(&member_preds, n);
        let correct = count_correct(&predictions, &truth);

        let truth_counts = label_counts(truth.iter().copied(), label_count)
            .map_err(|label| EntropyError::LabelOutOfRange { label, label_count })?;
        let truth_entropy = entropy_of_counts(&truth_counts, n);
        let entropy_of = |preds: &[usize]| -> Result<f64, EnsembleError> {
            let counts = label_counts(preds.iter().copied(), label_count)
                .map_err(|label| EntropyError::LabelOutOfRange { label, label_count })?;
            Ok(entropy_of_counts(&counts, n))
        };
        let psi_curr = (entropy_of(&predictions)? - truth_entropy).abs();

        let mut member_psi = Vec::with_capacity(self.members.len());
        for (member, preds) in self.members.iter_mut().zip(&member_preds) {
            let h = (label_counts(preds.iter().copied(), label_count)
                .map(|c| entropy_of_counts(&c, n))
                .map_err(|label| EntropyError::LabelOutOfRange { label, label_count })?
                - truth_entropy)
                .abs();
            member.weight = update_weight(member.weight, h, &self.policy)?;
            self.ledger.push(member.weight);
            member_psi.push(h);
        }

        let record = self.detector.observe(block.block_index, psi_curr, n)?;
        let drift = record.decision.is_drift();
        let mut deleted = Deletions::default();
        if drift {
            if self.delete_min_weight() {
                deleted.drift = 1;
            }
            if let Some(theta) = weight_floor(&self.ledger, self.config.alpha)? {
                self.theta_weight = Some(theta);
            }
            self.ledger.clear();
        }

        if let Some(theta) = self.theta_weight {
            deleted.floor = self.prune_below(theta);
        }

        let newcomer = self.spawn_member(block)?;
        if self.members.len() >= self.config.k && self.delete_min_weight() {
            deleted.capacity = 1;
        }
        self.members.push(newcomer);
        self.train_all(block)?;

        Ok(BlockReport {
            block_index: block.block_index,
            n,
            warmup: false,
            predictions: Some(predictions),
            correct: Some(correct),
            accuracy: Some(correct as f64 / n as f64),
            drift_record: Some(record),
            member_psi,
            drift,
            theta_weight: self.theta_weight,
            ledger_len: self.ledger.len(),
            deleted,
            ensemble_size_before: size_before,
            ensemble_size: self.members.len(),
        })
    }
}

pub(crate) fn count_correct(predictions: &[usize], truth: &[usize]) -> usize {
    predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count()
}
