//! Incremental base classifiers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{AttributeKind, DataBlock, Instance, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("label {label} outside domain of size {label_count}")]
    LabelOutOfRange { label: usize, label_count: usize },
    #[error("instance has {found} features, schema declares {expected}")]
    Arity { expected: usize, found: usize },
}

/// A classifier that can be trained one block at a time.
pub trait BaseLearner: Clone + Send + Sync {
    fn new_learner(schema: Arc<Schema>) -> Self;

    fn train_block(&mut self, block: &DataBlock) -> Result<(), LearnerError>;

    fn predict(&self, features: &[f64]) -> usize;

    fn predict_block(&self, block: &DataBlock) -> Vec<usize> {
        block
            .instances
            .iter()
            .map(|i| self.predict(&i.features))
            .collect()
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.count > 0.0 {
            (self.m2 / self.count).max(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AttributeStats {
    /// Indexed by class.
    Numeric(Vec<Moments>),
    /// `[class][value]` counts.
    Categorical(Vec<Vec<u64>>),
}

/// Naive Bayes with Gaussian likelihoods for numeric attributes and
/// Laplace-smoothed frequencies for categorical ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    #[serde(skip)]
    schema: Option<Arc<Schema>>,
    class_counts: Vec<u64>,
    stats: Vec<AttributeStats>,
}

impl GaussianNaiveBayes {
    pub const VARIANCE_FLOOR: f64 = 1e-9;

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    pub fn total(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    /// Streaming moments of numeric attribute `attr` for class `class`.
    pub fn moments(&self, attr: usize, class: usize) -> Option<Moments> {
        match self.stats.get(attr)? {
            AttributeStats::Numeric(per_class) => per_class.get(class).copied(),
            AttributeStats::Categorical(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn train_instance(&mut self, instance: &Instance) -> Result<(), LearnerError> {
        let label_count = self.class_counts.len();
        if instance.label >= label_count {
            return Err(LearnerError::LabelOutOfRange {
                label: instance.label,
                label_count,
            });
        }
        if instance.features.len() != self.stats.len() {
            return Err(LearnerError::Arity {
                expected: self.stats.len(),
                found: instance.features.len(),
            });
        }
        self.class_counts[instance.label] += 1;
        for (stats, &x) in self.stats.iter_mut().zip(&instance.features) {
            match stats {
                AttributeStats::Numeric(per_class) => per_class[instance.label].push(x),
                AttributeStats::Categorical(counts) => counts[instance.label][x as usize] += 1,
            }
        }
        Ok(())
    }

    fn log_posterior(&self, class: usize, features: &[f64], total: f64) -> f64 {
        let count = self.class_counts[class] as f64;
        let mut score = (count / total).ln();
        for (stats, &x) in self.stats.iter().zip(features) {
            score += match stats {
                AttributeStats::Numeric(per_class) => {
                    let m = &per_class[class];
                    let var = m.variance().max(Self::VARIANCE_FLOOR);
                    let d = x - m.mean;
                    -0.5 * (std::f64::consts::TAU * var).ln() - d * d / (2.0 * var)
                }
                AttributeStats::Categorical(counts) => {
                    let row = &counts[class];
                    let seen = row.get(x as usize).copied().unwrap_or(0) as f64;
                    ((seen + 1.0) / (count + row.len() as f64)).ln()
                }
            };
        }
        score
    }
}

impl PartialEq for GaussianNaiveBayes {
    fn eq(&self, other: &Self) -> bool {
        self.class_counts == other.class_counts && self.stats == other.stats
    }
}

impl BaseLearner for GaussianNaiveBayes {
    fn new_learner(schema: Arc<Schema>) -> Self {
        let classes = schema.label_count();
        let stats = schema
            .attributes()
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => {
                    AttributeStats::Numeric(vec![Moments::default(); classes])
                }
                AttributeKind::Categorical(values) => {
                    AttributeStats::Categorical(vec![vec![0; values.len()]; classes])
                }
            })
            .collect();
        Self {
            schema: Some(schema),
            class_counts: vec![0; classes],
            stats,
        }
    }

    fn train_block(&mut self, block: &DataBlock) -> Result<(), LearnerError> {
        block
            .instances
            .iter()
            .try_for_each(|instance| self.train_instance(instance))
    }

    /// Untrained models predict label 0; ties go to the smallest label.
    fn predict(&self, features: &[f64]) -> usize {
        let total = self.total();
        if total == 0 {
            return 0;
        }
        let total = total as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for class in 0..self.class_counts.len() {
            if self.class_counts[class] == 0 {
                continue;
            }
            let score = self.log_posterior(class, features, total);
            if score > best_score {
                best_score = score;
                best = class;
            }
        }
        best
    }
}

impl GaussianNaiveBayes {
    pub fn schema(&self) -> Option<&Arc<Schema>> {
        self.schema.as_ref()
    }
}
