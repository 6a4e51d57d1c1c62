use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, GeneratorError, HasSchema};
use crate::stream::{Attribute, Instance, Schema};

/// Three attributes uniform in `[0, 10]`; label `0` iff `a1 + a2 <= theta`.
/// The stream is split into equal segments, one per threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeaParams {
    pub thresholds: Vec<f64>,
    /// Probability of flipping the label.
    pub noise: f64,
}

impl Default for SeaParams {
    fn default() -> Self {
        Self {
            thresholds: vec![8.0, 9.0, 7.0, 9.5],
            noise: 0.0,
        }
    }
}

/// Instance positions where the threshold changes.
pub(crate) fn concept_boundaries(thresholds: &[f64], instances: usize) -> Vec<usize> {
    (1..thresholds.len())
        .map(|i| i * instances / thresholds.len())
        .filter(|&pos| {
            thresholds[segment_of(pos, thresholds.len(), instances)]
                != thresholds[segment_of(pos - 1, thresholds.len(), instances)]
        })
        .collect()
}

fn segment_of(position: usize, segments: usize, instances: usize) -> usize {
    ((position as u128 * segments as u128 / instances.max(1) as u128) as usize).min(segments - 1)
}

pub struct SeaGenerator {
    params: SeaParams,
    schema: Arc<Schema>,
    rng: ChaCha8Rng,
    instances: usize,
    position: usize,
}

impl SeaGenerator {
    pub fn new(params: SeaParams, seed: u64, instances: usize) -> Result<Self, GeneratorError> {
        if params.thresholds.is_empty() {
            return Err(GeneratorError::Param(
                "SEA threshold schedule is empty".into(),
            ));
        }
        check_probability("SEA noise", params.noise)?;
        let schema = Schema::new(
            vec![
                Attribute::numeric("attrib1"),
                Attribute::numeric("attrib2"),
                Attribute::numeric("attrib3"),
            ],
            ["0", "1"],
        )?;
        Ok(Self {
            params,
            schema: Arc::new(schema),
            rng: ChaCha8Rng::seed_from_u64(seed),
            instances: instances.max(1),
            position: 0,
        })
    }

    pub fn threshold_at(&self, position: usize) -> f64 {
        let segments = self.params.thresholds.len();
        self.params.thresholds[segment_of(position, segments, self.instances)]
    }
}

impl HasSchema for SeaGenerator {
    fn schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }
}

impl Iterator for SeaGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        let theta = self.threshold_at(self.position);
        let x: Vec<f64> = (0..3).map(|_| self.rng.gen_range(0.0..10.0)).collect();
        let mut label = usize::from(x[0] + x[1] > theta);
        if self.params.noise > 0.0 && self.rng.gen_bool(self.params.noise) {
            label = 1 - label;
        }
        self.position += 1;
        Some(Instance::new(x, label))
    }
}
