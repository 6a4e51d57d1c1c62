use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, GeneratorError, HasSchema};
use crate::stream::{Attribute, Instance, Schema};

/// Rotating hyperplane: `x` uniform in `[0, 1]^d`, label positive iff
/// `sum a_i x_i >= a_0` with `a_0 = sum a_i / 2`. Each coefficient moves by
/// `drift_magnitude` per instance in its current direction, and the
/// direction reverses with `reversal_probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperplaneParams {
    pub dims: usize,
    pub drift_magnitude: f64,
    pub reversal_probability: f64,
    /// Probability of flipping the label.
    pub noise: f64,
    /// Starting coefficients; drawn uniformly from `[0, 1]` when absent.
    pub initial_weights: Option<Vec<f64>>,
}

impl Default for HyperplaneParams {
    fn default() -> Self {
        Self {
            dims: 10,
            drift_magnitude: 0.0,
            reversal_probability: 0.1,
            noise: 0.1,
            initial_weights: None,
        }
    }
}

pub struct HyperplaneGenerator {
    params: HyperplaneParams,
    schema: Arc<Schema>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    directions: Vec<f64>,
}

impl HyperplaneGenerator {
    pub fn new(params: HyperplaneParams, seed: u64) -> Result<Self, GeneratorError> {
        if params.dims < 2 {
            return Err(GeneratorError::Param(
                "hyperplane needs at least 2 dimensions".into(),
            ));
        }
        check_probability("hyperplane noise", params.noise)?;
        check_probability("reversal probability", params.reversal_probability)?;
        if !(params.drift_magnitude.is_finite() && params.drift_magnitude >= 0.0) {
            return Err(GeneratorError::Param(
                "drift magnitude must be non-negative".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = match &params.initial_weights {
            Some(w) if w.len() != params.dims => {
                return Err(GeneratorError::Param(format!(
                    "expected {} initial weights, got {}",
                    params.dims,
                    w.len()
                )))
            }
            Some(w) => w.clone(),
            None => (0..params.dims).map(|_| rng.gen::<f64>()).collect(),
        };
        let directions = (0..params.dims)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let attrs = (0..params.dims)
            .map(|i| Attribute::numeric(format!("att{}", i + 1)))
            .collect();
        let schema = Schema::new(attrs, ["negative", "positive"])?;
        Ok(Self {
            params,
            schema: Arc::new(schema),
            rng,
            weights,
            directions,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl HasSchema for HyperplaneGenerator {
    fn schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }
}

impl Iterator for HyperplaneGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        let x: Vec<f64> = (0..self.params.dims)
            .map(|_| self.rng.gen::<f64>())
            .collect();
        let dot: f64 = x.iter().zip(&self.weights).map(|(x, a)| x * a).sum();
        let a0 = 0.5 * self.weights.iter().sum::<f64>();
        let mut label = usize::from(dot >= a0);
        if self.params.noise > 0.0 && self.rng.gen_bool(self.params.noise) {
            label = 1 - label;
        }
        if self.params.drift_magnitude > 0.0 {
            for (w, dir) in self.weights.iter_mut().zip(self.directions.iter_mut()) {
                *w += *dir * self.params.drift_magnitude;
                if self.params.reversal_probability > 0.0
                    && self.rng.gen_bool(self.params.reversal_probability)
                {
                    *dir = -*dir;
                }
            }
        }
        Some(Instance::new(x, label))
    }
}
