use std::sync::Arc;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GeneratorError, HasSchema};
use crate::stream::{Attribute, Instance, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfParams {
    pub centroids: usize,
    pub classes: usize,
    pub dims: usize,
    /// Distance each centroid travels per generated instance.
    pub drift_speed: f64,
}

impl Default for RbfParams {
    fn default() -> Self {
        Self {
            centroids: 50,
            classes: 2,
            dims: 10,
            drift_speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub center: Vec<f64>,
    pub class: usize,
    pub weight: f64,
    pub spread: f64,
    /// Unit vector the centre moves along.
    pub direction: Vec<f64>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dims: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Gaussian clusters around weighted centroids, each carrying a class.
/// With a positive drift speed every centre translates along its own fixed
/// direction after each instance.
pub struct RbfGenerator {
    schema: Arc<Schema>,
    rng: ChaCha8Rng,
    centroids: Vec<Centroid>,
    picker: WeightedIndex<f64>,
    drift_speed: f64,
}

impl RbfGenerator {
    pub fn new(params: &RbfParams, seed: u64) -> Result<Self, GeneratorError> {
        if params.centroids < 2 {
            return Err(GeneratorError::Param(
                "RBF needs at least 2 centroids".into(),
            ));
        }
        if params.classes < 2 || params.dims < 1 {
            return Err(GeneratorError::Param(
                "RBF needs at least 2 classes and 1 dimension".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centroids = (0..params.centroids)
            .map(|_| Centroid {
                center: (0..params.dims).map(|_| rng.gen::<f64>()).collect(),
                class: rng.gen_range(0..params.classes),
                weight: rng.gen::<f64>() + f64::EPSILON,
                spread: rng.gen::<f64>(),
                direction: unit_vector(&mut rng, params.dims),
            })
            .collect();
        Self::build(
            params.classes,
            params.dims,
            params.drift_speed,
            centroids,
            rng,
        )
    }

    /// Uses the given centroids instead of drawing them.
    pub fn with_centroids(
        classes: usize,
        drift_speed: f64,
        centroids: Vec<Centroid>,
        seed: u64,
    ) -> Result<Self, GeneratorError> {
        let dims = centroids.first().map_or(0, |c| c.center.len());
        if centroids.len() < 2 || dims == 0 {
            return Err(GeneratorError::Param(
                "need at least 2 non-empty centroids".into(),
            ));
        }
        if centroids
            .iter()
            .any(|c| c.center.len() != dims || c.direction.len() != dims || c.class >= classes)
        {
            return Err(GeneratorError::Param(
                "inconsistent centroid definitions".into(),
            ));
        }
        Self::build(
            classes,
            dims,
            drift_speed,
            centroids,
            ChaCha8Rng::seed_from_u64(seed),
        )
    }

    fn build(
        classes: usize,
        dims: usize,
        drift_speed: f64,
        centroids: Vec<Centroid>,
        rng: ChaCha8Rng,
    ) -> Result<Self, GeneratorError> {
        if !(drift_speed.is_finite() && drift_speed >= 0.0) {
            return Err(GeneratorError::Param(
                "drift speed must be non-negative".into(),
            ));
        }
        let picker = WeightedIndex::new(centroids.iter().map(|c| c.weight))
            .map_err(|e| GeneratorError::Param(format!("centroid weights: {e}")))?;
        let attrs = (0..dims)
            .map(|i| Attribute::numeric(format!("att{}", i + 1)))
            .collect();
        let labels: Vec<String> = (0..classes).map(|c| format!("class{}", c + 1)).collect();
        Ok(Self {
            schema: Arc::new(Schema::new(attrs, labels)?),
            rng,
            centroids,
            picker,
            drift_speed,
        })
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }
}

impl HasSchema for RbfGenerator {
    fn schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }
}

impl Iterator for RbfGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        let idx = self.picker.sample(&mut self.rng);
        let dims = self.centroids[idx].center.len();
        let offset = unit_vector(&mut self.rng, dims);
        let magnitude: f64 = self.rng.sample::<f64, _>(StandardNormal) * self.centroids[idx].spread;
        let centroid = &self.centroids[idx];
        let x = centroid
            .center
            .iter()
            .zip(&offset)
            .map(|(c, o)| c + o * magnitude)
            .collect();
        let label = centroid.class;
        if self.drift_speed > 0.0 {
            for c in &mut self.centroids {
                for (v, d) in c.center.iter_mut().zip(&c.direction) {
                    *v += d * self.drift_speed;
                }
            }
        }
        Some(Instance::new(x, label))
    }
}
