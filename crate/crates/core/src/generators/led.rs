use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, GeneratorError, HasSchema};
use crate::stream::{Attribute, Instance, Schema};

/// Seven-segment encoding of the digits 0-9. Segment order: top, upper
/// left, upper right, middle, lower left, lower right, bottom.
pub const SEGMENTS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1, 0],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

const ATTRIBUTES: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedParams {
    /// Per-attribute inversion probability.
    pub noise: f64,
}

impl Default for LedParams {
    fn default() -> Self {
        Self { noise: 0.05 }
    }
}

/// 24 binary attributes: seven segments of a uniformly drawn digit followed
/// by 17 irrelevant random bits. The digit is the label.
pub struct LedGenerator {
    params: LedParams,
    schema: Arc<Schema>,
    rng: ChaCha8Rng,
}

impl LedGenerator {
    pub fn new(params: LedParams, seed: u64) -> Result<Self, GeneratorError> {
        check_probability("LED noise", params.noise)?;
        let attrs = (0..ATTRIBUTES)
            .map(|i| Attribute::categorical(format!("att{}", i + 1), ["0", "1"]))
            .collect();
        let labels: Vec<String> = (0..10).map(|d| d.to_string()).collect();
        Ok(Self {
            params,
            schema: Arc::new(Schema::new(attrs, labels)?),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl HasSchema for LedGenerator {
    fn schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }
}

impl Iterator for LedGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        let digit = self.rng.gen_range(0..10);
        let mut bits = [0u8; ATTRIBUTES];
        bits[..7].copy_from_slice(&SEGMENTS[digit]);
        for bit in &mut bits[7..] {
            *bit = u8::from(self.rng.gen_bool(0.5));
        }
        if self.params.noise > 0.0 {
            for bit in &mut bits {
                if self.rng.gen_bool(self.params.noise) {
                    *bit ^= 1;
                }
            }
        }
        Some(Instance::new(
            bits.iter().map(|&b| f64::from(b)).collect(),
            digit,
        ))
    }
}
