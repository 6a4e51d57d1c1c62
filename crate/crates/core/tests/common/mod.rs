#![allow(dead_code)]

use std::sync::Arc;

use ecbe::generators::{GeneratorConfig, GeneratorKind, SeaParams};
use ecbe::learner::{BaseLearner, LearnerError};
use ecbe::stream::{Attribute, DataBlock, Instance, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reads the label straight out of the first feature, so its deviation is
/// always zero.
#[derive(Debug, Clone)]
pub struct Oracle;

impl BaseLearner for Oracle {
    fn new_learner(_: Arc<Schema>) -> Self {
        Oracle
    }
    fn train_block(&mut self, _: &DataBlock) -> Result<(), LearnerError> {
        Ok(())
    }
    fn predict(&self, features: &[f64]) -> usize {
        features[0] as usize
    }
}

pub fn oracle_schema(labels: usize) -> Arc<Schema> {
    let names: Vec<String> = (0..labels).map(|l| format!("c{l}")).collect();
    Arc::new(Schema::new(vec![Attribute::numeric("label_copy")], names).unwrap())
}

pub fn oracle_block(index: usize, labels: &[usize]) -> DataBlock {
    DataBlock::new(
        index,
        labels
            .iter()
            .map(|&l| Instance::new(vec![l as f64], l))
            .collect(),
    )
}

pub const SWAP_BLOCKS: [usize; 5] = [6, 11, 16, 21, 26];

/// 3000 SEA instances at threshold 6.5 with five 0/1 label swaps, one inside
/// each of [`SWAP_BLOCKS`] (winsize 100) at a seeded offset in `20..80`.
pub fn swap_stream_config(seed: u64) -> GeneratorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
    let positions = SWAP_BLOCKS
        .iter()
        .map(|b| b * 100 + rng.gen_range(20..80))
        .collect();
    GeneratorConfig::new(
        GeneratorKind::Sea(SeaParams {
            thresholds: vec![6.5],
            noise: 0.0,
        }),
        seed,
        3000,
    )
    .with_swaps(positions, (0, 1))
}
