use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_probability, GeneratorError};
use crate::stream::StreamSource;

/// Exchanges labels `swap.0` and `swap.1` between alternate positions: the
/// swap switches on at `positions[0]`, off at `positions[1]`, and so on.
pub fn inject_abrupt_drift(
    source: StreamSource,
    positions: &[usize],
    swap: (usize, usize),
) -> Result<StreamSource, GeneratorError> {
    let label_count = source.schema().label_count();
    if swap.0 >= label_count || swap.1 >= label_count {
        return Err(GeneratorError::Param(format!(
            "swap labels {swap:?} outside domain of size {label_count}"
        )));
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GeneratorError::Param(
            "drift positions must be strictly increasing".into(),
        ));
    }
    if positions.is_empty() || swap.0 == swap.1 {
        return Ok(source);
    }
    let positions = positions.to_vec();
    let mut passed = 0usize;
    Ok(source.map_instances(move |position, mut instance| {
        while passed < positions.len() && positions[passed] as u64 <= position {
            passed += 1;
        }
        if passed % 2 == 1 {
            if instance.label == swap.0 {
                instance.label = swap.1;
            } else if instance.label == swap.1 {
                instance.label = swap.0;
            }
        }
        instance
    }))
}

/// Replaces each label, with probability `p`, by a uniformly chosen
/// different label.
pub fn add_label_noise(
    source: StreamSource,
    p: f64,
    seed: u64,
) -> Result<StreamSource, GeneratorError> {
    check_probability("label noise", p)?;
    let label_count = source.schema().label_count();
    if p == 0.0 {
        return Ok(source);
    }
    if label_count < 2 {
        return Err(GeneratorError::Param(
            "label noise needs at least two labels".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(source.map_instances(move |_, mut instance| {
        if rng.gen_bool(p) {
            let other = rng.gen_range(0..label_count - 1);
            instance.label = if other >= instance.label {
                other + 1
            } else {
                other
            };
        }
        instance
    }))
}
