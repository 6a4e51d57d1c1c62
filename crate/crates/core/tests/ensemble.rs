mod common;

use std::sync::Arc;

use common::{oracle_block, oracle_schema, Oracle};
use ecbe::entropy::{hoeffding_epsilon, label_entropy};
use ecbe::learner::{BaseLearner, LearnerError};
use ecbe::stream::{Attribute, DataBlock, Instance, Schema};
use ecbe::{EcbeConfig, Ensemble, GaussianNaiveBayes};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(k: usize, winsize: usize) -> EcbeConfig {
    EcbeConfig {
        k,
        winsize,
        ..EcbeConfig::default()
    }
}

/// Two numeric attributes; label 1 iff `x0 > cut`, so class 1 has prior
/// `1 - cut` before any swap.
fn threshold_block(
    rng: &mut ChaCha8Rng,
    index: usize,
    n: usize,
    cut: f64,
    swapped: bool,
) -> DataBlock {
    DataBlock::new(
        index,
        (0..n)
            .map(|_| {
                let x: Vec<f64> = vec![rng.gen(), rng.gen()];
                let label = usize::from(x[0] > cut);
                Instance::new(x, if swapped { 1 - label } else { label })
            })
            .collect(),
    )
}

fn threshold_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            vec![Attribute::numeric("x0"), Attribute::numeric("x1")],
            ["neg", "pos"],
        )
        .unwrap(),
    )
}

#[test]
fn warm_up_grows_one_member_per_block_without_updates() {
    let k = 5;
    let mut ens = Ensemble::<Oracle>::new(oracle_schema(3), config(k, 10)).unwrap();
    for b in 0..k {
        let report = ens.process_block(&oracle_block(b, &[0, 1, 2, 2])).unwrap();
        assert!(report.warmup);
        assert_eq!(report.ensemble_size, b + 1);
        assert!(report.drift_record.is_none());
        assert!(report.member_psi.is_empty());
        assert_eq!(report.predictions.is_some(), b > 0);
        assert!(ens.weights().iter().all(|&w| w == 1.0));
        assert!(ens.ledger().is_empty());
    }
    assert!(ens.detector().log().is_empty());
    let report = ens.process_block(&oracle_block(k, &[0, 1, 2, 2])).unwrap();
    assert!(!report.warmup);
    assert!(report.drift_record.is_some());
}

#[test]
fn perfect_members_double_each_block() {
    let k = 3;
    let mut ens = Ensemble::<Oracle>::new(oracle_schema(2), config(k, 10)).unwrap();
    for b in 0..k {
        ens.process_block(&oracle_block(b, &[0, 1, 1, 1])).unwrap();
    }
    for b in k..k + 12 {
        let before: Vec<(u64, f64)> = ens.members().iter().map(|m| (m.id, m.weight)).collect();
        let report = ens.process_block(&oracle_block(b, &[0, 1, 1, 1])).unwrap();
        assert!(report.member_psi.iter().all(|&p| p == 0.0));
        assert!(!report.drift);
        assert_eq!(report.deleted.floor + report.deleted.drift, 0);
        assert_eq!(report.deleted.capacity, 1);
        for m in ens.members() {
            if let Some(&(_, w)) = before.iter().find(|(id, _)| *id == m.id) {
                assert_eq!(m.weight, 2.0 * w);
            } else {
                assert_eq!(m.weight, 1.0);
            }
        }
    }
}

#[test]
fn classification_uses_state_from_block_arrival() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ens = Ensemble::<GaussianNaiveBayes>::new(threshold_schema(), config(3, 100)).unwrap();
    for b in 0..20 {
        let block = threshold_block(&mut rng, b, 100, 0.3, b >= 10);
        let snapshot = ens.clone();
        let report = ens.process_block(&block).unwrap();
        if snapshot.is_empty() {
            assert!(report.predictions.is_none());
            continue;
        }
        let expected = snapshot.classify_block(&block).unwrap();
        assert_eq!(report.predictions.as_ref(), Some(&expected));
        let correct = expected
            .iter()
            .zip(block.labels())
            .filter(|(p, t)| **p == *t)
            .count();
        assert_eq!(report.correct, Some(correct));
    }
}

#[test]
fn reset_matches_a_fresh_ensemble() {
    let blocks: Vec<DataBlock> = {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..15)
            .map(|b| threshold_block(&mut rng, b, 80, 0.25, (6..10).contains(&b)))
            .collect()
    };
    let cfg = config(4, 80);
    let mut used = Ensemble::<GaussianNaiveBayes>::new(threshold_schema(), cfg.clone()).unwrap();
    for block in &blocks {
        used.process_block(block).unwrap();
    }
    used.reset();
    assert!(used.is_empty());
    assert!(used.ledger().is_empty());
    assert!(used.detector().log().is_empty());
    assert_eq!(used.theta_weight(), None);
    assert_eq!(used.config(), &cfg);

    let mut fresh = Ensemble::<GaussianNaiveBayes>::new(threshold_schema(), cfg).unwrap();
    for block in &blocks {
        assert_eq!(
            used.process_block(block).unwrap(),
            fresh.process_block(block).unwrap()
        );
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ens =
            Ensemble::<GaussianNaiveBayes>::new(threshold_schema(), config(5, 50)).unwrap();
        (0..30)
            .map(|b| {
                let block = threshold_block(&mut rng, b, 50, 0.2, b % 10 >= 5);
                serde_json::to_string(&ens.process_block(&block).unwrap()).unwrap()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

/// Perfect when born on a block index divisible by three, otherwise it
/// mislabels every instance whose second feature is below 0.3.
#[derive(Debug, Clone)]
struct Picky {
    birth: Option<usize>,
}

impl BaseLearner for Picky {
    fn new_learner(_: Arc<Schema>) -> Self {
        Picky { birth: None }
    }
    fn train_block(&mut self, block: &DataBlock) -> Result<(), LearnerError> {
        self.birth.get_or_insert(block.block_index);
        Ok(())
    }
    fn predict(&self, features: &[f64]) -> usize {
        let label = features[0] as usize;
        if self.is_perfect() || features[1] >= 0.3 {
            label
        } else {
            (label + 1) % 3
        }
    }
}

impl Picky {
    fn is_perfect(&self) -> bool {
        self.birth.is_some_and(|b| b % 3 == 0)
    }
}

#[test]
fn perfect_members_survive_the_weight_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let schema = Arc::new(
        Schema::new(
            vec![Attribute::numeric("label_copy"), Attribute::numeric("u")],
            ["a", "b", "c"],
        )
        .unwrap(),
    );
    // A tiny range makes the detector fire on any deviation.
    let cfg = EcbeConfig {
        range: Some(1e-3),
        ..config(5, 60)
    };
    let mut ens = Ensemble::<Picky>::new(schema, cfg).unwrap();
    let mut floors_seen = 0;
    for b in 0..60 {
        let block = DataBlock::new(
            b,
            (0..60)
                .map(|_| {
                    let label = if rng.gen_bool(0.6) {
                        0
                    } else {
                        rng.gen_range(1..3)
                    };
                    Instance::new(vec![label as f64, rng.gen()], label)
                })
                .collect(),
        );
        let perfect_before: Vec<u64> = ens
            .members()
            .iter()
            .filter(|m| m.learner.is_perfect())
            .map(|m| m.id)
            .collect();
        let report = ens.process_block(&block).unwrap();
        let Some(theta) = report.theta_weight else {
            continue;
        };
        floors_seen += 1;
        for m in ens.members().iter().filter(|m| m.learner.is_perfect()) {
            assert!(
                m.weight >= theta,
                "perfect member {} at {} below {theta}",
                m.id,
                m.weight
            );
        }
        let lost = perfect_before
            .iter()
            .filter(|id| ens.members().iter().all(|m| m.id != **id))
            .count();
        assert!(lost <= report.deleted.capacity + report.deleted.drift);
        assert!(report.deleted.floor == 0 || lost <= report.deleted.capacity);
    }
    assert!(floors_seen > 10, "floor never set");
}

#[test]
fn boundary_label_swap_is_invisible_to_the_entropy_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = config(5, 500);
    let mut ens = Ensemble::<GaussianNaiveBayes>::new(threshold_schema(), cfg.clone()).unwrap();
    for b in 0..10 {
        ens.process_block(&threshold_block(&mut rng, b, 500, 0.2, false))
            .unwrap();
    }
    let clean = threshold_block(&mut rng, 10, 500, 0.2, false);
    let mut swapped = clean.clone();
    for inst in &mut swapped.instances {
        inst.label = 1 - inst.label;
    }
    let truth: Vec<usize> = clean.labels().collect();
    let swapped_truth: Vec<usize> = swapped.labels().collect();
    // Exchanging two labels permutes the histogram, which keeps its entropy.
    assert_eq!(
        label_entropy(&truth, 2).unwrap(),
        label_entropy(&swapped_truth, 2).unwrap()
    );

    let report = ens.process_block(&swapped).unwrap();
    let record = report.drift_record.unwrap();
    let eps = hoeffding_epsilon(2f64.ln(), cfg.alpha, 500).unwrap();
    assert!(report.accuracy.unwrap() < 0.1);
    assert!(
        record.psi_curr < 2.0 * eps,
        "psi {} vs 2eps {}",
        record.psi_curr,
        2.0 * eps
    );
    assert!(!report.drift);
}

fn random_block(rng: &mut ChaCha8Rng, index: usize, n: usize, labels: usize) -> DataBlock {
    let centre = rng.gen_range(0.0..3.0);
    DataBlock::new(
        index,
        (0..n)
            .map(|_| {
                let label = rng.gen_range(0..labels);
                Instance::new(vec![label as f64 + centre + rng.gen::<f64>() * 2.0], label)
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn membership_stays_within_capacity(
        seed in 0u64..10_000,
        k in 1usize..7,
        labels in 2usize..5,
        blocks in 5usize..30,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..labels).map(|l| l.to_string()).collect();
        let schema = Arc::new(Schema::new(vec![Attribute::numeric("x")], names).unwrap());
        let cfg = config(k, 40);
        let mut ens = Ensemble::<GaussianNaiveBayes>::new(schema, cfg.clone()).unwrap();
        let mut ids_seen = Vec::new();
        for b in 0..blocks {
            let n = rng.gen_range(1..40);
            let report = ens.process_block(&random_block(&mut rng, b, n, labels)).unwrap();
            prop_assert!(ens.len() <= k);
            prop_assert!(!ens.is_empty());
            prop_assert_eq!(report.ensemble_size, ens.len());
            if !report.warmup {
                prop_assert_eq!(
                    report.ensemble_size,
                    report.ensemble_size_before - report.deleted.total() + 1
                );
            }
            prop_assert!(report.accuracy.is_none_or(|a| (0.0..=1.0).contains(&a)));
            for m in ens.members() {
                prop_assert!(m.weight >= cfg.w_min && m.weight <= cfg.w_max);
            }
            let ids: Vec<u64> = ens.members().iter().map(|m| m.id).collect();
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]), "members out of creation order");
            ids_seen.extend(ids);
        }
        prop_assert!(ids_seen.iter().max().is_some());
    }
}
