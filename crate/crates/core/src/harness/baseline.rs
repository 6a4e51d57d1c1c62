use std::collections::VecDeque;
use std::sync::Arc;

use crate::ensemble::{count_correct, BlockReport, Deletions, EnsembleError};
use crate::learner::BaseLearner;
use crate::stream::{DataBlock, Schema};

/// Unweighted majority vote over at most `k` members, replacing the oldest.
#[derive(Debug, Clone)]
pub struct MajorityEnsemble<L> {
    schema: Arc<Schema>,
    k: usize,
    members: VecDeque<L>,
}

impl<L: BaseLearner> MajorityEnsemble<L> {
    pub fn new(schema: Arc<Schema>, k: usize) -> Self {
        Self {
            schema,
            k: k.max(1),
            members: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn classify_block(&self, block: &DataBlock) -> Result<Vec<usize>, EnsembleError> {
        if self.members.is_empty() {
            return Err(EnsembleError::Empty);
        }
        let member_preds: Vec<Vec<usize>> = self
            .members
            .iter()
            .map(|m| m.predict_block(block))
            .collect();
        let mut tally = vec![0usize; self.schema.label_count()];
        Ok((0..block.len())
            .map(|i| {
                tally.iter_mut().for_each(|t| *t = 0);
                for preds in &member_preds {
                    tally[preds[i]] += 1;
                }
                // First maximum wins, so ties go to the smallest label.
                let mut best = 0;
                for (label, &count) in tally.iter().enumerate() {
                    if count > tally[best] {
                        best = label;
                    }
                }
                best
            })
            .collect())
    }

    pub fn process_block(&mut self, block: &DataBlock) -> Result<BlockReport, EnsembleError> {
        if block.is_empty() {
            return Err(EnsembleError::EmptyBlock);
        }
        let size_before = self.members.len();
        let predictions = if self.members.is_empty() {
            None
        } else {
            Some(self.classify_block(block)?)
        };
        let truth: Vec<usize> = block.labels().collect();
        let correct = predictions.as_ref().map(|p| count_correct(p, &truth));

        let mut deleted = Deletions::default();
        if self.members.len() >= self.k {
            self.members.pop_front();
            deleted.capacity = 1;
        }
        for member in &mut self.members {
            member.train_block(block)?;
        }
        let mut newcomer = L::new_learner(Arc::clone(&self.schema));
        newcomer.train_block(block)?;
        self.members.push_back(newcomer);

        Ok(BlockReport {
            block_index: block.block_index,
            n: block.len(),
            warmup: size_before < self.k,
            accuracy: correct.map(|c| c as f64 / block.len() as f64),
            predictions,
            correct,
            drift_record: None,
            member_psi: Vec::new(),
            drift: false,
            theta_weight: None,
            ledger_len: 0,
            deleted,
            ensemble_size_before: size_before,
            ensemble_size: self.members.len(),
        })
    }
}
