//! Entropy-based ensemble classification for drifting data streams.
//!
//! The crate is organised bottom-up:
//!
//! - [`stream`]: schemas, instances, data blocks and CSV ingestion;
//! - [`entropy`]: label entropy, the Hoeffding radius and the block drift test;
//! - [`weighting`]: multiplicative member weights and the statistical weight floor;
//! - [`learner`]: incremental naive Bayes base learner;
//! - [`ensemble`]: the per-block ensemble update loop;
//! - [`generators`]: synthetic SEA, hyperplane, LED and RBF streams plus drift and noise wrappers;
//! - [`harness`]: prequential evaluation, detection scoring, baselines and sweeps.

pub mod ensemble;
pub mod entropy;
pub mod generators;
pub mod harness;
pub mod learner;
pub mod stream;
pub mod weighting;

pub use ensemble::{BlockReport, EcbeConfig, Ensemble, EnsembleError};
pub use entropy::{DriftDecision, DriftDetector, DriftRecord};
pub use learner::{BaseLearner, GaussianNaiveBayes};
pub use stream::{DataBlock, Instance, Schema, StreamSource};
