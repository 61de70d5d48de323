//! Event causality identification with a deterministic-assumption prompt.
//!
//! A candidate event pair is rendered as a two-part prompt: the raw sentence
//! with virtual tokens wrapping both event mentions, followed by a fixed
//! assumption sentence carrying two masks. Two masked-LM classifier heads
//! predict each mask's answer distribution over a restricted candidate set,
//! and the pair is accepted as causal when the summed probabilities of the
//! virtual event answers clear a threshold.
//!
//! The crate covers the full loop: corpus loading and fold planning
//! ([`corpus`]), prompt assembly ([`templating`]), the trainable backbone and
//! heads ([`model`]), fine-tuning ([`training`]), thresholding and sweeps
//! ([`decision`]), scoped metrics and cross-validation ([`evaluation`]),
//! checkpoints ([`checkpoint`]), a synthetic corpus generator ([`synthetic`])
//! and high-level runs ([`pipeline`]). Everything is seeded and
//! deterministic: repeated runs with the same inputs produce byte-identical
//! reports.

pub mod checkpoint;
pub mod corpus;
pub mod decision;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod synthetic;
pub mod templating;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
