//! Dual-space contrastive scene encoder.
//!
//! An ego-state MLP and a pooled scene projection are fused into a token
//! whose ACT and ACC halves are unit vectors. Training contrasts queries from
//! the online network against keys from a momentum copy plus a FIFO key
//! dictionary, with positives defined by steering / braking label distance.

pub mod dictionary;
pub mod features;
pub mod loss;
pub mod network;
pub mod precision;
pub mod train;

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dictionary::KeyDictionary;
pub use features::{ego_vector, intent_index, FeatureSource, Rasterizer, EGO_DIM, INTENTS};
pub use loss::{contrastive_loss, partition_pairs, total_loss, Denominator, LabelRule, Labels, Space};
pub use network::{encode, momentum_update, EncoderParams, EncoderWeights};
pub use precision::{precision_at_k, Precision};
pub use train::{train, StepStats, TrainReport, Trainer, TrainingRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    MaxPool,
    Attention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Feature grid rows (N) and channels (C).
    pub grid_n: usize,
    pub grid_c: usize,
    /// Full token length; each half is `token_dim / 2`.
    pub token_dim: usize,
    pub ego_hidden: usize,
    pub pooling: Pooling,
    pub momentum: f64,
    pub temperature: f64,
    pub sigma_act: f64,
    pub sigma_acc: f64,
    pub lambda_act: f64,
    pub lambda_acc: f64,
    pub dict_capacity: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub denominator: Denominator,
    pub brake_rule_train: LabelRule,
    pub brake_rule_eval: LabelRule,
    /// Standard deviation of the per-feature Gaussian jitter.
    pub jitter: f64,
    /// Probability of zeroing a whole grid row.
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            grid_n: 16,
            grid_c: 64,
            token_dim: crate::token::TOKEN_DIM,
            ego_hidden: 64,
            pooling: Pooling::MaxPool,
            momentum: 0.999,
            temperature: 0.07,
            sigma_act: 0.04,
            sigma_acc: 0.04,
            lambda_act: 1.0,
            lambda_acc: 1.0,
            dict_capacity: 4096,
            learning_rate: 0.03,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 10,
            seed: 0,
            denominator: Denominator::NegativesOnly,
            brake_rule_train: LabelRule::Threshold,
            brake_rule_eval: LabelRule::Concurrence,
            jitter: 0.01,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("{what}: expected {expected} values, got {actual}")]
    Shape { what: &'static str, expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl EncoderConfig {
    pub fn half_dim(&self) -> usize {
        self.token_dim / 2
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::Config(m.into()));
        if self.grid_n == 0 || self.grid_c == 0 || self.ego_hidden == 0 {
            return bad("grid and hidden sizes must be positive");
        }
        if self.token_dim == 0 || self.token_dim % 2 != 0 {
            return bad("token_dim must be positive and even");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        for s in [self.sigma_act, self.sigma_acc] {
            if !(s > 0.0 && s < 1.0) {
                return bad("label thresholds must lie in (0, 1)");
            }
        }
        if self.batch_size == 0 || self.dict_capacity < self.batch_size {
            return bad("dictionary capacity must be at least the batch size");
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate and weight decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) || !(self.jitter >= 0.0) {
            return bad("augmentation parameters out of range");
        }
        Ok(())
    }
}
