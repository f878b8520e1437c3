//! The adversary: budgeted extraction, substitute tuning, GAN augmentation,
//! label-flip poisoning and near-threshold evasion sampling.

mod augment;
mod causative;
mod evasion;
mod exfiltrate;
mod search;

pub use augment::{augment_and_train, augmentation_sweep, AugmentOutcome, SweepRow};
pub use causative::{
    causative_counts, causative_select, causative_select_scores, evaluate_causative, mean_d, multiset_union,
    random_flip, random_flip_impact, CausativeSelection,
};
pub use evasion::{evaluate_evasion, evasion_select, evasion_select_scores, EvasionMode, EvasionReport, EvasionSelection};
pub use exfiltrate::{exploratory_attack, ExfiltrationStatus, Exfiltration};
pub use search::{hyperparameter_search, select_best, split_train_validation, train_substitute, SearchOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, TrainConfig};

/// One point of the substitute hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub weight_scale: f64,
    pub minibatch_size: usize,
    pub momentum: f64,
}

impl HyperParams {
    /// Two sigmoid layers of 30, unscaled init, minibatch 20, momentum 0.9.
    pub fn exploratory() -> Self {
        Self {
            hidden_layers: 2,
            neurons_per_layer: 30,
            weight_scale: 1.0,
            minibatch_size: 20,
            momentum: 0.9,
        }
    }

    /// Three sigmoid layers of 50, init scale 3, minibatch 25, momentum 0.1.
    pub fn augmented() -> Self {
        Self {
            hidden_layers: 3,
            neurons_per_layer: 50,
            weight_scale: 3.0,
            minibatch_size: 25,
            momentum: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.neurons_per_layer == 0 {
            return Err(Error::validation("substitute needs at least one hidden layer of width >= 1"));
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize) -> Vec<LayerSpec> {
        LayerSpec::stack(
            input_dim,
            &vec![self.neurons_per_layer; self.hidden_layers],
            Activation::Sigmoid,
            2,
            Activation::Softmax,
        )
    }

    /// `base` with this point's minibatch, momentum and init scale.
    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            minibatch_size: self.minibatch_size,
            momentum: self.momentum,
            weight_scale: self.weight_scale,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub query_budget: usize,
    pub threshold: f64,
    pub hyperparameter_grid: Vec<HyperParams>,
    pub augmentation_sizes: Vec<usize>,
    /// Percentage of candidates to flip.
    pub causative_p: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            query_budget: 100,
            threshold: crate::nn::DEFAULT_THRESHOLD,
            hyperparameter_grid: vec![HyperParams::exploratory(), HyperParams::augmented()],
            augmentation_sizes: vec![0, 50, 100, 150, 200, 300],
            causative_p: 10.0,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_budget == 0 {
            return Err(Error::validation("query_budget must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::validation("threshold must lie strictly between 0 and 1"));
        }
        if !(self.causative_p > 0.0 && self.causative_p <= 100.0) {
            return Err(Error::validation("causative_p must lie in (0, 100]"));
        }
        if self.hyperparameter_grid.is_empty() {
            return Err(Error::validation("hyperparameter grid is empty"));
        }
        self.hyperparameter_grid.iter().try_for_each(HyperParams::validate)
    }
}
