use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::loss::{softmax_cross_entropy_delta, PROBABILITY_FLOOR};
use super::model::{LayerSpec, Mlp, Normalizer};
use super::optim::{AdamParams, OptimizerKind, OptimizerState};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Multiplier applied to the initial weights and biases.
    pub weight_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            minibatch_size: 20,
            learning_rate: 0.1,
            optimizer: OptimizerKind::SgdMomentum,
            momentum: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            weight_scale: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::validation("minibatch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("momentum must lie in [0, 1)"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::validation(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(Error::validation("adam_epsilon must be positive"));
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return Err(Error::validation("weight_scale must be positive"));
        }
        Ok(())
    }

    fn optimizer_state(&self, model: &Mlp) -> OptimizerState {
        match self.optimizer {
            OptimizerKind::SgdMomentum => {
                OptimizerState::sgd_momentum(model, self.learning_rate, self.momentum)
            }
            OptimizerKind::Adam => OptimizerState::adam(
                model,
                AdamParams {
                    lr: self.learning_rate,
                    beta1: self.adam_beta1,
                    beta2: self.adam_beta2,
                    eps: self.adam_epsilon,
                },
            ),
        }
    }
}

/// Row-per-sample inputs with zero-based class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} rows but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_labeled(rows: &[Vec<f64>], labels: &[Label]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("rows have differing lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let inputs = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::shape(e.to_string()))?;
        Self::new(inputs, labels.iter().map(|l| l.index()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    /// Mean cross-entropy per epoch, one entry per epoch.
    pub loss_history: Vec<f64>,
}

/// Initializes a network from `architecture` and trains it with minibatch
/// gradient descent on softmax cross-entropy.
///
/// The min-max input normalizer is fitted on the whole training set before the
/// first epoch and frozen. Initialization, shuffling and batching all derive
/// from `config.seed`; the final short minibatch of each epoch is kept.
pub fn train(architecture: &[LayerSpec], data: &TrainingSet, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    let last = architecture
        .last()
        .ok_or_else(|| Error::validation("architecture has no layers"))?;
    if last.activation != Activation::Softmax {
        return Err(Error::validation("classifier training needs a softmax output layer"));
    }
    if architecture[0].input_dim != data.inputs.ncols() {
        return Err(Error::shape(format!(
            "data has {} features, model expects {}",
            data.inputs.ncols(),
            architecture[0].input_dim
        )));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= last.output_dim) {
        return Err(Error::validation(format!("label index {bad} out of range")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::initialize(architecture, config.weight_scale, &mut rng)?;
    model.set_normalizer(Some(Normalizer::fit_min_max(data.inputs.view())?))?;
    let mut optimizer = config.optimizer_state(&model);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.minibatch_size) {
            let inputs = data.inputs.select(Axis(0), batch);
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let trace = model.trace(inputs.view())?;
            total += trace
                .output()
                .rows()
                .into_iter()
                .zip(&labels)
                .map(|(p, &y)| -p[y].max(PROBABILITY_FLOOR).ln())
                .sum::<f64>();
            let delta = softmax_cross_entropy_delta(trace.output(), &labels)?;
            let (grads, _) = model.backprop(&trace, delta)?;
            optimizer.apply(&mut model, &grads)?;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || model.tensors().flatten().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_history.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history,
    })
}
