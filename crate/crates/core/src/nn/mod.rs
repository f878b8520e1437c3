//! Dense feedforward networks written from scratch.
//!
//! Every layer computes `y_j = act(sum_k w_jk x_k + b_j)`. Weights are stored
//! row-major with shape `(output_dim, input_dim)`, and batches are passed as
//! matrices with one sample per row. All arithmetic is `f64`.

mod activation;
mod format;
mod loss;
mod model;
mod optim;
mod train;

pub use activation::Activation;
pub(crate) use activation::sigmoid;
pub use format::{read_model, write_model, FORMAT_VERSION, MODEL_MAGIC};
pub use loss::{cross_entropy, softmax_cross_entropy_delta, PROBABILITY_FLOOR};
pub use model::{Gradients, LayerGradient, LayerSpec, Mlp, Normalizer, Trace, DEFAULT_THRESHOLD};
pub use optim::{
    adam_step, sgd_momentum_step, AdamMoments, AdamParams, OptimizerKind, OptimizerState,
};
pub use train::{train, TrainConfig, TrainOutcome, TrainingSet};
