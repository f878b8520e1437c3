use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::loss::{cross_entropy, softmax_cross_entropy_delta};
use crate::error::{Error, Result};
use crate::label::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }

    /// Chains `input_dim -> hidden[0] -> ... -> output_dim`, `hidden_act` on every hidden layer.
    pub fn stack(
        input_dim: usize,
        hidden: &[usize],
        hidden_act: Activation,
        output_dim: usize,
        output_act: Activation,
    ) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden {
            specs.push(LayerSpec::new(prev, width, hidden_act));
            prev = width;
        }
        specs.push(LayerSpec::new(prev, output_dim, output_act));
        specs
    }
}

/// Per-feature affine map `x' = (x - shift) * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Min-max scaling to `[0, 1]`. Constant features map to 0.
    pub fn fit_min_max(inputs: ArrayView2<'_, f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::validation("cannot fit a normalizer on zero rows"));
        }
        let mut shift = Vec::with_capacity(inputs.ncols());
        let mut scale = Vec::with_capacity(inputs.ncols());
        for col in inputs.axis_iter(Axis(1)) {
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift.push(min);
            scale.push(if max > min { 1.0 / (max - min) } else { 1.0 });
        }
        Ok(Self { shift, scale })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    fn apply(&self, inputs: &mut Array2<f64>) {
        for mut row in inputs.axis_iter_mut(Axis(0)) {
            for ((v, s), k) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = (*v - s) * k;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) spec: LayerSpec,
    /// Shape `(output_dim, input_dim)`.
    pub(crate) weights: Array2<f64>,
    pub(crate) biases: Array1<f64>,
}

/// A dense multi-layer perceptron with an optional input normalizer and a
/// decision threshold on the label-2 probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) layers: Vec<Layer>,
    pub(crate) normalizer: Option<Normalizer>,
    pub(crate) threshold: f64,
}

/// Activations recorded by a batched forward pass, consumed by [`Mlp::backprop`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the (normalized) input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.biases.as_slice().expect("standard layout"),
            ]
        })
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::validation("a model needs at least one layer"));
    }
    for (i, spec) in specs.iter().enumerate() {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(Error::validation(format!("layer {i} has a zero dimension")));
        }
        if spec.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(Error::validation(format!(
                "softmax is only allowed on the final layer (found on layer {i})"
            )));
        }
        if i > 0 && specs[i - 1].output_dim != spec.input_dim {
            return Err(Error::shape(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                specs[i - 1].output_dim,
                spec.input_dim
            )));
        }
    }
    Ok(())
}

impl Mlp {
    /// Builds a model from explicit parameters, checking every shape invariant.
    pub fn from_parameters(
        specs: &[LayerSpec],
        params: Vec<(Array2<f64>, Array1<f64>)>,
        normalizer: Option<Normalizer>,
        threshold: f64,
    ) -> Result<Self> {
        validate_specs(specs)?;
        if params.len() != specs.len() {
            return Err(Error::shape(format!(
                "{} layer specs but {} parameter sets",
                specs.len(),
                params.len()
            )));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for (i, (spec, (weights, biases))) in specs.iter().zip(params).enumerate() {
            if weights.dim() != (spec.output_dim, spec.input_dim) || biases.len() != spec.output_dim
            {
                return Err(Error::shape(format!(
                    "layer {i}: weights {:?} / biases {} do not match spec {}x{}",
                    weights.dim(),
                    biases.len(),
                    spec.output_dim,
                    spec.input_dim
                )));
            }
            if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("layer {i} has non-finite parameters")));
            }
            layers.push(Layer {
                spec: *spec,
                weights: weights.as_standard_layout().into_owned(),
                biases,
            });
        }
        if let Some(norm) = &normalizer {
            if norm.dim() != specs[0].input_dim || norm.scale.len() != norm.shift.len() {
                return Err(Error::shape("normalizer width does not match model input"));
            }
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::validation(format!("threshold {threshold} outside (0, 1)")));
        }
        Ok(Self {
            layers,
            normalizer,
            threshold,
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draws for weights and biases,
    /// multiplied by `weight_scale`.
    pub fn initialize<R: Rng + ?Sized>(
        specs: &[LayerSpec],
        weight_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_specs(specs)?;
        if !(weight_scale > 0.0 && weight_scale.is_finite()) {
            return Err(Error::validation("weight_scale must be positive"));
        }
        let params = specs
            .iter()
            .map(|spec| {
                let bound = 1.0 / (spec.input_dim as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let weights = Array2::from_shape_simple_fn((spec.output_dim, spec.input_dim), || {
                    dist.sample(rng) * weight_scale
                });
                let biases =
                    Array1::from_shape_simple_fn(spec.output_dim, || dist.sample(rng) * weight_scale);
                (weights, biases)
            })
            .collect();
        Self::from_parameters(specs, params, None, DEFAULT_THRESHOLD)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").spec.output_dim
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::validation(format!("threshold {threshold} outside (0, 1)")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn set_normalizer(&mut self, normalizer: Option<Normalizer>) -> Result<()> {
        if let Some(n) = &normalizer {
            if n.dim() != self.input_dim() {
                return Err(Error::shape("normalizer width does not match model input"));
            }
        }
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn weights(&self, layer: usize) -> &Array2<f64> {
        &self.layers[layer].weights
    }

    pub fn biases(&self, layer: usize) -> &Array1<f64> {
        &self.layers[layer].biases
    }

    /// Parameter tensors in a fixed order: layer 0 weights, layer 0 biases, layer 1 weights, ...
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.biases.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.biases.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    fn check_batch(&self, inputs: &ArrayView2<'_, f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} features, model expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("input contains non-finite values"));
        }
        Ok(())
    }

    /// Batched forward pass keeping every layer's activations.
    pub fn trace(&self, inputs: ArrayView2<'_, f64>) -> Result<Trace> {
        self.check_batch(&inputs)?;
        let mut x = inputs.to_owned();
        if let Some(norm) = &self.normalizer {
            norm.apply(&mut x);
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x);
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut z = prev.dot(&layer.weights.t());
            z += &layer.biases;
            layer.spec.activation.apply(&mut z);
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut trace = self.trace(inputs)?;
        Ok(trace.activations.pop().expect("non-empty"))
    }

    /// Final-layer activations for one sample.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::shape(e.to_string()))?;
        let out = self.forward_batch(view)?;
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Backpropagates `output_delta` (dL/dz of the final layer, one row per sample)
    /// through a recorded trace. Returns parameter gradients and dL/d(raw input).
    pub fn backprop(&self, trace: &Trace, output_delta: Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let batch = trace.activations[0].nrows();
        if output_delta.dim() != (batch, self.output_dim()) {
            return Err(Error::shape(format!(
                "output delta {:?} does not match ({batch}, {})",
                output_delta.dim(),
                self.output_dim()
            )));
        }
        let mut delta = output_delta;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_prev = &trace.activations[l];
            let weights = delta.t().dot(a_prev).as_standard_layout().into_owned();
            let biases = delta.sum_axis(Axis(0));
            grads.push(LayerGradient { weights, biases });
            let mut next = delta.dot(&layer.weights);
            if l > 0 {
                self.layers[l - 1]
                    .spec
                    .activation
                    .backprop_elementwise(&trace.activations[l], &mut next);
            }
            delta = next;
        }
        grads.reverse();
        if let Some(norm) = &self.normalizer {
            for mut row in delta.axis_iter_mut(Axis(0)) {
                for (g, k) in row.iter_mut().zip(&norm.scale) {
                    *g *= k;
                }
            }
        }
        Ok((Gradients { layers: grads }, delta))
    }

    /// Converts dL/d(output activation) into dL/d(final pre-activation).
    pub fn output_delta_from_activation_grad(&self, trace: &Trace, mut grad: Array2<f64>) -> Array2<f64> {
        let act = self.layers.last().expect("non-empty").spec.activation;
        act.backprop_elementwise(trace.output(), &mut grad);
        grad
    }

    fn require_softmax_head(&self) -> Result<()> {
        let last = self.layers.last().expect("non-empty").spec;
        if last.activation != Activation::Softmax || last.output_dim != 2 {
            return Err(Error::validation("model does not end in a 2-way softmax"));
        }
        Ok(())
    }

    /// Exact gradients of `cross_entropy(forward(input), label)` for one sample.
    /// Requires a softmax output layer.
    pub fn backward(&self, input: &[f64], true_label: usize) -> Result<Gradients> {
        let last = self.layers.last().expect("non-empty").spec;
        if last.activation != Activation::Softmax {
            return Err(Error::validation("backward requires a softmax output layer"));
        }
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::shape(e.to_string()))?;
        let trace = self.trace(view)?;
        let delta = softmax_cross_entropy_delta(trace.output(), &[true_label])?;
        Ok(self.backprop(&trace, delta)?.0)
    }

    /// Cross-entropy loss of one sample; convenience for gradient checking.
    pub fn loss(&self, input: &[f64], true_label: usize) -> Result<f64> {
        cross_entropy(&self.forward(input)?, true_label)
    }

    /// `(label, score)` with score = probability of label 2.
    pub fn predict_with_score(&self, input: &[f64]) -> Result<(Label, f64)> {
        self.require_softmax_head()?;
        let probs = self.forward(input)?;
        let score = probs[1];
        Ok((Label::from_score(score, self.threshold), score))
    }

    /// Label-2 probabilities for a batch.
    pub fn scores(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.require_softmax_head()?;
        let out = self.forward_batch(inputs)?;
        Ok(out.column(1).to_vec())
    }

    pub fn predict_labels(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<Label>> {
        Ok(self
            .scores(inputs)?
            .into_iter()
            .map(|s| Label::from_score(s, self.threshold))
            .collect())
    }
}
