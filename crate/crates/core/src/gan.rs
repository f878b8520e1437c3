//! Conditional GAN over count-feature vectors.
//!
//! The generator maps `noise ⊕ one_hot(label)` to a tanh-ranged feature
//! vector; the discriminator maps `features ⊕ one_hot(label)` to a sigmoid
//! probability of being real. Real features are min-max scaled to `[-1, 1]`
//! for training and mapped back (clipped, rounded) on synthesis.
//!
//! Each epoch runs `d_steps_per_g_step` discriminator minibatch updates on the
//! minimax value, then one generator update on the non-saturating objective
//! `mean log D(G(z, y), y)`. Both networks use Adam.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::label::Label;
use crate::nn::{Activation, AdamParams, Gradients, LayerSpec, Mlp, OptimizerState, PROBABILITY_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub label_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub d_steps_per_g_step: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            noise_dim: 100,
            label_dim: 2,
            generator_hidden: vec![100, 500],
            discriminator_hidden: vec![500, 500],
            epochs: 500,
            batch_size: 32,
            d_steps_per_g_step: 2,
            learning_rate: 1e-5,
            adam_beta1: 0.9,
            seed: 0,
        }
    }
}

impl GanConfig {
    /// Published architecture and schedule with Adam at lr 2e-4, beta1 0.5.
    /// At lr 1e-5 the 500-epoch schedule leaves small fixtures essentially untrained.
    pub fn desk_scale() -> Self {
        Self {
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("noise_dim", self.noise_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("d_steps_per_g_step", self.d_steps_per_g_step),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::validation(format!("{name} must be at least 1")));
            }
        }
        if self.label_dim != 2 {
            return Err(Error::validation("label_dim must be 2 (binary one-hot labels)"));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::validation("hidden layer widths must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::validation("adam_beta1 must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn generator_specs(&self, feature_dim: usize) -> Vec<LayerSpec> {
        LayerSpec::stack(
            self.noise_dim + self.label_dim,
            &self.generator_hidden,
            Activation::Relu,
            feature_dim,
            Activation::Tanh,
        )
    }

    pub fn discriminator_specs(&self, feature_dim: usize) -> Vec<LayerSpec> {
        LayerSpec::stack(
            feature_dim + self.label_dim,
            &self.discriminator_hidden,
            Activation::Relu,
            1,
            Activation::Sigmoid,
        )
    }
}

/// Per-feature min-max map between count space and `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(features: ArrayView2<'_, f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::validation("cannot fit a scaler on empty data"));
        }
        let min = features
            .axis_iter(Axis(1))
            .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let max = features
            .axis_iter(Axis(1))
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Count space to `[-1, 1]`; constant features map to 0.
    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for mut row in out.rows_mut() {
            for ((v, lo), hi) in row.iter_mut().zip(&self.min).zip(&self.max) {
                *v = if hi > lo { 2.0 * (*v - lo) / (hi - lo) - 1.0 } else { 0.0 };
            }
        }
        out
    }

    /// `[-1, 1]` back to counts: affine inverse, clipped to `[min, max]`, rounded, floored at 0.
    pub fn inverse(&self, scaled: &[f64]) -> FeatureVector {
        FeatureVector(
            scaled
                .iter()
                .zip(&self.min)
                .zip(&self.max)
                .map(|((&y, &lo), &hi)| {
                    let v = lo + (y + 1.0) / 2.0 * (hi - lo);
                    v.clamp(lo, hi).round().max(0.0) as u32
                })
                .collect(),
        )
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        format!("min = {}\nmax = {}\n", join(&self.min), join(&self.max))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut min = None;
        let mut max = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, values) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("scaler line without `=`: {line}")))?;
            let parsed = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| Error::Format(format!("scaler value: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            match key.trim() {
                "min" => min = Some(parsed),
                "max" => max = Some(parsed),
                other => return Err(Error::Format(format!("unknown scaler key {other}"))),
            }
        }
        match (min, max) {
            (Some(min), Some(max)) if min.len() == max.len() && min.iter().zip(&max).all(|(a, b)| a <= b) => {
                Ok(Self { min, max })
            }
            _ => Err(Error::Format("scaler needs matching min and max rows with min <= max".into())),
        }
    }
}

/// Trained generator/discriminator pair with the scaler it was trained under.
#[derive(Debug, Clone)]
pub struct GanPair {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub scaler: FeatureScaler,
    /// `(d_loss, g_loss)` per epoch.
    pub loss_history: Vec<(f64, f64)>,
}

fn clamped_ln(p: f64) -> f64 {
    p.max(PROBABILITY_FLOOR).ln()
}

fn check_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::validation(format!("{what} batch is empty")));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::validation(format!("{what} contains values outside [0, 1]")));
    }
    Ok(())
}

/// Empirical minimax value `mean ln D(x) + mean ln(1 - D(G(z)))`.
pub fn gan_value(real: &[f64], fake: &[f64]) -> Result<f64> {
    check_probs(real, "discriminator real-output")?;
    check_probs(fake, "discriminator fake-output")?;
    let r = real.iter().map(|&p| clamped_ln(p)).sum::<f64>() / real.len() as f64;
    let f = fake.iter().map(|&p| clamped_ln(1.0 - p)).sum::<f64>() / fake.len() as f64;
    Ok(r + f)
}

/// Non-saturating generator objective `mean ln D(G(z))`, to be maximized.
pub fn generator_objective(fake: &[f64]) -> Result<f64> {
    check_probs(fake, "discriminator fake-output")?;
    Ok(fake.iter().map(|&p| clamped_ln(p)).sum::<f64>() / fake.len() as f64)
}

fn one_hot_rows(labels: &[Label]) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), 2));
    for (i, l) in labels.iter().enumerate() {
        m[[i, l.index()]] = 1.0;
    }
    m
}

fn with_labels(x: ArrayView2<'_, f64>, labels: &[Label]) -> Array2<f64> {
    concatenate![Axis(1), x, one_hot_rows(labels)]
}

/// Discriminator loss `-(mean ln D(real) + mean ln(1 - D(fake)))` and its gradient.
/// Inputs are already label-conditioned rows.
pub fn discriminator_loss_and_grad(
    discriminator: &Mlp,
    real_inputs: ArrayView2<'_, f64>,
    fake_inputs: ArrayView2<'_, f64>,
) -> Result<(f64, Gradients)> {
    let (nr, nf) = (real_inputs.nrows(), fake_inputs.nrows());
    if nr == 0 || nf == 0 {
        return Err(Error::validation("discriminator batches must be non-empty"));
    }
    let both = concatenate![Axis(0), real_inputs, fake_inputs];
    let trace = discriminator.trace(both.view())?;
    let probs = trace.output().column(0).to_vec();
    let value = gan_value(&probs[..nr], &probs[nr..])?;
    // sigmoid + cross-entropy: dL/dz = (p - target) / batch
    let mut delta = Array2::zeros((nr + nf, 1));
    for (i, &p) in probs.iter().enumerate() {
        delta[[i, 0]] = if i < nr { (p - 1.0) / nr as f64 } else { p / nf as f64 };
    }
    let (grads, _) = discriminator.backprop(&trace, delta)?;
    Ok((-value, grads))
}

/// Generator loss `-mean ln D(G(z, y), y)` and its gradient with respect to the
/// generator parameters, backpropagated through the frozen discriminator.
/// `noise_inputs` are label-conditioned generator inputs.
pub fn generator_loss_and_grad(
    generator: &Mlp,
    discriminator: &Mlp,
    noise_inputs: ArrayView2<'_, f64>,
    labels: &[Label],
) -> Result<(f64, Gradients)> {
    let n = noise_inputs.nrows();
    if n == 0 || labels.len() != n {
        return Err(Error::validation("generator batch must be non-empty with one label per row"));
    }
    let g_trace = generator.trace(noise_inputs)?;
    let d_in = with_labels(g_trace.output().view(), labels);
    let d_trace = discriminator.trace(d_in.view())?;
    let probs = d_trace.output().column(0).to_vec();
    let loss = -generator_objective(&probs)?;
    let mut delta = Array2::zeros((n, 1));
    for (i, &p) in probs.iter().enumerate() {
        delta[[i, 0]] = (p - 1.0) / n as f64;
    }
    let (_, input_grad) = discriminator.backprop(&d_trace, delta)?;
    let feature_dim = generator.output_dim();
    let fake_grad = input_grad.slice(s![.., ..feature_dim]).to_owned();
    let g_delta = generator.output_delta_from_activation_grad(&g_trace, fake_grad);
    let (grads, _) = generator.backprop(&g_trace, g_delta)?;
    Ok((loss, grads))
}

fn noise_batch<R: Rng>(rng: &mut R, rows: usize, noise_dim: usize, labels: &[Label]) -> Array2<f64> {
    let z = Array2::from_shape_simple_fn((rows, noise_dim), || rng.sample::<f64, _>(StandardNormal));
    with_labels(z.view(), labels)
}

pub fn train_gan(real: &Dataset, config: &GanConfig) -> Result<GanPair> {
    config.validate()?;
    let feature_dim = real
        .dim()
        .ok_or_else(|| Error::validation("GAN training data is empty"))?;
    for label in Label::ALL {
        if real.count_label(label) == 0 {
            return Err(Error::validation(format!(
                "GAN training data has no samples of label {label}"
            )));
        }
    }
    let raw = real.feature_matrix();
    let scaler = FeatureScaler::fit(raw.view())?;
    let x = scaler.forward(raw.view());
    let labels = real.labels();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut generator = Mlp::initialize(&config.generator_specs(feature_dim), 1.0, &mut rng)?;
    let mut discriminator = Mlp::initialize(&config.discriminator_specs(feature_dim), 1.0, &mut rng)?;
    let adam = AdamParams {
        lr: config.learning_rate,
        beta1: config.adam_beta1,
        ..AdamParams::default()
    };
    let mut g_opt = OptimizerState::adam(&generator, adam);
    let mut d_opt = OptimizerState::adam(&discriminator, adam);
    let batch = config.batch_size.min(real.len());

    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut d_loss = 0.0;
        for _ in 0..config.d_steps_per_g_step {
            let idx = sample(&mut rng, real.len(), batch).into_vec();
            let batch_labels: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            let real_in = with_labels(x.select(Axis(0), &idx).view(), &batch_labels);
            let z = noise_batch(&mut rng, batch, config.noise_dim, &batch_labels);
            let fake = generator.forward_batch(z.view())?;
            let fake_in = with_labels(fake.view(), &batch_labels);
            let (loss, grads) = discriminator_loss_and_grad(&discriminator, real_in.view(), fake_in.view())?;
            d_opt.apply(&mut discriminator, &grads)?;
            d_loss += loss;
        }
        d_loss /= config.d_steps_per_g_step as f64;

        let idx = sample(&mut rng, real.len(), batch).into_vec();
        let batch_labels: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        let z = noise_batch(&mut rng, batch, config.noise_dim, &batch_labels);
        let (g_loss, grads) = generator_loss_and_grad(&generator, &discriminator, z.view(), &batch_labels)?;
        g_opt.apply(&mut generator, &grads)?;

        if !d_loss.is_finite() || !g_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_history.push((d_loss, g_loss));
    }
    Ok(GanPair {
        generator,
        discriminator,
        scaler,
        loss_history,
    })
}

/// Splits `n_total` synthetic samples across labels in proportion to the real
/// label counts; the rounding remainder goes to label 1.
pub fn allocate_per_label(n_total: usize, real: &Dataset) -> [usize; 2] {
    if real.is_empty() {
        return [n_total, 0];
    }
    let n2 = n_total * real.count_label(Label::Two) / real.len();
    [n_total - n2, n2]
}

impl GanPair {
    pub fn feature_dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.generator.input_dim() - 2
    }

    /// Raw generator outputs in `[-1, 1]` for `n` draws conditioned on `label`.
    pub fn generate_scaled(&self, label: Label, n: usize, seed: u64) -> Result<Array2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = vec![label; n];
        let z = noise_batch(&mut rng, n, self.noise_dim(), &labels);
        self.generator.forward_batch(z.view())
    }

    pub fn synthesize(&self, label: Label, n: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let out = self.generate_scaled(label, n, seed)?;
        Ok(out
            .rows()
            .into_iter()
            .map(|row| LabeledSample {
                features: self.scaler.inverse(&row.to_vec()),
                label,
                synthetic: true,
            })
            .collect())
    }

    /// `n_total` samples split per [`allocate_per_label`]; label 1 block first.
    pub fn synthesize_balanced(&self, n_total: usize, real: &Dataset, seed: u64) -> Result<Dataset> {
        let [n1, n2] = allocate_per_label(n_total, real);
        let mut samples = self.synthesize(Label::One, n1, seed)?;
        samples.extend(self.synthesize(Label::Two, n2, seed.wrapping_add(1))?);
        Dataset::new(samples)
    }

    /// Writes `generator.model`, `discriminator.model`, `scaler.txt` and `losses.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.generator.save(&dir.join("generator.model"))?;
        self.discriminator.save(&dir.join("discriminator.model"))?;
        let scaler = dir.join("scaler.txt");
        std::fs::write(&scaler, self.scaler.to_text()).map_err(|e| Error::io(&scaler, e))?;
        let mut csv = String::from("epoch,d_loss,g_loss\n");
        for (i, (d, g)) in self.loss_history.iter().enumerate() {
            writeln!(csv, "{},{d},{g}", i + 1).expect("String write");
        }
        let losses = dir.join("losses.csv");
        std::fs::write(&losses, csv).map_err(|e| Error::io(&losses, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let generator = Mlp::load(&dir.join("generator.model"))?;
        let discriminator = Mlp::load(&dir.join("discriminator.model"))?;
        let scaler_path = dir.join("scaler.txt");
        let scaler = FeatureScaler::from_text(
            &std::fs::read_to_string(&scaler_path).map_err(|e| Error::io(&scaler_path, e))?,
        )?;
        if generator.output_dim() != scaler.dim() || discriminator.input_dim() != scaler.dim() + 2 {
            return Err(Error::Format("checkpoint networks do not match the scaler width".into()));
        }
        Ok(Self {
            generator,
            discriminator,
            scaler,
            loss_history: Vec::new(),
        })
    }
}
