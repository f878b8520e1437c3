use serde::{Deserialize, Serialize};

use super::{train_substitute, HyperParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gan::{train_gan, GanConfig, GanPair};
use crate::metrics::{divergence_from_labels, Classifier, DivergenceReport};
use crate::nn::{Mlp, TrainConfig};

#[derive(Debug, Clone)]
pub struct AugmentOutcome {
    pub model: Mlp,
    pub report: DivergenceReport,
    /// N_r + N_s.
    pub training_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_real: usize,
    pub n_synth: usize,
    pub report: DivergenceReport,
}

impl SweepRow {
    pub fn as_tuple(&self) -> (usize, usize, DivergenceReport) {
        (self.n_real, self.n_synth, self.report)
    }
}

fn synth_seed(gan_config: &GanConfig) -> u64 {
    gan_config.seed.wrapping_add(0x5EED)
}

fn train_with_gan(
    real: &Dataset,
    n_s: usize,
    gan: Option<&GanPair>,
    gan_config: &GanConfig,
    hp: &HyperParams,
    base: &TrainConfig,
    test: &Dataset,
) -> Result<AugmentOutcome> {
    let data = match (n_s, gan) {
        (0, _) => real.clone(),
        (_, Some(gan)) => real.concat(&gan.synthesize_balanced(n_s, real, synth_seed(gan_config))?)?,
        (_, None) => return Err(Error::validation("synthetic samples requested without a trained GAN")),
    };
    let model = train_substitute(&data, hp, base)?;
    let predicted = model.classify_batch(&test.features())?;
    Ok(AugmentOutcome {
        report: divergence_from_labels(&test.labels(), &predicted)?,
        training_size: data.len(),
        model,
    })
}

/// Trains a GAN on `real`, adds `n_s` synthetic samples, trains a substitute on
/// the union and measures it against the oracle labels of `test`. With
/// `n_s = 0` no GAN is trained and the result equals the plain substitute.
pub fn augment_and_train(
    real: &Dataset,
    n_s: usize,
    gan_config: &GanConfig,
    hp: &HyperParams,
    base: &TrainConfig,
    test: &Dataset,
) -> Result<AugmentOutcome> {
    if real.is_empty() {
        return Err(Error::validation("real training data is empty"));
    }
    let gan = if n_s > 0 { Some(train_gan(real, gan_config)?) } else { None };
    train_with_gan(real, n_s, gan.as_ref(), gan_config, hp, base, test)
}

/// One row per entry of `sizes`; the GAN is trained once and shared. Returns
/// the GAN too so callers can checkpoint it.
pub fn augmentation_sweep(
    real: &Dataset,
    sizes: &[usize],
    gan_config: &GanConfig,
    hp: &HyperParams,
    base: &TrainConfig,
    test: &Dataset,
) -> Result<(Vec<SweepRow>, Option<GanPair>)> {
    if real.is_empty() {
        return Err(Error::validation("real training data is empty"));
    }
    let gan = if sizes.iter().any(|&n| n > 0) {
        Some(train_gan(real, gan_config)?)
    } else {
        None
    };
    let rows = sizes
        .iter()
        .map(|&n_s| {
            train_with_gan(real, n_s, gan.as_ref(), gan_config, hp, base, test).map(|o| SweepRow {
                n_real: real.len(),
                n_synth: n_s,
                report: o.report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, gan))
}
