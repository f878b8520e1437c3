use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HyperParams;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{divergence_from_labels, Classifier};
use crate::nn::{train, Mlp, TrainConfig};

/// Trains a substitute with sigmoid hidden layers and a softmax head.
pub fn train_substitute(data: &Dataset, hp: &HyperParams, base: &TrainConfig) -> Result<Mlp> {
    hp.validate()?;
    let dim = data
        .dim()
        .ok_or_else(|| Error::validation("substitute training data is empty"))?;
    let outcome = train(&hp.architecture(dim), &data.to_training_set()?, &hp.train_config(base))?;
    Ok(outcome.model)
}

/// Seeded 80/20 split into (train, validation).
pub fn split_train_validation(data: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = data.len() * 4 / 5;
    (data.subset(&idx[..n_train]), data.subset(&idx[n_train..]))
}

/// Index of the smallest score; ties go to the earliest; `None` entries are skipped.
pub fn select_best(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = *s {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub hyperparams: HyperParams,
    pub config: TrainConfig,
    pub model: Mlp,
    /// Validation d_max per grid point, or the training error message.
    pub scores: Vec<std::result::Result<f64, String>>,
}

/// Trains one substitute per grid point and keeps the one with the lowest
/// validation d_max against the oracle labels in `validation`.
pub fn hyperparameter_search(
    train_set: &Dataset,
    validation: &Dataset,
    grid: &[HyperParams],
    base: &TrainConfig,
) -> Result<SearchOutcome> {
    if grid.is_empty() {
        return Err(Error::validation("hyperparameter grid is empty"));
    }
    if validation.is_empty() {
        return Err(Error::validation("validation set is empty"));
    }
    let reference = validation.labels();
    let mut models = Vec::with_capacity(grid.len());
    let mut scores = Vec::with_capacity(grid.len());
    for hp in grid {
        let attempt = train_substitute(train_set, hp, base).and_then(|model| {
            let predicted = model.classify_batch(&validation.features())?;
            let report = divergence_from_labels(&reference, &predicted)?;
            Ok((model, report.d_max()))
        });
        match attempt {
            Ok((model, d_max)) => {
                models.push(Some(model));
                scores.push(Ok(d_max));
            }
            Err(e) => {
                models.push(None);
                scores.push(Err(e.to_string()));
            }
        }
    }
    let flat: Vec<Option<f64>> = scores.iter().map(|s| s.as_ref().ok().copied()).collect();
    let Some(best_index) = select_best(&flat) else {
        let failures: Vec<String> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| format!("point {i}: {}", s.as_ref().err().map_or("ok", String::as_str)))
            .collect();
        return Err(Error::validation(format!("every grid point failed: {}", failures.join("; "))));
    };
    let hyperparams = grid[best_index].clone();
    Ok(SearchOutcome {
        config: hyperparams.train_config(base),
        hyperparams,
        model: models[best_index].take().expect("scored point has a model"),
        best_index,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_with_earliest_tie() {
        assert_eq!(select_best(&[Some(0.3), Some(0.2)]), Some(1));
        assert_eq!(select_best(&[Some(0.25), Some(0.25)]), Some(0));
        assert_eq!(select_best(&[None, Some(0.9), Some(0.1), None]), Some(2));
        assert_eq!(select_best(&[None, None]), None);
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn split_is_80_20_and_seeded() {
        use crate::dataset::LabeledSample;
        use crate::featurizer::FeatureVector;
        use crate::label::Label;
        let data = Dataset::new(
            (0..100)
                .map(|i| LabeledSample::new(FeatureVector(vec![i]), Label::from_index(i as usize % 2).unwrap()))
                .collect(),
        )
        .unwrap();
        let (a, b) = split_train_validation(&data, 5);
        assert_eq!((a.len(), b.len()), (80, 20));
        let (c, _) = split_train_validation(&data, 5);
        assert_eq!(a, c);
        let mut all: Vec<u32> = a.samples().iter().chain(b.samples()).map(|s| s.features.0[0]).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
