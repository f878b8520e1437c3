use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::label::Label;
use crate::metrics::Classifier;
use crate::nn::Mlp;
use crate::oracle::TargetClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EvasionMode {
    /// Closest to the threshold on either side.
    MaxError,
    /// Samples the substitute puts in `to`, closest to the threshold.
    Targeted { from: Label, to: Label },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvasionSelection {
    pub mode: EvasionMode,
    /// `(candidate index, substitute score)` ordered by distance to the threshold.
    pub selected: Vec<(usize, f64)>,
}

impl EvasionSelection {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|&(i, _)| i).collect()
    }
}

pub fn evasion_select_scores(scores: &[f64], mode: EvasionMode, n: usize, threshold: f64) -> Result<EvasionSelection> {
    if n > scores.len() {
        return Err(Error::validation(format!(
            "asked for {n} evasion samples from {} candidates",
            scores.len()
        )));
    }
    let mut eligible: Vec<usize> = match mode {
        EvasionMode::MaxError => (0..scores.len()).collect(),
        EvasionMode::Targeted { from, to } => {
            if from == to {
                return Err(Error::validation("targeted evasion needs two different labels"));
            }
            (0..scores.len())
                .filter(|&i| Label::from_score(scores[i], threshold) == to)
                .collect()
        }
    };
    if eligible.len() < n {
        return Err(Error::validation(format!(
            "asked for {n} samples labelled {} but only {} available",
            match mode {
                EvasionMode::Targeted { to, .. } => to,
                EvasionMode::MaxError => Label::One,
            },
            eligible.len()
        )));
    }
    let gap = |i: usize| (scores[i] - threshold).abs();
    eligible.sort_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(a.cmp(&b)));
    Ok(EvasionSelection {
        mode,
        selected: eligible[..n].iter().map(|&i| (i, scores[i])).collect(),
    })
}

pub fn evasion_select(substitute: &Mlp, candidates: &[FeatureVector], mode: EvasionMode, n: usize) -> Result<EvasionSelection> {
    let matrix = crate::dataset::features_to_matrix(candidates, substitute.input_dim())?;
    evasion_select_scores(&substitute.scores(matrix.view())?, mode, n, substitute.threshold())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvasionReport {
    pub size: usize,
    /// Target misclassification rate on the selection; `None` when empty.
    pub selected_error: Option<f64>,
    /// Same rate on an equal-size seeded random draw.
    pub baseline_error: Option<f64>,
}

fn error_rate(target: &TargetClassifier, candidates: &[FeatureVector], truth: &[Label], idx: &[usize]) -> Result<Option<f64>> {
    if idx.is_empty() {
        return Ok(None);
    }
    let chosen: Vec<FeatureVector> = idx.iter().map(|&i| candidates[i].clone()).collect();
    let predicted = target.classify_batch(&chosen)?;
    let wrong = idx.iter().zip(&predicted).filter(|(&i, &p)| truth[i] != p).count();
    Ok(Some(wrong as f64 / idx.len() as f64))
}

/// Compares the target's ground-truth error on the selection against a random
/// selection of equal size. Needs simulation ground truth.
pub fn evaluate_evasion(
    target: &TargetClassifier,
    candidates: &[FeatureVector],
    ground_truth: Option<&[Label]>,
    selection: &EvasionSelection,
    seed: u64,
) -> Result<EvasionReport> {
    let truth = ground_truth.ok_or_else(|| {
        Error::validation("evasion evaluation needs ground-truth labels, which this mode does not have")
    })?;
    if truth.len() != candidates.len() {
        return Err(Error::shape(format!("{} labels for {} candidates", truth.len(), candidates.len())));
    }
    let size = selection.selected.len();
    if selection.selected.iter().any(|&(i, _)| i >= candidates.len()) {
        return Err(Error::validation("selection refers to a missing candidate"));
    }
    let baseline = sample(&mut ChaCha8Rng::seed_from_u64(seed), candidates.len(), size).into_vec();
    Ok(EvasionReport {
        size,
        selected_error: error_rate(target, candidates, truth, &selection.indices())?,
        baseline_error: error_rate(target, candidates, truth, &baseline)?,
    })
}
