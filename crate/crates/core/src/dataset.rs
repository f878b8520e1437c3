//! Labeled count-feature datasets and their line format.
//!
//! One JSON record per line: `{"counts":[...],"label":1}`; synthetic samples
//! add `"synthetic":true`.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::label::Label;
use crate::nn::TrainingSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    #[serde(rename = "counts")]
    pub features: FeatureVector,
    pub label: Label,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl LabeledSample {
    pub fn new(features: FeatureVector, label: Label) -> Self {
        Self {
            features,
            label,
            synthetic: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
}

impl Dataset {
    /// All samples must share one feature dimension.
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let dim = first.features.len();
            if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.features.len() != dim) {
                return Err(Error::shape(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn from_parts(features: Vec<FeatureVector>, labels: Vec<Label>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        Self::new(
            features
                .into_iter()
                .zip(labels)
                .map(|(f, l)| LabeledSample::new(f, l))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimension, `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.features.len())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Concatenation; dimensions must agree.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Dataset::new(samples)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn feature_matrix(&self) -> Array2<f64> {
        features_to_matrix(&self.features(), self.dim().unwrap_or(0))
            .expect("dataset samples share one dimension")
    }

    pub fn to_training_set(&self) -> Result<TrainingSet> {
        TrainingSet::new(
            self.feature_matrix(),
            self.samples.iter().map(|s| s.label.index()).collect(),
        )
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("samples always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let samples = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, line)| {
                serde_json::from_str(line)
                    .map_err(|e| Error::Format(format!("dataset line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

/// Stacks count vectors into a row-per-sample `f64` matrix of width `dim`.
pub fn features_to_matrix(features: &[FeatureVector], dim: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((features.len(), dim));
    for (i, (mut row, f)) in m.rows_mut().into_iter().zip(features).enumerate() {
        if f.len() != dim {
            return Err(Error::shape(format!(
                "sample {i} has {} features, expected {dim}",
                f.len()
            )));
        }
        for (dst, &c) in row.iter_mut().zip(f.counts()) {
            *dst = f64::from(c);
        }
    }
    Ok(m)
}
