use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{features_to_matrix, Dataset};
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::label::Label;
use crate::metrics::Classifier;
use crate::nn::{self, Activation, LayerSpec, Mlp, TrainConfig, DEFAULT_THRESHOLD};

/// Multinomial naive Bayes over count features with add-one smoothing.
///
/// Stores raw counts; log-probabilities are derived on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    doc_counts: [u64; 2],
    feature_counts: [Vec<u64>; 2],
    log_prior: [f64; 2],
    log_likelihood: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn from_counts(doc_counts: [u64; 2], feature_counts: [Vec<u64>; 2]) -> Result<Self> {
        let dim = feature_counts[0].len();
        if dim == 0 || feature_counts[1].len() != dim {
            return Err(Error::shape("class count vectors must be non-empty and equal length"));
        }
        if doc_counts.contains(&0) {
            return Err(Error::validation(
                "naive Bayes needs at least one training sample of each label",
            ));
        }
        let docs = (doc_counts[0] + doc_counts[1]) as f64;
        let log_prior = doc_counts.map(|c| (c as f64 / docs).ln());
        let log_likelihood = [0, 1].map(|c| {
            let total: u64 = feature_counts[c].iter().sum();
            let denom = (total + dim as u64) as f64;
            feature_counts[c]
                .iter()
                .map(|&n| ((n + 1) as f64 / denom).ln())
                .collect()
        });
        Ok(Self {
            doc_counts,
            feature_counts,
            log_prior,
            log_likelihood,
        })
    }

    pub fn fit(data: &Dataset) -> Result<Self> {
        let dim = data
            .dim()
            .ok_or_else(|| Error::validation("cannot train a target on an empty dataset"))?;
        let mut doc_counts = [0u64; 2];
        let mut feature_counts = [vec![0u64; dim], vec![0u64; dim]];
        for s in data.samples() {
            let c = s.label.index();
            doc_counts[c] += 1;
            for (acc, &n) in feature_counts[c].iter_mut().zip(s.features.counts()) {
                *acc += u64::from(n);
            }
        }
        Self::from_counts(doc_counts, feature_counts)
    }

    pub fn dim(&self) -> usize {
        self.feature_counts[0].len()
    }

    /// `P(feature i | label)`.
    pub fn likelihood(&self, label: Label, feature: usize) -> f64 {
        self.log_likelihood[label.index()][feature].exp()
    }

    /// Posterior probability of label 2.
    pub fn score(&self, counts: &[u32]) -> f64 {
        let joint = [0, 1].map(|c| {
            self.log_prior[c]
                + counts
                    .iter()
                    .zip(&self.log_likelihood[c])
                    .map(|(&n, l)| f64::from(n) * l)
                    .sum::<f64>()
        });
        crate::nn::sigmoid(joint[1] - joint[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetModel {
    NaiveBayes(NaiveBayes),
    Mlp(Mlp),
}

/// How to train a mock target.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    #[default]
    NaiveBayes,
    Mlp { hidden: Vec<usize>, config: TrainConfig },
}

/// The frozen classifier standing behind the service.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetClassifier {
    model: TargetModel,
    threshold: f64,
}

pub fn train_mock_target(data: &Dataset, spec: &TargetSpec) -> Result<TargetClassifier> {
    if data.is_empty() {
        return Err(Error::validation("cannot train a target on an empty dataset"));
    }
    for label in Label::ALL {
        if data.count_label(label) == 0 {
            return Err(Error::validation(format!(
                "target training data has no samples of label {label}"
            )));
        }
    }
    let model = match spec {
        TargetSpec::NaiveBayes => TargetModel::NaiveBayes(NaiveBayes::fit(data)?),
        TargetSpec::Mlp { hidden, config } => {
            let dim = data.dim().expect("non-empty");
            let arch = LayerSpec::stack(dim, hidden, Activation::Sigmoid, 2, Activation::Softmax);
            TargetModel::Mlp(nn::train(&arch, &data.to_training_set()?, config)?.model)
        }
    };
    TargetClassifier::new(model, DEFAULT_THRESHOLD)
}

const TARGET_MAGIC: &[u8; 4] = b"APLT";
const TARGET_VERSION: u32 = 1;

impl TargetClassifier {
    pub fn new(model: TargetModel, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::validation(format!("threshold {threshold} outside (0, 1)")));
        }
        Ok(Self { model, threshold })
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            TargetModel::NaiveBayes(nb) => nb.dim(),
            TargetModel::Mlp(m) => m.input_dim(),
        }
    }

    pub fn check_dim(&self, features: &FeatureVector) -> Result<()> {
        if features.len() != self.dim() {
            return Err(Error::shape(format!(
                "expected {} counts, got {}",
                self.dim(),
                features.len()
            )));
        }
        Ok(())
    }

    pub fn score(&self, features: &FeatureVector) -> Result<f64> {
        self.check_dim(features)?;
        match &self.model {
            TargetModel::NaiveBayes(nb) => Ok(nb.score(features.counts())),
            TargetModel::Mlp(m) => Ok(m.forward(&features.to_f64())?[1]),
        }
    }

    pub fn scores(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        match &self.model {
            TargetModel::Mlp(m) => m.scores(features_to_matrix(features, m.input_dim())?.view()),
            TargetModel::NaiveBayes(_) => features.iter().map(|f| self.score(f)).collect(),
        }
    }

    /// `(label, score)` without touching any quota.
    pub fn classify_unmetered(&self, features: &FeatureVector) -> Result<(Label, f64)> {
        let score = self.score(features)?;
        Ok((Label::from_score(score, self.threshold), score))
    }

    /// Binary file: `"APLT"`, version `u32`, kind `u8` (0 naive Bayes, 1 MLP),
    /// threshold `f64`, then for naive Bayes `dim u32`, two `u64` document
    /// counts and `2 x dim` `u64` word counts (label 1 first); for an MLP the
    /// embedded model file. Little-endian throughout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = TARGET_MAGIC.to_vec();
        out.extend(TARGET_VERSION.to_le_bytes());
        match &self.model {
            TargetModel::NaiveBayes(nb) => {
                out.push(0);
                out.extend(self.threshold.to_le_bytes());
                out.extend((nb.dim() as u32).to_le_bytes());
                for c in nb.doc_counts {
                    out.extend(c.to_le_bytes());
                }
                for c in nb.feature_counts.iter().flatten() {
                    out.extend(c.to_le_bytes());
                }
            }
            TargetModel::Mlp(m) => {
                out.push(1);
                out.extend(self.threshold.to_le_bytes());
                out.extend(m.to_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = || Error::Format("truncated target file".into());
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let s = bytes.get(*pos..*pos + n).ok_or_else(truncated)?;
            *pos += n;
            Ok(s)
        };
        let mut pos = 0;
        if take(&mut pos, 4)? != TARGET_MAGIC {
            return Err(Error::Format("not a target file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("4 bytes"));
        if version != TARGET_VERSION {
            return Err(Error::Format(format!("unsupported target version {version}")));
        }
        let kind = take(&mut pos, 1)?[0];
        let threshold = f64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8 bytes"));
        let model = match kind {
            0 => {
                let dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("4 bytes")) as usize;
                let mut read_u64s = |n: usize| -> Result<Vec<u64>> {
                    (0..n)
                        .map(|_| Ok(u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8 bytes"))))
                        .collect()
                };
                let docs = read_u64s(2)?;
                let c1 = read_u64s(dim)?;
                let c2 = read_u64s(dim)?;
                TargetModel::NaiveBayes(NaiveBayes::from_counts([docs[0], docs[1]], [c1, c2])?)
            }
            1 => {
                let m = Mlp::from_bytes(&bytes[pos..])?;
                pos = bytes.len();
                TargetModel::Mlp(m)
            }
            other => return Err(Error::Format(format!("unknown target kind {other}"))),
        };
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after target".into()));
        }
        Self::new(model, threshold)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl Classifier for TargetClassifier {
    fn classify_batch(&self, features: &[FeatureVector]) -> Result<Vec<Label>> {
        Ok(self
            .scores(features)?
            .into_iter()
            .map(|s| Label::from_score(s, self.threshold))
            .collect())
    }
}
