//! Seeded offline corpora standing in for scraped short posts.
//!
//! Documents mix stop words, links, mentions and hashtags with content words
//! drawn from an opinion lexicon (label 1), a reporting lexicon (label 2) and a
//! shared topic lexicon. Each document gets a signal strength in `[0, 1]`; weak
//! documents pull content words from the other class, so the corpus contains
//! genuinely ambiguous posts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::featurizer::{build_vocab, clean_text, featurize, FeatureVector, StopWords, Vocabulary};
use crate::label::Label;

const OPINION: &[&str] = &[
    "love", "hate", "awesome", "terrible", "amazing", "awful", "best", "worst", "feel", "think",
    "wow", "lol", "omg", "beautiful", "boring", "happy", "sad", "angry", "cute", "stupid",
    "favorite", "annoying", "excited", "disappointed", "fun",
];

const REPORTING: &[&str] = &[
    "report", "announced", "official", "percent", "according", "government", "president",
    "statement", "released", "data", "million", "police", "court", "election", "minister",
    "confirmed", "update", "agency", "market", "shares", "study", "billion", "council", "vote",
    "launch",
];

const TOPIC: &[&str] = &[
    "game", "city", "today", "phone", "team", "music", "movie", "weather", "school", "food",
    "season", "night", "week", "year", "people", "world", "news", "video", "traffic", "coffee",
    "weekend", "series", "match", "store", "train",
];

const DECORATION: &[&str] = &["!", "!!", "?", "...", ":)", ":(", "&amp;", "-", "#"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub documents: usize,
    /// Probability that a document carries label 1.
    pub label_one_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            documents: 2000,
            label_one_fraction: 0.6,
            min_words: 8,
            max_words: 20,
            seed: 2017,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub text: String,
    pub label: Label,
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.documents == 0 {
            return Err(Error::validation("fixture needs at least one document"));
        }
        if !(0.0..=1.0).contains(&self.label_one_fraction) {
            return Err(Error::validation("label_one_fraction must lie in [0, 1]"));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::validation("need 1 <= min_words <= max_words"));
        }
        Ok(())
    }
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words[rng.random_range(0..words.len())]
}

fn document<R: Rng>(rng: &mut R, spec: &FixtureSpec, stop: &[&str]) -> Document {
    let label = if rng.random_bool(spec.label_one_fraction) { Label::One } else { Label::Two };
    let (own, other) = match label {
        Label::One => (OPINION, REPORTING),
        Label::Two => (REPORTING, OPINION),
    };
    let strength: f64 = rng.random();
    let p_own = 0.3 + 0.35 * strength;
    let p_other = 0.15 * (1.0 - strength);
    let len = rng.random_range(spec.min_words..=spec.max_words);
    let mut tokens: Vec<String> = Vec::with_capacity(len + 3);
    for _ in 0..len {
        let word = if rng.random_bool(0.35) {
            pick(rng, stop)
        } else {
            let u: f64 = rng.random();
            if u < p_own {
                pick(rng, own)
            } else if u < p_own + p_other {
                pick(rng, other)
            } else {
                pick(rng, TOPIC)
            }
        };
        let mut token = word.to_string();
        if rng.random_bool(0.1) {
            token = token.to_uppercase();
        }
        if rng.random_bool(0.08) {
            token.push_str(pick(rng, DECORATION));
        }
        tokens.push(token);
    }
    if rng.random_bool(0.3) {
        tokens.insert(0, format!("@user{}", rng.random_range(1..500)));
    }
    if rng.random_bool(0.25) {
        tokens.push(format!("#{}", pick(rng, TOPIC)));
    }
    if rng.random_bool(0.3) {
        tokens.push(format!("https://t.co/{:08x}", rng.random::<u32>()));
    }
    Document {
        text: tokens.join(" "),
        label,
    }
}

/// Deterministic corpus for `spec`.
pub fn generate_corpus(spec: &FixtureSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let stop_words = StopWords::bundled();
    let stop = stop_words.sorted();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.documents).map(|_| document(&mut rng, spec, &stop)).collect())
}

/// Splits a corpus into its label-1 and label-2 texts, one document per line.
pub fn corpus_files(docs: &[Document]) -> [String; 2] {
    let mut out = [String::new(), String::new()];
    for d in docs {
        let buf = &mut out[d.label.index()];
        buf.push_str(&d.text);
        buf.push('\n');
    }
    out
}

/// Reads a pair of one-document-per-line files back into labeled documents.
pub fn read_corpus_files(label_one: &Path, label_two: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (path, label) in [(label_one, Label::One), (label_two, Label::Two)] {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        docs.extend(
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| Document { text: l.to_string(), label }),
        );
    }
    Ok(docs)
}

pub fn tokenize_all(docs: &[Document], stop_words: &StopWords) -> Vec<Vec<String>> {
    docs.iter().map(|d| clean_text(&d.text, stop_words)).collect()
}

/// Featurizes documents against `vocab`; labels are the ground truth.
pub fn featurize_documents(docs: &[Document], vocab: &Vocabulary, stop_words: &StopWords) -> Result<Dataset> {
    Dataset::new(
        docs.iter()
            .map(|d| LabeledSample::new(featurize(&clean_text(&d.text, stop_words), vocab), d.label))
            .collect(),
    )
}

/// Text fixture with a vocabulary fitted on the target's training split.
#[derive(Debug, Clone)]
pub struct TextFixture {
    pub vocabulary: Vocabulary,
    /// Ground-truth labelled data for training the mock target.
    pub target_train: Dataset,
    /// Disjoint ground-truth labelled data; the adversary's pools come from here.
    pub holdout: Dataset,
}

/// Builds a fixture with `target_docs` target-training documents and
/// `holdout_docs` further documents from the same generator.
pub fn text_fixture(target_docs: usize, holdout_docs: usize, k: usize, seed: u64) -> Result<TextFixture> {
    let spec = FixtureSpec {
        documents: target_docs + holdout_docs,
        seed,
        ..FixtureSpec::default()
    };
    let docs = generate_corpus(&spec)?;
    let stop_words = StopWords::bundled();
    let (train_docs, rest) = docs.split_at(target_docs);
    let vocabulary = build_vocab(&tokenize_all(train_docs, &stop_words), k)?;
    Ok(TextFixture {
        target_train: featurize_documents(train_docs, &vocabulary, &stop_words)?,
        holdout: featurize_documents(rest, &vocabulary, &stop_words)?,
        vocabulary,
    })
}

/// Two count-valued blobs: label 1 around (30, 10), label 2 around (10, 30).
pub fn gaussian_counts(n_per_label: usize, std: f64, seed: u64) -> Result<Dataset> {
    let noise = Normal::new(0.0, std).map_err(|e| Error::validation(format!("gaussian fixture: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * n_per_label);
    for (label, centre) in [(Label::One, [30.0, 10.0]), (Label::Two, [10.0, 30.0])] {
        for _ in 0..n_per_label {
            let counts = centre
                .iter()
                .map(|c: &f64| (c + noise.sample(&mut rng)).round().max(0.0) as u32)
                .collect();
            samples.push(LabeledSample::new(FeatureVector(counts), label));
        }
    }
    Dataset::new(samples)
}
