//! The make-fixtures output directory.
//!
//! ```text
//! label1.txt            label-1 documents, one per line
//! label2.txt            label-2 documents, one per line
//! vocab.txt             word<TAB>count, most frequent first
//! target_train.jsonl    featurized target-training documents (ground truth)
//! holdout.jsonl         featurized held-out documents (ground truth)
//! token_frequency.tsv   rank<TAB>word<TAB>count over the target corpus
//! ```

use std::fmt::Write as _;
use std::path::Path;

use apilab_core::dataset::Dataset;
use apilab_core::featurizer::{build_vocab, token_frequency_report, StopWords, Vocabulary};
use apilab_core::fixture::{corpus_files, featurize_documents, generate_corpus, tokenize_all, Document, FixtureSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::io::{read_text, write_text};

pub const LABEL_ONE: &str = "label1.txt";
pub const LABEL_TWO: &str = "label2.txt";
pub const VOCAB: &str = "vocab.txt";
pub const TARGET_TRAIN: &str = "target_train.jsonl";
pub const HOLDOUT: &str = "holdout.jsonl";
pub const TOKEN_FREQUENCY: &str = "token_frequency.tsv";

/// Rows in the token-frequency report.
pub const FREQUENCY_ROWS: usize = 50;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub documents: Vec<Document>,
    pub target_documents: usize,
    pub vocabulary: Vocabulary,
    pub target_train: Dataset,
    pub holdout: Dataset,
}

/// Vocabulary is fitted on the first `target_documents` documents only.
pub fn from_documents(documents: Vec<Document>, target_documents: usize, k: usize) -> Result<Fixture, CliError> {
    if target_documents == 0 || target_documents > documents.len() {
        return Err(CliError::Manifest(format!(
            "need 1..={} target documents, got {target_documents}",
            documents.len()
        )));
    }
    let stop = StopWords::bundled();
    let (train, rest) = documents.split_at(target_documents);
    let vocabulary = build_vocab(&tokenize_all(train, &stop), k)?;
    Ok(Fixture {
        target_train: featurize_documents(train, &vocabulary, &stop)?,
        holdout: featurize_documents(rest, &vocabulary, &stop)?,
        vocabulary,
        target_documents,
        documents,
    })
}

pub fn generate(target_documents: usize, holdout_documents: usize, k: usize, seed: u64) -> Result<Fixture, CliError> {
    let spec = FixtureSpec {
        documents: target_documents + holdout_documents,
        seed,
        ..FixtureSpec::default()
    };
    from_documents(generate_corpus(&spec)?, target_documents, k)
}

/// Supplied corpora are interleaved by a seeded shuffle before the split.
pub fn from_corpus_files(
    label_one: &Path,
    label_two: &Path,
    target_documents: usize,
    k: usize,
    seed: u64,
) -> Result<Fixture, CliError> {
    let mut docs = apilab_core::fixture::read_corpus_files(label_one, label_two)?;
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    from_documents(docs, target_documents, k)
}

pub fn frequency_report(fixture: &Fixture) -> Result<String, CliError> {
    let stop = StopWords::bundled();
    let tokens = tokenize_all(&fixture.documents[..fixture.target_documents], &stop);
    let mut out = String::from("rank\tword\tcount\n");
    for (i, (word, count)) in token_frequency_report(&tokens, FREQUENCY_ROWS)?.iter().enumerate() {
        writeln!(out, "{}\t{word}\t{count}", i + 1).expect("String write");
    }
    Ok(out)
}

pub fn write(dir: &Path, fixture: &Fixture) -> Result<(), CliError> {
    let [one, two] = corpus_files(&fixture.documents);
    write_text(&dir.join(LABEL_ONE), &one)?;
    write_text(&dir.join(LABEL_TWO), &two)?;
    write_text(&dir.join(VOCAB), &fixture.vocabulary.to_text())?;
    write_text(&dir.join(TARGET_TRAIN), &fixture.target_train.to_jsonl())?;
    write_text(&dir.join(HOLDOUT), &fixture.holdout.to_jsonl())?;
    write_text(&dir.join(TOKEN_FREQUENCY), &frequency_report(fixture)?)
}

/// The parts of a fixture directory an attack run needs.
#[derive(Debug, Clone)]
pub struct LoadedFixture {
    pub vocabulary: Vocabulary,
    pub target_train: Dataset,
    pub holdout: Dataset,
}

pub fn load(dir: &Path) -> Result<LoadedFixture, CliError> {
    Ok(LoadedFixture {
        vocabulary: Vocabulary::from_text(&read_text(&dir.join(VOCAB))?)?,
        target_train: Dataset::from_jsonl(&read_text(&dir.join(TARGET_TRAIN))?)?,
        holdout: Dataset::from_jsonl(&read_text(&dir.join(HOLDOUT))?)?,
    })
}

impl From<Fixture> for LoadedFixture {
    fn from(f: Fixture) -> Self {
        Self {
            vocabulary: f.vocabulary,
            target_train: f.target_train,
            holdout: f.holdout,
        }
    }
}
