//! Tweet-style text cleaning and word-count features.
//!
//! Cleaning drops URL tokens, strips every non-alphanumeric character,
//! lowercases, and removes stop words. Features count occurrences of the
//! top-`k` corpus words, ordered by descending frequency with lexicographic
//! tie-breaking.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the bundled stop-word list.
pub const STOPWORDS_VERSION: u32 = 1;
const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_v1.txt");

/// Paper-scale feature dimension.
pub const DEFAULT_VOCAB_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// The versioned list shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored. Words are lowercased.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    /// Words in lexicographic order.
    pub fn sorted(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.words.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http") || lower.contains("://")
}

pub fn clean_text(raw: &str, stop_words: &StopWords) -> Vec<String> {
    raw.split_whitespace()
        .filter(|t| !is_url(t))
        .map(|t| {
            t.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && !stop_words.contains(t))
        .collect()
}

/// Word counts over a corpus, sorted by descending count then ascending word.
fn ranked_counts(corpus: &[Vec<String>]) -> Vec<(String, u64)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in corpus.iter().flatten() {
        *counts.entry(token.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(w, c)| (w.to_owned(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_ranked(ranked: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ranked.len());
        let mut words = Vec::with_capacity(ranked.len());
        let mut frequencies = Vec::with_capacity(ranked.len());
        for (i, (word, count)) in ranked.into_iter().enumerate() {
            if frequencies.last().is_some_and(|&prev| prev < count) {
                return Err(Error::Format(format!("vocabulary frequencies increase at `{word}`")));
            }
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary word `{word}`")));
            }
            words.push(word);
            frequencies.push(count);
        }
        if words.is_empty() {
            return Err(Error::validation("vocabulary is empty"));
        }
        Ok(Self {
            words,
            frequencies,
            index,
        })
    }

    /// Feature dimension `k`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// `word<TAB>count` per line, in rank order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, c) in self.words.iter().zip(&self.frequencies) {
            writeln!(out, "{w}\t{c}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ranked = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(n, line)| {
                let (w, c) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::Format(format!("vocabulary line {}: missing tab", n + 1)))?;
                let c = c
                    .trim()
                    .parse()
                    .map_err(|e| Error::Format(format!("vocabulary line {}: {e}", n + 1)))?;
                Ok((w.to_owned(), c))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_ranked(ranked)
    }
}

/// The `k` most frequent tokens; ties broken lexicographically ascending.
pub fn build_vocab(corpus: &[Vec<String>], k: usize) -> Result<Vocabulary> {
    if k == 0 {
        return Err(Error::validation("vocabulary size k must be at least 1"));
    }
    let mut ranked = ranked_counts(corpus);
    if ranked.len() < k {
        return Err(Error::validation(format!(
            "corpus has {} distinct tokens, {} short of k = {k}",
            ranked.len(),
            k - ranked.len()
        )));
    }
    ranked.truncate(k);
    Vocabulary::from_ranked(ranked)
}

/// Length-`k` word-count vector `(o_1, ..., o_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<u32>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| f64::from(c)).collect()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Out-of-vocabulary tokens are ignored.
pub fn featurize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> FeatureVector {
    let mut counts = vec![0u32; vocab.len()];
    for t in tokens {
        if let Some(i) = vocab.position(t.as_ref()) {
            counts[i] += 1;
        }
    }
    FeatureVector(counts)
}

/// Top-`top_n` `(word, count)` pairs over the corpus, same order as [`build_vocab`].
pub fn token_frequency_report(corpus: &[Vec<String>], top_n: usize) -> Result<Vec<(String, u64)>> {
    if corpus.iter().all(Vec::is_empty) {
        return Err(Error::validation("cannot report frequencies of an empty corpus"));
    }
    let mut ranked = ranked_counts(corpus);
    ranked.truncate(top_n);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn cleaning_drops_urls_punctuation_and_stop_words() {
        let stop = StopWords::from_words(["the"]);
        assert_eq!(clean_text("Check https://t.co/x the MOVIE!!", &stop), ["check", "movie"]);
        assert!(clean_text("", &stop).is_empty());
        assert!(clean_text("the The THE", &stop).is_empty());
        assert_eq!(clean_text("ftp://host/x http:x ok", &stop), ["ok"]);
        assert_eq!(clean_text("don't ... #tag @user", &stop), ["dont", "tag", "user"]);
    }

    #[test]
    fn bundled_list_is_pinned() {
        let stop = StopWords::bundled();
        assert_eq!(stop.len(), 127);
        for w in ["the", "and", "rt", "you"] {
            assert!(stop.contains(w));
        }
        assert!(!stop.contains("movie"));
    }

    #[test]
    fn vocabulary_orders_by_frequency_then_word() {
        let corpus = vec![toks("a b c a"), toks("b a")];
        assert_eq!(build_vocab(&corpus, 2).unwrap().words(), ["a", "b"]);
        let tie = vec![toks("b b a a")];
        assert_eq!(build_vocab(&tie, 1).unwrap().words(), ["a"]);
        let all = build_vocab(&corpus, 3).unwrap();
        assert_eq!(all.words(), ["a", "b", "c"]);
        assert_eq!(all.frequencies(), [3, 2, 1]);
    }

    #[test]
    fn vocabulary_shortfall_is_reported() {
        let err = build_vocab(&[toks("a b")], 5).unwrap_err().to_string();
        assert!(err.contains("3 short"), "{err}");
        assert!(build_vocab(&[toks("a")], 0).is_err());
    }

    #[test]
    fn featurize_counts_in_vocab_order() {
        let vocab = build_vocab(&[toks("good good bad")], 2).unwrap();
        assert_eq!(featurize(&toks("good good bad"), &vocab).0, [2, 1]);
        assert_eq!(featurize(&toks("meh nope"), &vocab).0, [0, 0]);
        assert_eq!(featurize::<String>(&[], &vocab).0, [0, 0]);
    }

    #[test]
    fn frequency_report() {
        let corpus = vec![toks("a a a b")];
        assert_eq!(
            token_frequency_report(&corpus, 20).unwrap(),
            [("a".to_owned(), 3), ("b".to_owned(), 1)]
        );
        assert_eq!(token_frequency_report(&corpus, 1).unwrap(), [("a".to_owned(), 3)]);
        let tie = vec![toks("b a b a")];
        assert_eq!(
            token_frequency_report(&tie, 2).unwrap(),
            [("a".to_owned(), 2), ("b".to_owned(), 2)]
        );
        assert!(token_frequency_report(&[], 3).is_err());
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let vocab = build_vocab(&[toks("x y y z z z")], 3).unwrap();
        let text = vocab.to_text();
        assert_eq!(text, "z\t3\ny\t2\nx\t1\n");
        assert_eq!(Vocabulary::from_text(&text).unwrap(), vocab);
        assert!(Vocabulary::from_text("a\t1\nb\t2\n").is_err());
    }
}
