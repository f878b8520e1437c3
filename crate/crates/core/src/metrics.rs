//! Disagreement between a reference classifier and a candidate.
//!
//! The reference's labels split the test set into `n1` label-1 and `n2`
//! label-2 samples; `m1`/`m2` count the candidate's disagreements in each part.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::features_to_matrix;
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::nn::Mlp;
use crate::label::Label;

/// Anything that assigns labels to count vectors.
pub trait Classifier {
    fn classify_batch(&self, features: &[FeatureVector]) -> Result<Vec<Label>>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn classify_batch(&self, features: &[FeatureVector]) -> Result<Vec<Label>> {
        (**self).classify_batch(features)
    }
}

impl Classifier for Mlp {
    fn classify_batch(&self, features: &[FeatureVector]) -> Result<Vec<Label>> {
        self.predict_labels(features_to_matrix(features, self.input_dim())?.view())
    }
}

/// Fixed labels, e.g. oracle answers recorded for a test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedLabels(pub Vec<Label>);

impl Classifier for RecordedLabels {
    fn classify_batch(&self, features: &[FeatureVector]) -> Result<Vec<Label>> {
        if features.len() != self.0.len() {
            return Err(Error::shape(format!(
                "{} recorded labels for {} samples",
                self.0.len(),
                features.len()
            )));
        }
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
}

impl DivergenceReport {
    pub fn new(n1: usize, n2: usize, m1: usize, m2: usize) -> Result<Self> {
        if m1 > n1 || m2 > n2 {
            return Err(Error::validation("disagreement count exceeds class count"));
        }
        if n1 == 0 || n2 == 0 {
            return Err(empty_class_error(n1, n2));
        }
        Ok(Self { n1, n2, m1, m2 })
    }

    pub fn d1(&self) -> f64 {
        self.m1 as f64 / self.n1 as f64
    }

    pub fn d2(&self) -> f64 {
        self.m2 as f64 / self.n2 as f64
    }

    pub fn d(&self) -> f64 {
        (self.m1 + self.m2) as f64 / (self.n1 + self.n2) as f64
    }

    pub fn d_max(&self) -> f64 {
        self.d1().max(self.d2())
    }

    /// One `key = value` line per field.
    pub fn to_key_values(&self) -> String {
        format!(
            "n1 = {}\nn2 = {}\nm1 = {}\nm2 = {}\nd1 = {}\nd2 = {}\nd = {}\nd_max = {}\n",
            self.n1,
            self.n2,
            self.m1,
            self.m2,
            self.d1(),
            self.d2(),
            self.d(),
            self.d_max()
        )
    }

    /// Parses the counts back from [`DivergenceReport::to_key_values`] output.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut counts = [None; 4];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("report line without `=`: {line}")))?;
            let slot = match key.trim() {
                "n1" => 0,
                "n2" => 1,
                "m1" => 2,
                "m2" => 3,
                _ => continue,
            };
            counts[slot] = Some(
                value
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Format(format!("{}: {e}", key.trim())))?,
            );
        }
        match counts {
            [Some(n1), Some(n2), Some(m1), Some(m2)] => Self::new(n1, n2, m1, m2),
            _ => Err(Error::Format("report is missing a count field".into())),
        }
    }
}

fn empty_class_error(n1: usize, n2: usize) -> Error {
    let missing = if n1 == 0 { 1 } else { 2 };
    Error::validation(format!(
        "reference assigns no sample to label {missing} (n1 = {n1}, n2 = {n2}); d{missing} is undefined"
    ))
}

/// Divergence from two label sequences over the same samples.
pub fn divergence_from_labels(reference: &[Label], candidate: &[Label]) -> Result<DivergenceReport> {
    if reference.len() != candidate.len() {
        return Err(Error::shape(format!(
            "{} reference labels vs {} candidate labels",
            reference.len(),
            candidate.len()
        )));
    }
    let (mut n1, mut n2, mut m1, mut m2) = (0, 0, 0, 0);
    for (&r, &c) in reference.iter().zip(candidate) {
        match r {
            Label::One => {
                n1 += 1;
                m1 += usize::from(c != r);
            }
            Label::Two => {
                n2 += 1;
                m2 += usize::from(c != r);
            }
        }
    }
    DivergenceReport::new(n1, n2, m1, m2)
}

pub fn divergence<R, C>(reference: &R, candidate: &C, test: &[FeatureVector]) -> Result<DivergenceReport>
where
    R: Classifier + ?Sized,
    C: Classifier + ?Sized,
{
    let r = reference.classify_batch(test)?;
    let c = candidate.classify_batch(test)?;
    divergence_from_labels(&r, &c)
}

/// `m / n` as a percentage with two decimals, rounded half-up.
pub fn percent_half_up(m: usize, n: usize) -> String {
    let (m, n) = (m as u128, n as u128);
    let hundredths = (2 * m * 10_000 + n) / (2 * n);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

pub const SWEEP_HEADER: &str = "total | N_r | N_s | d1 | d2 | d";

/// `total | N_r | N_s | d1 | d2 | d`, metrics as percentages.
pub fn render_sweep_row(n_real: usize, n_synth: usize, report: &DivergenceReport) -> String {
    format!(
        "{} | {} | {} | {} | {} | {}",
        n_real + n_synth,
        n_real,
        n_synth,
        percent_half_up(report.m1, report.n1),
        percent_half_up(report.m2, report.n2),
        percent_half_up(report.m1 + report.m2, report.n1 + report.n2),
    )
}

/// Header plus one row per `(N_r, N_s, report)`.
pub fn render_sweep_table(rows: &[(usize, usize, DivergenceReport)]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (nr, ns, report) in rows {
        writeln!(out, "{}", render_sweep_row(*nr, *ns, report)).expect("String write");
    }
    out
}

/// Plot-ready CSV of the same rows, fractions unrounded.
pub fn render_sweep_csv(rows: &[(usize, usize, DivergenceReport)]) -> String {
    let mut out = String::from("total,n_real,n_synth,n1,n2,m1,m2,d1,d2,d,d_max\n");
    for (nr, ns, r) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            nr + ns,
            nr,
            ns,
            r.n1,
            r.n2,
            r.m1,
            r.m2,
            r.d1(),
            r.d2(),
            r.d(),
            r.d_max()
        )
        .expect("String write");
    }
    out
}
