use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::featurizer::FeatureVector;
use crate::label::Label;
use crate::metrics::{divergence, DivergenceReport};
use crate::nn::Mlp;
use crate::oracle::{train_mock_target, TargetClassifier, TargetSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CausativeSelection {
    /// Flipped candidate indices, ascending.
    pub flip_indices: Vec<usize>,
    /// Every candidate with its substitute label, flipped where selected.
    pub flipped_dataset: Dataset,
}

/// `(top, bottom)` sizes: ⌈N·p/200⌉ highest and ⌊N·p/200⌋ lowest scores.
pub fn causative_counts(n: usize, p: f64) -> (usize, usize) {
    let half = n as f64 * p / 200.0;
    let top = ((half - 1e-9).ceil().max(0.0) as usize).min(n);
    let bottom = ((half + 1e-9).floor().max(0.0) as usize).min(n - top);
    (top, bottom)
}

fn labelled(features: &[FeatureVector], labels: &[Label], flips: &[usize]) -> Result<CausativeSelection> {
    let mut samples: Vec<LabeledSample> = features
        .iter()
        .zip(labels)
        .map(|(f, &l)| LabeledSample::new(f.clone(), l))
        .collect();
    for &i in flips {
        samples[i].label = samples[i].label.flipped();
    }
    Ok(CausativeSelection {
        flip_indices: flips.to_vec(),
        flipped_dataset: Dataset::new(samples)?,
    })
}

/// Flips the extreme-score candidates. `scores` are the substitute's
/// probabilities of label 2; labels come from `threshold`.
pub fn causative_select_scores(
    scores: &[f64],
    candidates: &[FeatureVector],
    p: f64,
    threshold: f64,
) -> Result<CausativeSelection> {
    if candidates.is_empty() {
        return Err(Error::validation("causative candidate set is empty"));
    }
    if scores.len() != candidates.len() {
        return Err(Error::shape(format!("{} scores for {} candidates", scores.len(), candidates.len())));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::validation("p must lie in (0, 100]"));
    }
    let n = candidates.len();
    let (top, bottom) = causative_counts(n, p);
    if top + bottom == 0 {
        return Err(Error::validation(format!(
            "p = {p} selects no sample out of {n}; use p >= {:.4}",
            100.0 / n as f64
        )));
    }
    let mut by_desc: Vec<usize> = (0..n).collect();
    by_desc.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut flips: Vec<usize> = by_desc[..top].to_vec();
    let mut by_asc: Vec<usize> = by_desc[top..].to_vec();
    by_asc.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    flips.extend_from_slice(&by_asc[..bottom]);
    flips.sort_unstable();
    let labels: Vec<Label> = scores.iter().map(|&s| Label::from_score(s, threshold)).collect();
    labelled(candidates, &labels, &flips)
}

pub fn causative_select(substitute: &Mlp, candidates: &[FeatureVector], p: f64) -> Result<CausativeSelection> {
    let matrix = crate::dataset::features_to_matrix(candidates, substitute.input_dim())?;
    let scores = substitute.scores(matrix.view())?;
    causative_select_scores(&scores, candidates, p, substitute.threshold())
}

/// Baseline: the same substitute labels with `count` uniformly chosen flips.
pub fn random_flip(
    scores: &[f64],
    candidates: &[FeatureVector],
    count: usize,
    threshold: f64,
    seed: u64,
) -> Result<CausativeSelection> {
    if count > candidates.len() || scores.len() != candidates.len() {
        return Err(Error::validation("random flip count exceeds the candidate set"));
    }
    let mut flips = sample(&mut ChaCha8Rng::seed_from_u64(seed), candidates.len(), count).into_vec();
    flips.sort_unstable();
    let labels: Vec<Label> = scores.iter().map(|&s| Label::from_score(s, threshold)).collect();
    labelled(candidates, &labels, &flips)
}

/// Multiset union: every record of `original`, then each record of
/// `poisoned` not matched by an equal, still unmatched record of `original`.
pub fn multiset_union(original: &Dataset, poisoned: &Dataset) -> Result<Dataset> {
    let mut unmatched: HashMap<(&[u32], Label), usize> = HashMap::new();
    for s in original.samples() {
        *unmatched.entry((s.features.counts(), s.label)).or_default() += 1;
    }
    let mut out = original.samples().to_vec();
    for s in poisoned.samples() {
        match unmatched.get_mut(&(s.features.counts(), s.label)) {
            Some(c) if *c > 0 => *c -= 1,
            _ => out.push(s.clone()),
        }
    }
    Dataset::new(out)
}

/// Retrains the mock target on `original ∪ poisoned` and reports d(T, T̃) on `eval`.
pub fn evaluate_causative(
    spec: &TargetSpec,
    original: &Dataset,
    poisoned: &Dataset,
    eval: &[FeatureVector],
) -> Result<(TargetClassifier, DivergenceReport)> {
    let target = train_mock_target(original, spec)?;
    let retrained = train_mock_target(&multiset_union(original, poisoned)?, spec)?;
    let report = divergence(&target, &retrained, eval)?;
    Ok((retrained, report))
}

/// d(T, T̃) for `draws` independent random flips of `count` candidates, the
/// i-th drawn with `seed + i`. Their mean is the chance-level baseline for
/// [`causative_select`].
#[allow(clippy::too_many_arguments)]
pub fn random_flip_impact(
    spec: &TargetSpec,
    original: &Dataset,
    scores: &[f64],
    candidates: &[FeatureVector],
    count: usize,
    threshold: f64,
    seed: u64,
    draws: usize,
    eval: &[FeatureVector],
) -> Result<Vec<DivergenceReport>> {
    if draws == 0 {
        return Err(Error::validation("need at least one random draw"));
    }
    (0..draws as u64)
        .map(|i| {
            let flipped = random_flip(scores, candidates, count, threshold, seed.wrapping_add(i))?;
            evaluate_causative(spec, original, &flipped.flipped_dataset, eval).map(|(_, r)| r)
        })
        .collect()
}

/// Mean overall divergence of a set of reports.
pub fn mean_d(reports: &[DivergenceReport]) -> f64 {
    reports.iter().map(DivergenceReport::d).sum::<f64>() / reports.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feats(n: usize) -> Vec<FeatureVector> {
        (0..n as u32).map(|i| FeatureVector(vec![i, 1])).collect()
    }

    #[test]
    fn counts_follow_rounding_rule() {
        assert_eq!(causative_counts(1000, 10.0), (50, 50));
        assert_eq!(causative_counts(10, 20.0), (1, 1));
        assert_eq!(causative_counts(15, 10.0), (1, 0));
        assert_eq!(causative_counts(7, 100.0), (4, 3));
        assert_eq!(causative_counts(5, 10.0), (1, 0));
        assert_eq!(causative_counts(3, 1.0), (1, 0));
    }

    #[test]
    fn flips_extremes_only() {
        let scores = [0.01, 0.2, 0.3, 0.4, 0.45, 0.55, 0.6, 0.7, 0.8, 0.99];
        let sel = causative_select_scores(&scores, &feats(10), 20.0, 0.5).unwrap();
        assert_eq!(sel.flip_indices, [0, 9]);
        let labels = sel.flipped_dataset.labels();
        assert_eq!(labels[0], Label::Two);
        assert_eq!(labels[9], Label::One);
        assert_eq!(labels[1], Label::One);
        assert_eq!(labels[8], Label::Two);
    }

    #[test]
    fn p_100_flips_everything() {
        let scores = [0.1, 0.9, 0.3, 0.7, 0.5];
        let sel = causative_select_scores(&scores, &feats(5), 100.0, 0.5).unwrap();
        assert_eq!(sel.flip_indices, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn equal_scores_break_ties_by_index() {
        let sel = causative_select_scores(&[0.5; 10], &feats(10), 30.0, 0.5).unwrap();
        // top ⌈1.5⌉ = 2 takes indices 0, 1; bottom ⌊1.5⌋ = 1 takes the next lowest index.
        assert_eq!(sel.flip_indices, [0, 1, 2]);
    }

    #[test]
    fn too_small_p_is_rejected() {
        let err = causative_select_scores(&[0.2, 0.8], &feats(2), 1e-12, 0.5).unwrap_err();
        assert!(err.to_string().contains("p >="), "{err}");
        assert!(causative_select_scores(&[], &[], 10.0, 0.5).is_err());
    }

    #[test]
    fn union_with_itself_is_itself() {
        let d = Dataset::from_parts(feats(4), vec![Label::One, Label::Two, Label::One, Label::One]).unwrap();
        assert_eq!(multiset_union(&d, &d).unwrap(), d);
        let mut flipped = d.samples().to_vec();
        flipped[1].label = Label::One;
        let u = multiset_union(&d, &Dataset::new(flipped).unwrap()).unwrap();
        assert_eq!(u.len(), 5);
    }

    #[test]
    fn no_op_poisoning_leaves_target_unchanged() {
        let d = Dataset::from_parts(
            vec![FeatureVector(vec![3, 0]), FeatureVector(vec![0, 2]), FeatureVector(vec![1, 1])],
            vec![Label::One, Label::Two, Label::Two],
        )
        .unwrap();
        let (_, report) = evaluate_causative(&TargetSpec::NaiveBayes, &d, &d, &d.features()).unwrap();
        assert_eq!(report.m1 + report.m2, 0);
    }

    #[test]
    fn random_baseline_is_seeded() {
        let scores = [0.1, 0.9, 0.3, 0.7, 0.5, 0.2];
        let a = random_flip(&scores, &feats(6), 2, 0.5, 3).unwrap();
        assert_eq!(a, random_flip(&scores, &feats(6), 2, 0.5, 3).unwrap());
        assert_eq!(a.flip_indices.len(), 2);
    }

    #[test]
    fn random_impact_draws_are_seeded_and_counted() {
        let d = Dataset::from_parts(
            vec![FeatureVector(vec![3, 0]), FeatureVector(vec![0, 2]), FeatureVector(vec![1, 1])],
            vec![Label::One, Label::Two, Label::Two],
        )
        .unwrap();
        let cands = vec![FeatureVector(vec![2, 0]), FeatureVector(vec![0, 3]), FeatureVector(vec![1, 2])];
        let scores = [0.1, 0.9, 0.6];
        let run = |draws| random_flip_impact(&TargetSpec::NaiveBayes, &d, &scores, &cands, 1, 0.5, 4, draws, &d.features());
        let reports = run(3).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports, run(3).unwrap());
        let zero = run(1).map(|r| mean_d(&r)).unwrap();
        assert!((0.0..=1.0).contains(&zero));
        assert!(run(0).is_err());
    }

    proptest! {
        #[test]
        fn no_interior_sample_is_flipped(
            scores in proptest::collection::vec(0.0f64..1.0, 1..60),
            p in 1.0f64..100.0,
        ) {
            let n = scores.len();
            let Ok(sel) = causative_select_scores(&scores, &feats(n), p, 0.5) else {
                prop_assert_eq!(causative_counts(n, p), (0, 0));
                return Ok(());
            };
            let (top, bottom) = causative_counts(n, p);
            prop_assert_eq!(sel.flip_indices.len(), top + bottom);
            let flipped: std::collections::HashSet<usize> = sel.flip_indices.iter().copied().collect();
            let kept: Vec<f64> = (0..n).filter(|i| !flipped.contains(i)).map(|i| scores[i]).collect();
            if let (Some(lo), Some(hi)) = (
                kept.iter().copied().reduce(f64::min),
                kept.iter().copied().reduce(f64::max),
            ) {
                for &i in &sel.flip_indices {
                    prop_assert!(scores[i] >= hi || scores[i] <= lo);
                }
            }
        }
    }
}
