//! Neighborhood collective label correction: score each noisy sample
//! against the given labels of its nearest *clean* neighbors, relabel the
//! ones that agree closely, drop the rest.
//!
//! The asymmetry with verification is deliberate: here the candidate's own
//! predicted distribution is compared against neighbors' hard labels, since
//! noisy samples no longer have a trustworthy label of their own.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{argmax_lowest, Dataset, LabelDistribution};
use crate::divergence::js_slices;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ncnv::VerificationReport;
use crate::simindex::{build_index, SimilarityIndex};

/// Outcome of one correction pass over the noisy subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionReport {
    noisy_ids: Vec<usize>,
    cor_scores: Vec<f64>,
    threshold: f64,
    relabeled: Vec<(usize, usize)>,
    dropped: Vec<usize>,
    weight_traces: Option<Vec<Vec<(usize, f64)>>>,
}

impl CorrectionReport {
    /// Noisy sample ids, aligned with [`CorrectionReport::cor_scores`].
    pub fn noisy_ids(&self) -> &[usize] {
        &self.noisy_ids
    }

    pub fn cor_scores(&self) -> &[f64] {
        &self.cor_scores
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// (sample id, corrected label ŷ) pairs with S_cor < τ'.
    pub fn relabeled(&self) -> &[(usize, usize)] {
        &self.relabeled
    }

    /// Noisy ids with S_cor ≥ τ', excluded from further training.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Per-noisy-sample (clean neighbor id, weight) lists, for audit.
    pub fn weight_traces(&self) -> Option<&[Vec<(usize, f64)>]> {
        self.weight_traces.as_deref()
    }
}

/// Scored correction pass before thresholding: every noisy sample gets a
/// consistency score and a proposed label, so τ' sweeps reuse one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionScores {
    pub noisy_ids: Vec<usize>,
    pub scores: Vec<f64>,
    pub proposed_labels: Vec<usize>,
    pub weight_traces: Vec<Vec<(usize, f64)>>,
}

impl CorrectionScores {
    /// Applies τ': relabel when S_cor < τ', drop when S_cor ≥ τ'.
    pub fn assemble(&self, tau_prime: f64) -> CorrectionReport {
        let mut relabeled = Vec::new();
        let mut dropped = Vec::new();
        for ((&id, &score), &label) in self
            .noisy_ids
            .iter()
            .zip(&self.scores)
            .zip(&self.proposed_labels)
        {
            if score < tau_prime {
                relabeled.push((id, label));
            } else {
                dropped.push(id);
            }
        }
        CorrectionReport {
            noisy_ids: self.noisy_ids.clone(),
            cor_scores: self.scores.clone(),
            threshold: tau_prime,
            relabeled,
            dropped,
            weight_traces: Some(self.weight_traces.clone()),
        }
    }
}

/// Label consistency score S_cor: mean JS divergence between the
/// candidate's predicted distribution and the one-hot given labels of its
/// clean neighbors.
pub fn correction_score(
    candidate_prediction: &LabelDistribution,
    neighbor_labels: &[usize],
) -> Result<f64> {
    if neighbor_labels.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let num_classes = candidate_prediction.num_classes();
    let mut sum = 0.0;
    for &label in neighbor_labels {
        if label >= num_classes {
            return Err(Error::InvalidLabel {
                label,
                num_classes,
            });
        }
        sum += js_against_one_hot(candidate_prediction.probs(), label);
    }
    Ok(sum / neighbor_labels.len() as f64)
}

/// Corrected label: argmax over classes of the weight-tallied neighbor
/// votes, with w_k = 1 − JS(prediction, one_hot(y_k)). Ties go to the
/// lowest class index.
pub fn correct(
    candidate_prediction: &LabelDistribution,
    neighbor_labels: &[usize],
) -> Result<usize> {
    let (tallies, _) = class_tallies(candidate_prediction, neighbor_labels)?;
    Ok(argmax_lowest(&tallies))
}

/// Per-class weighted vote tallies and the per-neighbor weights behind them.
pub(crate) fn class_tallies(
    candidate_prediction: &LabelDistribution,
    neighbor_labels: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if neighbor_labels.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let num_classes = candidate_prediction.num_classes();
    let mut tallies = vec![0.0; num_classes];
    let mut weights = Vec::with_capacity(neighbor_labels.len());
    for &label in neighbor_labels {
        if label >= num_classes {
            return Err(Error::InvalidLabel {
                label,
                num_classes,
            });
        }
        let w = 1.0 - js_against_one_hot(candidate_prediction.probs(), label);
        tallies[label] += w;
        weights.push(w);
    }
    Ok((tallies, weights))
}

fn js_against_one_hot(prediction: &[f64], label: usize) -> f64 {
    let mut one_hot = vec![0.0; prediction.len()];
    one_hot[label] = 1.0;
    js_slices(prediction, &one_hot)
}

/// Full correction pass: builds a clean-pool index over raw dataset
/// features and relabels or drops every noisy sample.
pub fn relabel<E: Executor>(
    dataset: &Dataset,
    verification: &VerificationReport,
    predictions: &[LabelDistribution],
    k: usize,
    tau_prime: f64,
    exec: &E,
) -> Result<CorrectionReport> {
    if verification.clean_ids().is_empty() {
        return Err(Error::EmptyCleanPool);
    }
    let index = build_index(dataset, Some(verification.clean_ids()))?;
    let scores = score_candidates(
        &index,
        verification.noisy_ids(),
        predictions,
        dataset.given_labels(),
        k,
        exec,
    )?;
    Ok(scores.assemble(tau_prime))
}

/// The scoring engine behind [`relabel`], generic over the index so the
/// pipeline can search learned embeddings instead of raw features. The
/// index pool must hold clean ids only.
pub fn score_candidates<E: Executor>(
    clean_index: &SimilarityIndex,
    noisy_ids: &[usize],
    predictions: &[LabelDistribution],
    given_labels: &[usize],
    k: usize,
    exec: &E,
) -> Result<CorrectionScores> {
    if clean_index.pool_len() == 0 {
        return Err(Error::EmptyCleanPool);
    }
    let per_sample = exec.map_collect(noisy_ids.len(), |j| -> Result<_> {
        let u = noisy_ids[j];
        // The candidate is noisy and the pool is clean, so they are disjoint
        // by construction; self-exclusion is irrelevant here.
        let neighbors = clean_index.knn(u, k, false)?;
        let labels: Vec<usize> = neighbors
            .indices()
            .iter()
            .map(|&i| given_labels[i])
            .collect();
        let pred = &predictions[u];
        let (tallies, weights) = class_tallies(pred, &labels)?;
        let score = correction_score(pred, &labels)?;
        let trace: Vec<(usize, f64)> = neighbors
            .indices()
            .iter()
            .copied()
            .zip(weights)
            .collect();
        Ok((score, argmax_lowest(&tallies), trace))
    });
    let mut scores = Vec::with_capacity(noisy_ids.len());
    let mut proposed = Vec::with_capacity(noisy_ids.len());
    let mut traces = Vec::with_capacity(noisy_ids.len());
    for item in per_sample {
        let (score, label, trace) = item?;
        scores.push(score);
        proposed.push(label);
        traces.push(trace);
    }
    Ok(CorrectionScores {
        noisy_ids: noisy_ids.to_vec(),
        scores,
        proposed_labels: proposed,
        weight_traces: traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn dist(probs: &[f64]) -> LabelDistribution {
        LabelDistribution::from_probs(probs.to_vec()).unwrap()
    }

    #[test]
    fn score_zero_when_prediction_matches_unanimous_labels() {
        let pred = dist(&[1.0, 0.0]);
        assert_eq!(correction_score(&pred, &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn score_one_on_disjoint_supports() {
        let pred = dist(&[1.0, 0.0]);
        assert_eq!(correction_score(&pred, &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn score_matches_precomputed_fixture() {
        let pred = dist(&[0.5, 0.5]);
        let expected = 0.311_278_124_459_132_9; // frozen from the pre-build oracle
        assert!((correction_score(&pred, &[0, 1]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn correct_follows_clear_majority() {
        let pred = dist(&[0.9, 0.1]);
        assert_eq!(correct(&pred, &[0, 0, 1]).unwrap(), 0);
    }

    #[test]
    fn correct_returns_unanimous_label_regardless_of_prediction() {
        for c in 0..3 {
            let pred = dist(&[0.1, 0.2, 0.7]);
            assert_eq!(correct(&pred, &[c, c, c, c]).unwrap(), c);
        }
    }

    #[test]
    fn correct_matches_precomputed_weighted_tally() {
        // w(label 0) = 0.763547..., w(label 1) = 0.604184...; two label-1
        // votes beat one label-0 vote.
        let pred = dist(&[0.6, 0.4]);
        let (tallies, weights) = class_tallies(&pred, &[0, 1, 1]).unwrap();
        assert!((weights[0] - 0.763_547_202_339_972).abs() < 1e-12);
        assert!((weights[1] - 0.604_184_397_996_641_7).abs() < 1e-12);
        assert!((tallies[1] - 1.208_368_795_993_283_4).abs() < 1e-12);
        assert_eq!(correct(&pred, &[0, 1, 1]).unwrap(), 1);
    }

    #[test]
    fn correct_is_permutation_invariant() {
        let pred = dist(&[0.3, 0.5, 0.2]);
        let a = correct(&pred, &[0, 1, 2, 1]).unwrap();
        let b = correct(&pred, &[1, 2, 1, 0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_all_weights_preserves_the_argmax() {
        let pred = dist(&[0.4, 0.35, 0.25]);
        let (tallies, _) = class_tallies(&pred, &[0, 1, 1, 2]).unwrap();
        let scaled: Vec<f64> = tallies.iter().map(|t| t * 37.5).collect();
        assert_eq!(argmax_lowest(&tallies), argmax_lowest(&scaled));
    }

    #[test]
    fn argmax_ties_break_to_lowest_class() {
        let pred = dist(&[0.5, 0.5]);
        // symmetric prediction, one vote each: identical weights
        assert_eq!(correct(&pred, &[1, 0]).unwrap(), 0);
    }

    fn clustered_setup() -> (Dataset, Vec<LabelDistribution>) {
        // class 0 around [8, 0], class 1 around [-8, 0]; sample 0 sits deep
        // inside cluster 1, sample 1 sits at the midpoint.
        let mut rows = alloc::vec![
            alloc::vec![-8.0, 0.05],
            alloc::vec![0.0, 1.0],
        ];
        let mut labels = alloc::vec![0usize, 0];
        for i in 0..10 {
            rows.push(alloc::vec![8.0 + 0.01 * i as f64, 0.2]);
            labels.push(0);
            rows.push(alloc::vec![-8.0 - 0.01 * i as f64, 0.2]);
            labels.push(1);
        }
        let n = rows.len();
        let ds = Dataset::new(rows, labels, None, 2).unwrap();
        let mut preds = Vec::with_capacity(n);
        preds.push(dist(&[0.02, 0.98])); // confident cluster-1 prediction
        preds.push(dist(&[0.5, 0.5])); // boundary sample: uniform
        for i in 2..n {
            let l = ds.given_label(i);
            preds.push(if l == 0 {
                dist(&[0.98, 0.02])
            } else {
                dist(&[0.02, 0.98])
            });
        }
        (ds, preds)
    }

    #[test]
    fn embedded_noisy_sample_is_relabeled_to_the_cluster_class() {
        let (ds, preds) = clustered_setup();
        // verification flags samples 0 and 1 as noisy
        let mut scores = alloc::vec![0.0; ds.len()];
        scores[0] = 1.0;
        scores[1] = 1.0;
        let verification = VerificationReport::from_scores(scores, 0.75);
        let report = relabel(&ds, &verification, &preds, 5, 0.1, &Sequential).unwrap();
        assert!(report.relabeled().contains(&(0, 1)));
    }

    #[test]
    fn boundary_sample_is_dropped_under_tight_threshold() {
        let (ds, preds) = clustered_setup();
        let mut scores = alloc::vec![0.0; ds.len()];
        scores[0] = 1.0;
        scores[1] = 1.0;
        let verification = VerificationReport::from_scores(scores, 0.75);
        let report = relabel(&ds, &verification, &preds, 5, 1e-2, &Sequential).unwrap();
        assert!(report.dropped().contains(&1));
    }

    #[test]
    fn empty_clean_pool_is_fatal() {
        let (ds, preds) = clustered_setup();
        let scores = alloc::vec![1.0; ds.len()];
        let verification = VerificationReport::from_scores(scores, 0.75);
        assert!(matches!(
            relabel(&ds, &verification, &preds, 5, 1e-2, &Sequential),
            Err(Error::EmptyCleanPool)
        ));
    }

    #[test]
    fn relabeled_strictly_below_threshold_dropped_at_or_above() {
        let scores = CorrectionScores {
            noisy_ids: alloc::vec![4, 7, 9],
            scores: alloc::vec![0.001, 0.002, 0.5],
            proposed_labels: alloc::vec![1, 0, 1],
            weight_traces: alloc::vec![Vec::new(), Vec::new(), Vec::new()],
        };
        let report = scores.assemble(0.002);
        assert_eq!(report.relabeled(), &[(4, 1)]);
        assert_eq!(report.dropped(), &[7, 9]);
    }

    #[test]
    fn smaller_threshold_never_enlarges_the_relabeled_set() {
        let (ds, preds) = clustered_setup();
        let mut scores = alloc::vec![0.0; ds.len()];
        scores[0] = 1.0;
        scores[1] = 1.0;
        let verification = VerificationReport::from_scores(scores, 0.75);
        let index = build_index(&ds, Some(verification.clean_ids())).unwrap();
        let pass = score_candidates(
            &index,
            verification.noisy_ids(),
            &preds,
            ds.given_labels(),
            5,
            &Sequential,
        )
        .unwrap();
        let mut prev = usize::MAX;
        for tau_prime in [1e-1, 1e-2, 1e-3, 1e-4] {
            let count = pass.assemble(tau_prime).relabeled().len();
            assert!(count <= prev);
            prev = count;
        }
    }
}
