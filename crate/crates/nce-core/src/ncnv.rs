//! Neighborhood collective noise verification: score every training
//! sample's given label against the model predictions of its feature-space
//! neighbors, then split the training set into clean and noisy subsets.
//!
//! The inconsistency score of a candidate deliberately ignores the model
//! prediction at the candidate itself; only the neighbors' predictions
//! enter, which keeps the verdict from simply confirming the model's own
//! (possibly biased) belief about the candidate.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, LabelDistribution};
use crate::divergence::js_slices;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::simindex::SimilarityIndex;

/// Outcome of one verification pass: per-sample scores and the resulting
/// clean/noisy split at threshold τ.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    scores: Vec<f64>,
    threshold: f64,
    clean_ids: Vec<usize>,
    noisy_ids: Vec<usize>,
}

impl VerificationReport {
    /// Splits scored samples at τ: S_ver < τ is clean, S_ver ≥ τ is noisy.
    pub fn from_scores(scores: Vec<f64>, threshold: f64) -> Self {
        let mut clean_ids = Vec::new();
        let mut noisy_ids = Vec::new();
        for (i, &s) in scores.iter().enumerate() {
            if s < threshold {
                clean_ids.push(i);
            } else {
                noisy_ids.push(i);
            }
        }
        Self {
            scores,
            threshold,
            clean_ids,
            noisy_ids,
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn clean_ids(&self) -> &[usize] {
        &self.clean_ids
    }

    pub fn noisy_ids(&self) -> &[usize] {
        &self.noisy_ids
    }

    pub fn is_noisy(&self, sample: usize) -> bool {
        self.scores[sample] >= self.threshold
    }

    /// Same scores re-split at a different threshold.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self::from_scores(self.scores.clone(), threshold)
    }
}

/// Label inconsistency score S_ver: the mean JS divergence between the
/// one-hot given label and the neighbors' predicted distributions.
pub fn verification_score(
    given_label: usize,
    neighbor_predictions: &[&LabelDistribution],
) -> Result<f64> {
    let first = neighbor_predictions.first().ok_or(Error::EmptyNeighborhood)?;
    let num_classes = first.num_classes();
    if given_label >= num_classes {
        return Err(Error::InvalidLabel {
            label: given_label,
            num_classes,
        });
    }
    let mut target = vec![0.0; num_classes];
    target[given_label] = 1.0;
    let mut sum = 0.0;
    for pred in neighbor_predictions {
        if pred.num_classes() != num_classes {
            return Err(Error::ShapeMismatch {
                left: pred.num_classes(),
                right: num_classes,
            });
        }
        sum += js_slices(&target, pred.probs());
    }
    Ok(sum / neighbor_predictions.len() as f64)
}

/// Scores every sample against its K nearest neighbors (self excluded) and
/// thresholds at τ. Predictions are a frozen snapshot aligned with dataset
/// rows; the index must cover the full training set.
pub fn verify<E: Executor>(
    dataset: &Dataset,
    predictions: &[LabelDistribution],
    index: &SimilarityIndex,
    k: usize,
    tau: f64,
    exec: &E,
) -> Result<VerificationReport> {
    let scores = score_all(dataset, predictions, index, k, exec)?;
    Ok(VerificationReport::from_scores(scores, tau))
}

/// The scoring pass of [`verify`], without the threshold split. Kept
/// separate so threshold sweeps reuse one set of scores.
pub fn score_all<E: Executor>(
    dataset: &Dataset,
    predictions: &[LabelDistribution],
    index: &SimilarityIndex,
    k: usize,
    exec: &E,
) -> Result<Vec<f64>> {
    let n = dataset.len();
    if predictions.len() != n {
        return Err(Error::ShapeMismatch {
            left: predictions.len(),
            right: n,
        });
    }
    let results = exec.map_collect(n, |i| -> Result<f64> {
        let neighbors = index.knn(i, k, true)?;
        let preds: Vec<&LabelDistribution> =
            neighbors.indices().iter().map(|&j| &predictions[j]).collect();
        verification_score(dataset.given_label(i), &preds)
    });
    results.into_iter().collect()
}
