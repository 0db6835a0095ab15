//! Metrics over partitions, corrections and trained models. Everything here
//! reads the hidden true labels, so it belongs to the evaluation harness,
//! never to the algorithm path.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nclc::CorrectionReport;
use crate::ncnv::VerificationReport;

/// Precision/recall/F1 for both verdicts of the clean/noisy split, plus
/// per-class identification accuracy. `None` marks undefined ratios (0/0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationMetrics {
    pub accuracy: f64,
    pub clean_precision: Option<f64>,
    pub clean_recall: Option<f64>,
    pub clean_f1: Option<f64>,
    pub noisy_precision: Option<f64>,
    pub noisy_recall: Option<f64>,
    pub noisy_f1: Option<f64>,
    /// Indexed by true class: fraction of that class with a correct verdict.
    pub per_class_accuracy: Vec<Option<f64>>,
}

/// Quality of the correction pass. A sample is counted correct when its new
/// label equals the hidden true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionMetrics {
    /// Fraction of relabeled samples whose new label is the true label;
    /// `None` when nothing was relabeled (avoids 0/0).
    pub accuracy: Option<f64>,
    /// |relabeled| / |noisy|; `None` when the noisy set is empty.
    pub coverage: Option<f64>,
    pub correct_count: usize,
    pub relabeled_count: usize,
    pub dropped_count: usize,
    pub noisy_count: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

fn f1(precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
    match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    }
}

/// Confusion-matrix metrics of the clean/noisy split against the ground
/// truth "noisy iff given ≠ true".
pub fn identification_metrics(
    report: &VerificationReport,
    dataset: &Dataset,
) -> Result<IdentificationMetrics> {
    let truth = dataset.true_labels().ok_or(Error::MissingTrueLabels)?;
    let n = dataset.len();
    let mut tp = 0usize; // flagged noisy, truly noisy
    let mut fp = 0usize; // flagged noisy, truly clean
    let mut tn = 0usize; // kept clean, truly clean
    let mut fn_ = 0usize; // kept clean, truly noisy
    let c_n = dataset.num_classes();
    let mut per_class_hit = alloc::vec![0usize; c_n];
    let mut per_class_total = alloc::vec![0usize; c_n];
    for i in 0..n {
        let truly_noisy = dataset.given_label(i) != truth[i];
        let flagged = report.is_noisy(i);
        match (flagged, truly_noisy) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        per_class_total[truth[i]] += 1;
        if flagged == truly_noisy {
            per_class_hit[truth[i]] += 1;
        }
    }
    let noisy_precision = ratio(tp, tp + fp);
    let noisy_recall = ratio(tp, tp + fn_);
    let clean_precision = ratio(tn, tn + fn_);
    let clean_recall = ratio(tn, tn + fp);
    Ok(IdentificationMetrics {
        accuracy: (tp + tn) as f64 / n as f64,
        clean_precision,
        clean_recall,
        clean_f1: f1(clean_precision, clean_recall),
        noisy_precision,
        noisy_recall,
        noisy_f1: f1(noisy_precision, noisy_recall),
        per_class_accuracy: per_class_hit
            .iter()
            .zip(&per_class_total)
            .map(|(&hit, &total)| ratio(hit, total))
            .collect(),
    })
}

/// Accuracy and coverage of the relabeling pass.
pub fn correction_metrics(
    report: &CorrectionReport,
    dataset: &Dataset,
) -> Result<CorrectionMetrics> {
    let truth = dataset.true_labels().ok_or(Error::MissingTrueLabels)?;
    let relabeled_count = report.relabeled().len();
    let correct_count = report
        .relabeled()
        .iter()
        .filter(|&&(id, label)| truth[id] == label)
        .count();
    let noisy_count = report.noisy_ids().len();
    Ok(CorrectionMetrics {
        accuracy: ratio(correct_count, relabeled_count),
        coverage: ratio(relabeled_count, noisy_count),
        correct_count,
        relabeled_count,
        dropped_count: report.dropped().len(),
        noisy_count,
    })
}

/// Fraction of held-out samples whose argmax prediction hits the label
/// (the true label when present, the given label otherwise). Argmax ties
/// break to the lowest class index.
pub fn test_accuracy(model: &Classifier, heldout: &Dataset) -> Result<f64> {
    let labels: &[usize] = heldout
        .true_labels()
        .unwrap_or_else(|| heldout.given_labels());
    let mut correct = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let pred = model.predict_one(heldout.feature(i))?;
        if pred.argmax() == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / heldout.len() as f64)
}
