//! Shared domain types: datasets of labeled feature vectors and label
//! distributions over classes.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result, Violation};

/// Tolerance for the simplex sum check on label distributions.
const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector over `C` classes.
///
/// Houses both one-hot encodings of hard labels and model predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Validates that `probs` is on the simplex: entries non-negative and
    /// finite, summing to 1 within 1e-9.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidConfig(
                "label distribution needs at least one class".into(),
            ));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "label distribution entry {i} is {p}, expected a non-negative finite value"
                )));
            }
            sum += p;
        }
        if libm::fabs(sum - 1.0) > SIMPLEX_TOL {
            return Err(Error::InvalidConfig(format!(
                "label distribution sums to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest entry, ties broken by lowest class index.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.probs)
    }
}

/// Argmax with ties broken by the lowest index. Used everywhere a hard label
/// is read off a score vector so that all modules agree on tie handling.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-hot encoding of a hard class label.
pub fn one_hot(label: usize, num_classes: usize) -> Result<LabelDistribution> {
    if label >= num_classes {
        return Err(Error::InvalidLabel {
            label,
            num_classes,
        });
    }
    let mut probs = alloc::vec![0.0; num_classes];
    probs[label] = 1.0;
    Ok(LabelDistribution { probs })
}

/// A labeled dataset: `N` feature rows over `R^d`, given (possibly noisy)
/// labels, and optionally the hidden true labels.
///
/// True labels exist for the evaluation harness only. The verification,
/// correction and training code paths never read them; stripping them leaves
/// every algorithm output unchanged (covered by tests).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>, // row-major N×d
    dim: usize,
    given_labels: Vec<usize>,
    true_labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl Dataset {
    /// Validated constructor. Checks every invariant and reports all
    /// violations at once rather than stopping at the first.
    pub fn new(
        features: Vec<Vec<f64>>,
        given_labels: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        let n = features.len();
        if n == 0 {
            violations.push(Violation {
                row: None,
                reason: "dataset has no rows".into(),
            });
        }
        if num_classes < 2 {
            violations.push(Violation {
                row: None,
                reason: format!("num_classes must be at least 2, got {num_classes}"),
            });
        }
        let dim = features.first().map(Vec::len).unwrap_or(0);
        if n > 0 && dim == 0 {
            violations.push(Violation {
                row: Some(0),
                reason: "feature rows must have dimension at least 1".into(),
            });
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                violations.push(Violation {
                    row: Some(i),
                    reason: format!("ragged row: length {} differs from {}", row.len(), dim),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation {
                        row: Some(i),
                        reason: format!("non-finite feature {v} at column {j}"),
                    });
                }
            }
        }
        if given_labels.len() != n {
            violations.push(Violation {
                row: None,
                reason: format!(
                    "given_labels length {} differs from row count {}",
                    given_labels.len(),
                    n
                ),
            });
        }
        for (i, &label) in given_labels.iter().enumerate() {
            if label >= num_classes {
                violations.push(Violation {
                    row: Some(i),
                    reason: format!("given label {label} out of range for {num_classes} classes"),
                });
            }
        }
        if let Some(truth) = &true_labels {
            if truth.len() != n {
                violations.push(Violation {
                    row: None,
                    reason: format!(
                        "true_labels length {} differs from row count {}",
                        truth.len(),
                        n
                    ),
                });
            }
            for (i, &label) in truth.iter().enumerate() {
                if label >= num_classes {
                    violations.push(Violation {
                        row: Some(i),
                        reason: format!(
                            "true label {label} out of range for {num_classes} classes"
                        ),
                    });
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidDataset(violations));
        }

        let mut flat = Vec::with_capacity(n * dim);
        for row in &features {
            flat.extend_from_slice(row);
        }
        Ok(Self {
            features: flat,
            dim,
            given_labels,
            true_labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.given_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.given_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn given_label(&self, i: usize) -> usize {
        self.given_labels[i]
    }

    pub fn given_labels(&self) -> &[usize] {
        &self.given_labels
    }

    /// Hidden true labels, present only on synthetic benchmarks.
    ///
    /// Evaluation-only: algorithm modules must obtain labels through
    /// [`Dataset::given_labels`]. Tests pin this down by checking that
    /// [`Dataset::strip_true_labels`] leaves all pipeline outputs unchanged.
    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    /// Copy of this dataset without the hidden true labels.
    pub fn strip_true_labels(&self) -> Dataset {
        let mut out = self.clone();
        out.true_labels = None;
        out
    }

    /// New dataset holding the selected rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut given = Vec::with_capacity(indices.len());
        let mut truth = self.true_labels.as_ref().map(|_| Vec::with_capacity(indices.len()));
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidConfig(format!(
                    "subset index {i} out of range for {} rows",
                    self.len()
                )));
            }
            features.extend_from_slice(self.feature(i));
            given.push(self.given_labels[i]);
            if let (Some(out), Some(src)) = (truth.as_mut(), self.true_labels.as_ref()) {
                out.push(src[i]);
            }
        }
        if indices.is_empty() {
            return Err(Error::InvalidDataset(alloc::vec![Violation {
                row: None,
                reason: "subset selects no rows".into(),
            }]));
        }
        Ok(Dataset {
            features,
            dim: self.dim,
            given_labels: given,
            true_labels: truth,
            num_classes: self.num_classes,
        })
    }

    /// Rebuilds the row-of-rows representation (used by IO and validation
    /// round-trips).
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.feature(i).to_vec()).collect()
    }
}
