//! Error types shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

/// A single dataset validation failure, tied to a row where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub row: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(row) => write!(f, "row {}: {}", row, self.reason),
            None => write!(f, "{}", self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("label {label} out of range for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    /// Carries every violation found, not just the first.
    #[error("invalid dataset ({} violations), first: {}", .0.len(), first_violation(.0))]
    InvalidDataset(Vec<Violation>),

    #[error("dimension mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },

    #[error("degenerate vector with L2 norm below 1e-12{}", sample_suffix(.sample))]
    DegenerateVector { sample: Option<usize> },

    #[error("empty pool: no non-degenerate candidates to search{}", sample_suffix(.query))]
    EmptyPool { query: Option<usize> },

    #[error("empty neighborhood: at least one neighbor is required")]
    EmptyNeighborhood,

    #[error("empty clean pool: verification kept no samples, cannot correct labels")]
    EmptyCleanPool,

    #[error("infinite divergence: p has mass at component {component} where q is zero")]
    InfiniteDivergence { component: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("mixup needs at least 2 samples per batch, got {0}")]
    BatchTooSmall(usize),

    #[error("true labels are required for this metric but absent from the dataset")]
    MissingTrueLabels,

    #[error("{0}")]
    InvalidNoiseSpec(String),
}

pub type Result<T> = core::result::Result<T, Error>;

fn first_violation(violations: &[Violation]) -> String {
    use alloc::string::ToString;
    violations
        .first()
        .map(|v| v.to_string())
        .unwrap_or_else(|| "none".to_string())
}

fn sample_suffix(sample: &Option<usize>) -> String {
    use alloc::format;
    match sample {
        Some(i) => format!(" (sample {i})"),
        None => String::new(),
    }
}
