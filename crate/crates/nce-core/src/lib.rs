//! Neighborhood collective estimation for learning with noisy labels.
//!
//! Given a dataset of feature vectors with possibly-corrupted class labels,
//! this crate identifies noisy labels by contrasting each sample against its
//! feature-space nearest neighbors, corrects a reliable subset of them from
//! neighboring clean labels, and fine-tunes a softmax classifier with mixup
//! and perturbation-consistency regularization.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the command
//! line live in the companion `nce-cli` crate.

#![no_std]

extern crate alloc;

pub mod classifier;
pub mod config;
pub mod datagen;
pub mod dataset;
pub mod divergence;
pub mod error;
pub mod evalkit;
pub mod exec;
pub mod finetune;
pub mod nclc;
pub mod ncnv;
pub mod simindex;

pub use config::Config;
pub use dataset::{Dataset, LabelDistribution};
pub use error::{Error, Result};
