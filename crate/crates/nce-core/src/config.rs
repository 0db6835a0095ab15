//! Run configuration for the full training pipeline.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters for verification, correction and fine-tuning.
///
/// Defaults follow the reference regime: K=20, τ=0.75, τ'=2e-3, γ=1.0, α=4,
/// η=0.02, with epoch counts and model width scaled down to synthetic
/// vector benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Neighbor count K for both verification and correction queries.
    pub k: usize,
    /// Verification threshold τ: samples with S_ver ≥ τ are flagged noisy.
    pub tau: f64,
    /// Correction threshold τ': noisy samples with S_cor < τ' are relabeled.
    pub tau_prime: f64,
    /// Weight γ of the consistency loss in the overall objective.
    pub gamma: f64,
    /// Mixup Beta(α, α) parameter.
    pub alpha: f64,
    /// SGD learning rate η.
    pub eta: f64,
    /// Warm-up epochs T_wu (supervised cross-entropy on all given labels).
    pub warmup_epochs: usize,
    /// Total epochs T_tr, warm-up included.
    pub total_epochs: usize,
    /// Clean mini-batch size B.
    pub batch_size: usize,
    /// Relabeled mini-batch size B'.
    pub relabel_batch_size: usize,
    /// RNG seed; fixes initialization, shuffling, mixup and perturbations.
    pub seed: u64,
    /// Gaussian jitter scale of the perturbation policy, as a multiple of
    /// the per-dimension feature standard deviation.
    pub aug_sigma: f64,
    /// Coordinate dropout rate of the perturbation policy.
    pub aug_dropout: f64,
    /// Also apply the consistency loss to clean mini-batches.
    pub apply_lab_to_clean: bool,
    /// Hidden layer width of the classifier; 0 selects the linear model.
    pub hidden_dim: usize,
    /// Build neighbor indices over the learned embedding instead of raw
    /// input features.
    pub use_embedding: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: 20,
            tau: 0.75,
            tau_prime: 2e-3,
            gamma: 1.0,
            alpha: 4.0,
            eta: 0.02,
            warmup_epochs: 10,
            total_epochs: 60,
            batch_size: 128,
            relabel_batch_size: 128,
            seed: 0,
            aug_sigma: 0.1,
            aug_dropout: 0.1,
            apply_lab_to_clean: false,
            hidden_dim: 64,
            use_embedding: false,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!(
                "tau must lie in [0, 1], got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.tau_prime) {
            return Err(Error::InvalidConfig(format!(
                "tau_prime must lie in [0, 1], got {}",
                self.tau_prime
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.warmup_epochs == 0 {
            return Err(Error::InvalidConfig(
                "warmup_epochs must be at least 1".into(),
            ));
        }
        if self.warmup_epochs > self.total_epochs {
            return Err(Error::InvalidConfig(format!(
                "warmup_epochs ({}) must not exceed total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch_size must be at least 2 (mixup pairs samples)".into(),
            ));
        }
        if self.relabel_batch_size == 0 {
            return Err(Error::InvalidConfig(
                "relabel_batch_size must be at least 1".into(),
            ));
        }
        if !self.aug_sigma.is_finite() || self.aug_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "aug_sigma must be finite and non-negative, got {}",
                self.aug_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.aug_dropout) {
            return Err(Error::InvalidConfig(format!(
                "aug_dropout must lie in [0, 1), got {}",
                self.aug_dropout
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn boundary_thresholds_are_allowed() {
        let mut cfg = Config::default();
        cfg.tau = 0.0;
        cfg.validate().unwrap();
        cfg.tau = 1.0;
        cfg.validate().unwrap();
    }

    #[test]
    fn warmup_may_fill_the_whole_run() {
        let mut cfg = Config::default();
        cfg.warmup_epochs = cfg.total_epochs;
        cfg.validate().unwrap();
        cfg.warmup_epochs = cfg.total_epochs + 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for mutate in [
            (|c: &mut Config| c.k = 0) as fn(&mut Config),
            |c| c.tau = 1.5,
            |c| c.tau_prime = -0.1,
            |c| c.gamma = -1.0,
            |c| c.alpha = 0.0,
            |c| c.eta = 0.0,
            |c| c.batch_size = 1,
            |c| c.relabel_batch_size = 0,
            |c| c.aug_dropout = 1.0,
            |c| c.aug_sigma = f64::NAN,
            |c| c.warmup_epochs = 0,
        ] {
            let mut cfg = Config::default();
            mutate(&mut cfg);
            assert!(cfg.validate().is_err());
        }
    }
}
