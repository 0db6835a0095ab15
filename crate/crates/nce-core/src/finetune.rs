//! Per-epoch fine-tuning and the full training pipeline: mixup loss over
//! the clean subset, perturbation-consistency loss over the relabeled
//! subset, and the outer loop that alternates verification, correction and
//! optimization after warm-up.
//!
//! Batch losses are mean-reduced so the learning rate is decoupled from the
//! batch size; reported trace losses are those means.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{self, Classifier, SgdOptimizer};
use crate::config::Config;
use crate::dataset::{Dataset, LabelDistribution};
use crate::error::{Error, Result};
use crate::evalkit;
use crate::exec::Executor;
use crate::nclc::{self, CorrectionReport};
use crate::ncnv::{self, VerificationReport};
use crate::simindex::{build_index, build_index_from_vectors, SimilarityIndex};

/// One mixup-augmented sample: a convex combination of two batch members.
#[derive(Debug, Clone, PartialEq)]
pub struct MixupPair {
    pub x_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub lambda: f64,
    /// Dataset ids of the blended pair (i, j).
    pub source: (usize, usize),
}

impl MixupPair {
    /// Blends `x̃ = λ·x_i + (1−λ)·x_j` and `ỹ = λ·e_{y_i} + (1−λ)·e_{y_j}`.
    pub fn blend(
        x_i: &[f64],
        label_i: usize,
        x_j: &[f64],
        label_j: usize,
        lambda: f64,
        num_classes: usize,
        source: (usize, usize),
    ) -> Result<Self> {
        if x_i.len() != x_j.len() {
            return Err(Error::ShapeMismatch {
                left: x_i.len(),
                right: x_j.len(),
            });
        }
        if label_i >= num_classes {
            return Err(Error::InvalidLabel {
                label: label_i,
                num_classes,
            });
        }
        if label_j >= num_classes {
            return Err(Error::InvalidLabel {
                label: label_j,
                num_classes,
            });
        }
        let x_tilde = x_i
            .iter()
            .zip(x_j)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let mut y_tilde = vec![0.0; num_classes];
        y_tilde[label_i] += lambda;
        y_tilde[label_j] += 1.0 - lambda;
        Ok(Self {
            x_tilde,
            y_tilde,
            lambda,
            source,
        })
    }
}

/// Input perturbation for the consistency loss: Gaussian jitter scaled by
/// the per-dimension feature standard deviation, followed by coordinate
/// dropout. σ = 0 and rate = 0 make it the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPolicy {
    sigma_scale: f64,
    dropout_rate: f64,
    feature_std: Vec<f64>,
}

impl PerturbationPolicy {
    /// Fits the per-dimension standard deviations on the training features.
    pub fn fit(dataset: &Dataset, sigma_scale: f64, dropout_rate: f64) -> Result<Self> {
        if !sigma_scale.is_finite() || sigma_scale < 0.0 || !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidConfig(alloc::format!(
                "perturbation needs sigma >= 0 and dropout in [0, 1), got {sigma_scale}, {dropout_rate}"
            )));
        }
        let n = dataset.len() as f64;
        let dim = dataset.dim();
        let mut mean = vec![0.0; dim];
        for i in 0..dataset.len() {
            for (m, &v) in mean.iter_mut().zip(dataset.feature(i)) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for i in 0..dataset.len() {
            for ((s, &v), &m) in var.iter_mut().zip(dataset.feature(i)).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        Ok(Self {
            sigma_scale,
            dropout_rate,
            feature_std: var.iter().map(|&v| libm::sqrt(v)).collect(),
        })
    }

    /// The identity policy over `dim` coordinates.
    pub fn identity(dim: usize) -> Self {
        Self {
            sigma_scale: 0.0,
            dropout_rate: 0.0,
            feature_std: vec![0.0; dim],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.sigma_scale == 0.0 && self.dropout_rate == 0.0
    }

    /// A freshly perturbed copy of `x`.
    pub fn perturb(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.is_identity() {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.feature_std)
            .map(|(&v, &std)| {
                let jittered =
                    v + self.sigma_scale * std * rng.sample::<f64, _>(StandardNormal);
                if self.dropout_rate > 0.0 && rng.random_range(0.0..1.0) < self.dropout_rate {
                    0.0
                } else {
                    jittered
                }
            })
            .collect()
    }
}

/// Draws one mixup batch: the batch is paired with a shuffled copy of
/// itself and each pair is blended with its own λ ~ Beta(α, α).
pub fn mixup_batch(
    dataset: &Dataset,
    batch: &[usize],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<MixupPair>> {
    if batch.len() < 2 {
        return Err(Error::BatchTooSmall(batch.len()));
    }
    let beta = Beta::new(alpha, alpha)
        .map_err(|_| Error::InvalidConfig(alloc::format!("invalid mixup alpha {alpha}")))?;
    let mut partners = batch.to_vec();
    partners.shuffle(rng);
    batch
        .iter()
        .zip(&partners)
        .map(|(&i, &j)| {
            let lambda = beta.sample(rng);
            MixupPair::blend(
                dataset.feature(i),
                dataset.given_label(i),
                dataset.feature(j),
                dataset.given_label(j),
                lambda,
                dataset.num_classes(),
                (i, j),
            )
        })
        .collect()
}

/// Mixup cross-entropy over a batch of blended pairs (mean-reduced), with
/// its gradient.
pub fn mix_loss(model: &Classifier, pairs: &[MixupPair]) -> Result<(f64, Vec<f64>)> {
    let inputs: Vec<&[f64]> = pairs.iter().map(|p| p.x_tilde.as_slice()).collect();
    let targets: Vec<&[f64]> = pairs.iter().map(|p| p.y_tilde.as_slice()).collect();
    classifier::soft_ce(model, &inputs, &targets)
}

/// Consistency loss: cross-entropy between pseudo-labels and predictions on
/// freshly perturbed inputs (mean-reduced), with its gradient.
pub fn consistency_loss(
    model: &Classifier,
    items: &[(Vec<f64>, usize)],
    policy: &PerturbationPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>)> {
    let perturbed: Vec<Vec<f64>> = items.iter().map(|(x, _)| policy.perturb(x, rng)).collect();
    let targets: Vec<Vec<f64>> = items
        .iter()
        .map(|&(_, label)| {
            let mut row = vec![0.0; model.num_classes()];
            row[label] = 1.0;
            row
        })
        .collect();
    classifier::soft_ce(model, &perturbed, &targets)
}

/// Overall objective L^mix + γ·L^lab on already-prepared batches. The
/// consistency inputs arrive pre-perturbed so the value is a deterministic
/// function of the model, which keeps it checkable by finite differences.
pub fn overall_loss<X: AsRef<[f64]>, T: AsRef<[f64]>>(
    model: &Classifier,
    pairs: &[MixupPair],
    lab_inputs: &[X],
    lab_targets: &[T],
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let (mix_value, mut grad) = mix_loss(model, pairs)?;
    if lab_inputs.is_empty() || gamma == 0.0 {
        return Ok((mix_value, grad));
    }
    let (lab_value, lab_grad) = classifier::soft_ce(model, lab_inputs, lab_targets)?;
    for (g, lg) in grad.iter_mut().zip(&lab_grad) {
        *g += gamma * lg;
    }
    Ok((mix_value + gamma * lab_value, grad))
}

/// How an epoch was spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochMode {
    /// Supervised cross-entropy over all given labels.
    Warmup,
    /// Verification + correction + mixup/consistency fine-tuning.
    Nce,
    /// Verification left fewer than two clean samples; the epoch fell back
    /// to warm-up-style training.
    Fallback,
}

/// One line of the training audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mode: EpochMode,
    pub n_clean: Option<usize>,
    pub n_noisy: Option<usize>,
    pub n_relabeled: Option<usize>,
    pub n_dropped: Option<usize>,
    /// Mean mixup loss over the epoch's batches (NCE epochs only).
    pub loss_mix: Option<f64>,
    /// Mean consistency loss over the epoch's batches, when it was active.
    pub loss_lab: Option<f64>,
    /// Mean total loss: cross-entropy for warm-up/fallback epochs, the
    /// overall objective for NCE epochs.
    pub loss_total: f64,
    /// Noisy-detection precision against hidden truth, when available.
    pub ident_precision: Option<f64>,
    /// Noisy-detection recall against hidden truth, when available.
    pub ident_recall: Option<f64>,
    /// Fraction of relabeled samples matching hidden truth, when available.
    pub correction_accuracy: Option<f64>,
}

/// Final model plus the full audit trail of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub model: Classifier,
    pub trace: Vec<EpochRecord>,
    /// Verification report of the last NCE epoch, if any ran.
    pub last_verification: Option<VerificationReport>,
    /// Correction report of the last NCE epoch, if any ran.
    pub last_correction: Option<CorrectionReport>,
    /// Noisy id set per epoch (`None` for warm-up epochs), for audits such
    /// as tracking how much clean data is ever flagged.
    pub epoch_noisy_ids: Vec<Option<Vec<usize>>>,
}

// Cycles shuffled mini-batches over the relabeled set, reshuffling on wrap.
struct BatchCycler {
    items: Vec<(usize, usize)>,
    pos: usize,
}

impl BatchCycler {
    fn new(items: Vec<(usize, usize)>, rng: &mut ChaCha8Rng) -> Self {
        let mut items = items;
        items.shuffle(rng);
        Self { items, pos: 0 }
    }

    fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        if self.items.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.items.len() {
                self.items.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.items[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Runs the full training procedure: warm-up epochs followed by per-epoch
/// verification, correction and fine-tuning. Fully deterministic given the
/// config seed; the executor only parallelizes pure scoring maps.
pub fn run_pipeline<E: Executor>(
    dataset: &Dataset,
    config: &Config,
    exec: &E,
) -> Result<PipelineResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Classifier::new(
        dataset.dim(),
        config.hidden_dim,
        dataset.num_classes(),
        &mut rng,
    )?;
    let mut opt = SgdOptimizer::new(model.num_params());
    let policy = PerturbationPolicy::fit(dataset, config.aug_sigma, config.aug_dropout)?;
    // Raw features never change, so their index is built once.
    let raw_index = if config.use_embedding {
        None
    } else {
        Some(build_index(dataset, None)?)
    };

    let has_truth = dataset.true_labels().is_some();
    let mut trace = Vec::with_capacity(config.total_epochs);
    let mut epoch_noisy_ids = Vec::with_capacity(config.total_epochs);
    let mut last_verification = None;
    let mut last_correction = None;

    for epoch in 1..=config.total_epochs {
        if epoch <= config.warmup_epochs {
            let loss = classifier::warmup_epoch(
                &mut model,
                &mut opt,
                dataset,
                config.eta,
                config.batch_size,
                &mut rng,
                epoch,
            )?;
            trace.push(EpochRecord {
                epoch,
                mode: EpochMode::Warmup,
                n_clean: None,
                n_noisy: None,
                n_relabeled: None,
                n_dropped: None,
                loss_mix: None,
                loss_lab: None,
                loss_total: loss,
                ident_precision: None,
                ident_recall: None,
                correction_accuracy: None,
            });
            epoch_noisy_ids.push(None);
            continue;
        }

        // (a) frozen snapshot of predictions (and features, if learned)
        let predictions = classifier::snapshot_predictions(&model, dataset, exec)?;
        let embeddings = if config.use_embedding {
            Some(classifier::snapshot_embeddings(&model, dataset, exec)?)
        } else {
            None
        };
        let full_index: &SimilarityIndex;
        let embedding_index;
        match (&raw_index, &embeddings) {
            (Some(index), _) => full_index = index,
            (None, Some(rows)) => {
                embedding_index = build_index_from_vectors(rows, None)?;
                full_index = &embedding_index;
            }
            (None, None) => unreachable!("one feature source is always configured"),
        }

        // (b) verification
        let verification = ncnv::verify(
            dataset,
            &predictions,
            full_index,
            config.k,
            config.tau,
            exec,
        )?;
        epoch_noisy_ids.push(Some(verification.noisy_ids().to_vec()));

        if verification.clean_ids().len() < 2 {
            // Cannot form mixup pairs from this partition; train this epoch
            // like warm-up instead of discarding it.
            log::warn!(
                "epoch {epoch}: verification kept {} clean samples; falling back to warm-up training",
                verification.clean_ids().len()
            );
            let loss = classifier::warmup_epoch(
                &mut model,
                &mut opt,
                dataset,
                config.eta,
                config.batch_size,
                &mut rng,
                epoch,
            )?;
            let (ip, ir) = ident_snapshot(has_truth, &verification, dataset)?;
            trace.push(EpochRecord {
                epoch,
                mode: EpochMode::Fallback,
                n_clean: Some(verification.clean_ids().len()),
                n_noisy: Some(verification.noisy_ids().len()),
                n_relabeled: None,
                n_dropped: None,
                loss_mix: None,
                loss_lab: None,
                loss_total: loss,
                ident_precision: ip,
                ident_recall: ir,
                correction_accuracy: None,
            });
            last_verification = Some(verification);
            last_correction = None;
            continue;
        }

        // (c) correction over the noisy subset
        let correction = if verification.noisy_ids().is_empty() {
            None
        } else {
            let clean_index = match &embeddings {
                Some(rows) => build_index_from_vectors(rows, Some(verification.clean_ids()))?,
                None => build_index(dataset, Some(verification.clean_ids()))?,
            };
            let scores = nclc::score_candidates(
                &clean_index,
                verification.noisy_ids(),
                &predictions,
                dataset.given_labels(),
                config.k,
                exec,
            )?;
            Some(scores.assemble(config.tau_prime))
        };

        // (d) mini-batch fine-tuning over D_clean and D_relab
        let relabeled: Vec<(usize, usize)> = correction
            .as_ref()
            .map(|c| c.relabeled().to_vec())
            .unwrap_or_default();
        let mut clean_order = verification.clean_ids().to_vec();
        clean_order.shuffle(&mut rng);
        let mut relab_batches = BatchCycler::new(relabeled.clone(), &mut rng);

        let mut sum_mix = 0.0;
        let mut sum_lab = 0.0;
        let mut sum_total = 0.0;
        let mut batches = 0usize;
        let mut lab_batches = 0usize;
        for (batch_no, chunk) in clean_order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue; // a trailing singleton cannot form mixup pairs
            }
            let pairs = mixup_batch(dataset, chunk, config.alpha, &mut rng)?;

            let mut lab_items: Vec<(usize, usize)> =
                relab_batches.next_batch(config.relabel_batch_size, &mut rng);
            if config.apply_lab_to_clean {
                lab_items.extend(chunk.iter().map(|&i| (i, dataset.given_label(i))));
            }
            let (lab_inputs, lab_targets): (Vec<Vec<f64>>, Vec<Vec<f64>>) = lab_items
                .iter()
                .map(|&(id, label)| {
                    let mut target = vec![0.0; dataset.num_classes()];
                    target[label] = 1.0;
                    (policy.perturb(dataset.feature(id), &mut rng), target)
                })
                .unzip();

            let (mix_value, mix_grad) = mix_loss(&model, &pairs)?;
            let (total, grad) = if lab_inputs.is_empty() || config.gamma == 0.0 {
                (mix_value, mix_grad)
            } else {
                let (lab_value, lab_grad) =
                    classifier::soft_ce(&model, &lab_inputs, &lab_targets)?;
                sum_lab += lab_value;
                lab_batches += 1;
                let mut grad = mix_grad;
                for (g, lg) in grad.iter_mut().zip(&lab_grad) {
                    *g += config.gamma * lg;
                }
                (mix_value + config.gamma * lab_value, grad)
            };
            if !total.is_finite() {
                return Err(Error::NonFinite {
                    what: "loss",
                    epoch,
                    batch: batch_no,
                });
            }
            opt.step(model.params_mut(), &grad, config.eta);
            if !model.all_params_finite() {
                return Err(Error::NonFinite {
                    what: "parameter",
                    epoch,
                    batch: batch_no,
                });
            }
            sum_mix += mix_value;
            sum_total += total;
            batches += 1;
        }

        let (ip, ir) = ident_snapshot(has_truth, &verification, dataset)?;
        let correction_accuracy = match (&correction, has_truth) {
            (Some(c), true) => evalkit::correction_metrics(c, dataset)?.accuracy,
            _ => None,
        };
        trace.push(EpochRecord {
            epoch,
            mode: EpochMode::Nce,
            n_clean: Some(verification.clean_ids().len()),
            n_noisy: Some(verification.noisy_ids().len()),
            n_relabeled: Some(relabeled.len()),
            n_dropped: Some(correction.as_ref().map(|c| c.dropped().len()).unwrap_or(0)),
            loss_mix: Some(sum_mix / batches.max(1) as f64),
            loss_lab: if lab_batches > 0 {
                Some(sum_lab / lab_batches as f64)
            } else {
                None
            },
            loss_total: sum_total / batches.max(1) as f64,
            ident_precision: ip,
            ident_recall: ir,
            correction_accuracy,
        });
        last_verification = Some(verification);
        last_correction = correction;
    }

    Ok(PipelineResult {
        model,
        trace,
        last_verification,
        last_correction,
        epoch_noisy_ids,
    })
}

fn ident_snapshot(
    has_truth: bool,
    verification: &VerificationReport,
    dataset: &Dataset,
) -> Result<(Option<f64>, Option<f64>)> {
    if !has_truth {
        return Ok((None, None));
    }
    let m = evalkit::identification_metrics(verification, dataset)?;
    Ok((m.noisy_precision, m.noisy_recall))
}

/// Predictions snapshot type alias used by CLI report commands.
pub type PredictionSnapshot = Vec<LabelDistribution>;
