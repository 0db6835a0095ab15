//! The trainable model: a softmax classifier over an optional one-hidden-
//! layer embedding, trained by mini-batch SGD with momentum and weight
//! decay.
//!
//! This small model supplies both the class probabilities p(y|x) and the
//! feature map Φ(x) consumed by the neighborhood stages. With
//! `hidden_dim = 0` it is a plain linear softmax model and Φ is the
//! identity on input features.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabelDistribution};
use crate::error::{Error, Result};
use crate::exec::Executor;

/// SGD momentum, fixed across the artifact.
pub const MOMENTUM: f64 = 0.9;
/// SGD weight decay, fixed across the artifact.
pub const WEIGHT_DECAY: f64 = 5e-4;

/// Softmax classifier with parameters stored as one flat vector:
/// `[w1 (h×d), b1 (h), w2 (C×h), b2 (C)]`, or `[w2 (C×d), b2 (C)]` when
/// `hidden_dim = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    params: Vec<f64>,
}

impl Classifier {
    /// Fresh model with uniform init in [-1/√fan_in, +1/√fan_in].
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut model = Self::zeroed(input_dim, hidden_dim, num_classes)?;
        if hidden_dim > 0 {
            let bound1 = 1.0 / libm::sqrt(input_dim as f64);
            let bound2 = 1.0 / libm::sqrt(hidden_dim as f64);
            let split = hidden_dim * input_dim + hidden_dim;
            for p in &mut model.params[..split] {
                *p = rng.random_range(-bound1..=bound1);
            }
            for p in &mut model.params[split..] {
                *p = rng.random_range(-bound2..=bound2);
            }
        } else {
            let bound = 1.0 / libm::sqrt(input_dim as f64);
            for p in &mut model.params {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeroed(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 || num_classes < 2 {
            return Err(Error::InvalidConfig(alloc::format!(
                "classifier needs input_dim >= 1 and num_classes >= 2, got {input_dim}, {num_classes}"
            )));
        }
        let n = if hidden_dim > 0 {
            hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes
        } else {
            num_classes * input_dim + num_classes
        };
        Ok(Self {
            input_dim,
            hidden_dim,
            num_classes,
            params: vec![0.0; n],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Rebuilds a model from a flat parameter vector (checkpoint loading).
    pub fn from_params(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let model = Self::zeroed(input_dim, hidden_dim, num_classes)?;
        if params.len() != model.params.len() {
            return Err(Error::ShapeMismatch {
                left: params.len(),
                right: model.params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter",
                epoch: 0,
                batch: 0,
            });
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            num_classes,
            params,
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::ShapeMismatch {
                left: x.len(),
                right: self.input_dim,
            });
        }
        Ok(())
    }

    // Parameter block offsets: (w1, b1, w2, b2). w1/b1 are empty ranges for
    // the linear model.
    fn offsets(&self) -> (usize, usize, usize, usize) {
        if self.hidden_dim > 0 {
            let w1 = 0;
            let b1 = w1 + self.hidden_dim * self.input_dim;
            let w2 = b1 + self.hidden_dim;
            let b2 = w2 + self.num_classes * self.hidden_dim;
            (w1, b1, w2, b2)
        } else {
            (0, 0, 0, self.num_classes * self.input_dim)
        }
    }

    /// Hidden-layer activations Φ(x); the identity when `hidden_dim = 0`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if self.hidden_dim == 0 {
            return Ok(x.to_vec());
        }
        let (w1, b1, _, _) = self.offsets();
        let mut hidden = vec![0.0; self.hidden_dim];
        for (k, h) in hidden.iter_mut().enumerate() {
            let row = &self.params[w1 + k * self.input_dim..w1 + (k + 1) * self.input_dim];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + k];
            *h = if z > 0.0 { z } else { 0.0 };
        }
        Ok(hidden)
    }

    fn logits_from_embedding(&self, phi: &[f64]) -> Vec<f64> {
        let (_, _, w2, b2) = self.offsets();
        let width = if self.hidden_dim > 0 {
            self.hidden_dim
        } else {
            self.input_dim
        };
        let mut logits = vec![0.0; self.num_classes];
        for (c, logit) in logits.iter_mut().enumerate() {
            let row = &self.params[w2 + c * width..w2 + (c + 1) * width];
            *logit = row.iter().zip(phi).map(|(w, v)| w * v).sum::<f64>() + self.params[b2 + c];
        }
        logits
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = self.embed(x)?;
        Ok(self.logits_from_embedding(&phi))
    }

    /// Class probabilities for one sample.
    pub fn predict_one(&self, x: &[f64]) -> Result<LabelDistribution> {
        let logits = self.logits(x)?;
        Ok(softmax(&logits))
    }

    /// Class probabilities for a batch of feature rows.
    pub fn predict_proba<X: AsRef<[f64]>>(&self, rows: &[X]) -> Result<Vec<LabelDistribution>> {
        rows.iter().map(|x| self.predict_one(x.as_ref())).collect()
    }

    pub fn all_params_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Numerically-stabilized softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> LabelDistribution {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    LabelDistribution::from_probs(probs).expect("softmax output is on the simplex")
}

/// Mean cross-entropy (natural log) between soft targets and model
/// predictions over a batch, with the analytic gradient w.r.t. the flat
/// parameter vector.
pub fn soft_ce<X: AsRef<[f64]>, T: AsRef<[f64]>>(
    model: &Classifier,
    inputs: &[X],
    targets: &[T],
) -> Result<(f64, Vec<f64>)> {
    if inputs.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    if inputs.is_empty() {
        return Ok((0.0, vec![0.0; model.num_params()]));
    }
    let (w1, b1, w2, b2) = model.offsets();
    let d = model.input_dim;
    let h = model.hidden_dim;
    let c_n = model.num_classes;
    let width = if h > 0 { h } else { d };
    let scale = 1.0 / inputs.len() as f64;

    let mut loss = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for (x, t) in inputs.iter().zip(targets) {
        let x = x.as_ref();
        let t = t.as_ref();
        model.check_input(x)?;
        if t.len() != c_n {
            return Err(Error::ShapeMismatch {
                left: t.len(),
                right: c_n,
            });
        }
        let phi = model.embed(x)?;
        let logits = model.logits_from_embedding(&phi);
        let probs = softmax(&logits);
        let p = probs.probs();
        for (c, &tc) in t.iter().enumerate() {
            if tc > 0.0 {
                loss -= scale * tc * libm::log(p[c].max(f64::MIN_POSITIVE));
            }
        }
        // d loss / d logits = (p - t) / batch
        let dlogits: Vec<f64> = p.iter().zip(t).map(|(&pc, &tc)| scale * (pc - tc)).collect();
        for (c, &dl) in dlogits.iter().enumerate() {
            let row = &mut grad[w2 + c * width..w2 + (c + 1) * width];
            for (g, &v) in row.iter_mut().zip(&phi) {
                *g += dl * v;
            }
            grad[b2 + c] += dl;
        }
        if h > 0 {
            for k in 0..h {
                if phi[k] <= 0.0 {
                    continue; // ReLU gate closed
                }
                let mut dz = 0.0;
                for (c, &dl) in dlogits.iter().enumerate() {
                    dz += dl * model.params[w2 + c * width + k];
                }
                if dz == 0.0 {
                    continue;
                }
                let row = &mut grad[w1 + k * d..w1 + (k + 1) * d];
                for (g, &v) in row.iter_mut().zip(x) {
                    *g += dz * v;
                }
                grad[b1 + k] += dz;
            }
        }
    }
    Ok((loss, grad))
}

/// SGD with momentum 0.9 and weight decay 5e-4:
/// `v ← μ·v + (∇ + wd·θ)`, `θ ← θ − η·v`.
#[derive(Debug, Clone)]
pub struct SgdOptimizer {
    velocity: Vec<f64>,
}

impl SgdOptimizer {
    pub fn new(num_params: usize) -> Self {
        Self {
            velocity: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], eta: f64) {
        debug_assert_eq!(params.len(), self.velocity.len());
        debug_assert_eq!(grad.len(), self.velocity.len());
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = MOMENTUM * *v + (g + WEIGHT_DECAY * *p);
            *p -= eta * *v;
        }
    }
}

/// One epoch of supervised cross-entropy training over all given labels.
/// Returns the mean loss across batches.
pub fn warmup_epoch(
    model: &mut Classifier,
    opt: &mut SgdOptimizer,
    dataset: &Dataset,
    eta: f64,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    let c_n = dataset.num_classes();
    let mut total = 0.0;
    let mut batches = 0usize;
    for (batch_no, chunk) in order.chunks(batch_size).enumerate() {
        let inputs: Vec<&[f64]> = chunk.iter().map(|&i| dataset.feature(i)).collect();
        let targets: Vec<Vec<f64>> = chunk
            .iter()
            .map(|&i| {
                let mut row = vec![0.0; c_n];
                row[dataset.given_label(i)] = 1.0;
                row
            })
            .collect();
        let (loss, grad) = soft_ce(model, &inputs, &targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "loss",
                epoch,
                batch: batch_no,
            });
        }
        opt.step(model.params_mut(), &grad, eta);
        if !model.all_params_finite() {
            return Err(Error::NonFinite {
                what: "parameter",
                epoch,
                batch: batch_no,
            });
        }
        total += loss;
        batches += 1;
    }
    Ok(total / batches.max(1) as f64)
}

/// Supervised warm-up: `epochs` epochs of mini-batch SGD under cross-entropy
/// on all samples with their given (possibly noisy) labels.
pub fn warmup(
    model: &mut Classifier,
    opt: &mut SgdOptimizer,
    dataset: &Dataset,
    epochs: usize,
    eta: f64,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        losses.push(warmup_epoch(
            model, opt, dataset, eta, batch_size, rng, epoch,
        )?);
    }
    Ok(losses)
}

/// Frozen-model prediction snapshot over the whole dataset.
pub fn snapshot_predictions<E: Executor>(
    model: &Classifier,
    dataset: &Dataset,
    exec: &E,
) -> Result<Vec<LabelDistribution>> {
    let results = exec.map_collect(dataset.len(), |i| model.predict_one(dataset.feature(i)));
    results.into_iter().collect()
}

/// Frozen-model embedding snapshot over the whole dataset.
pub fn snapshot_embeddings<E: Executor>(
    model: &Classifier,
    dataset: &Dataset,
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    let results = exec.map_collect(dataset.len(), |i| model.embed(dataset.feature(i)));
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let model = Classifier::zeroed(3, 0, 4).unwrap();
        let p = model.predict_one(&[0.3, -1.0, 2.5]).unwrap();
        for &v in p.probs() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_form() {
        // logits [ln 2, 0] -> [2/3, 1/3]
        let p = softmax(&[core::f64::consts::LN_2, 0.0]);
        assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.probs()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant_and_normalized() {
        let mut r = rng(7);
        for _ in 0..50 {
            let logits: Vec<f64> = (0..5).map(|_| r.random_range(-10.0..10.0)).collect();
            let shifted: Vec<f64> = logits.iter().map(|z| z + 123.456).collect();
            let a = softmax(&logits);
            let b = softmax(&shifted);
            let sum: f64 = a.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_identity_without_hidden_layer() {
        let model = Classifier::zeroed(2, 0, 2).unwrap();
        assert_eq!(model.embed(&[1.5, -0.5]).unwrap(), vec![1.5, -0.5]);
    }

    #[test]
    fn embed_zero_hidden_model_is_all_zeros() {
        let model = Classifier::zeroed(4, 16, 3).unwrap();
        let phi = model.embed(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(phi, vec![0.0; 16]);
    }

    #[test]
    fn embed_random_model_is_finite_with_length_h() {
        let model = Classifier::new(4, 16, 3, &mut rng(3)).unwrap();
        let phi = model.embed(&[1.0, -2.0, 3.0, -4.0]).unwrap();
        assert_eq!(phi.len(), 16);
        assert!(phi.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = Classifier::zeroed(3, 0, 2).unwrap();
        assert!(matches!(
            model.predict_one(&[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sgd_zero_gradient_shrinks_by_weight_decay() {
        let mut params = vec![1.0, -2.0, 0.5];
        let mut opt = SgdOptimizer::new(3);
        opt.step(&mut params, &[0.0, 0.0, 0.0], 0.1);
        let factor = 1.0 - 0.1 * WEIGHT_DECAY;
        assert_eq!(params, vec![1.0 * factor, -2.0 * factor, 0.5 * factor]);
    }

    #[test]
    fn sgd_first_step_matches_closed_form() {
        // theta - eta * (grad + wd * theta), with zero initial velocity
        let theta = 0.7;
        let grad = 1.4;
        let eta = 0.05;
        let mut params = vec![theta];
        let mut opt = SgdOptimizer::new(1);
        opt.step(&mut params, &[grad], eta);
        let expected = theta - eta * (grad + WEIGHT_DECAY * theta);
        assert!((params[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn warmup_fits_separable_blobs() {
        let ds = crate::datagen::make_blobs(2, 40, 4, 0.15, 11).unwrap();
        let mut model = Classifier::new(4, 0, 2, &mut rng(0)).unwrap();
        let mut opt = SgdOptimizer::new(model.num_params());
        warmup(&mut model, &mut opt, &ds, 10, 0.5, 16, &mut rng(1)).unwrap();
        let correct = (0..ds.len())
            .filter(|&i| model.predict_one(ds.feature(i)).unwrap().argmax() == ds.given_label(i))
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.95);
    }

    #[test]
    fn warmup_fits_degenerate_single_class_labels() {
        let ds = crate::datagen::make_blobs(2, 30, 4, 0.3, 5).unwrap();
        let rows = ds.feature_rows();
        let n = ds.len();
        let ds = Dataset::new(rows, vec![1; n], None, 2).unwrap();
        let mut model = Classifier::new(4, 0, 2, &mut rng(0)).unwrap();
        let mut opt = SgdOptimizer::new(model.num_params());
        warmup(&mut model, &mut opt, &ds, 10, 0.5, 16, &mut rng(1)).unwrap();
        for i in 0..ds.len() {
            assert_eq!(model.predict_one(ds.feature(i)).unwrap().argmax(), 1);
        }
    }

    #[test]
    fn warmup_is_bit_deterministic() {
        let ds = crate::datagen::make_blobs(3, 20, 4, 0.2, 9).unwrap();
        let run = || {
            let mut model = Classifier::new(4, 8, 3, &mut rng(42)).unwrap();
            let mut opt = SgdOptimizer::new(model.num_params());
            warmup(&mut model, &mut opt, &ds, 5, 0.1, 16, &mut rng(43)).unwrap();
            model.params().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn full_batch_loss_non_increasing_on_convex_model() {
        let ds = crate::datagen::make_blobs(2, 25, 4, 0.3, 21).unwrap();
        let inputs: Vec<&[f64]> = (0..ds.len()).map(|i| ds.feature(i)).collect();
        let targets: Vec<Vec<f64>> = (0..ds.len())
            .map(|i| {
                let mut row = vec![0.0; 2];
                row[ds.given_label(i)] = 1.0;
                row
            })
            .collect();
        let mut model = Classifier::new(4, 0, 2, &mut rng(2)).unwrap();
        let mut opt = SgdOptimizer::new(model.num_params());
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            let (loss, grad) = soft_ce(&model, &inputs, &targets).unwrap();
            assert!(loss <= prev + 1e-12);
            prev = loss;
            opt.step(model.params_mut(), &grad, 0.05);
        }
    }

    #[test]
    fn snapshot_predictions_match_direct_calls() {
        let ds = crate::datagen::make_blobs(3, 10, 4, 0.2, 13).unwrap();
        let model = Classifier::new(4, 8, 3, &mut rng(1)).unwrap();
        let snap = snapshot_predictions(&model, &ds, &Sequential).unwrap();
        for i in 0..ds.len() {
            assert_eq!(snap[i], model.predict_one(ds.feature(i)).unwrap());
        }
    }
}
