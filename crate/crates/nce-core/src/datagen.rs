//! Synthetic benchmark generator: Gaussian-blob class clusters with
//! controlled symmetric or asymmetric label-noise injection. Generated
//! datasets carry hidden true labels for the evaluation harness.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseType {
    Symmetric,
    Asymmetric,
}

/// Label corruption protocol.
///
/// Symmetric noise resamples the labels of a `ratio` fraction of samples
/// uniformly over the *other* C−1 classes, so the requested ratio equals the
/// realized wrong-label fraction. Asymmetric noise flips a `ratio` fraction
/// of each class deterministically to `asym_map[class]` (cyclic shift
/// c → c+1 mod C when no map is given).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub noise_type: NoiseType,
    pub ratio: f64,
    pub asym_map: Option<Vec<usize>>,
}

impl NoiseSpec {
    pub fn symmetric(ratio: f64) -> Self {
        Self {
            noise_type: NoiseType::Symmetric,
            ratio,
            asym_map: None,
        }
    }

    pub fn asymmetric(ratio: f64) -> Self {
        Self {
            noise_type: NoiseType::Asymmetric,
            ratio,
            asym_map: None,
        }
    }

    fn validate(&self, num_classes: usize) -> Result<()> {
        if !self.ratio.is_finite() || !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::InvalidNoiseSpec(format!(
                "noise ratio must lie in [0, 1), got {}",
                self.ratio
            )));
        }
        if let Some(map) = &self.asym_map {
            if map.len() != num_classes {
                return Err(Error::InvalidNoiseSpec(format!(
                    "asym_map length {} does not match {} classes",
                    map.len(),
                    num_classes
                )));
            }
            for (c, &target) in map.iter().enumerate() {
                if target >= num_classes {
                    return Err(Error::InvalidNoiseSpec(format!(
                        "asym_map[{c}] = {target} out of range for {num_classes} classes"
                    )));
                }
                if target == c {
                    return Err(Error::InvalidNoiseSpec(format!(
                        "asym_map[{c}] maps the class to itself"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Gaussian blobs: `num_classes` clusters of `per_class` points in `R^dim`,
/// labels assigned round-robin so every prefix stays class-balanced, true
/// labels equal to given labels.
///
/// Class means are mutually orthogonal unit vectors (inter-mean distance √2)
/// when `num_classes <= dim`, random unit vectors otherwise, so `cluster_std`
/// alone controls separability.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    cluster_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 || dim == 0 || per_class == 0 {
        return Err(Error::InvalidConfig(format!(
            "make_blobs needs num_classes >= 2, per_class >= 1, dim >= 1; got {num_classes}, {per_class}, {dim}"
        )));
    }
    if !cluster_std.is_finite() || cluster_std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cluster_std must be finite and non-negative, got {cluster_std}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = class_means(num_classes, dim, &mut rng);

    let n = num_classes * per_class;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes;
        let mean = &means[class];
        let row: Vec<f64> = mean
            .iter()
            .map(|&m| m + cluster_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        features.push(row);
        labels.push(class);
    }
    Dataset::new(features, labels.clone(), Some(labels), num_classes)
}

fn class_means(num_classes: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    while means.len() < num_classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if num_classes <= dim {
            // Gram-Schmidt against accepted means for exact √2 separation.
            for prev in &means {
                let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= dot * pi;
                }
            }
        }
        let norm = crate::simindex::l2_norm(&v);
        if norm < 1e-6 {
            continue; // numerically dependent draw, retry
        }
        for vi in &mut v {
            *vi /= norm;
        }
        means.push(v);
    }
    means
}

/// Corrupts given labels per `spec`, leaving features and true labels
/// untouched. Returns the noisy dataset and the realized flip fraction.
pub fn inject_noise(dataset: &Dataset, spec: &NoiseSpec, seed: u64) -> Result<(Dataset, f64)> {
    spec.validate(dataset.num_classes())?;
    let truth: Vec<usize> = match dataset.true_labels() {
        Some(t) => t.to_vec(),
        None => dataset.given_labels().to_vec(),
    };
    let n = dataset.len();
    let c_n = dataset.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut given = truth.clone();

    match spec.noise_type {
        NoiseType::Symmetric => {
            let count = (libm::round(spec.ratio * n as f64) as usize).min(n);
            let chosen = rand::seq::index::sample(&mut rng, n, count);
            for i in chosen {
                // uniform over the other C-1 classes
                let draw = rng.random_range(0..c_n - 1);
                given[i] = if draw >= truth[i] { draw + 1 } else { draw };
            }
        }
        NoiseType::Asymmetric => {
            let map: Vec<usize> = match &spec.asym_map {
                Some(m) => m.clone(),
                None => (0..c_n).map(|c| (c + 1) % c_n).collect(),
            };
            for (class, &target) in map.iter().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| truth[i] == class).collect();
                let count =
                    (libm::round(spec.ratio * members.len() as f64) as usize).min(members.len());
                let chosen = rand::seq::index::sample(&mut rng, members.len(), count);
                for j in chosen {
                    given[members[j]] = target;
                }
            }
        }
    }

    let flipped = given.iter().zip(&truth).filter(|(g, t)| g != t).count();
    let realized = flipped as f64 / n as f64;
    let ds = Dataset::new(dataset.feature_rows(), given, Some(truth), c_n)?;
    Ok((ds, realized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_std_gives_point_clusters() {
        let ds = make_blobs(2, 10, 2, 0.0, 3).unwrap();
        let first_of = |class: usize| ds.feature(class).to_vec();
        for i in 0..ds.len() {
            assert_eq!(ds.feature(i), &first_of(ds.given_label(i))[..]);
        }
        assert_ne!(first_of(0), first_of(1));
    }

    #[test]
    fn blobs_are_seed_deterministic() {
        let a = make_blobs(4, 25, 16, 0.3, 99).unwrap();
        let b = make_blobs(4, 25, 16, 0.3, 99).unwrap();
        assert_eq!(a, b);
        let c = make_blobs(4, 25, 16, 0.3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_means_are_orthonormal_when_they_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let means = class_means(4, 16, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_ratio_keeps_labels() {
        let ds = make_blobs(3, 10, 4, 0.2, 1).unwrap();
        let (noisy, realized) = inject_noise(&ds, &NoiseSpec::symmetric(0.0), 2).unwrap();
        assert_eq!(realized, 0.0);
        assert_eq!(noisy.given_labels(), noisy.true_labels().unwrap());
    }

    #[test]
    fn symmetric_noise_flips_exactly_the_requested_fraction() {
        let ds = make_blobs(4, 250, 8, 0.3, 7).unwrap(); // N = 1000
        let (noisy, realized) = inject_noise(&ds, &NoiseSpec::symmetric(0.5), 11).unwrap();
        let flips = noisy
            .given_labels()
            .iter()
            .zip(noisy.true_labels().unwrap())
            .filter(|(g, t)| g != t)
            .count();
        assert_eq!(flips, 500); // exclusion resampling: touched = flipped
        assert_eq!(realized, 0.5);
    }

    #[test]
    fn asymmetric_noise_flips_per_class_into_mapped_class() {
        let ds = make_blobs(4, 100, 8, 0.3, 7).unwrap();
        let (noisy, realized) = inject_noise(&ds, &NoiseSpec::asymmetric(0.4), 13).unwrap();
        let truth = noisy.true_labels().unwrap();
        for class in 0..4 {
            let flipped: Vec<usize> = (0..noisy.len())
                .filter(|&i| truth[i] == class && noisy.given_label(i) != class)
                .map(|i| noisy.given_label(i))
                .collect();
            assert_eq!(flipped.len(), 40); // round(0.4 * 100)
            assert!(flipped.iter().all(|&l| l == (class + 1) % 4));
        }
        assert_eq!(realized, 0.4);
    }

    #[test]
    fn inject_noise_never_touches_features_or_truth() {
        let ds = make_blobs(3, 30, 4, 0.2, 17).unwrap();
        let (noisy, _) = inject_noise(&ds, &NoiseSpec::symmetric(0.7), 19).unwrap();
        assert_eq!(noisy.feature_rows(), ds.feature_rows());
        assert_eq!(noisy.true_labels().unwrap(), ds.true_labels().unwrap());
    }

    #[test]
    fn custom_asym_map_is_validated() {
        let ds = make_blobs(3, 5, 4, 0.2, 23).unwrap();
        let bad_self = NoiseSpec {
            noise_type: NoiseType::Asymmetric,
            ratio: 0.2,
            asym_map: Some(vec![0, 2, 1]),
        };
        assert!(inject_noise(&ds, &bad_self, 1).is_err());
        let bad_len = NoiseSpec {
            noise_type: NoiseType::Asymmetric,
            ratio: 0.2,
            asym_map: Some(vec![1, 0]),
        };
        assert!(inject_noise(&ds, &bad_len, 1).is_err());
        let ok = NoiseSpec {
            noise_type: NoiseType::Asymmetric,
            ratio: 0.2,
            asym_map: Some(vec![2, 0, 1]),
        };
        assert!(inject_noise(&ds, &ok, 1).is_ok());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let ds = make_blobs(4, 50, 8, 0.25, 31).unwrap();
        let spec = NoiseSpec::symmetric(0.4);
        let (a, _) = inject_noise(&ds, &spec, 5).unwrap();
        let (b, _) = inject_noise(&ds, &spec, 5).unwrap();
        assert_eq!(a, b);
    }
}
