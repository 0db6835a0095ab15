//! Kullback-Leibler and Jensen-Shannon divergence between label
//! distributions.
//!
//! Logarithms are base 2 so that JS divergence spans exactly [0, 1], hitting
//! 1 on distributions with disjoint supports. Zero-mass terms are skipped
//! (0·log 0 = 0) instead of epsilon-floored, which keeps one-hot inputs
//! exact.

use crate::dataset::LabelDistribution;
use crate::error::{Error, Result};

/// KL(p ‖ q) = Σ_i p_i · log2(p_i / q_i).
///
/// Requires support(p) ⊆ support(q); the JS mixture guarantees this for all
/// internal callers.
pub fn kl(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if p.num_classes() != q.num_classes() {
        return Err(Error::ShapeMismatch {
            left: p.num_classes(),
            right: q.num_classes(),
        });
    }
    kl_slices(p.probs(), q.probs())
}

/// JS(p, q) = ½·KL(p ‖ m) + ½·KL(q ‖ m) with m = (p + q)/2, in [0, 1].
pub fn js(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if p.num_classes() != q.num_classes() {
        return Err(Error::ShapeMismatch {
            left: p.num_classes(),
            right: q.num_classes(),
        });
    }
    Ok(js_slices(p.probs(), q.probs()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::InfiniteDivergence { component: i });
            }
            sum += pi * libm::log2(pi / qi);
        }
    }
    Ok(sum)
}

/// JS on raw slices; callers guarantee both are on the simplex with equal
/// length. The mixture is strictly positive wherever p or q is, so the KL
/// terms cannot hit the infinite-divergence case.
pub(crate) fn js_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut left = 0.0;
    let mut right = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            left += pi * libm::log2(pi / m);
        }
        if qi > 0.0 {
            right += qi * libm::log2(qi / m);
        }
    }
    let value = 0.5 * left + 0.5 * right;
    value.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::one_hot;
    use alloc::vec;
    use alloc::vec::Vec;

    fn dist(probs: &[f64]) -> LabelDistribution {
        LabelDistribution::from_probs(probs.to_vec()).unwrap()
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = dist(&[0.5, 0.5]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_one_hot_against_uniform() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        assert_eq!(kl(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn kl_matches_precomputed_fixture() {
        // 0.75·log2(3) + 0.25·log2(1/3) = 0.5·log2(3)
        let p = dist(&[0.75, 0.25]);
        let q = dist(&[0.25, 0.75]);
        let expected = 0.792_481_250_360_578;
        assert!((kl(&p, &q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_unreachable_support_errors() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[1.0, 0.0]);
        assert_eq!(
            kl(&p, &q).unwrap_err(),
            Error::InfiniteDivergence { component: 1 }
        );
    }

    #[test]
    fn js_identical_is_zero() {
        for probs in [vec![1.0, 0.0], vec![0.25, 0.75], vec![0.2, 0.3, 0.5]] {
            let p = dist(&probs);
            assert_eq!(js(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn js_disjoint_one_hots_is_exactly_one() {
        let p = one_hot(0, 2).unwrap();
        let q = one_hot(1, 2).unwrap();
        assert_eq!(js(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn js_matches_precomputed_fixture() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        let expected = 0.311_278_124_459_132_9;
        assert!((js(&p, &q).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn js_dimension_mismatch() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.25, 0.25]);
        assert!(matches!(js(&p, &q), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn js_never_hits_infinite_divergence() {
        // disjoint supports at several sizes
        for c in 2..8 {
            let p = one_hot(0, c).unwrap();
            let q = one_hot(c - 1, c).unwrap();
            let v = js(&p, &q).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
