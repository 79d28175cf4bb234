//! Structured and random joint-distribution generators.
//!
//! These feed the solvers and the counting tests: Zipf single-symbol
//! vectors, binary symmetric Markov chains (whose dense joint has few
//! distinct probability values), block-i.i.d. products, and seeded random
//! product distributions scrambled by a word permutation with the ground
//! truth returned for oracle checks.

use crate::dist::{apply_mapping, DistError, JointDistribution, WordMapping};
use crate::recover::product_joint;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Largest word length any dense generator will materialize.
pub const MAX_DENSE_N: usize = 26;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("zipf exponent must be positive, got {s}")]
    InvalidExponent { s: f64 },
    #[error("zipf needs at least one symbol")]
    EmptyAlphabet,
    #[error("flip probability must lie strictly between 0 and 1, got {flip}")]
    InvalidFlip { flip: f64 },
    #[error("block size {r} does not divide word length {n}")]
    Divisibility { n: usize, r: usize },
    #[error("word length {n} exceeds the dense cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// `P(k) ∝ k^{-s}` over symbols `0..q` (rank `k = symbol + 1`), normalized.
/// Strictly decreasing for `s > 0`.
pub fn zipf(q: usize, s: f64) -> Result<Vec<f64>, GenError> {
    if q == 0 {
        return Err(GenError::EmptyAlphabet);
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(GenError::InvalidExponent { s });
    }
    let mut probs: Vec<f64> = (1..=q).map(|k| (k as f64).powf(-s)).collect();
    let z: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= z;
    }
    Ok(probs)
}

/// First-order stationary symmetric binary Markov chain.
#[derive(Debug, Clone, Copy)]
pub struct MarkovSpec {
    /// Chain length (number of components).
    pub n: usize,
    /// Probability that consecutive components differ.
    pub flip: f64,
}

/// Dense joint of the chain: `P(word) = (1/2) flip^T (1-flip)^(n-1-T)` where
/// `T` counts adjacent transitions, so every bit is marginally uniform.
pub fn markov_joint(spec: &MarkovSpec) -> Result<JointDistribution, GenError> {
    if !(spec.flip > 0.0 && spec.flip < 1.0) {
        return Err(GenError::InvalidFlip { flip: spec.flip });
    }
    if spec.n > MAX_DENSE_N {
        return Err(GenError::TooLarge {
            n: spec.n,
            cap: MAX_DENSE_N,
        });
    }
    let n = spec.n;
    let len = crate::dist::word_count(n, 2)?;
    let pair_mask = if n == 1 { 0 } else { (1usize << (n - 1)) - 1 };
    let probs: Vec<f64> = (0..len)
        .map(|w| {
            let transitions = ((w ^ (w >> 1)) & pair_mask).count_ones();
            0.5 * spec.flip.powi(transitions as i32)
                * (1.0 - spec.flip).powi((n - 1) as i32 - transitions as i32)
        })
        .collect();
    Ok(JointDistribution::new(n, 2, probs)?)
}

/// Number of probability-value classes under the relative tolerance
/// `|a - b| <= tol * max(a, b)`, chained over the sorted values so that
/// structurally equal products collapse even after rounding.
pub fn count_unique_probs(joint: &JointDistribution, tol: f64) -> usize {
    let mut sorted = joint.probs().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut classes = 0;
    let mut previous = f64::NEG_INFINITY;
    for &p in &sorted {
        if classes == 0 || (p - previous).abs() > tol * p.abs().max(previous.abs()) {
            classes += 1;
        }
        previous = p;
    }
    classes
}

/// Number of `(first bit, ones, transitions)` classes among `n`-bit words:
/// the combinatorial ceiling `n(n - 1) + 2` on how many distinct
/// probabilities a chain-structured word distribution can take.
pub fn count_markov_profiles(n: usize) -> Result<usize, GenError> {
    if n > MAX_DENSE_N {
        return Err(GenError::TooLarge { n, cap: MAX_DENSE_N });
    }
    let len = crate::dist::word_count(n, 2)?;
    let pair_mask = if n == 1 { 0 } else { (1usize << (n - 1)) - 1 };
    let mut profiles = std::collections::HashSet::new();
    for w in 0..len {
        let ones = w.count_ones();
        let transitions = ((w ^ (w >> 1)) & pair_mask).count_ones();
        profiles.insert((w & 1, ones, transitions));
    }
    Ok(profiles.len())
}

/// Product of `n / r` independent copies of a block distribution over `r`
/// consecutive binary components each.
pub fn block_iid_joint(
    n: usize,
    r: usize,
    block_dist: &[f64],
) -> Result<JointDistribution, GenError> {
    if r == 0 || n % r != 0 {
        return Err(GenError::Divisibility { n, r });
    }
    if n > MAX_DENSE_N {
        return Err(GenError::TooLarge { n, cap: MAX_DENSE_N });
    }
    let block = JointDistribution::new(r, 2, block_dist.to_vec())?;
    let blocks = n / r;
    let len = 1usize << n;
    let block_mask = (1usize << r) - 1;
    let probs: Vec<f64> = (0..len)
        .map(|w| {
            (0..blocks)
                .map(|j| block.probs()[(w >> (j * r)) & block_mask])
                .product()
        })
        .collect();
    Ok(JointDistribution::new(n, 2, probs)?)
}

/// Random product distribution with parameters drawn uniformly from
/// `(0.05, 0.45)`, scrambled by a seeded random word permutation. Returns
/// the scrambled joint, the ground-truth parameters (component order of the
/// un-scrambled product), and the scramble mapping itself.
pub fn random_product_scrambled(
    n: usize,
    seed: u64,
) -> Result<(JointDistribution, Vec<f64>, WordMapping), GenError> {
    if n > MAX_DENSE_N {
        return Err(GenError::TooLarge { n, cap: MAX_DENSE_N });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pis: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.45)).collect();
    let product = product_joint(&pis).map_err(|_| GenError::TooLarge { n, cap: MAX_DENSE_N })?;
    let mut perm: Vec<usize> = (0..product.len()).collect();
    perm.shuffle(&mut rng);
    let mapping = WordMapping::new(n, 2, perm)?;
    let scrambled = apply_mapping(&product, &mapping)?;
    Ok((scrambled, pis, mapping))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{entropy, sum_marginal_entropies};
    use crate::recover::recover_product_params;
    use approx::assert_relative_eq;

    #[test]
    fn zipf_matches_hand_values() {
        let z = zipf(2, 1.0).unwrap();
        assert_relative_eq!(z[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(z[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(zipf(1, 2.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn zipf_is_decreasing_and_normalized() {
        for s in [0.5, 1.0, 1.6] {
            let z = zipf(16, s).unwrap();
            assert!(z.windows(2).all(|w| w[0] > w[1]), "s={s}");
            assert_relative_eq!(z.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zipf_validates_inputs() {
        assert!(matches!(zipf(0, 1.0), Err(GenError::EmptyAlphabet)));
        assert!(matches!(
            zipf(4, 0.0),
            Err(GenError::InvalidExponent { .. })
        ));
        assert!(matches!(
            zipf(4, -1.0),
            Err(GenError::InvalidExponent { .. })
        ));
    }

    #[test]
    fn markov_matches_hand_values() {
        let joint = markov_joint(&MarkovSpec { n: 2, flip: 0.1 }).unwrap();
        assert_relative_eq!(joint.probs()[0b00], 0.45, epsilon = 1e-15);
        assert_relative_eq!(joint.probs()[0b11], 0.45, epsilon = 1e-15);
        assert_relative_eq!(joint.probs()[0b01], 0.05, epsilon = 1e-15);
        assert_relative_eq!(joint.probs()[0b10], 0.05, epsilon = 1e-15);
    }

    #[test]
    fn markov_with_fair_flip_is_uniform() {
        let joint = markov_joint(&MarkovSpec { n: 4, flip: 0.5 }).unwrap();
        for &p in joint.probs() {
            assert_relative_eq!(p, 1.0 / 16.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn markov_is_stationary() {
        let joint = markov_joint(&MarkovSpec { n: 5, flip: 0.23 }).unwrap();
        for marginal in joint.marginals() {
            assert_relative_eq!(marginal[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn markov_transition_classes_share_probability() {
        // Words x1..x4 = 0100 and 0010 (components least significant first)
        // have two transitions each; 0001 has one.
        let joint = markov_joint(&MarkovSpec { n: 4, flip: 0.1 }).unwrap();
        let w_0100 = 0b0010;
        let w_0010 = 0b0100;
        let w_0001 = 0b1000;
        assert_relative_eq!(
            joint.probs()[w_0100],
            joint.probs()[w_0010],
            epsilon = 1e-15
        );
        assert!((joint.probs()[w_0100] - joint.probs()[w_0001]).abs() > 1e-6);
    }

    #[test]
    fn markov_unique_probability_classes() {
        // The transition count T alone sets the probability, so the chain
        // realizes exactly n distinct values (one per T in 0..n), which is
        // well inside the quadratic profile-class bound n(n-1)+2.
        for n in 3..=8usize {
            for flip in [0.1, 0.2, 0.3] {
                let joint = markov_joint(&MarkovSpec { n, flip }).unwrap();
                let unique = count_unique_probs(&joint, 1e-12);
                assert_eq!(unique, n, "n={n} flip={flip}");
                assert!(unique <= n * (n - 1) + 2);
            }
        }
    }

    #[test]
    fn markov_profile_classes_follow_the_quadratic_law() {
        // Hand counts: n=2 has profiles (first, ones, transitions) =
        // (0,0,0), (1,1,1), (0,1,1), (1,2,0), so 4; n=3 gives 8, n=4 gives
        // 14 — all equal to n(n-1)+2.
        assert_eq!(count_markov_profiles(2).unwrap(), 4);
        assert_eq!(count_markov_profiles(3).unwrap(), 8);
        assert_eq!(count_markov_profiles(4).unwrap(), 14);
        for n in 2..=12usize {
            assert_eq!(count_markov_profiles(n).unwrap(), n * (n - 1) + 2);
        }
        assert_eq!(count_markov_profiles(1).unwrap(), 2);
        assert!(count_markov_profiles(0).is_err());
    }

    #[test]
    fn unique_count_of_uniform_is_one() {
        let joint = JointDistribution::new(3, 2, vec![0.125; 8]).unwrap();
        assert_eq!(count_unique_probs(&joint, 1e-12), 1);
    }

    #[test]
    fn unique_count_uses_relative_tolerance() {
        let joint = JointDistribution::new(
            1,
            4,
            vec![0.3, 0.3 * (1.0 + 1e-13), 0.2, 0.2 - 0.3e-13],
        )
        .unwrap();
        assert_eq!(count_unique_probs(&joint, 1e-12), 2);
        assert_eq!(count_unique_probs(&joint, 1e-16), 4);
    }

    #[test]
    fn block_iid_with_full_block_is_the_block() {
        let block = [0.4, 0.3, 0.2, 0.1];
        let joint = block_iid_joint(2, 2, &block).unwrap();
        assert_eq!(joint.probs(), &block);
    }

    #[test]
    fn block_iid_respects_the_multiset_bound() {
        let block = [0.4, 0.3, 0.2, 0.1];
        let joint = block_iid_joint(4, 2, &block).unwrap();
        assert_eq!(joint.len(), 16);
        // C(n/r + 2^r - 1, n/r) = C(5, 2) = 10; this block even collides
        // (0.4·0.1 = 0.2·0.2), landing strictly below.
        let unique = count_unique_probs(&joint, 1e-12);
        assert!(unique <= 10);
        assert_eq!(unique, 9);
        // Generic (seeded random) blocks meet the bound with equality.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let mut random_block: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
            let z: f64 = random_block.iter().sum();
            random_block.iter_mut().for_each(|p| *p /= z);
            let joint = block_iid_joint(4, 2, &random_block).unwrap();
            assert_eq!(count_unique_probs(&joint, 1e-12), 10);
        }
    }

    #[test]
    fn iid_bits_follow_the_binomial_pattern() {
        for n in [3usize, 5, 7] {
            let joint = block_iid_joint(n, 1, &[0.3, 0.7]).unwrap();
            assert_eq!(count_unique_probs(&joint, 1e-12), n + 1);
        }
    }

    #[test]
    fn block_iid_validates_divisibility() {
        assert!(matches!(
            block_iid_joint(5, 2, &[0.4, 0.3, 0.2, 0.1]),
            Err(GenError::Divisibility { n: 5, r: 2 })
        ));
    }

    #[test]
    fn scrambled_product_is_reproducible_with_ground_truth() {
        let (first, pis, mapping) = random_product_scrambled(6, 42).unwrap();
        let (second, pis2, mapping2) = random_product_scrambled(6, 42).unwrap();
        assert_eq!(first.probs(), second.probs());
        assert_eq!(pis, pis2);
        assert_eq!(mapping.perm(), mapping2.perm());
        for &pi in &pis {
            assert!((0.05..0.45).contains(&pi));
        }
        // A permutation leaves the joint entropy at Σ h_b(π).
        let target: f64 = pis
            .iter()
            .map(|&pi| crate::dist::binary_entropy(pi))
            .sum();
        assert_relative_eq!(entropy(first.probs()).unwrap(), target, epsilon = 1e-12);
        // Scrambling (generically) raises the marginal-entropy sum.
        assert!(sum_marginal_entropies(&first) >= target - 1e-12);
    }

    #[test]
    fn scrambled_product_recovers_sorted_parameters() {
        let (scrambled, pis, _) = random_product_scrambled(5, 7).unwrap();
        let recovered = recover_product_params(&scrambled, 1e-9).unwrap();
        let mut expected = pis.clone();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in recovered.params.zero_probs().iter().zip(&expected) {
            assert_relative_eq!(*got, *want, epsilon = 1e-9);
        }
    }
}
