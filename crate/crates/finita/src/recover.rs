//! Exact recovery of independent binary parameters from a scrambled product
//! distribution.
//!
//! If a binary joint is some word-permutation of a product of independent
//! Bernoulli components, the sorted probability list determines the
//! parameters: the smallest probability is the product of all `π_i`, its
//! ratio to the second-smallest reveals the largest parameter, and each
//! further parameter is exposed by the smallest probability not yet
//! explained by the parameters found so far. The whole recursion runs in
//! `O(n · 2^n)` and ends with a residual check that either certifies the
//! factorization or rejects the input.

use crate::dist::{
    apply_mapping, DistError, JointDistribution, MarginalParams, WordMapping,
};
use thiserror::Error;

/// Default relative tolerance for matching probabilities during recovery.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RecoverError {
    #[error("joint is not a permuted product distribution (residual {residual:e} at word {word})")]
    NotDecomposable { residual: f64, word: usize },
    #[error("smallest probability is {p1:e}; a product of parameters in (0,1) is strictly positive")]
    DegenerateParameter { p1: f64 },
    #[error("parameter {index} is {value}, outside (0, 1)")]
    ParameterOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Result of a successful recovery.
#[derive(Debug, Clone)]
pub struct RecoveredProduct {
    /// Parameters of the canonicalized product, non-increasing in component
    /// index and all in (0, 1/2].
    pub params: MarginalParams,
    /// Mapping whose image of the input is exactly `product_joint` of the
    /// recovered parameters.
    pub mapping: WordMapping,
    /// Probability comparisons performed; grows as `O(n · 2^n)`.
    pub comparisons: u64,
}

/// Builds the product joint with `P(component i = 0) = pi[i]`.
pub fn product_joint(pis: &[f64]) -> Result<JointDistribution, RecoverError> {
    let n = pis.len();
    for (index, &value) in pis.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(RecoverError::ParameterOutOfRange { index, value });
        }
    }
    let len = crate::dist::word_count(n, 2)?;
    // Tensor doubling: after step i the buffer holds the product over
    // components 0..=i, with component i in bit i. Factors multiply in the
    // same order as a per-word loop would, so the rounding is identical.
    let mut probs = Vec::with_capacity(len);
    probs.push(1.0);
    for &pi in pis {
        let half = probs.len();
        let mut next = Vec::with_capacity(half * 2);
        next.extend(probs.iter().map(|&p| p * pi));
        next.extend(probs.iter().map(|&p| p * (1.0 - pi)));
        probs = next;
    }
    Ok(JointDistribution::new(n, 2, probs)?)
}

/// Relative closeness used throughout recovery: `|a − b| ≤ tol · max(a, b)`.
#[inline]
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.max(b)
}

/// Count of entries in sorted `xs` that are ≤ `limit`, treating values within
/// the relative tolerance of `limit` as equal (hence counted).
fn count_le(xs: &[f64], limit: f64, tol: f64, comparisons: &mut u64) -> usize {
    *comparisons += xs.len().max(2).ilog2() as u64 + 1;
    xs.partition_point(|&x| x <= limit * (1.0 + tol) || close(x, limit, tol))
}

/// Smallest element of the sorted multiset `full \ sub` (both ascending,
/// `sub` expected to be contained in `full` within tolerance).
///
/// Uses the monotone predicate "strictly more elements of `full` than of
/// `sub` are ≤ x", probed by binary search over positions of `full`.
fn smallest_unexplained(full: &[f64], sub: &[f64], tol: f64, comparisons: &mut u64) -> f64 {
    debug_assert!(full.len() > sub.len());
    let missing_below = |x: f64, comparisons: &mut u64| {
        count_le(full, x, tol, comparisons) > count_le(sub, x, tol, comparisons)
    };
    let mut lo = 0usize; // invariant: all positions < lo have predicate false
    let mut hi = full.len() - 1; // predicate true here: |full| > |sub|
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if missing_below(full[mid], comparisons) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    full[lo]
}

/// Merges two ascending lists into one ascending list.
fn merge_sorted(a: &[f64], b: &[f64], comparisons: &mut u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        *comparisons += 1;
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Recovers the independent parameters and the un-scrambling mapping of a
/// permuted product distribution, or proves there is none.
///
/// On success, `apply_mapping(joint, &result.mapping)` equals
/// `product_joint(&result.params.zero_probs())` entrywise within the
/// tolerance. Equal probabilities are matched in lexicographic word order,
/// so the mapping is deterministic even for tied parameters.
pub fn recover_product_params(
    joint: &JointDistribution,
    tol: f64,
) -> Result<RecoveredProduct, RecoverError> {
    if joint.q() != 2 {
        return Err(RecoverError::Dist(DistError::UnsupportedAlphabet {
            q: joint.q(),
        }));
    }
    let n = joint.n();
    let mut comparisons: u64 = 0;

    // One (probability, word) sort serves both the value multiset and the
    // final pairing order.
    let mut input_order: Vec<(f64, usize)> =
        joint.probs().iter().copied().zip(0..).collect();
    input_order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sorted: Vec<f64> = input_order.iter().map(|&(p, _)| p).collect();
    comparisons += (sorted.len().max(2).ilog2() as u64) * sorted.len() as u64;

    let p1 = sorted[0];
    if p1 <= 0.0 {
        return Err(RecoverError::DegenerateParameter { p1 });
    }

    // lambda holds the ascending probabilities of all words whose components
    // beyond the ones already resolved are zero; it starts as {Π π_i} and
    // doubles once per recovered parameter.
    let mut lambda = vec![p1];
    let mut pis: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..n {
        let v = smallest_unexplained(&sorted, &lambda, tol, &mut comparisons);
        let pi = p1 / (p1 + v);
        pis.push(pi);
        let scaled: Vec<f64> = lambda.iter().map(|&x| x * v / p1).collect();
        lambda = merge_sorted(&lambda, &scaled, &mut comparisons);
    }

    // The recursion resolves the largest parameter first, so `pis` is already
    // in canonical (non-increasing) component order.
    let product = product_joint(&pis)?;

    // Pair input words and product words by ascending (probability, word).
    let mut target_order: Vec<(f64, usize)> =
        product.probs().iter().copied().zip(0..).collect();
    target_order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut perm = vec![0usize; joint.len()];
    for (rank, &(_, w)) in input_order.iter().enumerate() {
        perm[w] = target_order[rank].1;
    }
    let mapping = WordMapping::new(n, 2, perm)?;

    // Residual certificate: the image must be the recovered product.
    let image = apply_mapping(joint, &mapping)?;
    for (w, (&got, &want)) in image.probs().iter().zip(product.probs()).enumerate() {
        comparisons += 1;
        let residual = (got - want).abs();
        // Slack above `tol` covers rounding accumulated across the merge
        // recursion; genuine non-products miss by orders of magnitude.
        if residual > tol * (got.max(want) + 1e-6) * 16.0 {
            return Err(RecoverError::NotDecomposable { residual, word: w });
        }
    }

    let params = MarginalParams::from_joint(&product);
    Ok(RecoveredProduct {
        params,
        mapping,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::total_correlation;
    use approx::assert_relative_eq;

    #[test]
    fn product_joint_matches_hand_expansion() {
        // π_1 = 0.4, π_2 = 0.2 (component 1 least significant).
        let joint = product_joint(&[0.4, 0.2]).unwrap();
        for (got, want) in joint.probs().iter().zip([0.08, 0.12, 0.32, 0.48]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
        assert!(total_correlation(&joint).abs() < 1e-12);
    }

    #[test]
    fn product_joint_rejects_out_of_range() {
        assert!(matches!(
            product_joint(&[0.4, 1.0]),
            Err(RecoverError::ParameterOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            product_joint(&[0.0, 0.2]),
            Err(RecoverError::ParameterOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn recovers_sorted_parameters_from_plain_product() {
        let joint = product_joint(&[0.2, 0.4]).unwrap();
        let rec = recover_product_params(&joint, DEFAULT_TOLERANCE).unwrap();
        let pis = rec.params.zero_probs();
        // Canonical order: largest parameter first.
        assert_relative_eq!(pis[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(pis[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn recovers_through_a_scramble() {
        let pis = [0.45, 0.3, 0.15, 0.05];
        let product = product_joint(&pis).unwrap();
        // A fixed nontrivial scramble: reverse word order.
        let len = product.len();
        let scramble =
            WordMapping::new(4, 2, (0..len).map(|w| len - 1 - w).collect()).unwrap();
        let scrambled = apply_mapping(&product, &scramble).unwrap();

        let rec = recover_product_params(&scrambled, DEFAULT_TOLERANCE).unwrap();
        let got = rec.params.zero_probs();
        for (a, b) in got.iter().zip(&pis) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        let image = apply_mapping(&scrambled, &rec.mapping).unwrap();
        let want = product_joint(&got).unwrap();
        for (a, b) in image.probs().iter().zip(want.probs()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_parameters_recover_as_a_multiset() {
        let product = product_joint(&[0.25, 0.25]).unwrap();
        let scramble = WordMapping::new(2, 2, vec![2, 0, 3, 1]).unwrap();
        let scrambled = apply_mapping(&product, &scramble).unwrap();
        let rec = recover_product_params(&scrambled, DEFAULT_TOLERANCE).unwrap();
        let pis = rec.params.zero_probs();
        assert_relative_eq!(pis[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(pis[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn half_parameters_are_admitted() {
        let product = product_joint(&[0.5, 0.5]).unwrap();
        let rec = recover_product_params(&product, DEFAULT_TOLERANCE).unwrap();
        let pis = rec.params.zero_probs();
        assert_relative_eq!(pis[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(pis[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn xor_joint_is_rejected() {
        // The XOR-coupled joint has a zero entry, which no product of
        // parameters in (0,1) can produce.
        let xor = JointDistribution::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(matches!(
            recover_product_params(&xor, DEFAULT_TOLERANCE),
            Err(RecoverError::DegenerateParameter { .. } | RecoverError::NotDecomposable { .. })
        ));
    }

    #[test]
    fn strictly_positive_non_product_is_rejected() {
        // The recursion proposes π = (1/3, 1/3), whose product disagrees
        // with these masses, so the residual certificate must fire.
        let joint = JointDistribution::new(2, 2, vec![0.5, 0.2, 0.2, 0.1]).unwrap();
        assert!(matches!(
            recover_product_params(&joint, DEFAULT_TOLERANCE),
            Err(RecoverError::NotDecomposable { .. })
        ));
    }

    #[test]
    fn comparison_counter_scales_linearithmically() {
        // The resolved-candidate work should stay within c · n · 2^n.
        for n in [4usize, 8, 12] {
            let pis: Vec<f64> = (0..n).map(|i| 0.05 + 0.4 * (i as f64) / n as f64).collect();
            let joint = product_joint(&pis).unwrap();
            let rec = recover_product_params(&joint, DEFAULT_TOLERANCE).unwrap();
            let budget = 32 * (n as u64) * (1u64 << n);
            assert!(
                rec.comparisons <= budget,
                "n = {n}: {} comparisons exceeds budget {budget}",
                rec.comparisons
            );
        }
    }
}
