//! Joint distributions over words of `n` components from a `q`-ary alphabet,
//! invertible word mappings, and the entropy quantities built from them.
//!
//! # Word indexing
//!
//! A word `w` in `0..q^n` encodes the component values `(x_1, ..., x_n)` as
//! base-`q` digits with **component 1 as the least-significant digit**:
//! component `i` (0-based in this API) is `(w / q^i) % q`. Every module in
//! this crate, and every file format the CLI reads or writes, uses this
//! convention; mixing conventions silently permutes components, so helpers
//! here are the only place digit arithmetic should live.
//!
//! Entropies are in bits (base-2 logarithms) and `0 · log 0 = 0`. Sums over
//! many probabilities use pairwise summation so that equality-style
//! invariants hold to ~1e-12 even for joints with millions of entries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation tolerance: probabilities must sum to 1 within this.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Entries below this are rejected as negative mass; entries in
/// `[NEGATIVE_TOLERANCE, 0)` are tolerated as rounding noise and treated as
/// zero mass by entropy computations.
pub const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// Errors from distribution and mapping construction or queries.
#[derive(Debug, Error)]
pub enum DistError {
    #[error("entry {word} is {value:e}, below the negative-mass tolerance {NEGATIVE_TOLERANCE:e}")]
    NegativeMass { word: usize, value: f64 },
    #[error("probabilities sum to {sum:.15}, outside 1 ± {SUM_TOLERANCE:e}")]
    NotNormalized { sum: f64 },
    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("expected {expected} entries for n = {n}, q = {q}, got {got}")]
    SizeMismatch {
        expected: usize,
        got: usize,
        n: usize,
        q: usize,
    },
    #[error("mapping is not a bijection: target {target} appears more than once")]
    NotBijective { target: usize },
    #[error("operation supports only q = 2, got q = {q}")]
    UnsupportedAlphabet { q: usize },
    #[error("q^n does not fit in a machine word (n = {n}, q = {q})")]
    Overflow { n: usize, q: usize },
}

/// Number of words, `q^n`, guarding against overflow and degenerate shapes.
pub fn word_count(n: usize, q: usize) -> Result<usize, DistError> {
    if n == 0 || q < 2 {
        return Err(DistError::Overflow { n, q });
    }
    let mut count: usize = 1;
    for _ in 0..n {
        count = count.checked_mul(q).ok_or(DistError::Overflow { n, q })?;
    }
    Ok(count)
}

/// Digit of component `i` (0-based) in word `w` under base-`q` encoding.
#[inline]
pub fn digit(w: usize, i: usize, q: usize) -> usize {
    if q == 2 {
        (w >> i) & 1
    } else {
        (w / q.pow(i as u32)) % q
    }
}

/// Pairwise (cascade) summation: error grows with log(len) instead of len.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `-p log2 p`, with `0 log 0 = 0`; entries within the negative tolerance
/// contribute nothing.
#[inline]
pub fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy `h_b(p) = -p log2 p - (1-p) log2 (1-p)` in bits.
///
/// Inputs a hair outside `[0, 1]` (rounding noise) are clamped.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    entropy_term(p) + entropy_term(1.0 - p)
}

/// Shannon entropy in bits of a validated probability vector.
///
/// Returns [`DistError::NegativeMass`] / [`DistError::NotNormalized`] when the
/// slice is not a probability vector within tolerance.
pub fn entropy(dist: &[f64]) -> Result<f64, DistError> {
    validate(dist)?;
    Ok(entropy_unchecked(dist))
}

/// Entropy of an already-validated slice.
pub(crate) fn entropy_unchecked(dist: &[f64]) -> f64 {
    let terms: Vec<f64> = dist.iter().map(|&p| entropy_term(p)).collect();
    pairwise_sum(&terms)
}

fn validate(dist: &[f64]) -> Result<(), DistError> {
    for (word, &p) in dist.iter().enumerate() {
        if p < NEGATIVE_TOLERANCE || p.is_nan() {
            return Err(DistError::NegativeMass { word, value: p });
        }
    }
    let sum = pairwise_sum(dist);
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(DistError::NotNormalized { sum });
    }
    Ok(())
}

/// A joint probability distribution over `q^n` words.
///
/// Construction validates shape, non-negativity, and normalization; internal
/// computations never renormalize silently.
///
/// Serialized form (JSON): `{"n": …, "q": …, "probs": […]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointDistribution {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

impl TryFrom<RawJoint> for JointDistribution {
    type Error = DistError;
    fn try_from(raw: RawJoint) -> Result<Self, DistError> {
        JointDistribution::new(raw.n, raw.q, raw.probs)
    }
}

impl JointDistribution {
    pub fn new(n: usize, q: usize, probs: Vec<f64>) -> Result<Self, DistError> {
        let expected = word_count(n, q)?;
        if probs.len() != expected {
            return Err(DistError::SizeMismatch {
                expected,
                got: probs.len(),
                n,
                q,
            });
        }
        validate(&probs)?;
        Ok(Self { n, q, probs })
    }

    /// Renormalizing constructor for inputs carrying more rounding noise than
    /// the strict tolerance admits (CLI `--renormalize`).
    pub fn new_renormalized(n: usize, q: usize, mut probs: Vec<f64>) -> Result<Self, DistError> {
        let sum = pairwise_sum(&probs);
        if sum <= 0.0 {
            return Err(DistError::NotNormalized { sum });
        }
        for p in &mut probs {
            *p /= sum;
        }
        Self::new(n, q, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Digit of component `i` in word `w` under this distribution's shape.
    #[inline]
    pub fn digit(&self, w: usize, i: usize) -> usize {
        digit(w, i, self.q)
    }

    /// Joint Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_unchecked(&self.probs)
    }

    /// Marginal distribution of component `i` (0-based): entry `s` is the
    /// total mass of words whose `i`-th digit is `s`.
    pub fn marginal(&self, i: usize) -> Result<Vec<f64>, DistError> {
        if i >= self.n {
            return Err(DistError::IndexOutOfRange { index: i, n: self.n });
        }
        let stride = self.q.pow(i as u32);
        let mut out = vec![0.0; self.q];
        for (w, &p) in self.probs.iter().enumerate() {
            out[(w / stride) % self.q] += p;
        }
        Ok(out)
    }

    /// All `n` marginal distributions in one pass.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.q]; self.n];
        if self.q == 2 {
            for (w, &p) in self.probs.iter().enumerate() {
                for (i, m) in out.iter_mut().enumerate() {
                    m[(w >> i) & 1] += p;
                }
            }
        } else {
            for (w, &p) in self.probs.iter().enumerate() {
                let mut rest = w;
                for m in out.iter_mut() {
                    m[rest % self.q] += p;
                    rest /= self.q;
                }
            }
        }
        out
    }

    /// `P(Y_i = 0)` for every component; the binary parameters when q = 2.
    pub fn zero_marginals(&self) -> Vec<f64> {
        self.marginals().iter().map(|m| m[0]).collect()
    }
}

/// `Σ_i H(Y_i)` in bits; the objective all solvers minimize.
pub fn sum_marginal_entropies(joint: &JointDistribution) -> f64 {
    let terms: Vec<f64> = joint
        .marginals()
        .iter()
        .map(|m| entropy_unchecked(m))
        .collect();
    pairwise_sum(&terms)
}

/// Total correlation `C(Y) = Σ_i H(Y_i) − H(Y)`; non-negative, zero iff the
/// components are mutually independent.
pub fn total_correlation(joint: &JointDistribution) -> f64 {
    sum_marginal_entropies(joint) - joint.entropy()
}

/// An invertible map `y = g(x)` on words, stored as the permutation
/// `perm[x] = y`.
///
/// Serialized form (JSON): `{"n": …, "q": …, "perm": […]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMapping")]
pub struct WordMapping {
    n: usize,
    q: usize,
    perm: Vec<usize>,
}

#[derive(Deserialize)]
struct RawMapping {
    n: usize,
    q: usize,
    perm: Vec<usize>,
}

impl TryFrom<RawMapping> for WordMapping {
    type Error = DistError;
    fn try_from(raw: RawMapping) -> Result<Self, DistError> {
        WordMapping::new(raw.n, raw.q, raw.perm)
    }
}

impl WordMapping {
    pub fn new(n: usize, q: usize, perm: Vec<usize>) -> Result<Self, DistError> {
        let expected = word_count(n, q)?;
        if perm.len() != expected {
            return Err(DistError::SizeMismatch {
                expected,
                got: perm.len(),
                n,
                q,
            });
        }
        let mut seen = vec![false; expected];
        for &target in &perm {
            if target >= expected || seen[target] {
                return Err(DistError::NotBijective { target });
            }
            seen[target] = true;
        }
        Ok(Self { n, q, perm })
    }

    pub fn identity(n: usize, q: usize) -> Result<Self, DistError> {
        let len = word_count(n, q)?;
        Ok(Self {
            n,
            q,
            perm: (0..len).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    #[inline]
    pub fn map(&self, w: usize) -> usize {
        self.perm[w]
    }

    /// `self` then `next`: the mapping `w ↦ next(self(w))`.
    pub fn then(&self, next: &WordMapping) -> Result<WordMapping, DistError> {
        if self.n != next.n || self.q != next.q {
            return Err(DistError::SizeMismatch {
                expected: self.perm.len(),
                got: next.perm.len(),
                n: self.n,
                q: self.q,
            });
        }
        let perm = self.perm.iter().map(|&w| next.perm[w]).collect();
        // Composition of bijections; re-validation is cheap and keeps the
        // bijection invariant enforced at every construction site.
        WordMapping::new(self.n, self.q, perm)
    }

    pub fn inverse(&self) -> WordMapping {
        let mut perm = vec![0usize; self.perm.len()];
        for (w, &target) in self.perm.iter().enumerate() {
            perm[target] = w;
        }
        Self {
            n: self.n,
            q: self.q,
            perm,
        }
    }
}

/// Pushes a joint forward through a mapping: output word `m(w)` receives the
/// probability of input word `w`. Entropy is invariant under this operation.
pub fn apply_mapping(
    joint: &JointDistribution,
    m: &WordMapping,
) -> Result<JointDistribution, DistError> {
    if m.n != joint.n || m.q != joint.q {
        return Err(DistError::SizeMismatch {
            expected: joint.len(),
            got: m.perm.len(),
            n: joint.n,
            q: joint.q,
        });
    }
    let mut probs = vec![0.0; joint.len()];
    for (w, &p) in joint.probs.iter().enumerate() {
        probs[m.perm[w]] = p;
    }
    // Same multiset of entries; the constructor invariants hold by
    // construction, so bypass re-validation.
    Ok(JointDistribution {
        n: joint.n,
        q: joint.q,
        probs,
    })
}

/// Per-component marginal parameters of a (possibly transformed) joint.
///
/// For q = 2 the scalar parameter of component `i` is `π_i = P(Y_i = 0)`,
/// exposed by [`MarginalParams::zero_probs`].
#[derive(Debug, Clone, Serialize)]
pub struct MarginalParams {
    q: usize,
    marginals: Vec<Vec<f64>>,
}

impl MarginalParams {
    pub fn from_joint(joint: &JointDistribution) -> Self {
        Self {
            q: joint.q,
            marginals: joint.marginals(),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    /// `P(Y_i = 0)` per component.
    pub fn zero_probs(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m[0]).collect()
    }

    /// `Σ_i H(Y_i)` under these marginals.
    pub fn sum_entropies(&self) -> f64 {
        let terms: Vec<f64> = self
            .marginals
            .iter()
            .map(|m| entropy_unchecked(m))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Canonical form for binary joints: flip any component with `π_i > 1/2`,
/// then reorder components so the parameters are non-increasing in component
/// index (`π` of component 1 is the largest, still ≤ 1/2). Ties keep the
/// original component order. Returns the mapping that canonicalizes together
/// with the parameters of the canonicalized joint.
pub fn canonicalize(
    joint: &JointDistribution,
) -> Result<(WordMapping, MarginalParams), DistError> {
    if joint.q != 2 {
        return Err(DistError::UnsupportedAlphabet { q: joint.q });
    }
    let n = joint.n;
    let pis = joint.zero_marginals();
    let mut flip_mask = 0usize;
    let mut flipped: Vec<f64> = Vec::with_capacity(n);
    for (i, &pi) in pis.iter().enumerate() {
        if pi > 0.5 {
            flip_mask |= 1 << i;
            flipped.push(1.0 - pi);
        } else {
            flipped.push(pi);
        }
    }
    // Stable sort: descending parameter, original index breaks ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| flipped[b].partial_cmp(&flipped[a]).unwrap());

    let len = joint.len();
    let mut perm = vec![0usize; len];
    for (w, target) in perm.iter_mut().enumerate() {
        let x = w ^ flip_mask;
        let mut y = 0usize;
        for (j, &src) in order.iter().enumerate() {
            y |= ((x >> src) & 1) << j;
        }
        *target = y;
    }
    let mapping = WordMapping::new(n, 2, perm)?;
    let params = MarginalParams::from_joint(&apply_mapping(joint, &mapping)?);
    Ok((mapping, params))
}
