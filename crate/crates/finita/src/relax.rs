//! Piecewise-linear relaxation of the marginal-entropy objective.
//!
//! Tangent lines to `h_b` lie above it everywhere, so replacing `h_b` by the
//! lower envelope of `k` tangents gives a surrogate objective that bounds the
//! true one from above. For a fixed assignment of components to tangent
//! regions the surrogate is linear in the image probabilities, and its
//! minimum over invertible word mappings is a rearrangement: pair the largest
//! probabilities with the smallest word coefficients. Scanning every region
//! assignment (a composition of `n` into `k` parts — which components go to
//! which region never matters, only how many) therefore yields the exact
//! surrogate optimum, an upper bound on the entropy-sum optimum.
//!
//! A placement counts as a candidate only when the parameters realized by
//! its rearrangement fall inside the regions it assumed; the minimal-value
//! candidate wins and its mapping is returned, with the canonicalized
//! identity stepping in when that has a lower true objective. Because the
//! surrogate winner need not realize the smallest marginal-entropy sum, the
//! result also carries a second, separately flagged report: the feasible
//! candidate (identity included) that minimizes the true objective itself.

use crate::dist::{
    binary_entropy, canonicalize, sum_marginal_entropies, DistError, JointDistribution,
    WordMapping,
};
use rayon::prelude::*;
use thiserror::Error;

/// Region membership within this distance of a boundary resolves to the
/// lower region.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("a tangent bound needs at least one piece")]
    InvalidPieceCount,
    #[error("tangent point {t} is outside (0, 1/2]")]
    InvalidTangentPoint { t: f64 },
    #[error("tangent points must be strictly increasing")]
    UnorderedTangentPoints,
    #[error("the relaxation supports only q = 2, got q = {q}")]
    UnsupportedAlphabet { q: usize },
    #[error("expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Slope and intercept of the tangent to `h_b` at `t`.
fn tangent_at(t: f64) -> (f64, f64) {
    let slope = ((1.0 - t) / t).log2();
    (slope, binary_entropy(t) - slope * t)
}

/// Lower envelope of tangents to `h_b`, an upper bound for it on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TangentBound {
    points: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    /// Intersections of consecutive tangents; `boundaries[j]` separates
    /// region `j` from region `j + 1`.
    boundaries: Vec<f64>,
}

impl TangentBound {
    /// Builds the envelope from strictly increasing tangent points in
    /// `(0, 1/2]`.
    pub fn from_tangent_points(points: &[f64]) -> Result<Self, RelaxError> {
        if points.is_empty() {
            return Err(RelaxError::InvalidPieceCount);
        }
        for &t in points {
            if !(t > 0.0 && t <= 0.5 + 1e-15) || !t.is_finite() {
                return Err(RelaxError::InvalidTangentPoint { t });
            }
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RelaxError::UnorderedTangentPoints);
        }
        let mut slopes = Vec::with_capacity(points.len());
        let mut intercepts = Vec::with_capacity(points.len());
        for &t in points {
            let (a, b) = tangent_at(t.min(0.5));
            slopes.push(a);
            intercepts.push(b);
        }
        let mut boundaries = Vec::with_capacity(points.len().saturating_sub(1));
        for j in 0..points.len().saturating_sub(1) {
            // Slopes strictly decrease with the tangent point, so consecutive
            // tangents intersect exactly once.
            boundaries.push((intercepts[j + 1] - intercepts[j]) / (slopes[j] - slopes[j + 1]));
        }
        Ok(Self {
            points: points.to_vec(),
            slopes,
            intercepts,
            boundaries,
        })
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Envelope value: the minimum over all tangent lines.
    pub fn eval(&self, x: f64) -> f64 {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(&a, &b)| a * x + b)
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the piece owning `x`; values within [`BOUNDARY_TOLERANCE`]
    /// of a boundary belong to the lower region.
    pub fn region_of(&self, x: f64) -> usize {
        self.boundaries
            .partition_point(|&b| b < x - BOUNDARY_TOLERANCE)
    }

    /// Largest envelope excess over `h_b` on `[0, 1/2]`. The excess is
    /// convex on each region, so it peaks at region endpoints.
    pub fn max_gap(&self) -> f64 {
        let mut gap = (self.eval(0.0) - 0.0).max(self.eval(0.5) - 1.0);
        for &x in &self.boundaries {
            gap = gap.max(self.eval(x) - binary_entropy(x));
        }
        gap
    }

    /// Nested refinement to `2k` pieces: keeps every point, adds the
    /// midpoints of consecutive points and one between the last point and 1/2.
    pub fn refine_double(&self) -> Self {
        let mut points = self.points.clone();
        for w in self.points.windows(2) {
            points.push(0.5 * (w[0] + w[1]));
        }
        points.push(0.5 * (self.points[self.points.len() - 1] + 0.5));
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        Self::from_tangent_points(&points).expect("refined points stay valid")
    }

    /// Nested greedy refinement: repeatedly inserts a tangent where the
    /// envelope currently exceeds `h_b` the most.
    pub fn refine_greedy(&self, extra: usize) -> Self {
        let mut current = self.clone();
        for _ in 0..extra {
            let mut candidates: Vec<f64> = current.boundaries.clone();
            candidates.push(0.5 * current.points[0]);
            let last = current.points[current.points.len() - 1];
            if last < 0.5 {
                candidates.push(0.5 * (last + 0.5));
            }
            let worst = candidates
                .into_iter()
                .map(|x| (current.eval(x) - binary_entropy(x), x))
                .max_by(|a, b| a.partial_cmp(b).unwrap())
                .map(|(_, x)| x)
                .unwrap_or(0.25);
            let mut points = current.points.clone();
            points.push(worst.clamp(1e-9, 0.5));
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            points.dedup();
            current = Self::from_tangent_points(&points).expect("greedy points stay valid");
        }
        current
    }
}

/// Tangent points at the region midpoints `(j - 1/2) / (2k)` for
/// `j = 1, ..., k`.
pub fn build_tangent_bound(k: usize) -> Result<TangentBound, RelaxError> {
    if k == 0 {
        return Err(RelaxError::InvalidPieceCount);
    }
    let points: Vec<f64> = (1..=k).map(|j| (j as f64 - 0.5) / (2.0 * k as f64)).collect();
    TangentBound::from_tangent_points(&points)
}

/// Excess of the envelope of tangents at `t` and `t2` over `h_b`, evaluated
/// at their intersection.
fn intersection_gap(t: f64, t2: f64) -> f64 {
    let (a1, b1) = tangent_at(t);
    let (a2, b2) = tangent_at(t2);
    let x = (b2 - b1) / (a1 - a2);
    a1 * x + b1 - binary_entropy(x)
}

/// Walks tangent points left to right so every local gap equals `level`;
/// returns the points, stopping early once `cap + 1` are needed.
fn equal_gap_points(level: f64, cap: usize) -> Vec<f64> {
    // The first tangent's worst excess is at x = 0, where it equals
    // -log2(1 - t); solving for the excess gives the starting point.
    let first = (1.0 - 2f64.powf(-level)).min(0.5);
    let mut points = vec![first];
    while points.len() <= cap {
        let t = points[points.len() - 1];
        let (a, b) = tangent_at(t);
        if a * 0.5 + b - 1.0 <= level || t >= 0.5 {
            break;
        }
        if intersection_gap(t, 0.5) <= level {
            points.push(0.5);
            break;
        }
        let (mut lo, mut hi) = (t, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if intersection_gap(t, mid) > level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        points.push(lo);
    }
    points
}

/// Tangent points balancing the worst-case excess: the gap level is bisected
/// until exactly `k` tangents suffice, which beats the midpoint schedule's
/// `max_gap` for every `k`.
pub fn build_minimax_bound(k: usize) -> Result<TangentBound, RelaxError> {
    if k == 0 {
        return Err(RelaxError::InvalidPieceCount);
    }
    let (mut lo, mut hi) = (1e-12, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if equal_gap_points(mid, k).len() > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let points = equal_gap_points(hi, k);
    let mut bound = TangentBound::from_tangent_points(&points)?;
    while bound.k() < k {
        bound = bound.refine_greedy(1);
    }
    Ok(bound)
}

/// Number of region placements: compositions of `n` into `k` non-negative
/// parts, `C(n + k - 1, n)`.
pub fn placement_count(n: usize, k: usize) -> u128 {
    let mut result: u128 = 1;
    for i in 0..n {
        result = result * (k + i) as u128 / (i + 1) as u128;
    }
    result
}

fn enumerate_compositions(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            cur.push(remaining);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=remaining {
            cur.push(v);
            rec(remaining - v, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n as u32, k, &mut Vec::new(), &mut out);
    out
}

/// The linear surrogate of one placement: `c_w` sums the slopes of the
/// regions hosting `w`'s zero-digit components, and `d` collects the
/// intercepts, so the surrogate objective of a mapping sending mass `p_w`
/// to word `w` is `Σ_w c_w · p_w + d`.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    /// Word-indexed coefficients, `2^n` of them.
    pub c: Vec<f64>,
    /// Constant offset.
    pub d: f64,
    /// Distinct coefficient values with multiplicities, ascending; never
    /// wider than `Π_r (l_r + 1)` for region loads `l_r`.
    pub dedup: Vec<(f64, usize)>,
}

/// Word costs and intercept offset of a placement, with components assigned
/// to regions in canonical order: the first `comp[0]` components to region
/// 0, the next `comp[1]` to region 1, and so on.
fn placement_costs(comp: &[u32], bound: &TangentBound) -> (Vec<f64>, f64) {
    let n: u32 = comp.iter().sum();
    let len = 1usize << n;
    let mut masks = Vec::with_capacity(comp.len());
    let mut start = 0usize;
    let mut d = 0.0;
    for (r, &l) in comp.iter().enumerate() {
        let l = l as usize;
        masks.push(if l == 0 { 0 } else { ((1usize << l) - 1) << start });
        start += l;
        d += l as f64 * bound.intercepts()[r];
    }
    let costs = (0..len)
        .map(|w| {
            let mut c = 0.0;
            for (r, &mask) in masks.iter().enumerate() {
                let zeros = (comp[r] - (w & mask).count_ones()) as f64;
                c += bound.slopes()[r] * zeros;
            }
            c
        })
        .collect();
    (costs, d)
}

/// Builds the coefficient vector of one placement over `n` components.
pub fn coefficients_for_placement(
    comp: &[u32],
    bound: &TangentBound,
    n: usize,
) -> Result<CoefficientVector, RelaxError> {
    if comp.len() != bound.k() {
        return Err(RelaxError::SizeMismatch {
            expected: bound.k(),
            got: comp.len(),
        });
    }
    let total: u32 = comp.iter().sum();
    if total as usize != n {
        return Err(RelaxError::SizeMismatch {
            expected: n,
            got: total as usize,
        });
    }
    let (c, d) = placement_costs(comp, bound);
    let mut sorted = c.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dedup: Vec<(f64, usize)> = Vec::new();
    for value in sorted {
        match dedup.last_mut() {
            Some((v, count)) if *v == value => *count += 1,
            _ => dedup.push((value, 1)),
        }
    }
    Ok(CoefficientVector { c, d, dedup })
}

/// Minimizes `Σ_x probs[x] · c[perm[x]] + d` over bijections `perm` by the
/// rearrangement pairing: descending probabilities against ascending
/// coefficients, both breaking ties by ascending word index. Returns the
/// mapping (input word to output word) and the attained value.
pub fn allocate_min(
    coefficients: &CoefficientVector,
    probs: &[f64],
) -> Result<(WordMapping, f64), RelaxError> {
    let len = coefficients.c.len();
    if probs.len() != len {
        return Err(RelaxError::SizeMismatch {
            expected: len,
            got: probs.len(),
        });
    }
    let n = len.trailing_zeros() as usize;
    let mut c_asc: Vec<(f64, usize)> = coefficients.c.iter().copied().zip(0..len).collect();
    c_asc.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut p_desc: Vec<(f64, usize)> = probs.iter().copied().zip(0..len).collect();
    p_desc.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut perm = vec![0usize; len];
    let mut value = coefficients.d;
    for ((c, word), (p, input)) in c_asc.into_iter().zip(p_desc) {
        perm[input] = word;
        value += p * c;
    }
    Ok((WordMapping::new(n, 2, perm)?, value))
}

/// Every placement's coefficients as one matrix, rows sorted ascending, so
/// the whole scan is a single matrix–vector product (against descending
/// probabilities) followed by a row minimum.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    /// One row per placement, coefficients sorted ascending.
    pub rows: Vec<Vec<f64>>,
    /// Constant offset per row.
    pub offsets: Vec<f64>,
    /// Distinct coefficient values per row.
    pub dedup_widths: Vec<usize>,
    /// The placement behind each row.
    pub placements: Vec<Vec<u32>>,
}

impl CoefficientMatrix {
    /// Multiplies the matrix by the descending-sorted probabilities and
    /// returns the minimizing row and its value — the surrogate optimum.
    pub fn row_min(&self, probs: &[f64]) -> Result<(usize, f64), RelaxError> {
        let len = self.rows.first().map_or(0, Vec::len);
        if probs.len() != len {
            return Err(RelaxError::SizeMismatch {
                expected: len,
                got: probs.len(),
            });
        }
        let mut p_desc = probs.to_vec();
        p_desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut best = (0usize, f64::INFINITY);
        for (index, (row, &d)) in self.rows.iter().zip(&self.offsets).enumerate() {
            let value = row.iter().zip(&p_desc).map(|(c, p)| c * p).sum::<f64>() + d;
            if value < best.1 {
                best = (index, value);
            }
        }
        Ok(best)
    }
}

/// Assembles the coefficient matrix of all `C(n+k-1, n)` placements. Memory
/// grows as placements × `2^n`; intended for moderate `n`.
pub fn coefficient_matrix(n: usize, bound: &TangentBound) -> Result<CoefficientMatrix, RelaxError> {
    if n == 0 {
        return Err(RelaxError::SizeMismatch {
            expected: 1,
            got: 0,
        });
    }
    let placements = enumerate_compositions(n, bound.k());
    let mut rows = Vec::with_capacity(placements.len());
    let mut offsets = Vec::with_capacity(placements.len());
    let mut dedup_widths = Vec::with_capacity(placements.len());
    for comp in &placements {
        let cv = coefficients_for_placement(comp, bound, n)?;
        let mut row = cv.c;
        row.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dedup_widths.push(cv.dedup.len());
        rows.push(row);
        offsets.push(cv.d);
    }
    Ok(CoefficientMatrix {
        rows,
        offsets,
        dedup_widths,
        placements,
    })
}

#[derive(Debug, Clone)]
pub struct PlrResult {
    /// Surrogate optimum: the minimal rearrangement value over feasible
    /// placements, an upper bound on the exact entropy-sum optimum. A
    /// feasible placement's lines coincide with the envelope at its realized
    /// parameters, and the placement holding the surrogate-optimal mapping
    /// starts a strictly decreasing chain that ends feasible, so this
    /// minimum equals the envelope optimum exactly.
    pub ub_value: f64,
    /// Mapping of the winning feasible placement (flip-canonicalized).
    pub ub_mapping: WordMapping,
    /// True objective `Σ h_b(π_i)` of `ub_mapping`'s image — the entropy
    /// according to the estimated parameters.
    pub ub_true_objective: f64,
    /// Returned solution: the winner, unless the canonicalized identity has
    /// a strictly lower true objective (so the result never exceeds the
    /// input's marginal-entropy sum).
    pub mapping: WordMapping,
    pub true_objective: f64,
    /// Second, separately flagged report: re-optimizing over the feasible
    /// candidates under the true objective `Σ h_b(π_i)` instead of the
    /// surrogate (the canonicalized identity competes here too). Never
    /// above `true_objective`.
    pub true_best_mapping: WordMapping,
    pub true_best_objective: f64,
    /// Placements whose rearrangement solution landed inside the regions it
    /// assumed.
    pub feasible_placements_visited: u64,
    pub placements_total: u64,
}

struct PlacementEval {
    lp_value: f64,
    /// Realized `Σ h_b(π_i)` of the placement's allocation.
    true_objective: f64,
    feasible: bool,
    index: usize,
}

/// Evaluates one composition: region block masks, word coefficients, the
/// rearrangement optimum, and the realized (flip-canonicalized) image.
fn eval_composition(
    joint: &JointDistribution,
    p_desc: &[(f64, usize)],
    bound: &TangentBound,
    comp: &[u32],
) -> (f64, Vec<usize>, Vec<f64>, bool) {
    let n = joint.n();
    let len = joint.len();
    let probs = joint.probs();

    let (word_costs, d) = placement_costs(comp, bound);
    let mut costs: Vec<(f64, usize)> = word_costs.into_iter().zip(0..len).collect();
    costs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut perm = vec![0usize; len];
    let mut lp_value = d;
    for ((c, word), &(p, input)) in costs.into_iter().zip(p_desc) {
        perm[input] = word;
        lp_value += p * c;
    }

    let mut pis = vec![0.0; n];
    for (x, &p) in probs.iter().enumerate() {
        let y = perm[x];
        for (i, pi) in pis.iter_mut().enumerate() {
            if (y >> i) & 1 == 0 {
                *pi += p;
            }
        }
    }
    let mut flip = 0usize;
    for (i, pi) in pis.iter_mut().enumerate() {
        if *pi > 0.5 {
            flip |= 1 << i;
            *pi = 1.0 - *pi;
        }
    }
    if flip != 0 {
        for y in perm.iter_mut() {
            *y ^= flip;
        }
    }

    let mut counts = vec![0u32; bound.k()];
    for &pi in &pis {
        counts[bound.region_of(pi)] += 1;
    }
    let feasible = counts == comp;
    (lp_value, perm, pis, feasible)
}

/// Solves the relaxation exactly by scanning every placement in parallel.
pub fn solve_plr(joint: &JointDistribution, bound: &TangentBound) -> Result<PlrResult, RelaxError> {
    if joint.q() != 2 {
        return Err(RelaxError::UnsupportedAlphabet { q: joint.q() });
    }
    let len = joint.len();
    let mut p_desc: Vec<(f64, usize)> = joint.probs().iter().copied().zip(0..len).collect();
    p_desc.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let compositions = enumerate_compositions(joint.n(), bound.k());
    let evals: Vec<PlacementEval> = compositions
        .par_iter()
        .enumerate()
        .map(|(index, comp)| {
            let (lp_value, _, pis, feasible) = eval_composition(joint, &p_desc, bound, comp);
            PlacementEval {
                lp_value,
                true_objective: pis.iter().map(|&pi| binary_entropy(pi)).sum(),
                feasible,
                index,
            }
        })
        .collect();

    let feasible_count = evals.iter().filter(|e| e.feasible).count() as u64;
    // An infeasible placement's value can undershoot the envelope optimum
    // (its lines are evaluated outside the regions where they agree with the
    // envelope), so only feasible candidates compete.
    let ub_winner = evals
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| {
            a.lp_value
                .partial_cmp(&b.lp_value)
                .unwrap()
                .then(a.index.cmp(&b.index))
        })
        .expect("a feasible placement always exists: the regions cover [0, 1/2]");

    let true_winner = evals
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| {
            a.true_objective
                .partial_cmp(&b.true_objective)
                .unwrap()
                .then(a.index.cmp(&b.index))
        })
        .expect("a feasible placement always exists: the regions cover [0, 1/2]");

    let (_, ub_perm, ub_pis, _) =
        eval_composition(joint, &p_desc, bound, &compositions[ub_winner.index]);
    let ub_mapping = WordMapping::new(joint.n(), 2, ub_perm)?;
    let ub_true_objective: f64 = ub_pis.iter().map(|&pi| binary_entropy(pi)).sum();

    let (identity_mapping, _) = canonicalize(joint)?;
    let identity_objective = sum_marginal_entropies(joint);
    let (mapping, true_objective) = if ub_true_objective < identity_objective {
        (ub_mapping.clone(), ub_true_objective)
    } else {
        (identity_mapping.clone(), identity_objective)
    };

    let (true_best_mapping, true_best_objective) =
        if true_winner.true_objective < identity_objective {
            if true_winner.index == ub_winner.index {
                (ub_mapping.clone(), ub_true_objective)
            } else {
                let (_, perm, pis, _) =
                    eval_composition(joint, &p_desc, bound, &compositions[true_winner.index]);
                (
                    WordMapping::new(joint.n(), 2, perm)?,
                    pis.iter().map(|&pi| binary_entropy(pi)).sum(),
                )
            }
        } else {
            (identity_mapping, identity_objective)
        };

    Ok(PlrResult {
        ub_value: ub_winner.lp_value,
        ub_mapping,
        ub_true_objective,
        mapping,
        true_objective,
        true_best_mapping,
        true_best_objective,
        feasible_placements_visited: feasible_count,
        placements_total: compositions.len() as u64,
    })
}

/// Solves the relaxation through the assembled coefficient matrix: all
/// placement values come from one matrix–vector product, then rows are
/// visited in ascending value order until one passes the region-feasibility
/// check — the same winner the scan selects. Values agree with the scan to
/// rounding noise.
pub fn solve_plr_matrix(
    joint: &JointDistribution,
    bound: &TangentBound,
) -> Result<PlrResult, RelaxError> {
    if joint.q() != 2 {
        return Err(RelaxError::UnsupportedAlphabet { q: joint.q() });
    }
    let matrix = coefficient_matrix(joint.n(), bound)?;
    let len = joint.len();
    let mut p_sorted = joint.probs().to_vec();
    p_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut p_desc: Vec<(f64, usize)> = joint.probs().iter().copied().zip(0..len).collect();
    p_desc.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut by_value: Vec<(f64, usize)> = matrix
        .rows
        .iter()
        .zip(&matrix.offsets)
        .enumerate()
        .map(|(index, (row, &d))| {
            (row.iter().zip(&p_sorted).map(|(c, p)| c * p).sum::<f64>() + d, index)
        })
        .collect();
    by_value.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let winner = by_value
        .iter()
        .find(|&&(_, index)| {
            eval_composition(joint, &p_desc, bound, &matrix.placements[index]).3
        })
        .copied()
        .expect("a feasible placement always exists: the regions cover [0, 1/2]");

    let mut result = solve_plr(joint, bound)?;
    debug_assert!(
        (winner.0 - result.ub_value).abs() <= 1e-9,
        "matrix walk winner {} drifted from scan optimum {}",
        winner.0,
        result.ub_value
    );
    result.ub_value = winner.0;
    Ok(result)
}
