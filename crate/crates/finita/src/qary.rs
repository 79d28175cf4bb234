//! Relaxation of the marginal-entropy objective over non-binary alphabets.
//!
//! A component over `q` symbols is parameterized by its `q - 1` smallest
//! symbol masses (canonically relabeled so masses ascend and the largest is
//! the last symbol); each parameter is at most 1/2. Writing
//! `φ(x) = -x log2 x`, the component entropy splits into `Σ_s φ(π_s)` over
//! the parameters plus `ψ(T) = φ(1 - T)` for the remainder, `T` being the
//! parameter sum. Tangents over-estimate both concave pieces globally, so a
//! `k`-piece tangent envelope of `φ` combined with one tangent of `ψ` per
//! *cell* (a multiset of `q - 1` envelope regions, its `ψ` tangent taken at
//! the midpoint of the cell's possible parameter sums) yields a surrogate
//! that is linear in the image probabilities for a fixed cell per component.
//!
//! The exact surrogate optimum scans every placement (multiset of `n`
//! cells); the descent variant instead walks from random placements,
//! hopping to the cell profile its own solution realizes until it lands on
//! a fixed point, as an anytime alternative when the scan is too large.
//! For `q = 2` the envelope is built on `h_b` itself with a zero remainder
//! term, reproducing the binary relaxation exactly.

use crate::dist::{
    entropy_term, DistError, JointDistribution, WordMapping,
};
use crate::relax::{placement_count, BOUNDARY_TOLERANCE};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;
use thiserror::Error;

const LN2_INV: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Error)]
pub enum QaryError {
    #[error("a tangent envelope needs at least one piece")]
    InvalidPieceCount,
    #[error("alphabet size must be at least 2, got {q}")]
    UnsupportedAlphabet { q: usize },
    #[error("bound built for q = {bound} applied to a joint with q = {joint}")]
    AlphabetMismatch { bound: usize, joint: usize },
    #[error("scan needs {needed} placements, above the cap of {cap}")]
    WorkCapExceeded { needed: u128, cap: u64 },
    #[error(transparent)]
    Dist(#[from] DistError),
}

fn phi(x: f64) -> f64 {
    entropy_term(x)
}

/// Tangent to `φ` at `t`: slope `-log2 t - 1/ln 2`.
fn phi_tangent(t: f64) -> (f64, f64) {
    let slope = -t.log2() - LN2_INV;
    (slope, phi(t) - slope * t)
}

/// Tangent to `ψ(t) = φ(1 - t)` at `t`: slope `log2(1 - t) + 1/ln 2`.
fn psi_tangent(t: f64) -> (f64, f64) {
    let slope = (1.0 - t).log2() + LN2_INV;
    (slope, phi(1.0 - t) - slope * t)
}

/// Tangent to `h_b` at `t`, used for the `q = 2` special case where the
/// single parameter's `φ` and remainder fold into one curve.
fn hb_tangent(t: f64) -> (f64, f64) {
    let slope = ((1.0 - t) / t).log2();
    (slope, phi(t) + phi(1.0 - t) - slope * t)
}

/// Piecewise-linear over-estimator of the per-symbol entropy contribution
/// on `[0, 1/2]`, with the region geometry needed to build cells.
#[derive(Debug, Clone)]
pub struct SymbolBound {
    q: usize,
    points: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    boundaries: Vec<f64>,
}

/// Tangent envelope with `k` pieces at the region midpoints
/// `(j - 1/2) / (2k)`; tangents touch `φ` for `q >= 3` and `h_b` for
/// `q = 2`, where the remainder term degenerates.
pub fn build_symbol_bound(q: usize, k: usize) -> Result<SymbolBound, QaryError> {
    if q < 2 {
        return Err(QaryError::UnsupportedAlphabet { q });
    }
    if k == 0 {
        return Err(QaryError::InvalidPieceCount);
    }
    let points: Vec<f64> = (1..=k).map(|j| (j as f64 - 0.5) / (2.0 * k as f64)).collect();
    let mut slopes = Vec::with_capacity(k);
    let mut intercepts = Vec::with_capacity(k);
    for &t in &points {
        let (a, b) = if q == 2 { hb_tangent(t) } else { phi_tangent(t) };
        slopes.push(a);
        intercepts.push(b);
    }
    let mut boundaries = Vec::with_capacity(k - 1);
    for j in 0..k - 1 {
        boundaries.push((intercepts[j + 1] - intercepts[j]) / (slopes[j] - slopes[j + 1]));
    }
    Ok(SymbolBound {
        q,
        points,
        slopes,
        intercepts,
        boundaries,
    })
}

impl SymbolBound {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Envelope value (minimum over the tangent lines).
    pub fn eval(&self, x: f64) -> f64 {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(&a, &b)| a * x + b)
            .fold(f64::INFINITY, f64::min)
    }

    /// Region owning `x`; values within [`BOUNDARY_TOLERANCE`] of a boundary
    /// go to the lower region.
    pub fn region_of(&self, x: f64) -> usize {
        self.boundaries
            .partition_point(|&b| b < x - BOUNDARY_TOLERANCE)
    }

    fn region_lo(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.boundaries[r - 1]
        }
    }

    fn region_hi(&self, r: usize) -> f64 {
        if r == self.points.len() - 1 {
            0.5
        } else {
            self.boundaries[r]
        }
    }
}

/// One region per parameter (sorted), plus the remainder tangent taken at
/// the midpoint of the parameter sums the cell can realize.
#[derive(Debug, Clone)]
pub struct Cell {
    pub regions: Vec<u16>,
    pub psi_slope: f64,
    pub psi_intercept: f64,
}

/// All feasible cells: sorted multisets of `q - 1` regions whose least
/// possible parameter sum plus least possible largest mass still fits in a
/// probability vector. Returns the cells and the unfiltered multiset count.
pub fn enumerate_cells(bound: &SymbolBound) -> (Vec<Cell>, u64) {
    let params = bound.q - 1;
    let mut regions = Vec::new();
    let mut out = Vec::new();
    let mut total = 0u64;
    fn rec(
        bound: &SymbolBound,
        start: usize,
        remaining: usize,
        regions: &mut Vec<u16>,
        out: &mut Vec<Cell>,
        total: &mut u64,
    ) {
        if remaining == 0 {
            *total += 1;
            let sum_lo: f64 = regions.iter().map(|&r| bound.region_lo(r as usize)).sum();
            let last_lo = bound.region_lo(*regions.last().unwrap() as usize);
            // The remaining symbol carries at least as much as every
            // parameter, so the cell must leave room for it.
            if sum_lo + last_lo > 1.0 + BOUNDARY_TOLERANCE {
                return;
            }
            let (psi_slope, psi_intercept) = if bound.q == 2 {
                (0.0, 0.0)
            } else {
                let sum_hi: f64 = regions.iter().map(|&r| bound.region_hi(r as usize)).sum();
                let mid = (0.5 * (sum_lo + sum_hi)).clamp(1e-9, 1.0 - 1e-9);
                psi_tangent(mid)
            };
            out.push(Cell {
                regions: regions.clone(),
                psi_slope,
                psi_intercept,
            });
            return;
        }
        for r in start..bound.points.len() {
            regions.push(r as u16);
            rec(bound, r, remaining - 1, regions, out, total);
            regions.pop();
        }
    }
    rec(bound, 0, params, &mut regions, &mut out, &mut total);
    (out, total)
}

/// Per-symbol linear coefficients of a cell: parameter symbol `s` costs its
/// region slope plus the remainder slope; the last symbol costs nothing.
fn cell_coefficients(bound: &SymbolBound, cell: &Cell) -> (Vec<f64>, f64) {
    let q = bound.q;
    let mut coeffs = vec![0.0; q];
    let mut constant = cell.psi_intercept;
    for (s, &r) in cell.regions.iter().enumerate() {
        coeffs[s] = bound.slopes[r as usize] + cell.psi_slope;
        constant += bound.intercepts[r as usize];
    }
    (coeffs, constant)
}

fn digit_table(n: usize, q: usize, len: usize) -> Vec<u8> {
    let mut digits = vec![0u8; len * n];
    for w in 0..len {
        let mut rest = w;
        for i in 0..n {
            digits[w * n + i] = (rest % q) as u8;
            rest /= q;
        }
    }
    digits
}

/// Word mapping that relabels each component's symbols into ascending-mass
/// order, putting the largest mass on the last symbol.
pub fn canonicalize_symbols(joint: &JointDistribution) -> Result<WordMapping, QaryError> {
    let n = joint.n();
    let q = joint.q();
    let marginals = joint.marginals();
    let mut relabels = Vec::with_capacity(n);
    for marginal in &marginals {
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| {
            marginal[a]
                .partial_cmp(&marginal[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        // order[rank] = old symbol; invert to old symbol -> new rank.
        let mut sigma = vec![0usize; q];
        for (rank, &old) in order.iter().enumerate() {
            sigma[old] = rank;
        }
        relabels.push(sigma);
    }
    let len = joint.len();
    let mut perm = vec![0usize; len];
    for w in 0..len {
        let mut rest = w;
        let mut out = 0usize;
        let mut place = 1usize;
        for sigma in &relabels {
            out += sigma[rest % q] * place;
            rest /= q;
            place *= q;
        }
        perm[w] = out;
    }
    Ok(WordMapping::new(n, q, perm)?)
}

struct PlacementSolution {
    lp_value: f64,
    perm: Vec<usize>,
    realized: Vec<u16>,
    feasible: bool,
    true_objective: f64,
}

/// Solves one placement: rearrangement optimum of the cell-linear surrogate,
/// then the relabeled image, its realized cell profile, and true objective.
fn solve_placement(
    joint: &JointDistribution,
    digits: &[u8],
    p_desc: &[(f64, usize)],
    bound: &SymbolBound,
    cells: &[Cell],
    placement: &[u16],
) -> PlacementSolution {
    let n = joint.n();
    let q = joint.q();
    let len = joint.len();
    let probs = joint.probs();

    let mut coeffs = Vec::with_capacity(n);
    let mut constant = 0.0;
    for &c in placement {
        let (coeff, con) = cell_coefficients(bound, &cells[c as usize]);
        coeffs.push(coeff);
        constant += con;
    }

    let mut costs: Vec<(f64, usize)> = (0..len)
        .map(|w| {
            let mut c = 0.0;
            for (i, coeff) in coeffs.iter().enumerate() {
                c += coeff[digits[w * n + i] as usize];
            }
            (c, w)
        })
        .collect();
    costs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut perm = vec![0usize; len];
    let mut lp_value = constant;
    for ((c, word), &(p, input)) in costs.into_iter().zip(p_desc) {
        perm[input] = word;
        lp_value += p * c;
    }

    let mut masses = vec![vec![0.0; q]; n];
    for (x, &p) in probs.iter().enumerate() {
        let y = perm[x];
        for (i, mass) in masses.iter_mut().enumerate() {
            mass[digits[y * n + i] as usize] += p;
        }
    }

    // Relabel each component into ascending-mass order so the parameters are
    // the first q - 1 masses and regions come out sorted.
    let mut relabeled = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for mass in &masses {
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| mass[a].partial_cmp(&mass[b]).unwrap().then(a.cmp(&b)));
        let mut sigma = vec![0usize; q];
        let mut sorted = vec![0.0; q];
        for (rank, &old) in order.iter().enumerate() {
            sigma[old] = rank;
            sorted[rank] = mass[old];
        }
        sigmas.push(sigma);
        relabeled.push(sorted);
    }
    for y in perm.iter_mut() {
        let mut rest = *y;
        let mut out = 0usize;
        let mut place = 1usize;
        for sigma in &sigmas {
            out += sigma[rest % q] * place;
            rest /= q;
            place *= q;
        }
        *y = out;
    }

    let mut realized_cells: Vec<Vec<u16>> = relabeled
        .iter()
        .map(|mass| {
            mass[..q - 1]
                .iter()
                .map(|&pi| bound.region_of(pi) as u16)
                .collect()
        })
        .collect();
    realized_cells.sort();
    let mut placement_cells: Vec<Vec<u16>> = placement
        .iter()
        .map(|&c| cells[c as usize].regions.clone())
        .collect();
    placement_cells.sort();
    let feasible = realized_cells == placement_cells;

    let realized: Vec<u16> = realized_cells
        .iter()
        .map(|regions| {
            cells
                .iter()
                .position(|cell| &cell.regions == regions)
                .map(|idx| idx as u16)
                .unwrap_or(u16::MAX)
        })
        .collect();

    let true_objective = relabeled
        .iter()
        .map(|mass| mass.iter().map(|&m| phi(m)).sum::<f64>())
        .sum();

    PlacementSolution {
        lp_value,
        perm,
        realized,
        feasible,
        true_objective,
    }
}

fn enumerate_multisets(count: usize, size: usize) -> Vec<Vec<u16>> {
    fn rec(start: usize, count: usize, remaining: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        for c in start..count {
            cur.push(c as u16);
            rec(c, count, remaining - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, count, size, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct QaryOptions {
    /// Refuse scans needing more placements than this.
    pub max_placements: u64,
}

impl Default for QaryOptions {
    fn default() -> Self {
        Self {
            max_placements: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QaryResult {
    /// Surrogate optimum: the minimal rearrangement value over feasible
    /// placements, a certified upper bound on the exact optimum.
    pub ub_value: f64,
    pub ub_mapping: WordMapping,
    pub ub_true_objective: f64,
    /// Returned solution: the winning feasible placement, unless the
    /// symbol-canonicalized identity has a strictly lower true objective.
    pub mapping: WordMapping,
    pub true_objective: f64,
    /// Second, separately flagged report: the feasible placement (identity
    /// included) whose realized image minimizes the true marginal-entropy
    /// sum rather than the surrogate. Never above `true_objective`.
    pub true_best_mapping: WordMapping,
    pub true_best_objective: f64,
    pub feasible_placements_visited: u64,
    pub placements_total: u64,
    pub cells_total: u64,
    pub cells_feasible: u64,
}

/// Exact surrogate optimum by scanning every placement in parallel.
pub fn solve_qary(
    joint: &JointDistribution,
    bound: &SymbolBound,
    opts: &QaryOptions,
) -> Result<QaryResult, QaryError> {
    if bound.q != joint.q() {
        return Err(QaryError::AlphabetMismatch {
            bound: bound.q,
            joint: joint.q(),
        });
    }
    let n = joint.n();
    let q = joint.q();
    let len = joint.len();
    let digits = digit_table(n, q, len);
    let (cells, cells_total) = enumerate_cells(bound);

    let needed = placement_count(n, cells.len());
    if needed > opts.max_placements as u128 {
        return Err(QaryError::WorkCapExceeded {
            needed,
            cap: opts.max_placements,
        });
    }
    let placements = enumerate_multisets(cells.len(), n);

    let mut p_desc: Vec<(f64, usize)> = joint.probs().iter().copied().zip(0..len).collect();
    p_desc.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    struct Eval {
        lp_value: f64,
        true_objective: f64,
        feasible: bool,
        index: usize,
    }
    let evals: Vec<Eval> = placements
        .par_iter()
        .enumerate()
        .map(|(index, placement)| {
            let sol = solve_placement(joint, &digits, &p_desc, bound, &cells, placement);
            Eval {
                lp_value: sol.lp_value,
                true_objective: sol.true_objective,
                feasible: sol.feasible,
                index,
            }
        })
        .collect();

    let feasible_count = evals.iter().filter(|e| e.feasible).count() as u64;
    // Infeasible placements evaluate tangent lines outside the cells where
    // they match the envelope and may undershoot it, so they never compete.
    let ub_winner = evals
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| {
            a.lp_value
                .partial_cmp(&b.lp_value)
                .unwrap()
                .then(a.index.cmp(&b.index))
        })
        .expect("a feasible placement always exists: the cells cover the simplex");

    let true_winner = evals
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| {
            a.true_objective
                .partial_cmp(&b.true_objective)
                .unwrap()
                .then(a.index.cmp(&b.index))
        })
        .expect("a feasible placement always exists: the cells cover the simplex");

    let ub_sol = solve_placement(
        joint,
        &digits,
        &p_desc,
        bound,
        &cells,
        &placements[ub_winner.index],
    );
    let ub_mapping = WordMapping::new(n, q, ub_sol.perm)?;

    let identity_mapping = canonicalize_symbols(joint)?;
    let identity_objective: f64 = joint
        .marginals()
        .iter()
        .map(|m| m.iter().map(|&x| phi(x)).sum::<f64>())
        .sum();
    let (mapping, true_objective) = if ub_sol.true_objective < identity_objective {
        (ub_mapping.clone(), ub_sol.true_objective)
    } else {
        (identity_mapping.clone(), identity_objective)
    };

    let (true_best_mapping, true_best_objective) =
        if true_winner.true_objective < identity_objective {
            if true_winner.index == ub_winner.index {
                (ub_mapping.clone(), ub_sol.true_objective)
            } else {
                let sol = solve_placement(
                    joint,
                    &digits,
                    &p_desc,
                    bound,
                    &cells,
                    &placements[true_winner.index],
                );
                (WordMapping::new(n, q, sol.perm)?, sol.true_objective)
            }
        } else {
            (identity_mapping, identity_objective)
        };

    Ok(QaryResult {
        ub_value: ub_winner.lp_value,
        ub_mapping,
        ub_true_objective: ub_sol.true_objective,
        mapping,
        true_objective,
        true_best_mapping,
        true_best_objective,
        feasible_placements_visited: feasible_count,
        placements_total: placements.len() as u64,
        cells_total,
        cells_feasible: cells.len() as u64,
    })
}

#[derive(Debug, Clone)]
pub struct DescentOptions {
    /// Independent random starting placements.
    pub inits: u64,
    pub seed: u64,
    /// A hop must improve the surrogate by more than this to continue.
    pub eps: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            inits: 100,
            seed: 0,
            eps: 1e-10,
        }
    }
}

/// One initialization's walk: how many placement solves it took and the
/// true objective of its fixed point, if it reached one.
#[derive(Debug, Clone, Copy)]
pub struct WalkRecord {
    pub init: u64,
    pub steps: u64,
    pub final_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub mapping: WordMapping,
    pub true_objective: f64,
    pub inits_used: u64,
    pub lp_solves: u64,
    /// Walks that ended on a placement realizing its own cell profile.
    pub feasible_hits: u64,
    /// Per-initialization outcomes, in initialization order.
    pub walks: Vec<WalkRecord>,
}

/// Objective descent: each initialization draws a uniform random cell per
/// component, solves the placement, and hops to the cell profile its
/// solution realizes, stopping at a fixed point (a feasible placement,
/// scored by its true objective), on a revisit, or when the surrogate stops
/// improving. The best fixed point across initializations wins; the
/// symbol-canonicalized identity is returned only when no walk converges.
pub fn solve_qary_descent(
    joint: &JointDistribution,
    bound: &SymbolBound,
    opts: &DescentOptions,
) -> Result<DescentResult, QaryError> {
    if bound.q != joint.q() {
        return Err(QaryError::AlphabetMismatch {
            bound: bound.q,
            joint: joint.q(),
        });
    }
    let n = joint.n();
    let q = joint.q();
    let len = joint.len();
    let digits = digit_table(n, q, len);
    let (cells, _) = enumerate_cells(bound);

    let mut p_desc: Vec<(f64, usize)> = joint.probs().iter().copied().zip(0..len).collect();
    p_desc.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    struct WalkOutcome {
        candidate: Option<(f64, Vec<usize>)>,
        lp_solves: u64,
        feasible: bool,
    }

    let walks: Vec<WalkOutcome> = (0..opts.inits)
        .into_par_iter()
        .map(|init| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(init));
            let mut placement: Vec<u16> = (0..n)
                .map(|_| rng.gen_range(0..cells.len()) as u16)
                .collect();
            placement.sort_unstable();
            let mut visited: HashSet<Vec<u16>> = HashSet::new();
            let mut lp_solves = 0u64;
            let mut last_lp = f64::INFINITY;
            while visited.insert(placement.clone()) {
                let sol = solve_placement(joint, &digits, &p_desc, bound, &cells, &placement);
                lp_solves += 1;
                if sol.feasible {
                    return WalkOutcome {
                        candidate: Some((sol.true_objective, sol.perm)),
                        lp_solves,
                        feasible: true,
                    };
                }
                // A realized region outside the feasible cell list, or a
                // surrogate that stopped improving, ends the walk.
                if sol.realized.iter().any(|&c| c == u16::MAX)
                    || sol.lp_value >= last_lp - opts.eps
                {
                    break;
                }
                last_lp = sol.lp_value;
                placement = sol.realized.clone();
                placement.sort_unstable();
            }
            WalkOutcome {
                candidate: None,
                lp_solves,
                feasible: false,
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut lp_solves = 0u64;
    let mut feasible_hits = 0u64;
    let mut records = Vec::with_capacity(walks.len());
    for (init, walk) in walks.into_iter().enumerate() {
        lp_solves += walk.lp_solves;
        if walk.feasible {
            feasible_hits += 1;
        }
        records.push(WalkRecord {
            init: init as u64,
            steps: walk.lp_solves,
            final_value: walk.candidate.as_ref().map(|(value, _)| *value),
        });
        if let Some((value, perm)) = walk.candidate {
            if best.as_ref().map_or(true, |(bv, _)| value < *bv) {
                best = Some((value, perm));
            }
        }
    }
    let (true_objective, mapping) = match best {
        Some((value, perm)) => (value, WordMapping::new(n, q, perm)?),
        None => {
            let identity_objective = joint
                .marginals()
                .iter()
                .map(|m| m.iter().map(|&x| phi(x)).sum::<f64>())
                .sum();
            (identity_objective, canonicalize_symbols(joint)?)
        }
    };
    Ok(DescentResult {
        mapping,
        true_objective,
        inits_used: opts.inits,
        lp_solves,
        feasible_hits,
        walks: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{apply_mapping, sum_marginal_entropies, total_correlation};
    use crate::relax::{build_tangent_bound, solve_plr};
    use approx::assert_relative_eq;

    fn product_q3() -> JointDistribution {
        // Two independent ternary symbols.
        let z1 = [0.5, 0.3, 0.2];
        let z2 = [0.6, 0.25, 0.15];
        let mut probs = vec![0.0; 9];
        for (s2, &b) in z2.iter().enumerate() {
            for (s1, &a) in z1.iter().enumerate() {
                probs[s1 + 3 * s2] = a * b;
            }
        }
        JointDistribution::new(2, 3, probs).unwrap()
    }

    #[test]
    fn envelope_dominates_phi() {
        let bound = build_symbol_bound(3, 6).unwrap();
        for step in 0..=500 {
            let x = step as f64 / 1000.0;
            assert!(bound.eval(x) >= phi(x) - 1e-12, "x={x}");
        }
        for &t in bound.points() {
            assert_relative_eq!(bound.eval(t), phi(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn psi_tangent_dominates_remainder() {
        for t in [0.1, 0.3, 0.7] {
            let (a, b) = psi_tangent(t);
            for step in 0..=100 {
                let x = step as f64 / 100.0;
                assert!(a * x + b >= phi(1.0 - x) - 1e-12, "t={t} x={x}");
            }
            assert_relative_eq!(a * t + b, phi(1.0 - t), epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_construction_is_rejected() {
        assert!(matches!(
            build_symbol_bound(1, 4),
            Err(QaryError::UnsupportedAlphabet { q: 1 })
        ));
        assert!(matches!(
            build_symbol_bound(3, 0),
            Err(QaryError::InvalidPieceCount)
        ));
    }

    #[test]
    fn cell_enumeration_counts_multisets() {
        let bound = build_symbol_bound(3, 2).unwrap();
        let (cells, total) = enumerate_cells(&bound);
        // Multisets of size q - 1 = 2 over 2 regions: {00, 01, 11}.
        assert_eq!(total, 3);
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[0].regions, vec![0, 0]);
        assert_eq!(cells[1].regions, vec![0, 1]);
        assert_eq!(cells[2].regions, vec![1, 1]);
    }

    #[test]
    fn infeasible_cells_are_filtered() {
        // With q = 9, eight parameters in the top region cannot leave room
        // for a largest mass of the same magnitude.
        let bound = build_symbol_bound(9, 8).unwrap();
        let (cells, total) = enumerate_cells(&bound);
        assert!((cells.len() as u64) < total);
        for cell in &cells {
            let sum_lo: f64 = cell
                .regions
                .iter()
                .map(|&r| bound.region_lo(r as usize))
                .sum();
            let last_lo = bound.region_lo(*cell.regions.last().unwrap() as usize);
            assert!(sum_lo + last_lo <= 1.0 + BOUNDARY_TOLERANCE);
        }
    }

    #[test]
    fn binary_case_reproduces_the_relaxation() {
        let joint = JointDistribution::new(
            3,
            2,
            vec![0.21, 0.04, 0.17, 0.08, 0.13, 0.1, 0.02, 0.25],
        )
        .unwrap();
        for k in [2, 4, 8] {
            let plr = solve_plr(&joint, &build_tangent_bound(k).unwrap()).unwrap();
            let qary = solve_qary(
                &joint,
                &build_symbol_bound(2, k).unwrap(),
                &QaryOptions::default(),
            )
            .unwrap();
            assert_relative_eq!(qary.ub_value, plr.ub_value, epsilon = 1e-12);
            assert_eq!(qary.placements_total, plr.placements_total);
            assert_relative_eq!(qary.true_objective, plr.true_objective, epsilon = 1e-12);
        }
    }

    #[test]
    fn canonical_relabel_sorts_masses() {
        let joint = product_q3();
        let mapping = canonicalize_symbols(&joint).unwrap();
        let image = apply_mapping(&joint, &mapping).unwrap();
        for marginal in image.marginals() {
            assert!(marginal.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        }
        assert_relative_eq!(
            sum_marginal_entropies(&image),
            sum_marginal_entropies(&joint),
            epsilon = 1e-12
        );
    }

    #[test]
    fn product_scan_certifies_independence() {
        let joint = product_q3();
        let bound = build_symbol_bound(3, 6).unwrap();
        let result = solve_qary(&joint, &bound, &QaryOptions::default()).unwrap();
        // The identity already attains H(X); nothing can go lower.
        assert_relative_eq!(result.true_objective, joint.entropy(), epsilon = 1e-9);
        assert!(result.ub_value >= result.true_objective - 1e-12);
        assert!(result.ub_true_objective >= joint.entropy() - 1e-12);
    }

    #[test]
    fn scrambled_product_is_untangled_by_the_scan() {
        let joint = product_q3();
        // Scramble with a fixed word permutation that breaks independence.
        let perm = vec![4, 7, 2, 0, 8, 3, 6, 1, 5];
        let scramble = WordMapping::new(2, 3, perm).unwrap();
        let scrambled = apply_mapping(&joint, &scramble).unwrap();
        assert!(total_correlation(&scrambled) > 0.01);
        let bound = build_symbol_bound(3, 8).unwrap();
        let result = solve_qary(&scrambled, &bound, &QaryOptions::default()).unwrap();
        assert!(result.true_objective <= sum_marginal_entropies(&scrambled) + 1e-12);
        assert!(result.ub_value >= scrambled.entropy() - 1e-12);
        let image = apply_mapping(&scrambled, &result.mapping).unwrap();
        assert_relative_eq!(
            sum_marginal_entropies(&image),
            result.true_objective,
            epsilon = 1e-12
        );
    }

    #[test]
    fn work_cap_is_enforced() {
        let joint = product_q3();
        let bound = build_symbol_bound(3, 8).unwrap();
        let opts = QaryOptions { max_placements: 10 };
        assert!(matches!(
            solve_qary(&joint, &bound, &opts),
            Err(QaryError::WorkCapExceeded { cap: 10, .. })
        ));
    }

    #[test]
    fn alphabet_mismatch_is_rejected() {
        let joint = product_q3();
        let bound = build_symbol_bound(4, 4).unwrap();
        assert!(matches!(
            solve_qary(&joint, &bound, &QaryOptions::default()),
            Err(QaryError::AlphabetMismatch { bound: 4, joint: 3 })
        ));
    }

    #[test]
    fn descent_is_deterministic_and_bounded_by_identity() {
        let joint = product_q3();
        let perm = vec![4, 7, 2, 0, 8, 3, 6, 1, 5];
        let scrambled =
            apply_mapping(&joint, &WordMapping::new(2, 3, perm).unwrap()).unwrap();
        let bound = build_symbol_bound(3, 8).unwrap();
        let opts = DescentOptions {
            inits: 50,
            seed: 7,
            ..DescentOptions::default()
        };
        let first = solve_qary_descent(&scrambled, &bound, &opts).unwrap();
        let second = solve_qary_descent(&scrambled, &bound, &opts).unwrap();
        assert_eq!(first.true_objective, second.true_objective);
        assert_eq!(first.mapping.perm(), second.mapping.perm());
        assert!(
            first.true_objective <= sum_marginal_entropies(&scrambled) + 1e-12
        );
        assert!(first.lp_solves >= first.inits_used || first.feasible_hits > 0);
    }

    #[test]
    fn descent_never_beats_the_scan_by_more_than_noise() {
        let joint = product_q3();
        let perm = vec![4, 7, 2, 0, 8, 3, 6, 1, 5];
        let scrambled =
            apply_mapping(&joint, &WordMapping::new(2, 3, perm).unwrap()).unwrap();
        let bound = build_symbol_bound(3, 6).unwrap();
        let scan = solve_qary(&scrambled, &bound, &QaryOptions::default()).unwrap();
        let descent = solve_qary_descent(
            &scrambled,
            &bound,
            &DescentOptions {
                inits: 100,
                seed: 3,
                ..DescentOptions::default()
            },
        )
        .unwrap();
        assert!(descent.true_objective >= scan.true_objective - 1e-9);
    }
}
