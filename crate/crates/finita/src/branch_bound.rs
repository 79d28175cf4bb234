//! Exact minimization of the sum of marginal entropies over all invertible
//! binary word mappings, by branch and bound over probability allocations.
//!
//! Words are partially ordered by inclusion of their zero-bit position sets:
//! `a ⪯ b` iff every zero bit of `a` is a zero bit of `b`. An optimal
//! allocation assigns larger probabilities to smaller words in this order,
//! so the all-zeros word takes the smallest probability and the all-ones
//! word the largest. The search therefore allocates the sorted probabilities
//! in ascending order, always to one of the current "largest minorants" of
//! the allocated set (an unallocated word all of whose strict majorants are
//! allocated). Every leaf reached this way has all `π_i ≤ 1/2`
//! automatically, because each zero-digit word is dominated by its
//! one-digit partner.
//!
//! Subtrees are cut with an admissible bound: each component's parameter is
//! completed optimistically with the smallest unallocated probabilities and
//! clamped at 1/2, where `h_b` peaks. Branches equivalent under bit
//! transpositions that fix the current assignment are explored once, from
//! the lowest word index.

use crate::dist::{
    binary_entropy, canonicalize, DistError, JointDistribution, WordMapping,
};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BbError {
    #[error("branch and bound supports only q = 2, got q = {q}")]
    UnsupportedAlphabet { q: usize },
    #[error("word length {n} exceeds the search cap of {cap}; raise max_n knowingly")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("allocated set is not down-closed: word {word} lacks allocated majorant {majorant}")]
    NotDownClosed { word: usize, majorant: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Search configuration. Defaults run to proven optimality with both
/// pruning rules enabled.
#[derive(Debug, Clone)]
pub struct BbOptions {
    /// Abort after expanding this many nodes, keeping the incumbent.
    pub max_nodes: Option<u64>,
    /// Abort after this much wall-clock time, keeping the incumbent.
    pub time_limit: Option<Duration>,
    /// Cut subtrees whose admissible bound cannot beat the incumbent.
    pub prune: bool,
    /// Skip branches equivalent under assignment-fixing bit transpositions.
    pub symmetry: bool,
    /// Refuse word lengths above this: the tree branches over allocation
    /// orders, so growth is factorial in the word count.
    pub max_n: usize,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            max_nodes: None,
            time_limit: None,
            prune: true,
            symmetry: true,
            max_n: 12,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BbStats {
    pub nodes_expanded: u64,
    pub bound_pruned: u64,
    pub symmetry_pruned: u64,
    /// False when a node or time cap aborted the search; the returned value
    /// is then the best incumbent, not a proven optimum.
    pub optimal: bool,
}

#[derive(Debug, Clone)]
pub struct BbSolution {
    pub mapping: WordMapping,
    /// `Σ_i h_b(π_i)` of the returned mapping's image.
    pub value: f64,
    pub stats: BbStats,
}

/// `a ⪯ b`: every zero bit of `a` (within `n` bits) is a zero bit of `b`,
/// equivalently the one-bits of `b` are a subset of the one-bits of `a`.
#[inline]
pub fn is_minorant(a: usize, b: usize, n: usize) -> bool {
    let mask = (1usize << n) - 1;
    b & !a & mask == 0
}

/// The largest minorants (branch frontier) of a down-closed allocated set:
/// unallocated words all of whose strict majorants are allocated.
///
/// Errors with [`BbError::NotDownClosed`] if some allocated word has an
/// unallocated majorant.
pub fn largest_minorants(allocated: &[usize], n: usize) -> Result<Vec<usize>, BbError> {
    let len = 1usize << n;
    let mut is_allocated = vec![false; len];
    for &w in allocated {
        is_allocated[w] = true;
    }
    // Down-closure over immediate majorants implies closure over all.
    for &w in allocated {
        for b in 0..n {
            if (w >> b) & 1 == 1 {
                let majorant = w & !(1 << b);
                if !is_allocated[majorant] {
                    return Err(BbError::NotDownClosed { word: w, majorant });
                }
            }
        }
    }
    let mut frontier = Vec::new();
    'words: for w in 0..len {
        if is_allocated[w] {
            continue;
        }
        for b in 0..n {
            if (w >> b) & 1 == 1 && !is_allocated[w & !(1 << b)] {
                continue 'words;
            }
        }
        frontier.push(w);
    }
    Ok(frontier)
}

/// Snapshot of a partial allocation, exposed for bound testing.
#[derive(Debug, Clone)]
pub struct SearchNode {
    /// How many of the sorted probabilities are already placed.
    pub allocated: usize,
    /// Per component: probability mass already placed on zero-digit words.
    pub zero_mass: Vec<f64>,
    /// Per component: zero-digit word slots still unfilled.
    pub zero_slots: Vec<usize>,
}

/// Admissible lower bound on any completion of `node`: each component's
/// parameter is filled with the smallest remaining probabilities and clamped
/// at 1/2 before applying `h_b`.
pub fn lower_bound(node: &SearchNode, sorted_probs: &[f64]) -> f64 {
    let mut prefix = Vec::with_capacity(sorted_probs.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &p in sorted_probs {
        acc += p;
        prefix.push(acc);
    }
    bound_with_prefix(node.allocated, &node.zero_mass, &node.zero_slots, &prefix)
}

fn bound_with_prefix(t: usize, zero_mass: &[f64], zero_slots: &[usize], prefix: &[f64]) -> f64 {
    let mut bound = 0.0;
    for (mass, &slots) in zero_mass.iter().zip(zero_slots) {
        let optimistic = mass + (prefix[t + slots] - prefix[t]);
        bound += binary_entropy(optimistic.min(0.5));
    }
    bound
}

#[inline]
fn swap_bits(w: usize, i: usize, j: usize) -> usize {
    let bi = (w >> i) & 1;
    let bj = (w >> j) & 1;
    if bi != bj {
        w ^ ((1 << i) | (1 << j))
    } else {
        w
    }
}

struct Search<'a> {
    n: usize,
    len: usize,
    sp: Vec<(f64, usize)>,
    prefix: Vec<f64>,
    opts: &'a BbOptions,
    allocated: Vec<bool>,
    in_frontier: Vec<bool>,
    frontier: Vec<usize>,
    rank_of: Vec<u32>,
    assignment: Vec<usize>,
    zero_mass: Vec<f64>,
    zero_slots: Vec<usize>,
    pair_valid: Vec<bool>,
    best_value: f64,
    best_assignment: Option<Vec<usize>>,
    stats: BbStats,
    deadline: Option<Instant>,
    aborted: bool,
}

const NO_RANK: u32 = u32::MAX;

impl<'a> Search<'a> {
    fn pair_id(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    fn dfs(&mut self, t: usize) {
        if self.aborted {
            return;
        }
        self.stats.nodes_expanded += 1;
        if let Some(cap) = self.opts.max_nodes {
            if self.stats.nodes_expanded > cap {
                self.aborted = true;
                return;
            }
        }
        if let Some(deadline) = self.deadline {
            if self.stats.nodes_expanded % 1024 == 0 && Instant::now() > deadline {
                self.aborted = true;
                return;
            }
        }

        if t == self.len {
            let value: f64 = self.zero_mass.iter().map(|&m| binary_entropy(m)).sum();
            if value < self.best_value {
                self.best_value = value;
                self.best_assignment = Some(self.assignment.clone());
            }
            return;
        }

        if self.opts.prune {
            let bound = bound_with_prefix(t, &self.zero_mass, &self.zero_slots, &self.prefix);
            if bound >= self.best_value {
                self.stats.bound_pruned += 1;
                return;
            }
        }

        // Children in descending partial-parameter impact (most zero digits
        // first), lowest word index on ties.
        let mut children = self.frontier.clone();
        children.sort_by_key(|&w| (w.count_ones(), w));

        for &w in &children {
            if self.opts.symmetry && self.symmetric_smaller_sibling(w) {
                self.stats.symmetry_pruned += 1;
                continue;
            }
            let journal = self.allocate(w, t);
            self.dfs(t + 1);
            self.undo(w, t, journal);
        }
    }

    /// True when a currently-valid transposition sends `w` to a smaller word
    /// that is also on the frontier; that branch covers this one.
    fn symmetric_smaller_sibling(&self, w: usize) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.pair_valid[self.pair_id(i, j)] {
                    continue;
                }
                let image = swap_bits(w, i, j);
                if image < w && self.in_frontier[image] {
                    return true;
                }
            }
        }
        false
    }

    fn allocate(&mut self, w: usize, t: usize) -> (Vec<usize>, Vec<usize>) {
        let p = self.sp[t].0;
        self.allocated[w] = true;
        self.in_frontier[w] = false;
        let pos = self.frontier.iter().position(|&x| x == w).unwrap();
        self.frontier.swap_remove(pos);
        self.rank_of[w] = t as u32;
        self.assignment[t] = w;
        for i in 0..self.n {
            if (w >> i) & 1 == 0 {
                self.zero_mass[i] += p;
                self.zero_slots[i] -= 1;
            }
        }

        // Newly available words: supermasks of w by one bit whose immediate
        // majorants are now all allocated.
        let mut added = Vec::new();
        for i in 0..self.n {
            if (w >> i) & 1 == 1 {
                continue;
            }
            let v = w | (1 << i);
            if self.allocated[v] || self.in_frontier[v] {
                continue;
            }
            let available = (0..self.n)
                .filter(|&b| (v >> b) & 1 == 1)
                .all(|b| self.allocated[v & !(1 << b)]);
            if available {
                self.frontier.push(v);
                self.in_frontier[v] = true;
                added.push(v);
            }
        }

        // Transpositions stay valid only if they keep mapping the assignment
        // onto equal probability values.
        let mut invalidated = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let id = self.pair_id(i, j);
                if !self.pair_valid[id] {
                    continue;
                }
                let image = swap_bits(w, i, j);
                if image == w {
                    continue;
                }
                let ok = self.rank_of[image] != NO_RANK
                    && self.sp[self.rank_of[image] as usize].0 == p;
                if !ok {
                    self.pair_valid[id] = false;
                    invalidated.push(id);
                }
            }
        }
        (added, invalidated)
    }

    fn undo(&mut self, w: usize, t: usize, journal: (Vec<usize>, Vec<usize>)) {
        let (added, invalidated) = journal;
        // Recursion below this node reorders the frontier vector, so the
        // added words must be removed by value, not popped off the end.
        for v in added {
            let pos = self.frontier.iter().position(|&x| x == v).unwrap();
            self.frontier.swap_remove(pos);
            self.in_frontier[v] = false;
        }
        self.frontier.push(w);
        self.in_frontier[w] = true;
        self.allocated[w] = false;
        self.rank_of[w] = NO_RANK;
        let p = self.sp[t].0;
        for i in 0..self.n {
            if (w >> i) & 1 == 0 {
                self.zero_mass[i] -= p;
                self.zero_slots[i] += 1;
            }
        }
        for id in invalidated {
            self.pair_valid[id] = true;
        }
    }
}

/// Finds a mapping minimizing `Σ_i H(Y_i)` exactly (when no cap aborts the
/// search). The incumbent is seeded with the canonicalized identity, so the
/// returned value never exceeds the input's sum of marginal entropies.
pub fn solve_exact(joint: &JointDistribution, opts: &BbOptions) -> Result<BbSolution, BbError> {
    if joint.q() != 2 {
        return Err(BbError::UnsupportedAlphabet { q: joint.q() });
    }
    if joint.n() > opts.max_n {
        return Err(BbError::DimensionTooLarge {
            n: joint.n(),
            cap: opts.max_n,
        });
    }
    let n = joint.n();
    let len = joint.len();

    let mut sp: Vec<(f64, usize)> = joint.probs().iter().copied().zip(0..len).collect();
    sp.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &(p, _) in &sp {
        acc += p;
        prefix.push(acc);
    }

    let (seed_mapping, seed_params) = canonicalize(joint)?;
    let seed_value: f64 = seed_params
        .zero_probs()
        .iter()
        .map(|&pi| binary_entropy(pi))
        .sum();

    let mut search = Search {
        n,
        len,
        sp,
        prefix,
        opts,
        allocated: vec![false; len],
        in_frontier: vec![false; len],
        frontier: vec![0],
        rank_of: vec![NO_RANK; len],
        assignment: vec![0; len],
        zero_mass: vec![0.0; n],
        zero_slots: vec![len / 2; n],
        pair_valid: vec![true; n * n],
        best_value: seed_value,
        best_assignment: None,
        stats: BbStats::default(),
        deadline: opts.time_limit.map(|limit| Instant::now() + limit),
        aborted: false,
    };
    search.in_frontier[0] = true;
    search.dfs(0);

    let mut stats = search.stats.clone();
    stats.optimal = !search.aborted;
    let mapping = match &search.best_assignment {
        Some(assignment) => {
            let mut perm = vec![0usize; len];
            for (rank, &word) in assignment.iter().enumerate() {
                perm[search.sp[rank].1] = word;
            }
            WordMapping::new(n, 2, perm)?
        }
        None => seed_mapping,
    };
    Ok(BbSolution {
        mapping,
        value: search.best_value,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{apply_mapping, sum_marginal_entropies};
    use approx::assert_relative_eq;

    /// Minimum of `Σ h_b` over every assignment of probabilities to words.
    pub(crate) fn oracle_min(joint: &JointDistribution) -> f64 {
        fn visit(probs: &[f64], slots: &mut Vec<usize>, used: &mut Vec<bool>, n: usize, best: &mut f64) {
            if slots.len() == probs.len() {
                let mut value = 0.0;
                for i in 0..n {
                    let pi: f64 = slots
                        .iter()
                        .enumerate()
                        .filter(|&(w, _)| (w >> i) & 1 == 0)
                        .map(|(_, &r)| probs[r])
                        .sum();
                    value += binary_entropy(pi);
                }
                if value < *best {
                    *best = value;
                }
                return;
            }
            for r in 0..probs.len() {
                if !used[r] {
                    used[r] = true;
                    slots.push(r);
                    visit(probs, slots, used, n, best);
                    slots.pop();
                    used[r] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        let mut used = vec![false; joint.len()];
        visit(
            joint.probs(),
            &mut Vec::new(),
            &mut used,
            joint.n(),
            &mut best,
        );
        best
    }

    fn example_n3() -> JointDistribution {
        JointDistribution::new(
            3,
            2,
            vec![0.23, 0.17, 0.14, 0.12, 0.11, 0.09, 0.08, 0.06],
        )
        .unwrap()
    }

    #[test]
    fn minorant_order_matches_definition() {
        let n = 3;
        let all_ones = 0b111;
        for b in 0..8 {
            assert!(is_minorant(all_ones, b, n));
            assert!(is_minorant(b, 0, n));
        }
        assert!(is_minorant(0b011, 0b010, n));
        assert!(!is_minorant(0b010, 0b011, n));
        assert!(!is_minorant(0b001, 0b010, n));
    }

    #[test]
    fn frontier_of_root_allocation() {
        assert_eq!(largest_minorants(&[0], 3).unwrap(), vec![1, 2, 4]);
        assert_eq!(largest_minorants(&[], 3).unwrap(), vec![0]);
        assert_eq!(largest_minorants(&[0, 1], 3).unwrap(), vec![2, 4]);
        assert_eq!(largest_minorants(&[0, 1, 2], 3).unwrap(), vec![3, 4]);
    }

    #[test]
    fn non_down_closed_sets_are_rejected() {
        assert!(matches!(
            largest_minorants(&[0, 3], 3),
            Err(BbError::NotDownClosed { word: 3, .. })
        ));
        assert!(matches!(
            largest_minorants(&[1], 3),
            Err(BbError::NotDownClosed { word: 1, majorant: 0 })
        ));
    }

    #[test]
    fn root_bound_is_admissible() {
        let joint = example_n3();
        let mut sorted = joint.probs().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let node = SearchNode {
            allocated: 0,
            zero_mass: vec![0.0; 3],
            zero_slots: vec![4; 3],
        };
        let bound = lower_bound(&node, &sorted);
        assert!(bound <= oracle_min(&joint) + 1e-12);
    }

    #[test]
    fn n2_allocates_ascending() {
        let joint = JointDistribution::new(2, 2, vec![0.4, 0.1, 0.3, 0.2]).unwrap();
        let solution = solve_exact(&joint, &BbOptions::default()).unwrap();
        let image = apply_mapping(&joint, &solution.mapping).unwrap();
        let probs = image.probs();
        assert!(probs.windows(2).all(|w| w[0] <= w[1]), "got {probs:?}");
        assert!(solution.stats.optimal);
    }

    #[test]
    fn matches_oracle_on_n3() {
        let joint = example_n3();
        let solution = solve_exact(&joint, &BbOptions::default()).unwrap();
        assert_relative_eq!(solution.value, oracle_min(&joint), epsilon = 1e-12);
        let image = apply_mapping(&joint, &solution.mapping).unwrap();
        assert_relative_eq!(
            sum_marginal_entropies(&image),
            solution.value,
            epsilon = 1e-12
        );
    }

    #[test]
    fn uniform_joint_cannot_be_compressed() {
        let joint = JointDistribution::new(3, 2, vec![0.125; 8]).unwrap();
        let solution = solve_exact(&joint, &BbOptions::default()).unwrap();
        assert_relative_eq!(solution.value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pruning_and_symmetry_do_not_change_the_value() {
        let joint = example_n3();
        let reference = solve_exact(&joint, &BbOptions::default()).unwrap();
        for (prune, symmetry) in [(false, false), (false, true), (true, false)] {
            let opts = BbOptions {
                prune,
                symmetry,
                ..BbOptions::default()
            };
            let other = solve_exact(&joint, &opts).unwrap();
            assert_relative_eq!(other.value, reference.value, epsilon = 1e-12);
            if !prune && !symmetry {
                assert!(other.stats.nodes_expanded >= reference.stats.nodes_expanded);
            }
        }
    }

    #[test]
    fn value_never_exceeds_input_marginal_sum() {
        let joint = example_n3();
        let solution = solve_exact(&joint, &BbOptions::default()).unwrap();
        assert!(solution.value <= sum_marginal_entropies(&joint) + 1e-12);
    }

    #[test]
    fn node_cap_keeps_the_incumbent_and_clears_optimal() {
        let joint = example_n3();
        let opts = BbOptions {
            max_nodes: Some(3),
            ..BbOptions::default()
        };
        let solution = solve_exact(&joint, &opts).unwrap();
        assert!(!solution.stats.optimal);
        assert!(solution.value <= sum_marginal_entropies(&joint) + 1e-12);
    }

    #[test]
    fn rejects_word_lengths_past_the_cap() {
        let joint = JointDistribution::new(13, 2, vec![1.0 / 8192.0; 8192]).unwrap();
        assert!(matches!(
            solve_exact(&joint, &BbOptions::default()),
            Err(BbError::DimensionTooLarge { n: 13, cap: 12 })
        ));
        let raised = BbOptions {
            max_nodes: Some(1),
            max_n: 13,
            ..BbOptions::default()
        };
        assert!(solve_exact(&joint, &raised).is_ok());
    }

    #[test]
    fn rejects_non_binary_alphabets() {
        let joint = JointDistribution::new(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            solve_exact(&joint, &BbOptions::default()),
            Err(BbError::UnsupportedAlphabet { q: 3 })
        ));
    }
}
