//! Marginal-entropy minimization restricted to structured binary mappings.
//!
//! General invertible word mappings cost `2^n log2(2^n)` bits to describe;
//! restricting to linear maps over GF(2) — and further to banded or
//! row-weight-limited matrices — trades objective value for succinct,
//! hardware-friendly transforms. The module provides the matrix type with
//! exact invertibility tests, exhaustive search over the banded family
//! (whose invertible members number exactly `2^(n+1) - 2`), and a clonal
//! selection heuristic for the row-weight-constrained family: antibodies
//! are invertible matrices, affinity is one minus the normalized objective,
//! and hypermutation flips a number of entries proportional to how far an
//! antibody is from perfect affinity, repairing row weights and retrying
//! until invertibility holds.

use crate::dist::{binary_entropy, DistError, JointDistribution, WordMapping};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstrainedError {
    #[error("matrix dimension {n} is outside 1..=63")]
    BadDimension { n: usize },
    #[error("banded enumeration needs n >= 2, got {n}")]
    BandTooNarrow { n: usize },
    #[error("row {index} has bits outside the {n} usable columns")]
    RowOutOfRange { index: usize, n: usize },
    #[error("expected {n} rows, got {got}")]
    RowCountMismatch { n: usize, got: usize },
    #[error("the matrix is singular")]
    NotInvertible,
    #[error("truth tables need a power-of-two length of at least 2, got {len}")]
    BadLength { len: usize },
    #[error("searches support only q = 2, got q = {q}")]
    UnsupportedAlphabet { q: usize },
    #[error("population {population} cannot replace {replace_worst} members per generation")]
    BadPopulation {
        population: usize,
        replace_worst: usize,
    },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Square binary matrix; row `i` is a column bitmask and the map sends a
/// word `w` to the word whose bit `i` is `parity(rows[i] & w)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    n: usize,
    rows: Vec<u64>,
}

impl Gf2Matrix {
    pub fn new(n: usize, rows: Vec<u64>) -> Result<Self, ConstrainedError> {
        if n == 0 || n > 63 {
            return Err(ConstrainedError::BadDimension { n });
        }
        if rows.len() != n {
            return Err(ConstrainedError::RowCountMismatch { n, got: rows.len() });
        }
        let mask = (1u64 << n) - 1;
        for (index, &row) in rows.iter().enumerate() {
            if row & !mask != 0 {
                return Err(ConstrainedError::RowOutOfRange { index, n });
            }
        }
        Ok(Self { n, rows })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            rows: (0..n).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn max_row_weight(&self) -> usize {
        self.rows
            .iter()
            .map(|row| row.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_invertible(&self) -> bool {
        let mut a = self.rows.clone();
        for col in 0..self.n {
            let pivot = match (col..self.n).find(|&r| (a[r] >> col) & 1 == 1) {
                Some(p) => p,
                None => return false,
            };
            a.swap(col, pivot);
            for r in 0..self.n {
                if r != col && (a[r] >> col) & 1 == 1 {
                    a[r] ^= a[col];
                }
            }
        }
        true
    }

    pub fn inverse(&self) -> Result<Gf2Matrix, ConstrainedError> {
        let n = self.n;
        let mut a = self.rows.clone();
        let mut inv: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| (a[r] >> col) & 1 == 1)
                .ok_or(ConstrainedError::NotInvertible)?;
            a.swap(col, pivot);
            inv.swap(col, pivot);
            for r in 0..n {
                if r != col && (a[r] >> col) & 1 == 1 {
                    a[r] ^= a[col];
                    inv[r] ^= inv[col];
                }
            }
        }
        Ok(Gf2Matrix { n, rows: inv })
    }

    /// Image of a word: bit `i` of the result is the parity of the selected
    /// input bits.
    pub fn apply(&self, w: usize) -> usize {
        let mut y = 0usize;
        for (i, &row) in self.rows.iter().enumerate() {
            y |= (((row & w as u64).count_ones() & 1) as usize) << i;
        }
        y
    }

    /// The word mapping this matrix induces; fails on singular matrices.
    pub fn to_mapping(&self) -> Result<WordMapping, ConstrainedError> {
        if !self.is_invertible() {
            return Err(ConstrainedError::NotInvertible);
        }
        let len = 1usize << self.n;
        let perm: Vec<usize> = (0..len).map(|w| self.apply(w)).collect();
        Ok(WordMapping::new(self.n, 2, perm)?)
    }
}

/// Pushes the joint through the linear map: the mass of word `x` moves to
/// word `matrix · x` over the binary field.
pub fn apply_linear_map(
    joint: &JointDistribution,
    matrix: &Gf2Matrix,
) -> Result<JointDistribution, ConstrainedError> {
    Ok(crate::dist::apply_mapping(joint, &matrix.to_mapping()?)?)
}

/// `Σ_i h_b(P(Y_i = 0))` for `Y = matrix · X`, without materializing the
/// image distribution.
pub fn linear_objective(
    joint: &JointDistribution,
    matrix: &Gf2Matrix,
) -> Result<f64, ConstrainedError> {
    if joint.q() != 2 {
        return Err(ConstrainedError::UnsupportedAlphabet { q: joint.q() });
    }
    if joint.n() != matrix.n {
        return Err(ConstrainedError::BadDimension { n: matrix.n });
    }
    let mut zero_mass = vec![0.0; matrix.n];
    for (w, &p) in joint.probs().iter().enumerate() {
        let y = matrix.apply(w);
        for (i, mass) in zero_mass.iter_mut().enumerate() {
            if (y >> i) & 1 == 0 {
                *mass += p;
            }
        }
    }
    Ok(zero_mass.iter().map(|&m| binary_entropy(m)).sum())
}

/// Number of invertible banded matrices (non-zeros confined to the diagonal
/// and first circular superdiagonal): `2^(n+1) - 2` for `n >= 2`.
pub fn count_banded_invertible(n: usize) -> Result<u128, ConstrainedError> {
    if n < 2 {
        return Err(ConstrainedError::BandTooNarrow { n });
    }
    Ok((1u128 << (n + 1)) - 2)
}

/// Every invertible banded matrix, in lexicographic row-pattern order. Each
/// row `i` draws from `{e_i, e_(i+1 mod n), e_i + e_(i+1 mod n)}`; zero rows
/// can never appear in an invertible matrix.
pub fn enumerate_banded_invertible(n: usize) -> Result<Vec<Gf2Matrix>, ConstrainedError> {
    if n < 2 {
        return Err(ConstrainedError::BandTooNarrow { n });
    }
    if n > 20 {
        return Err(ConstrainedError::BadDimension { n });
    }
    let mut out = Vec::new();
    let mut rows = vec![0u64; n];
    fn rec(n: usize, i: usize, rows: &mut Vec<u64>, out: &mut Vec<Gf2Matrix>) {
        if i == n {
            let matrix = Gf2Matrix {
                n,
                rows: rows.clone(),
            };
            if matrix.is_invertible() {
                out.push(matrix);
            }
            return;
        }
        let diag = 1u64 << i;
        let off = 1u64 << ((i + 1) % n);
        for row in [diag, off, diag | off] {
            rows[i] = row;
            rec(n, i + 1, rows, out);
        }
        rows[i] = 0;
    }
    rec(n, 0, &mut rows, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BandedSearch {
    pub matrix: Gf2Matrix,
    pub mapping: WordMapping,
    pub value: f64,
}

/// Exhaustive minimization of the marginal-entropy sum over invertible
/// banded matrices.
pub fn search_banded(joint: &JointDistribution) -> Result<BandedSearch, ConstrainedError> {
    if joint.q() != 2 {
        return Err(ConstrainedError::UnsupportedAlphabet { q: joint.q() });
    }
    let candidates = enumerate_banded_invertible(joint.n())?;
    let mut best: Option<(f64, &Gf2Matrix)> = None;
    for matrix in &candidates {
        let value = linear_objective(joint, matrix)?;
        if best.map_or(true, |(b, _)| value < b) {
            best = Some((value, matrix));
        }
    }
    let (value, matrix) = best.expect("the banded family is never empty");
    Ok(BandedSearch {
        matrix: matrix.clone(),
        mapping: matrix.to_mapping()?,
        value,
    })
}

#[derive(Debug, Clone)]
pub struct ImmuneOptions {
    pub population: usize,
    /// Clones drawn per antibody per generation.
    pub clones: usize,
    /// Antibodies replaced by fresh random members each generation.
    pub replace_worst: usize,
    /// Hypermutation intensity: clones flip `ceil(beta (1 - affinity) n)`
    /// entries.
    pub beta: f64,
    /// Row-weight budget every antibody must respect.
    pub max_row_weight: usize,
    pub generations: usize,
    pub seed: u64,
    /// Mutation retries before a clone is discarded as singular.
    pub invertibility_retries: usize,
}

impl Default for ImmuneOptions {
    fn default() -> Self {
        Self {
            population: 20,
            clones: 10,
            replace_worst: 4,
            beta: 2.0,
            max_row_weight: 2,
            generations: 100,
            seed: 0,
            invertibility_retries: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImmuneResult {
    pub matrix: Gf2Matrix,
    pub mapping: WordMapping,
    pub value: f64,
    /// `1 - value / n`, the normalized fitness of the best antibody.
    pub affinity: f64,
    /// Best objective seen up to each generation; never increases.
    pub history: Vec<f64>,
}

fn random_row(rng: &mut ChaCha8Rng, n: usize, max_weight: usize) -> u64 {
    let weight = rng.gen_range(1..=max_weight.min(n));
    let mut row = 0u64;
    while (row.count_ones() as usize) < weight {
        row |= 1u64 << rng.gen_range(0..n);
    }
    row
}

fn random_invertible(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_weight: usize,
    retries: usize,
) -> Gf2Matrix {
    for _ in 0..retries {
        let rows: Vec<u64> = (0..n).map(|_| random_row(rng, n, max_weight)).collect();
        let matrix = Gf2Matrix { n, rows };
        if matrix.is_invertible() {
            return matrix;
        }
    }
    Gf2Matrix::identity(n)
}

/// Repairs rows over the weight budget by clearing random excess bits.
fn repair_rows(rng: &mut ChaCha8Rng, matrix: &mut Gf2Matrix, max_weight: usize) {
    for row in matrix.rows.iter_mut() {
        while (row.count_ones() as usize) > max_weight {
            let drop = rng.gen_range(0..row.count_ones());
            let mut seen = 0;
            for bit in 0..64 {
                if (*row >> bit) & 1 == 1 {
                    if seen == drop {
                        *row &= !(1u64 << bit);
                        break;
                    }
                    seen += 1;
                }
            }
        }
    }
}

fn mutate(
    rng: &mut ChaCha8Rng,
    parent: &Gf2Matrix,
    affinity: f64,
    opts: &ImmuneOptions,
) -> Option<Gf2Matrix> {
    let n = parent.n;
    let flips = ((opts.beta * (1.0 - affinity) * n as f64).ceil() as usize).max(1);
    for _ in 0..opts.invertibility_retries {
        let mut clone = parent.clone();
        for _ in 0..flips {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            clone.rows[i] ^= 1u64 << j;
        }
        repair_rows(rng, &mut clone, opts.max_row_weight);
        if clone.is_invertible() {
            return Some(clone);
        }
    }
    None
}

/// Clonal selection over invertible matrices with bounded row weight.
/// Deterministic for a fixed seed; the identity always participates, so the
/// result never exceeds the input's marginal-entropy sum.
pub fn search_immune(
    joint: &JointDistribution,
    opts: &ImmuneOptions,
) -> Result<ImmuneResult, ConstrainedError> {
    if joint.q() != 2 {
        return Err(ConstrainedError::UnsupportedAlphabet { q: joint.q() });
    }
    if opts.population == 0 || opts.replace_worst >= opts.population {
        return Err(ConstrainedError::BadPopulation {
            population: opts.population,
            replace_worst: opts.replace_worst,
        });
    }
    let n = joint.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut population: Vec<(Gf2Matrix, f64)> = Vec::with_capacity(opts.population);
    population.push((Gf2Matrix::identity(n), linear_objective(joint, &Gf2Matrix::identity(n))?));
    while population.len() < opts.population {
        let matrix = random_invertible(&mut rng, n, opts.max_row_weight, opts.invertibility_retries);
        let value = linear_objective(joint, &matrix)?;
        population.push((matrix, value));
    }

    let mut best = population
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(m, v)| (m.clone(), *v))
        .expect("population is non-empty");
    let mut history = Vec::with_capacity(opts.generations);

    for _ in 0..opts.generations {
        for member in population.iter_mut() {
            let affinity = 1.0 - member.1 / n as f64;
            let mut champion = member.clone();
            for _ in 0..opts.clones {
                if let Some(clone) = mutate(&mut rng, &member.0, affinity, opts) {
                    let value = linear_objective(joint, &clone)?;
                    if value < champion.1 {
                        champion = (clone, value);
                    }
                }
            }
            *member = champion;
        }
        population.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let keep = opts.population - opts.replace_worst;
        for member in population.iter_mut().skip(keep) {
            let matrix =
                random_invertible(&mut rng, n, opts.max_row_weight, opts.invertibility_retries);
            let value = linear_objective(joint, &matrix)?;
            *member = (matrix, value);
        }
        if population[0].1 < best.1 {
            best = (population[0].0.clone(), population[0].1);
        }
        history.push(best.1);
    }

    let mapping = best.0.to_mapping()?;
    Ok(ImmuneResult {
        matrix: best.0,
        value: best.1,
        affinity: 1.0 - best.1 / n as f64,
        mapping,
        history,
    })
}

/// Whether a truth table has as many ones as zeros. The length must be a
/// power of two of at least 2.
pub fn is_balanced(table: &[bool]) -> Result<bool, ConstrainedError> {
    if table.len() < 2 || !table.len().is_power_of_two() {
        return Err(ConstrainedError::BadLength { len: table.len() });
    }
    let ones = table.iter().filter(|&&b| b).count();
    Ok(2 * ones == table.len())
}

/// Whether a truth table is affine: `f(x) ⊕ f(y) ⊕ f(x ⊕ y) ⊕ f(0)` vanishes
/// everywhere.
pub fn is_affine(table: &[bool]) -> Result<bool, ConstrainedError> {
    if table.len() < 2 || !table.len().is_power_of_two() {
        return Err(ConstrainedError::BadLength { len: table.len() });
    }
    for x in 0..table.len() {
        for y in 0..table.len() {
            if table[x] ^ table[y] ^ table[x ^ y] ^ table[0] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{apply_mapping, sum_marginal_entropies};
    use crate::recover::product_joint;
    use approx::assert_relative_eq;

    #[test]
    fn linear_map_moves_mass_like_its_induced_permutation() {
        let joint = product_joint(&[0.3, 0.2, 0.4]).unwrap();
        let matrix = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        let moved = apply_linear_map(&joint, &matrix).unwrap();
        let via_mapping = apply_mapping(&joint, &matrix.to_mapping().unwrap()).unwrap();
        assert_eq!(moved.probs(), via_mapping.probs());
        assert_relative_eq!(moved.entropy(), joint.entropy(), epsilon = 1e-12);
        assert!(matches!(
            apply_linear_map(&joint, &Gf2Matrix::new(2, vec![0b11, 0b11]).unwrap()),
            Err(ConstrainedError::NotInvertible)
        ));
    }

    #[test]
    fn construction_is_validated() {
        assert!(matches!(
            Gf2Matrix::new(0, vec![]),
            Err(ConstrainedError::BadDimension { n: 0 })
        ));
        assert!(matches!(
            Gf2Matrix::new(2, vec![0b01]),
            Err(ConstrainedError::RowCountMismatch { n: 2, got: 1 })
        ));
        assert!(matches!(
            Gf2Matrix::new(2, vec![0b01, 0b100]),
            Err(ConstrainedError::RowOutOfRange { index: 1, n: 2 })
        ));
    }

    #[test]
    fn identity_behaves_as_identity() {
        let id = Gf2Matrix::identity(4);
        assert!(id.is_invertible());
        for w in 0..16 {
            assert_eq!(id.apply(w), w);
        }
        assert_eq!(id.inverse().unwrap(), id);
    }

    #[test]
    fn singular_matrices_are_detected() {
        let singular = Gf2Matrix::new(2, vec![0b11, 0b11]).unwrap();
        assert!(!singular.is_invertible());
        assert!(matches!(
            singular.to_mapping(),
            Err(ConstrainedError::NotInvertible)
        ));
        assert!(matches!(
            singular.inverse(),
            Err(ConstrainedError::NotInvertible)
        ));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let matrix = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        let inverse = matrix.inverse().unwrap();
        for w in 0..8 {
            assert_eq!(inverse.apply(matrix.apply(w)), w);
        }
    }

    #[test]
    fn mapping_matches_apply() {
        let matrix = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        let mapping = matrix.to_mapping().unwrap();
        for w in 0..8 {
            assert_eq!(mapping.map(w), matrix.apply(w));
        }
    }

    #[test]
    fn banded_count_matches_brute_force() {
        for n in 2..=6 {
            let enumerated = enumerate_banded_invertible(n).unwrap();
            assert_eq!(
                enumerated.len() as u128,
                count_banded_invertible(n).unwrap(),
                "n={n}"
            );
            // Independent check: all 4^n banded row patterns.
            let mut brute = 0u128;
            for code in 0..(1usize << (2 * n)) {
                let rows: Vec<u64> = (0..n)
                    .map(|i| {
                        let a = (code >> (2 * i)) & 1;
                        let b = (code >> (2 * i + 1)) & 1;
                        (a as u64) << i | (b as u64) << ((i + 1) % n)
                    })
                    .collect();
                if (Gf2Matrix { n, rows }).is_invertible() {
                    brute += 1;
                }
            }
            assert_eq!(brute, count_banded_invertible(n).unwrap(), "n={n}");
            for matrix in &enumerated {
                assert!(matrix.max_row_weight() <= 2);
                assert!(matrix.is_invertible());
            }
        }
        assert!(matches!(
            count_banded_invertible(1),
            Err(ConstrainedError::BandTooNarrow { n: 1 })
        ));
    }

    #[test]
    fn banded_search_recovers_a_banded_scramble() {
        let pis = [0.1, 0.25, 0.4];
        let joint = product_joint(&pis).unwrap();
        let target: f64 = sum_marginal_entropies(&joint);
        // Scramble with the inverse of a banded matrix, so a banded matrix
        // undoes it exactly.
        let banded = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        assert!(banded.is_invertible());
        let scramble = banded.inverse().unwrap().to_mapping().unwrap();
        let scrambled = apply_mapping(&joint, &scramble).unwrap();
        assert!(sum_marginal_entropies(&scrambled) > target + 0.05);

        let found = search_banded(&scrambled).unwrap();
        assert!(found.value <= target + 1e-12);
        assert!(found.value >= joint.entropy() - 1e-12);
        let image = apply_mapping(&scrambled, &found.mapping).unwrap();
        assert_relative_eq!(sum_marginal_entropies(&image), found.value, epsilon = 1e-12);
    }

    #[test]
    fn linear_objective_matches_materialized_image() {
        let joint = JointDistribution::new(
            3,
            2,
            vec![0.21, 0.04, 0.17, 0.08, 0.13, 0.1, 0.02, 0.25],
        )
        .unwrap();
        let matrix = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        let image = apply_mapping(&joint, &matrix.to_mapping().unwrap()).unwrap();
        assert_relative_eq!(
            linear_objective(&joint, &matrix).unwrap(),
            sum_marginal_entropies(&image),
            epsilon = 1e-12
        );
    }

    #[test]
    fn immune_search_is_deterministic_and_monotone() {
        let pis = [0.1, 0.25, 0.4];
        let joint = product_joint(&pis).unwrap();
        let banded = Gf2Matrix::new(3, vec![0b011, 0b110, 0b100]).unwrap();
        let scramble = banded.inverse().unwrap().to_mapping().unwrap();
        let scrambled = apply_mapping(&joint, &scramble).unwrap();

        let opts = ImmuneOptions {
            generations: 40,
            seed: 11,
            ..ImmuneOptions::default()
        };
        let first = search_immune(&scrambled, &opts).unwrap();
        let second = search_immune(&scrambled, &opts).unwrap();
        assert_eq!(first.matrix, second.matrix);
        assert_eq!(first.history, second.history);

        assert_eq!(first.history.len(), 40);
        assert!(first.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(first.value <= sum_marginal_entropies(&scrambled) + 1e-12);
        assert!(first.value >= joint.entropy() - 1e-12);
        assert!(first.matrix.max_row_weight() <= opts.max_row_weight);
        assert_relative_eq!(first.affinity, 1.0 - first.value / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn immune_search_validates_population() {
        let joint = product_joint(&[0.2, 0.3]).unwrap();
        let opts = ImmuneOptions {
            population: 4,
            replace_worst: 4,
            ..ImmuneOptions::default()
        };
        assert!(matches!(
            search_immune(&joint, &opts),
            Err(ConstrainedError::BadPopulation { .. })
        ));
    }

    #[test]
    fn balance_checks_validate_length() {
        assert!(matches!(
            is_balanced(&[true]),
            Err(ConstrainedError::BadLength { len: 1 })
        ));
        assert!(matches!(
            is_balanced(&[true, false, true]),
            Err(ConstrainedError::BadLength { len: 3 })
        ));
        assert!(is_balanced(&[true, false]).unwrap());
        assert!(!is_balanced(&[true, true]).unwrap());
    }

    #[test]
    fn balanced_two_variable_functions_are_exactly_the_affine_ones() {
        let mut balanced_count = 0;
        for code in 0..16u32 {
            let table: Vec<bool> = (0..4).map(|x| (code >> x) & 1 == 1).collect();
            let balanced = is_balanced(&table).unwrap();
            let affine = is_affine(&table).unwrap();
            let constant = table.iter().all(|&b| b) || table.iter().all(|&b| !b);
            assert_eq!(balanced, affine && !constant, "code={code}");
            if balanced {
                balanced_count += 1;
            }
        }
        assert_eq!(balanced_count, 6);
    }
}
