//! Randomized invariant suite: every solver output must be a genuine
//! bijection whose reported objective is reproducible from its image, all
//! upper bounds must dominate the joint entropy, and the algebraic identities
//! (entropy invariance, non-negative total correlation, subadditivity) must
//! hold on arbitrary inputs, not just the fixtures.

use finita::coding::{algorithm2, empirical_entropy, sample_zipf, Algorithm2Options};
use finita::dist::{
    apply_mapping, sum_marginal_entropies, total_correlation, JointDistribution, WordMapping,
};
use finita::generate::random_product_scrambled;
use finita::qary::{
    build_symbol_bound, solve_qary, solve_qary_descent, DescentOptions, QaryOptions,
};
use finita::recover::{product_joint, recover_product_params, DEFAULT_TOLERANCE};
use finita::relax::{build_tangent_bound, solve_plr, solve_plr_matrix};
use finita::{search_banded, search_immune, solve_exact, BbOptions, ImmuneOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Strictly positive joint over `n` binary components, renormalized.
fn random_joint(n: usize) -> impl Strategy<Value = JointDistribution> {
    prop::collection::vec(0.01..1.0f64, 1 << n)
        .prop_map(move |probs| JointDistribution::new_renormalized(n, 2, probs).unwrap())
}

/// Random word permutation of `q^n` words from a shuffle seed.
fn random_mapping(n: usize, q: usize, seed: u64) -> WordMapping {
    let len = (q as u32).pow(n as u32) as usize;
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    WordMapping::new(n, q, perm).unwrap()
}

fn is_bijection(mapping: &WordMapping) -> bool {
    let mut seen = vec![false; mapping.perm().len()];
    for &y in mapping.perm() {
        if seen[y] {
            return false;
        }
        seen[y] = true;
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_correlation_is_non_negative(joint in random_joint(3)) {
        prop_assert!(total_correlation(&joint) >= -1e-12);
    }

    #[test]
    fn entropy_survives_any_word_permutation(joint in random_joint(3), seed in 0..u64::MAX) {
        let mapped = apply_mapping(&joint, &random_mapping(3, 2, seed)).unwrap();
        prop_assert!((mapped.entropy() - joint.entropy()).abs() <= 1e-12);
        // The image is a rearrangement: same probability multiset.
        let mut before = joint.probs().to_vec();
        let mut after = mapped.probs().to_vec();
        before.sort_by(|a, b| a.partial_cmp(b).unwrap());
        after.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in before.iter().zip(&after) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn products_carry_zero_total_correlation(
        pis in prop::collection::vec(0.02..0.5f64, 2..=5)
    ) {
        let joint = product_joint(&pis).unwrap();
        prop_assert!(total_correlation(&joint).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recovery_round_trips_through_any_scramble(
        mut pis in prop::collection::vec(0.02..0.5f64, 2..=6),
        seed in 0..u64::MAX,
    ) {
        let n = pis.len();
        let product = product_joint(&pis).unwrap();
        let scrambled = apply_mapping(&product, &random_mapping(n, 2, seed)).unwrap();
        let rec = recover_product_params(&scrambled, DEFAULT_TOLERANCE).unwrap();

        pis.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let got = rec.params.zero_probs();
        for (a, b) in got.iter().zip(&pis) {
            prop_assert!((a - b).abs() <= 1e-9, "{got:?} vs {pis:?}");
        }
        prop_assert!(is_bijection(&rec.mapping));
        let image = apply_mapping(&scrambled, &rec.mapping).unwrap();
        let want = product_joint(&got).unwrap();
        for (a, b) in image.probs().iter().zip(want.probs()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn seeded_generation_recovers_and_reproduces(n in 2..=8usize, seed in 0..u64::MAX) {
        let (first, truth, _) = random_product_scrambled(n, seed).unwrap();
        let (second, _, _) = random_product_scrambled(n, seed).unwrap();
        prop_assert_eq!(first.probs(), second.probs());
        let rec = recover_product_params(&first, DEFAULT_TOLERANCE).unwrap();
        let mut sorted = truth.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in rec.params.zero_probs().iter().zip(&sorted) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relaxation_bounds_and_reports_are_consistent(
        joint in random_joint(3),
        k in 1..=8usize,
    ) {
        let bound = build_tangent_bound(k).unwrap();
        let result = solve_plr(&joint, &bound).unwrap();
        let entropy = joint.entropy();

        prop_assert!(result.ub_value >= entropy - 1e-12);
        prop_assert!(result.ub_value >= result.ub_true_objective - 1e-12);
        prop_assert!(result.true_objective >= entropy - 1e-12);
        prop_assert!(result.true_objective <= sum_marginal_entropies(&joint) + 1e-12);
        prop_assert!(result.true_best_objective >= entropy - 1e-12);
        prop_assert!(result.true_best_objective <= result.true_objective + 1e-12);
        prop_assert!(result.feasible_placements_visited >= 1);
        prop_assert!(is_bijection(&result.mapping));
        prop_assert!(is_bijection(&result.ub_mapping));
        prop_assert!(is_bijection(&result.true_best_mapping));
        let best_image = apply_mapping(&joint, &result.true_best_mapping).unwrap();
        prop_assert!(
            (sum_marginal_entropies(&best_image) - result.true_best_objective).abs() <= 1e-12
        );

        // Reported objectives must be recomputable from the images.
        let image = apply_mapping(&joint, &result.mapping).unwrap();
        prop_assert!((sum_marginal_entropies(&image) - result.true_objective).abs() <= 1e-12);
        let ub_image = apply_mapping(&joint, &result.ub_mapping).unwrap();
        prop_assert!(
            (sum_marginal_entropies(&ub_image) - result.ub_true_objective).abs() <= 1e-12
        );
        // Canonical form: every image parameter at or below one half.
        for marginal in ub_image.marginals() {
            prop_assert!(marginal[0] <= 0.5 + 1e-12);
        }

        // The matrix path must select the same feasible winner.
        let matrix = solve_plr_matrix(&joint, &bound).unwrap();
        prop_assert!((matrix.ub_value - result.ub_value).abs() <= 1e-9);
    }

    #[test]
    fn nested_refinement_never_raises_the_bound(joint in random_joint(3)) {
        let mut bound = build_tangent_bound(2).unwrap();
        let mut previous = solve_plr(&joint, &bound).unwrap().ub_value;
        for _ in 0..2 {
            bound = bound.refine_double();
            let current = solve_plr(&joint, &bound).unwrap().ub_value;
            prop_assert!(current <= previous + 1e-12);
            previous = current;
        }
    }

    #[test]
    fn exact_solver_is_dominated_by_the_relaxation(joint in random_joint(3)) {
        let exact = solve_exact(&joint, &BbOptions::default()).unwrap();
        let entropy = joint.entropy();
        prop_assert!(exact.value >= entropy - 1e-12);
        prop_assert!(is_bijection(&exact.mapping));
        let image = apply_mapping(&joint, &exact.mapping).unwrap();
        prop_assert!((sum_marginal_entropies(&image) - exact.value).abs() <= 1e-12);

        for k in [2usize, 8] {
            let relaxed = solve_plr(&joint, &build_tangent_bound(k).unwrap()).unwrap();
            prop_assert!(relaxed.ub_value >= exact.value - 1e-12, "k={k}");
            prop_assert!(relaxed.true_objective >= exact.value - 1e-12, "k={k}");
            prop_assert!(relaxed.true_best_objective >= exact.value - 1e-12, "k={k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn binary_qary_scan_reduces_to_the_relaxation(joint in random_joint(2), k in 2..=6usize) {
        let plr = solve_plr(&joint, &build_tangent_bound(k).unwrap()).unwrap();
        let qary = solve_qary(
            &joint,
            &build_symbol_bound(2, k).unwrap(),
            &QaryOptions::default(),
        )
        .unwrap();
        prop_assert!((qary.ub_value - plr.ub_value).abs() <= 1e-12);
        prop_assert!((qary.true_objective - plr.true_objective).abs() <= 1e-12);
        prop_assert!((qary.true_best_objective - plr.true_best_objective).abs() <= 1e-12);
    }

    #[test]
    fn descent_is_sound_deterministic_and_accounted(
        probs in prop::collection::vec(0.01..1.0f64, 9..=9),
        seed in 0..u64::MAX,
    ) {
        let joint = JointDistribution::new_renormalized(2, 3, probs).unwrap();
        let bound = build_symbol_bound(3, 4).unwrap();
        let opts = DescentOptions { inits: 10, seed, ..DescentOptions::default() };
        let first = solve_qary_descent(&joint, &bound, &opts).unwrap();
        let second = solve_qary_descent(&joint, &bound, &opts).unwrap();

        prop_assert!(first.true_objective >= joint.entropy() - 1e-12);
        prop_assert!(is_bijection(&first.mapping));
        prop_assert_eq!(first.mapping.perm(), second.mapping.perm());
        prop_assert_eq!(first.walks.len(), 10);
        prop_assert!(first.feasible_hits <= first.inits_used);
        // Every descent candidate is a feasible placement the scan also
        // visits, so descent can never undercut the scan's best true sum.
        let scan = solve_qary(&joint, &bound, &QaryOptions::default()).unwrap();
        prop_assert!(first.true_objective >= scan.true_best_objective - 1e-9);
        let image = apply_mapping(&joint, &first.mapping).unwrap();
        let realized: f64 = image
            .marginals()
            .iter()
            .map(|m| finita::dist::entropy(m).unwrap())
            .sum();
        prop_assert!((realized - first.true_objective).abs() <= 1e-12);
    }

    #[test]
    fn constrained_searches_return_sound_bijections(joint in random_joint(3), seed in 0..u64::MAX) {
        let entropy = joint.entropy();
        let banded = search_banded(&joint).unwrap();
        prop_assert!(banded.value >= entropy - 1e-12);
        prop_assert!(is_bijection(&banded.mapping));
        let image = apply_mapping(&joint, &banded.mapping).unwrap();
        prop_assert!((sum_marginal_entropies(&image) - banded.value).abs() <= 1e-12);

        let opts = ImmuneOptions { generations: 8, seed, ..ImmuneOptions::default() };
        let immune = search_immune(&joint, &opts).unwrap();
        prop_assert!(immune.value >= entropy - 1e-12);
        prop_assert!(is_bijection(&immune.mapping));
        // Best-so-far history can only improve.
        prop_assert!(immune.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn block_coding_iterations_respect_subadditivity(seed in 0..u64::MAX) {
        let samples = sample_zipf(8, 2, 1.3, 4000, seed).unwrap();
        let whole = empirical_entropy(&samples);
        let opts = Algorithm2Options {
            blocks: 4,
            iterations: 4,
            k: 4,
            seed,
            exact: false,
        };
        let trace = algorithm2(&samples, &opts).unwrap();
        for record in &trace.records {
            prop_assert!(record.h_b >= whole - 1e-9, "blocks beat the whole");
            prop_assert!(record.h_m >= record.h_b - 1e-9, "components beat their blocks");
            for mapping in &record.mappings {
                prop_assert!(is_bijection(mapping));
            }
        }
        // The component objective is the acceptance criterion: its recorded
        // sequence never rises, and rejected rounds leave it untouched.
        for pair in trace.records.windows(2) {
            prop_assert!(pair[1].h_m <= pair[0].h_m + 1e-9);
        }
        let recorded_min = trace
            .records
            .iter()
            .map(|r| r.h_b)
            .fold(f64::INFINITY, f64::min);
        prop_assert!((trace.min_h_b() - recorded_min).abs() <= 1e-12);
        // Per-block bijections compose to a bijection on whole words, so the
        // whole-sequence entropy is untouched.
        prop_assert!((empirical_entropy(&trace.final_samples) - whole).abs() <= 1e-9);
    }
}
