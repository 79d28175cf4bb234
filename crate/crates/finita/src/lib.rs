//! Minimum total correlation representations of finite-alphabet joint
//! distributions.
//!
//! A joint distribution over `n` components, each drawn from an alphabet of
//! size `q`, is stored as a dense vector indexed by words: component `i`
//! contributes digit `i` of the word in base `q`, least significant first.
//! Applying an invertible word mapping permutes the vector without changing
//! its joint entropy, so minimizing the sum of marginal entropies over such
//! mappings minimizes the total correlation of the representation.
//!
//! The crate provides the exact parameter recovery for product
//! distributions, a branch-and-bound exact solver, a scalable
//! piecewise-linear relaxation with certified upper bounds, their extension
//! to non-binary alphabets, searches over structurally constrained binary
//! mappings, joint-distribution generators, and applications to blind source
//! separation and block coding of empirical samples.

pub mod branch_bound;
pub mod cli;
pub mod coding;
pub mod constrained;
pub mod dist;
pub mod generate;
pub mod qary;
pub mod recover;
pub mod relax;

pub use branch_bound::{solve_exact, BbOptions, BbSolution};
pub use coding::{
    algorithm2, best_total_cost, blockwise_cost, bss_experiment, empirical_entropy,
    empirical_joint, naive_block_search, read_samples, sample_zipf, single_block_cost, total_cost,
    write_samples, Algorithm2Options, Algorithm2Trace, BlockPartition, BssMethod, BssReport,
    CodingCostModel, SampleSet,
};
pub use constrained::{apply_linear_map, search_banded, search_immune, Gf2Matrix, ImmuneOptions};
pub use dist::{
    apply_mapping, binary_entropy, entropy, sum_marginal_entropies, total_correlation,
    DistError, JointDistribution, MarginalParams, WordMapping,
};
pub use generate::{
    block_iid_joint, count_markov_profiles, count_unique_probs, markov_joint,
    random_product_scrambled, zipf, MarkovSpec,
};
pub use qary::{
    build_symbol_bound, solve_qary, solve_qary_descent, DescentOptions, DescentResult,
    QaryOptions, QaryResult, SymbolBound,
};
pub use recover::{product_joint, recover_product_params, RecoverError, RecoveredProduct};
pub use relax::{
    allocate_min, build_tangent_bound, coefficient_matrix, coefficients_for_placement, solve_plr,
    solve_plr_matrix, CoefficientMatrix, CoefficientVector, PlrResult, TangentBound,
};
