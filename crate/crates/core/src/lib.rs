//! Numerical verification of eventual positivity and eventual domination for
//! discretized operator semigroups on finite vector lattices.

// `!(x > 0.0)` deliberately rejects NaN; `is_multiple_of` postdates the MSRV.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod criteria;
pub mod error;
pub mod evolution;
pub mod gallery;
pub mod io;
pub mod lattice;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
pub use gallery::{
    build_laplacian, build_laplacian_with_scheme, build_odd_order, build_rank_one_example,
    solve_transcendental_mu, test_function_fn, BoundaryCondition, OperatorHandle, Provenance,
    RankOneExampleBundle,
};
pub use lattice::{
    dominates_slices, dominates_vec, gauge, gauge_slices, strongly_positive, GaugeResult, GridSpec,
    LatticeVector, NodeScheme, DEFAULT_EPS,
};
pub use spectral::{
    analyze, mean_ergodic_projection, projection_residuals, spectral_projection, ProjectionData,
    SpectralData,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
pub use evolution::{
    cesaro, expm, laplace_transform_check, resolvent, resolvent_with_cap, CesaroMethod,
    EvolutionKind, EvolutionSample, CHECKER_RESOLVENT_CAP, DEFAULT_QUAD_POINTS,
};
pub use criteria::{
    check_cesaro_eventual_positivity, check_individual_semigroup_domination, check_max_antimax,
    check_resolvent_domination_window, check_uniform_semigroup_domination,
    check_uniform_semigroup_domination_with_bound, equivalence_audit, search_converse_witness,
    standard_trial_set, ConverseOutcome, DominationMode, DominationReport, EquivalenceAudit, Side,
    TimeGrid, Verdict, WindowOptions, WindowReport, AuditOptions, RankOneBound, Sample, Witness,
    ConverseWitness, WindowVerdict,
};
pub use scenarios::{
    scenario_antisym_vs_neumann, scenario_cesaro, scenario_nonlocal_beta, scenario_odd_order,
    scenario_rank_one, scenario_sandwich, ScalarCheck, ScenarioResult, SubReport, Expectation,
    odd_order_trials, projection_margin, rank_one_resolvent_difference,
    rank_one_semigroup_difference, rank_one_witness_index, sin_bulk_profile, SCENARIO_SEED,
};
pub use io::{export_operator, import_operator, Sidecar};
