//! Value-of-context computations for human versus black-box evaluation.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod game;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod priors;
pub mod scan;
pub mod utility;
pub mod voc;

pub use error::{Error, Result};
pub use model::{
    agent_payoff, blackbox_set, count_disclosure_sets, cylinder, posterior_mean, CovariateVector,
    Disclosure, DisclosureSet, Evaluation, ModelShape, TypeFunction, TypeFunctionRecord,
};
pub use montecarlo::{Estimate, Rng};
pub use priors::{BaseDist, MixtureComponent, NoiseFamily, NoiseSchedule, NoiseSpec, PriorSpec};
pub use utility::{PhiFamily, UtilitySpec};
pub use scan::{ContextScan, ScanPlan, DEFAULT_BUDGET};
pub use voc::{
    compare_evaluators, context_scan, expected_max_value_of_context, expected_value_of_context,
    max_value_of_context, min_context_payoff, threshold_n, value_of_context, Comparison, EvalMode,
    Threshold, Verdict, VocOptions,
};
pub use bounds::{
    arnold_bound, berman_bound, chain_estimates, concentration_diagnostic, mps_check,
    subgaussian_max_bound, BayesPosteriorMean, ChainEstimates, DisclosurePicker,
    EvaluationRule,
};
pub use game::{
    best_equilibrium_payoff, enumerate_pure_equilibria, recheck_profile, verify_disclosure_bound,
    DisclosureBoundCheck, StrategyProfile,
};
pub use experiment::{run_experiment, write_csv, Experiment, ExperimentConfig, ResultRow, CSV_HEADER};
