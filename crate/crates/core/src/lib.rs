//! Spectral regularization learning in vector-valued reproducing kernel
//! Hilbert spaces: filters, index functions, a synthetic Mercer model with
//! exact ground truth, estimators, effective-dimension tools, concentration
//! checks and a lower-bound laboratory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod effdim;
pub mod error;
pub mod estimator;
pub mod filters;
pub mod gram;
pub mod harness;
pub mod index_fn;
pub mod mercer;
pub mod minimax;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use filters::{make_filter, verify_constants, Filter, FilterConfig, FilterConstants, Qualification};
pub use index_fn::{
    check_monotone_flags, invert_monotone, make_rate_maps, IndexFunction, IndexKind, MonotoneFlags,
    RateMap, RateMaps,
};
pub use gram::{assemble_gram, eigendecompose, Dataset, GramEigen, Kernel, KernelDescriptor};
pub use mercer::{
    approx_error_norms, build_model, certify_noise, population_regularized, sample_dataset,
    target_from_source, MercerModel, ModelConfig, NoiseConfig, NoiseSpec, SourceConfig, SourceKind,
    SpectrumRule, TargetFunction,
};
pub use estimator::{
    error_norms, fit, fit_tikhonov_direct, prepare, rho_error_monte_carlo, FittedEstimator, Prepared,
    SolverPath,
};
pub use effdim::{
    check_theorem_condition, choose_lambda, effdim_bound_check, effective_dimension, rate_exponents,
    LambdaChoice, ParamRule, RateExponents,
};
pub use concentration::{operator_deviation, sample_error_stat, tail_test, StatisticKind, TailReport};
pub use minimax::{
    adversarial_family, bayes_error, build_packing, ell_epsilon, empirical_fano_check, epsilon_zero,
    fano_bound, kl_divergence, run_lower_bound, AdversarialFamily, FanoBound, LowerBoundConfig,
    LowerBoundReport, SignPacking, TwoPointMeasure,
};
pub use harness::{fit_slope, rate_sweep, ExperimentConfig, SlopeFit, SweepReport, Verdict};
