//! Computable forms of the complexity, dependence and rate quantities that
//! govern the estimator.

mod bounds;
mod rates;
mod receptive;

pub use bounds::{
    entropy_bound, kappa_n, mismatch_bound, stochastic_terms_shape, verify_mismatch, MismatchCheck, StochasticTerms,
};
pub use rates::{effective_smoothness, predicted_rate, SmoothnessSpec};
pub use receptive::{
    conservative_receptive_bound, dependency_partition, receptive_field, receptive_sets, DependencyPartition,
};
