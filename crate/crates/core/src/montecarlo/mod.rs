//! Monte Carlo simulation of the superprocess and statistical checks of the
//! conditional limit laws.

mod sim;
mod stats;

pub use sim::{simulate_paths, PathEnsemble, SimConfig, STABILITY_LIMIT};
pub use stats::{
    clt_checks, conditional_statistics, ks_exponential_test, ks_p_value, ks_test, CltReport,
    ConditionalSamples, KsResult, LimitLaw, SampleSummary,
};
