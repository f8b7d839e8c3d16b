//! Exact likelihood inference for circular diffusions and jump processes.

pub mod fit;
pub mod likelihood;
pub mod lrt;
pub mod optim;
pub mod params;

pub use fit::{default_start, fit_mle, stationary_mle, FitOptions, FitResult};
pub use likelihood::{log_likelihood, log_likelihood_with_score, score, transition_scores};
pub use lrt::{lr_test, TestResult};
pub use optim::OptimOptions;
pub use params::{CoordKind, ModelSpec, ParamVector, Parameterization, ProcessKind};
