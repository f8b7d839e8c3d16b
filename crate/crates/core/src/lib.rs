//! Circular and toroidal diffusions whose transition densities are known in
//! closed form.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod circular;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod ingest;
pub mod io;
pub mod jump;
pub mod linalg;
pub mod multi_sample;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod stats;
pub mod toroidal;

pub use circular::{CircularDensity, CircularFamily, FamilyKind, VonMisesComponent};
pub use error::{Error, Result};
pub use scalar::Real;
pub use diffusion::{DiffusionModel, PathSample, TransitionKernel};
pub use inference::{fit_mle, lr_test, FitOptions, FitResult, ModelSpec, ParamVector, ProcessKind, TestResult};
pub use jump::{JumpMode, JumpModel};
pub use multi_sample::{GroupedSample, LinearHypothesis, Preset};
pub use toroidal::{BvmParams, CovarianceSpec, RosenblattMap, ToroidalDensity};

/// Single-precision circular density.
pub type CircularDensity32 = CircularDensity<f32>;
/// Single-precision toroidal density.
pub type ToroidalDensity32 = ToroidalDensity<f32>;
/// Single-precision diffusion (densities, transforms and coefficients).
pub type DiffusionModel32 = DiffusionModel<f32>;
/// Single-precision jump process.
pub type JumpModel32 = JumpModel<f32>;
