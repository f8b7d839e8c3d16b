//! One-sample likelihood-ratio tests.

use serde::Serialize;

use crate::circular::FamilyKind;
use crate::diffusion::PathSample;
use crate::error::{Error, Result};
use crate::stats::chi_square_sf;

use super::fit::{fit_mle, FitOptions, FitResult};
use super::params::{ModelSpec, ParamVector};

/// Statistics this far below zero are reported as optimiser failures rather
/// than clipped.
const NEGATIVE_STATISTIC_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    /// `−2 log Q`
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub unrestricted: FitResult,
    pub restricted: FitResult,
    /// null on the boundary of the parameter space
    pub boundary: bool,
    pub warnings: Vec<String>,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Builds a result from two fits, refitting the unrestricted model from the
/// restricted optimum if it came out worse.
pub(crate) fn assemble(
    unrestricted: FitResult,
    restricted: FitResult,
    df: usize,
    boundary: bool,
    mut warnings: Vec<String>,
) -> Result<TestResult> {
    let raw = 2.0 * (unrestricted.loglik - restricted.loglik);
    if raw < -NEGATIVE_STATISTIC_SLACK {
        return Err(Error::Convergence(format!(
            "restricted log-likelihood exceeds the unrestricted one by {}",
            -raw / 2.0
        )));
    }
    if boundary {
        warnings.push(
            "null value lies on the boundary of the parameter space; the chi-square reference is only approximate"
                .into(),
        );
    }
    let statistic = raw.max(0.0);
    Ok(TestResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
        unrestricted,
        restricted,
        boundary,
        warnings,
    })
}

/// `H₀: ξ_j = v_j` for every `Some(v_j)` in `restriction`.
///
/// Fixing a von Mises concentration at zero leaves `μ` unidentified; that
/// null is tested against the uniform family with two degrees of freedom
/// (the pair `(κ cos μ, κ sin μ)` vanishes).
pub fn lr_test(
    spec: &ModelSpec,
    paths: &[PathSample],
    restriction: &[Option<f64>],
    opts: &FitOptions,
) -> Result<TestResult> {
    if restriction.len() != spec.dim() {
        return Err(Error::InvalidParameter(format!(
            "restriction has {} entries for {} parameters",
            restriction.len(),
            spec.dim()
        )));
    }
    let df = restriction.iter().filter(|r| r.is_some()).count();
    if df == 0 {
        return Err(Error::InvalidParameter("restriction fixes no parameter".into()));
    }
    let unrestricted = fit_mle(spec, paths, None, opts)?;
    if spec.family == FamilyKind::VonMises && restriction[1] == Some(0.0) {
        let uspec = ModelSpec {
            family: FamilyKind::Uniform,
            process: spec.process,
        };
        let sigma_fixed = restriction[2];
        let ropts = FitOptions {
            fixed: Some(vec![sigma_fixed]),
            ..opts.clone()
        };
        let init = ParamVector::new(FamilyKind::Uniform, vec![], sigma_fixed.unwrap_or(unrestricted.estimate.sigma))?;
        let restricted = fit_mle(&uspec, paths, Some(&init), &ropts)?;
        let df = 2 + usize::from(sigma_fixed.is_some());
        return assemble(unrestricted, restricted, df, true, vec![]);
    }
    let mut init = unrestricted.estimate.natural();
    for (x, r) in init.iter_mut().zip(restriction) {
        if let Some(v) = r {
            *x = *v;
        }
    }
    let init = ParamVector::from_natural(spec.family, &init)?;
    let ropts = FitOptions {
        fixed: Some(restriction.to_vec()),
        ..opts.clone()
    };
    let restricted = fit_mle(spec, paths, Some(&init), &ropts)?;
    let mut unrestricted = unrestricted;
    if restricted.loglik > unrestricted.loglik {
        // the restricted optimum is a better start for the full model
        unrestricted = fit_mle(spec, paths, Some(&restricted.estimate), opts)?;
    }
    assemble(unrestricted, restricted, df, false, vec![])
}
