//! Maximum likelihood fits.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::circular::{CircularDensity, FamilyKind};
use crate::diffusion::PathSample;
use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use crate::scalar::{centered_unit, two_pi, wrap_angle};
use crate::special::bessel_i_ratios;

use super::likelihood::{log_likelihood_and_scores, stationary_log_likelihood};
use super::optim::{maximize, OptimOptions, OptimReport};
use super::params::{ModelSpec, ParamVector, Parameterization, ProcessKind};

/// Smallest Fisher eigenvalue below which a warning is attached.
pub const FISHER_EIGENVALUE_FLOOR: f64 = 1e-8;
/// Fisher condition number above which a warning is attached.
pub const FISHER_CONDITION_LIMIT: f64 = 1e10;

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// coordinates held at a value (`None` = free)
    pub fixed: Option<Vec<Option<f64>>>,
    /// number of starts; `None` means 5 for mixtures and 1 otherwise
    pub starts: Option<usize>,
    /// seed of the jittered starts
    pub seed: u64,
    pub optim: OptimOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed: None,
            starts: None,
            seed: 0x5eed,
            optim: OptimOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn with_fixed(mut self, fixed: Vec<Option<f64>>) -> Self {
        self.fixed = Some(fixed);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub estimate: ParamVector,
    pub loglik: f64,
    /// natural-coordinate score at the estimate
    pub score: Vec<f64>,
    /// `Î = (1/n) Σ sᵢsᵢᵀ`, row-major `q × q`
    pub fisher: Vec<Vec<f64>>,
    /// from `(n Î)⁻¹` restricted to the free coordinates; `None` when fixed
    pub standard_errors: Vec<Option<f64>>,
    pub transitions: usize,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub fisher_min_eigenvalue: f64,
    pub fisher_condition: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

fn pooled_angles(paths: &[PathSample]) -> Vec<f64> {
    paths.iter().flat_map(|p| p.angles().iter().copied()).collect()
}

fn mean_resultant(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &t| (s + t.sin(), c + t.cos()));
    (wrap_angle(s.atan2(c)), (s * s + c * c).sqrt() / n)
}

/// Mean resultant length above which the stationary start is capped
/// (about `κ = 5·10⁵`).
const START_RESULTANT_CAP: f64 = 1.0 - 1e-6;

/// Inverse of `A₁(κ) = I₁(κ)/I₀(κ)` by Newton steps from the usual
/// piecewise approximation.
pub fn a1_inverse(r: f64) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    let r = r.min(1.0 - 1e-12);
    let mut k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    for _ in 0..20 {
        let a = bessel_i_ratios(k, 1)[1];
        let da = 1.0 - a / k - a * a;
        let step = (a - r) / da;
        let next = (k - step).max(k / 10.0);
        if (next - k).abs() < 1e-14 * k.max(1.0) {
            k = next;
            break;
        }
        k = next;
    }
    k
}

/// Maximum likelihood estimate of `β` treating the observations as
/// i.i.d. draws from `f_β`.
pub fn stationary_mle(family: FamilyKind, angles: &[f64]) -> Result<Vec<f64>> {
    if angles.is_empty() {
        return Err(Error::Domain("stationary fit needs observations".into()));
    }
    let (mu, r) = mean_resultant(angles);
    let start = match family {
        FamilyKind::Uniform => return Ok(vec![]),
        // a concentrated start keeps the CDF series short
        FamilyKind::VonMises => return Ok(vec![mu, a1_inverse(r.min(START_RESULTANT_CAP))]),
        FamilyKind::WrappedCauchy => vec![mu, r.clamp(0.01, 0.95)],
        FamilyKind::VonMisesMixture { components } => {
            let mut sorted: Vec<f64> = angles.iter().map(|&t| wrap_angle(t - mu + std::f64::consts::PI)).collect();
            sorted.sort_by(f64::total_cmp);
            let mut beta = vec![1.0 / components as f64; components - 1];
            for j in 0..components {
                let q = sorted[((j as f64 + 0.5) / components as f64 * sorted.len() as f64) as usize];
                beta.push(wrap_angle(q + mu - std::f64::consts::PI));
                beta.push(2.0 * components as f64);
            }
            beta
        }
    };
    let spec = ModelSpec::diffusion(family);
    let mut fixed = vec![None; spec.dim()];
    fixed[spec.dim() - 1] = Some(1.0);
    let par = Parameterization::new(spec, fixed)?;
    let mut xi0 = start.clone();
    xi0.push(1.0);
    let u0 = par.to_unconstrained(&xi0)?;
    let report = maximize(
        |u| {
            let (xi, jac) = par.to_natural_with_jacobian(u);
            let (ll, g) = stationary_log_likelihood(family, &xi[..xi.len() - 1], angles).ok()?;
            let mut gn = g;
            gn.push(0.0);
            Some((ll, par.pull_back(&jac, &gn)))
        },
        u0,
        &OptimOptions::default(),
    );
    match report {
        Some(r) => {
            let xi = par.to_natural(&r.x);
            Ok(xi[..xi.len() - 1].to_vec())
        }
        None => Ok(start),
    }
}

/// Moment start for `σ` from the transform-space increments under `β`.
pub fn sigma_start(spec: &ModelSpec, beta: &[f64], paths: &[PathSample]) -> Result<f64> {
    let density = CircularDensity::from_beta_quiet(spec.family, beta)?;
    let (mut sum_cos, mut count, mut sum_delta) = (0.0, 0usize, 0.0);
    for p in paths {
        let f: Vec<f64> = p.angles().iter().map(|&t| density.cdf_reduced(t)).collect();
        for w in f.windows(2) {
            sum_cos += (two_pi::<f64>() * centered_unit(w[1] - w[0])).cos();
            count += 1;
            sum_delta += p.delta();
        }
    }
    if count == 0 {
        return Err(Error::Domain("paths contain no transitions".into()));
    }
    let mc = sum_cos / count as f64;
    if mc >= 1.0 - 1e-12 {
        return Err(Error::Convergence(
            "paths do not move; the likelihood is unbounded as sigma goes to 0".into(),
        ));
    }
    let mc = mc.max(1e-3);
    let delta = sum_delta / count as f64;
    Ok(match spec.process {
        ProcessKind::Diffusion => (-mc.ln() / (2.0 * std::f64::consts::PI.powi(2) * delta)).sqrt(),
        ProcessKind::Jump => -mc.ln() / (two_pi::<f64>() * delta),
    })
}

/// Default starting point: stationary MLE for `β`, moment start for `σ`.
pub fn default_start(spec: &ModelSpec, paths: &[PathSample]) -> Result<ParamVector> {
    let beta = stationary_mle(spec.family, &pooled_angles(paths))?;
    let sigma = sigma_start(spec, &beta, paths)?;
    ParamVector::new(spec.family, beta, sigma)
}

/// Log-likelihood, natural score and per-transition scores summed over
/// replicates.
pub(crate) fn replicate_terms(
    spec: &ModelSpec,
    xi: &[f64],
    paths: &[PathSample],
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let mut ll = 0.0;
    let mut g = vec![0.0; spec.dim()];
    let mut rows = Vec::new();
    for p in paths {
        let (l, r) = log_likelihood_and_scores(spec, xi, p)?;
        ll += l;
        for row in &r {
            for (a, b) in g.iter_mut().zip(row) {
                *a += b;
            }
        }
        rows.extend(r);
    }
    Ok((ll, g, rows))
}

fn objective<'a>(
    spec: &'a ModelSpec,
    par: &'a Parameterization,
    paths: &'a [PathSample],
) -> impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)> + 'a {
    move |u| {
        let (xi, jac) = par.to_natural_with_jacobian(u);
        let mut ll = 0.0;
        let mut g = vec![0.0; spec.dim()];
        for p in paths {
            let (l, rows) = log_likelihood_and_scores(spec, &xi, p).ok()?;
            ll += l;
            for row in &rows {
                for (a, b) in g.iter_mut().zip(row) {
                    *a += b;
                }
            }
        }
        if !ll.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((ll, par.pull_back(&jac, &g)))
    }
}

/// Maximum likelihood fit over independent replicate paths sharing `ξ`.
pub fn fit_mle(
    spec: &ModelSpec,
    paths: &[PathSample],
    init: Option<&ParamVector>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let transitions: usize = paths.iter().map(|p| p.n_steps()).sum();
    let par = Parameterization::new(*spec, opts.fixed.clone().unwrap_or_else(|| vec![None; spec.dim()]))?;
    if transitions < par.free_dim().max(1) {
        return Err(Error::Domain(format!(
            "{transitions} transitions cannot identify {} parameters",
            par.free_dim()
        )));
    }
    let start = match init {
        Some(p) => {
            if p.family != spec.family {
                return Err(Error::InvalidParameter("initial value has the wrong family".into()));
            }
            p.clone()
        }
        None => default_start(spec, paths)?,
    };
    let mut xi0 = start.natural();
    for (x, f) in xi0.iter_mut().zip(par.fixed()) {
        if let Some(v) = f {
            *x = *v;
        }
    }
    let u0 = par.to_unconstrained(&xi0)?;
    let n_starts = opts.starts.unwrap_or(match spec.family {
        FamilyKind::VonMisesMixture { .. } if init.is_none() => 5,
        _ => 1,
    });
    let mut best: Option<OptimReport> = None;
    for s in 0..n_starts.max(1) {
        let mut u = u0.clone();
        if s > 0 {
            let mut rng = replicate_rng(opts.seed, s as u64);
            for v in &mut u {
                *v += 0.5 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let Some(r) = maximize(objective(spec, &par, paths), u, &opts.optim) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => (r.converged && !b.converged) || (r.converged == b.converged && r.value > b.value),
        };
        if better {
            best = Some(r);
        }
    }
    let Some(best) = best else {
        return Err(Error::Optimization {
            reason: "likelihood not finite at any start".into(),
            iterations: 0,
            gradient_norm: f64::NAN,
            best_loglik: f64::NAN,
            best_estimate: xi0,
        });
    };
    let xi = par.to_natural(&best.x);
    if !best.converged {
        return Err(Error::Optimization {
            reason: best.reason.clone(),
            iterations: best.iterations,
            gradient_norm: best.gradient_norm(),
            best_loglik: best.value,
            best_estimate: xi,
        });
    }
    summarize(spec, &par, paths, xi, &best)
}

fn summarize(
    spec: &ModelSpec,
    par: &Parameterization,
    paths: &[PathSample],
    xi: Vec<f64>,
    report: &OptimReport,
) -> Result<FitResult> {
    let mut estimate = ParamVector::from_natural(spec.family, &xi)?;
    estimate.canonicalize();
    let xi = estimate.natural();
    let (loglik, score, rows) = replicate_terms(spec, &xi, paths)?;
    let q = spec.dim();
    let n = rows.len() as f64;
    let mut fisher = vec![vec![0.0; q]; q];
    for r in &rows {
        for i in 0..q {
            for j in 0..q {
                fisher[i][j] += r[i] * r[j] / n;
            }
        }
    }
    let free: Vec<usize> = (0..q).filter(|&i| par.fixed()[i].is_none()).collect();
    let sub = DMatrix::from_fn(free.len(), free.len(), |a, b| fisher[free[a]][free[b]]);
    let mut warnings = Vec::new();
    let (min_eig, cond) = if free.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let eig = SymmetricEigen::new(sub.clone()).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, if lo > 0.0 { hi / lo } else { f64::INFINITY })
    };
    if min_eig < FISHER_EIGENVALUE_FLOOR {
        warnings.push(format!("information matrix nearly singular (smallest eigenvalue {min_eig:e})"));
    }
    if cond > FISHER_CONDITION_LIMIT {
        warnings.push(format!("information matrix ill conditioned (condition number {cond:e})"));
    }
    let mut standard_errors = vec![None; q];
    if let Some(inv) = (sub * n).try_inverse() {
        for (a, &i) in free.iter().enumerate() {
            let v = inv[(a, a)];
            standard_errors[i] = Some(if v >= 0.0 { v.sqrt() } else { f64::NAN });
        }
    }
    if let Ok(d) = estimate.density() {
        let lo = d.min_density_on_grid(1024);
        if lo < 1e-6 {
            warnings.push(format!("fitted density falls to {lo:e}; drift and diffusion are near-singular"));
        }
    }
    Ok(FitResult {
        spec: *spec,
        names: spec.names(),
        estimate,
        loglik,
        score,
        fisher,
        standard_errors,
        transitions: rows.len(),
        iterations: report.iterations,
        gradient_norm: report.gradient_norm(),
        fisher_min_eigenvalue: min_eig,
        fisher_condition: cond,
        converged: report.converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionModel;
    use crate::inference::likelihood::log_likelihood;
    use crate::inference::optim::golden_section;
    use crate::rng::seeded;

    fn simulate(kappa: f64, n: usize, seed: u64) -> PathSample {
        let m = DiffusionModel::circular(CircularDensity::von_mises(0.0, kappa).unwrap(), 1.0 / two_pi::<f64>())
            .unwrap()
            .with_cache()
            .unwrap();
        let mut rng = seeded(seed);
        let x0 = m.sample_stationary(&mut rng).unwrap();
        m.simulate_exact(&x0, n, 0.5, &mut rng).unwrap()
    }

    #[test]
    fn a1_inverse_inverts() {
        for &k in &[0.01, 0.5, 1.0, 3.0, 20.0, 200.0] {
            let r = bessel_i_ratios(k, 1)[1];
            assert!((a1_inverse(r) - k).abs() < 1e-8 * k.max(1.0));
        }
    }

    #[test]
    fn von_mises_fit_has_zero_score() {
        let path = simulate(1.0, 200, 11);
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        let fit = fit_mle(&spec, &[path], None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let sn = fit.score.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(sn < 1e-6 * 3.0, "score norm {sn}");
        for (i, truth) in [0.0, 1.0, 1.0 / two_pi::<f64>()].iter().enumerate() {
            let se = fit.standard_errors[i].unwrap();
            let mut e = fit.estimate.natural()[i] - truth;
            if i == 0 {
                e = centered_unit(e / two_pi::<f64>()) * two_pi::<f64>();
            }
            assert!(e.abs() < 4.0 * se, "coordinate {i}: {e} vs se {se}");
        }
    }

    #[test]
    fn uniform_fit_matches_golden_section() {
        let m = DiffusionModel::circular(CircularDensity::uniform(), 0.2).unwrap();
        let path = m.simulate_exact(&[1.0], 150, 0.3, &mut seeded(5)).unwrap();
        let spec = ModelSpec::diffusion(FamilyKind::Uniform);
        let fit = fit_mle(&spec, std::slice::from_ref(&path), None, &FitOptions::default()).unwrap();
        let s = golden_section(|s| log_likelihood(&spec, &[s], &path).unwrap(), 0.05, 1.0, 1e-10);
        assert!((fit.estimate.sigma - s).abs() < 1e-6);
    }

    #[test]
    fn start_at_optimum_converges_at_once() {
        let path = simulate(2.0, 200, 3);
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        let first = fit_mle(&spec, std::slice::from_ref(&path), None, &FitOptions::default()).unwrap();
        let again = fit_mle(&spec, &[path], Some(&first.estimate), &FitOptions::default()).unwrap();
        assert!(again.iterations <= 2);
        for (a, b) in first.estimate.natural().iter().zip(again.estimate.natural()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fisher_is_symmetric_psd() {
        let path = simulate(1.0, 100, 21);
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        let fit = fit_mle(&spec, &[path], None, &FitOptions::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(fit.fisher[i][j], fit.fisher[j][i]);
            }
        }
        assert!(fit.fisher_min_eigenvalue > 0.0);
    }

    #[test]
    fn mixture_fit_runs_multistart() {
        let d = CircularDensity::von_mises_mixture(vec![
            crate::VonMisesComponent { weight: 0.5, mu: 1.0, kappa: 4.0 },
            crate::VonMisesComponent { weight: 0.5, mu: 4.0, kappa: 4.0 },
        ])
        .unwrap();
        let m = DiffusionModel::circular(d, 0.1).unwrap().with_cache().unwrap();
        let mut rng = seeded(17);
        let x0 = m.sample_stationary(&mut rng).unwrap();
        let path = m.simulate_exact(&x0, 400, 0.5, &mut rng).unwrap();
        let spec = ModelSpec::diffusion(FamilyKind::VonMisesMixture { components: 2 });
        let fit = fit_mle(&spec, &[path], None, &FitOptions::default()).unwrap();
        let b = &fit.estimate.beta;
        // ascending means after canonicalisation
        assert!(b[1] < b[3]);
        assert!((b[1] - 1.0).abs() < 0.4 && (b[3] - 4.0).abs() < 0.4, "{b:?}");
    }

    #[test]
    fn too_short_path_is_rejected() {
        let path = PathSample::new(0.5, 1, vec![0.0, 1.0]).unwrap();
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        assert!(fit_mle(&spec, &[path], None, &FitOptions::default()).is_err());
    }
}
