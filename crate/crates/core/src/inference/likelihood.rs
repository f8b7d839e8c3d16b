//! Exact log-likelihood and analytic score of a circular path.

use crate::circular::{CircularDensity, FamilyKind};
use crate::diffusion::PathSample;
use crate::error::{Error, Result};
use crate::scalar::{centered_unit, two_pi};

use super::params::{ModelSpec, ProcessKind};

/// Below this variance the winding sum is evaluated directly, above it by
/// its Fourier series.
const DIRECT_VARIANCE_LIMIT: f64 = 0.1;

/// Winding sums over `h_k = d + k` with `φ` the `N(0, v)` density:
/// `log S₀` with `S₀ = Σ φ(h_k)`, and the ratios `S₁/S₀ = Σ h_k φ / S₀`,
/// `S₂/S₀ = Σ h_k² φ / S₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindingMoments {
    pub log_s0: f64,
    pub r1: f64,
    pub r2: f64,
}

pub fn winding_moments(d: f64, v: f64) -> WindingMoments {
    let c = centered_unit(d);
    if v < DIRECT_VARIANCE_LIMIT {
        let sd = v.sqrt();
        let reach = (8.0 * sd).ceil() as i64 + 1;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for k in -reach..=reach {
            let h = c + k as f64;
            // scaled by the k = 0 term so nothing underflows
            let w = (-(h * h - c * c) / (2.0 * v)).exp();
            s0 += w;
            s1 += h * w;
            s2 += h * h * w;
        }
        WindingMoments {
            log_s0: s0.ln() - c * c / (2.0 * v) - 0.5 * (two_pi::<f64>() * v).ln(),
            r1: s1 / s0,
            r2: s2 / s0,
        }
    } else {
        // S₀ = 1 + 2Σ e^{−2π²m²v} cos(2πmd); S₁ = −v S₀′, S₂ = v² S₀″ + v S₀
        let tau = two_pi::<f64>();
        let top = ((40.0 / (2.0 * std::f64::consts::PI.powi(2) * v)).sqrt()).ceil() as usize + 1;
        let (mut s0, mut ds0, mut dds0) = (1.0, 0.0, 0.0);
        for m in 1..=top {
            let w = tau * m as f64;
            let e = 2.0 * (-0.5 * w * w * v).exp();
            let (s, co) = (w * c).sin_cos();
            s0 += e * co;
            ds0 -= e * w * s;
            dds0 -= e * w * w * co;
        }
        WindingMoments {
            log_s0: s0.ln(),
            r1: -v * ds0 / s0,
            r2: v * v * dds0 / s0 + v,
        }
    }
}

/// Per-state quantities reused by every transition touching the state.
struct StateTerms {
    cdf: f64,
    log_pdf: f64,
    cdf_grad: Vec<f64>,
    log_pdf_grad: Vec<f64>,
}

fn state_terms(density: &CircularDensity, theta: f64, gradients: bool) -> StateTerms {
    let uniform = density.kind() == FamilyKind::Uniform;
    StateTerms {
        cdf: if uniform { theta / two_pi::<f64>() } else { density.cdf_reduced(theta) },
        log_pdf: density.log_pdf(theta),
        cdf_grad: if gradients { density.cdf_gradient(theta) } else { vec![] },
        log_pdf_grad: if gradients { density.log_pdf_gradient(theta) } else { vec![] },
    }
}

fn split(spec: &ModelSpec, xi: &[f64]) -> Result<(CircularDensity, f64)> {
    if xi.len() != spec.dim() {
        return Err(Error::InvalidParameter(format!(
            "expected {} parameters, got {}",
            spec.dim(),
            xi.len()
        )));
    }
    let sigma = xi[xi.len() - 1];
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let density = CircularDensity::from_beta_quiet(spec.family, &xi[..xi.len() - 1])?;
    Ok((density, sigma))
}

fn check_path(path: &PathSample) -> Result<()> {
    if path.dim() != 1 {
        return Err(Error::Domain(format!(
            "circular likelihood needs a one-dimensional path, got dimension {}",
            path.dim()
        )));
    }
    if path.n_steps() == 0 {
        return Err(Error::Domain("likelihood needs at least one transition".into()));
    }
    Ok(())
}

/// Log transition density of one step from the transform gap `d` and
/// elapsed time.
fn log_kernel(process: ProcessKind, d: f64, sigma: f64, delta: f64) -> f64 {
    match process {
        ProcessKind::Diffusion => winding_moments(d, sigma * sigma * delta).log_s0,
        ProcessKind::Jump => {
            let a = two_pi::<f64>() * delta * sigma;
            let rho = (-a).exp();
            let one_m_rho2 = -(-2.0 * a).exp_m1();
            let one_m_rho = -(-a).exp_m1();
            let s = (std::f64::consts::PI * d).sin();
            one_m_rho2.ln() - (one_m_rho * one_m_rho + 4.0 * rho * s * s).ln()
        }
    }
}

/// `(∂_d, ∂_σ)` of [`log_kernel`].
fn kernel_partials(process: ProcessKind, d: f64, sigma: f64, delta: f64) -> (f64, f64) {
    match process {
        ProcessKind::Diffusion => {
            let v = sigma * sigma * delta;
            let m = winding_moments(d, v);
            (-m.r1 / v, -1.0 / sigma + m.r2 / (sigma * sigma * sigma * delta))
        }
        ProcessKind::Jump => {
            let a = two_pi::<f64>() * delta * sigma;
            let rho = (-a).exp();
            let one_m_rho2 = -(-2.0 * a).exp_m1();
            let one_m_rho = -(-a).exp_m1();
            let pd = std::f64::consts::PI * d;
            let s = pd.sin();
            let b = one_m_rho * one_m_rho + 4.0 * rho * s * s;
            let dd = -4.0 * std::f64::consts::PI * rho * (2.0 * pd).sin() / b;
            let drho = -2.0 * rho / one_m_rho2 - (-2.0 * one_m_rho + 4.0 * s * s) / b;
            (dd, drho * (-two_pi::<f64>() * delta * rho))
        }
    }
}

/// `Σᵢ log p_Δ(θᵢ | θᵢ₋₁)`; the initial state does not contribute.
pub fn log_likelihood(spec: &ModelSpec, xi: &[f64], path: &PathSample) -> Result<f64> {
    check_path(path)?;
    let (density, sigma) = split(spec, xi)?;
    let x = path.angles();
    let terms: Vec<StateTerms> = x.iter().map(|&t| state_terms(&density, t, false)).collect();
    let mut ll = 0.0;
    for i in 1..x.len() {
        let d = terms[i].cdf - terms[i - 1].cdf;
        ll += log_kernel(spec.process, d, sigma, path.delta()) + terms[i].log_pdf;
    }
    Ok(ll)
}

/// Per-transition scores `∂_ξ log p_Δ(θᵢ | θᵢ₋₁)`, one row per transition.
pub fn transition_scores(spec: &ModelSpec, xi: &[f64], path: &PathSample) -> Result<Vec<Vec<f64>>> {
    Ok(log_likelihood_and_scores(spec, xi, path)?.1)
}

/// Log-likelihood together with the per-transition scores.
pub fn log_likelihood_and_scores(
    spec: &ModelSpec,
    xi: &[f64],
    path: &PathSample,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_path(path)?;
    let (density, sigma) = split(spec, xi)?;
    let x = path.angles();
    let terms: Vec<StateTerms> = x.iter().map(|&t| state_terms(&density, t, true)).collect();
    let q = spec.dim();
    let nb = q - 1;
    let mut ll = 0.0;
    let mut rows = Vec::with_capacity(x.len() - 1);
    for i in 1..x.len() {
        let (a, b) = (&terms[i - 1], &terms[i]);
        let d = b.cdf - a.cdf;
        ll += log_kernel(spec.process, d, sigma, path.delta()) + b.log_pdf;
        let (dd, ds) = kernel_partials(spec.process, d, sigma, path.delta());
        let mut row = Vec::with_capacity(q);
        for j in 0..nb {
            row.push(b.log_pdf_grad[j] + dd * (b.cdf_grad[j] - a.cdf_grad[j]));
        }
        row.push(ds);
        rows.push(row);
    }
    Ok((ll, rows))
}

/// Analytic score `∂_ξ ℓ`.
pub fn score(spec: &ModelSpec, xi: &[f64], path: &PathSample) -> Result<Vec<f64>> {
    Ok(log_likelihood_with_score(spec, xi, path)?.1)
}

/// Log-likelihood and its gradient in natural coordinates.
pub fn log_likelihood_with_score(spec: &ModelSpec, xi: &[f64], path: &PathSample) -> Result<(f64, Vec<f64>)> {
    let (ll, rows) = log_likelihood_and_scores(spec, xi, path)?;
    let mut g = vec![0.0; spec.dim()];
    for r in &rows {
        for (gj, v) in g.iter_mut().zip(r) {
            *gj += v;
        }
    }
    Ok((ll, g))
}

/// Sum over independent replicates.
pub fn replicate_log_likelihood_with_score(
    spec: &ModelSpec,
    xi: &[f64],
    paths: &[PathSample],
) -> Result<(f64, Vec<f64>)> {
    let mut ll = 0.0;
    let mut g = vec![0.0; spec.dim()];
    for p in paths {
        let (l, s) = log_likelihood_with_score(spec, xi, p)?;
        ll += l;
        for (a, b) in g.iter_mut().zip(&s) {
            *a += b;
        }
    }
    Ok((ll, g))
}

/// Stationary log-likelihood `Σ log f(θᵢ)` and its `β`-gradient, used to
/// initialise the fit.
pub fn stationary_log_likelihood(
    family: FamilyKind,
    beta: &[f64],
    angles: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let density = CircularDensity::from_beta_quiet(family, beta)?;
    let mut ll = 0.0;
    let mut g = vec![0.0; beta.len()];
    for &t in angles {
        ll += density.log_pdf(t);
        for (a, b) in g.iter_mut().zip(density.log_pdf_gradient(t)) {
            *a += b;
        }
    }
    Ok((ll, g))
}
