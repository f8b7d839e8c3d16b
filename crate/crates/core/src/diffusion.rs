//! Circular and toroidal diffusions with a prescribed stationary density.
//!
//! With `X_t = R(θ₀) + Σ^{1/2} W_t`, the process `Θ_t = R⁻¹(X_t) mod 2π` is
//! a diffusion whose stationary density is `f`, and its transition density is
//! `f(θ₂) Σ_{k∈ℤ^p} φ_{tΣ}(R(θ₂) − R(θ₁) + k)`. For `p = 1`, `R = F` and
//! `Σ = σ²`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::circular::CircularDensity;
use crate::error::{ensure_finite, Error, Result};
use crate::linalg;
use crate::scalar::{lit, reduce_angle, two_pi, wrap_angle};
use crate::special::log_lattice_gaussian_sum;
use crate::toroidal::{CovarianceSpec, RosenblattMap, ToroidalDensity, ToroidalStructure};
use crate::Real;

/// Coefficients refuse evaluation where the density is below this floor.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

const FD_STEP: f64 = 1e-5;
const FD_STEP_SECOND: f64 = 1e-4;

/// A Markov transition density with a known stationary density.
pub trait TransitionKernel<T: Real = f64> {
    fn dim(&self) -> usize;

    /// `log p_t(to | from)`.
    fn log_transition_density(&self, from: &[T], to: &[T], t: T) -> Result<T>;

    fn transition_density(&self, from: &[T], to: &[T], t: T) -> Result<T> {
        Ok(self.log_transition_density(from, to, t)?.exp())
    }

    /// Stationary density `f`.
    fn stationary_pdf(&self, x: &[T]) -> T;
}

/// Discretely observed trajectory `Θ₀, Θ_Δ, …, Θ_{nΔ}` on `T^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    delta: f64,
    dim: usize,
    /// `(n+1) × p`, row-major, every entry in `[0, 2π)`
    angles: Vec<f64>,
    label: Option<String>,
}

impl PathSample {
    /// Builds a path from row-major angles; entries are wrapped into
    /// `[0, 2π)`.
    pub fn new(delta: f64, dim: usize, angles: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if dim == 0 || angles.is_empty() || !angles.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} angles do not form rows of width {dim}",
                angles.len()
            )));
        }
        let mut angles = angles;
        for a in angles.iter_mut() {
            ensure_finite(*a, "angle")?;
            *a = wrap_angle(*a);
        }
        Ok(Self {
            delta,
            dim,
            angles,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of transitions `n`.
    pub fn n_steps(&self) -> usize {
        self.angles.len() / self.dim - 1
    }

    /// State at observation `i` (row `0` is the initial condition).
    pub fn state(&self, i: usize) -> &[f64] {
        &self.angles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Observation times `0, Δ, …, nΔ`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| i as f64 * self.delta).collect()
    }

    /// Sub-path made of observations `start..=end`.
    pub fn segment(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_steps() {
            return Err(Error::Domain(format!(
                "segment {start}..={end} outside a path with {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            delta: self.delta,
            dim: self.dim,
            angles: self.angles[start * self.dim..(end + 1) * self.dim].to_vec(),
            label: self.label.clone(),
        })
    }

    /// First coordinate of every observation.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.angles.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

/// Stationary density of a diffusion.
#[derive(Clone, Debug)]
pub enum Stationary<T: Real = f64> {
    Circular(CircularDensity<T>),
    Toroidal(RosenblattMap<T>),
}

/// Drift vector and row-major diffusion matrix of the SDE.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeCoefficients<T: Real = f64> {
    pub drift: Vec<T>,
    pub diffusion: Vec<T>,
}

/// Diffusion on `T^p` with stationary density `f` and covariance `Σ`.
#[derive(Clone, Debug)]
pub struct DiffusionModel<T: Real = f64> {
    stationary: Stationary<T>,
    cov: CovarianceSpec<T>,
}

impl<T: Real> DiffusionModel<T> {
    /// Circular diffusion `dΘ = −σ²f′/(2f³)dt + (σ/f)dW` with normalized `f`.
    pub fn circular(density: CircularDensity<T>, sigma: T) -> Result<Self> {
        Ok(Self {
            stationary: Stationary::Circular(density),
            cov: CovarianceSpec::isotropic(sigma, 1)?,
        })
    }

    /// Circular diffusion written with the density's kernel `k = f/c`
    /// (normalizing constant absorbed into the volatility):
    /// `dΘ = −σ²k′/(2k³)dt + (σ/k)dW`. Equivalent to [`circular`](Self::circular)
    /// with volatility `σ·c`.
    pub fn with_unnormalized_volatility(density: CircularDensity<T>, sigma: T) -> Result<Self> {
        let c = density.kernel_constant();
        Self::circular(density, sigma * c)
    }

    pub fn toroidal(density: ToroidalDensity<T>, cov: CovarianceSpec<T>) -> Result<Self> {
        if density.dim() != cov.dim() {
            return Err(Error::InvalidParameter(format!(
                "density has dimension {} but covariance is {}x{}",
                density.dim(),
                cov.dim(),
                cov.dim()
            )));
        }
        Ok(Self {
            stationary: Stationary::Toroidal(RosenblattMap::new(density)),
            cov,
        })
    }

    /// Builds the inversion cache of a circular density (no-op otherwise).
    pub fn with_cache(self) -> Result<Self> {
        Ok(match self.stationary {
            Stationary::Circular(d) => Self {
                stationary: Stationary::Circular(d.with_cache()?),
                cov: self.cov,
            },
            other => Self {
                stationary: other,
                cov: self.cov,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn stationary(&self) -> &Stationary<T> {
        &self.stationary
    }

    pub fn covariance(&self) -> &CovarianceSpec<T> {
        &self.cov
    }

    /// `σ` of a one-dimensional model.
    pub fn sigma(&self) -> T {
        self.cov.matrix()[0].sqrt()
    }

    pub fn circular_density(&self) -> Option<&CircularDensity<T>> {
        match &self.stationary {
            Stationary::Circular(d) => Some(d),
            Stationary::Toroidal(_) => None,
        }
    }

    /// `f(x)`.
    pub fn pdf(&self, x: &[T]) -> T {
        match &self.stationary {
            Stationary::Circular(d) => d.pdf(x[0]),
            Stationary::Toroidal(r) => r.density().pdf(x),
        }
    }

    /// `R(x)` (or `F(x)` for `p = 1`) on the real line.
    pub fn transform(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        match &self.stationary {
            Stationary::Circular(d) => {
                ensure_finite(x[0], "angle")?;
                Ok(vec![d.cdf(x[0])])
            }
            Stationary::Toroidal(r) => r.forward(x),
        }
    }

    /// `R⁻¹(y)` on the real line.
    pub fn inverse_transform(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_dim(y)?;
        match &self.stationary {
            Stationary::Circular(d) => Ok(vec![d.inverse_cdf(y[0])?]),
            Stationary::Toroidal(r) => r.inverse(y),
        }
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Drift and diffusion matrix at `θ`.
    pub fn sde_coefficients(&self, theta: &[T]) -> Result<SdeCoefficients<T>> {
        self.check_dim(theta)?;
        match &self.stationary {
            Stationary::Circular(d) => {
                let f = d.pdf(theta[0]);
                self.check_floor(f, theta)?;
                let fp = d.pdf_derivative(theta[0]);
                let s2 = self.cov.matrix()[0];
                let two = lit::<T>(2.0);
                Ok(SdeCoefficients {
                    drift: vec![-s2 * fp / (two * f * f * f)],
                    diffusion: vec![self.sigma() / f],
                })
            }
            Stationary::Toroidal(r) => match r.density().structure() {
                ToroidalStructure::Product(m) => self.product_coefficients(m, theta),
                _ if self.dim() == 2 => self.bivariate_coefficients(r.density(), theta),
                _ => Err(Error::Domain(
                    "SDE coefficients of non-product densities are available for p = 2 only".into(),
                )),
            },
        }
    }

    fn check_floor(&self, f: T, theta: &[T]) -> Result<()> {
        if !(f >= lit(POSITIVITY_FLOOR)) {
            return Err(Error::Singularity {
                density: f.to_f64().unwrap_or(f64::NAN),
                location: format!("{theta:?}"),
            });
        }
        Ok(())
    }

    /// Diagonal inverse-Jacobian form of a product density.
    fn product_coefficients(&self, m: &[CircularDensity<T>], theta: &[T]) -> Result<SdeCoefficients<T>> {
        let p = m.len();
        let sigma = self.cov.matrix();
        let l = self.cov.factor();
        let two = lit::<T>(2.0);
        let mut drift = Vec::with_capacity(p);
        let mut diffusion = vec![T::zero(); p * p];
        for j in 0..p {
            let f = m[j].pdf(theta[j]);
            self.check_floor(f, theta)?;
            let fp = m[j].pdf_derivative(theta[j]);
            drift.push(-sigma[j * p + j] * fp / (two * f * f * f));
            for c in 0..p {
                diffusion[j * p + c] = l[j * p + c] / f;
            }
        }
        Ok(SdeCoefficients { drift, diffusion })
    }

    /// General `p = 2` form `D(R⁻¹)Σ^{1/2}` with Itô drift from the Hessians
    /// of `R⁻¹`, using central differences of the conditional distribution.
    fn bivariate_coefficients(&self, d: &ToroidalDensity<T>, theta: &[T]) -> Result<SdeCoefficients<T>> {
        let (x1, x2) = (reduce_angle(theta[0]).0, reduce_angle(theta[1]).0);
        let f = d.pdf(&[x1, x2]);
        self.check_floor(f, theta)?;
        let hs = lit::<T>(FD_STEP);
        let hl = lit::<T>(FD_STEP_SECOND);
        let two = lit::<T>(2.0);
        let f1 = |a: T| d.conditional_pdf(1, a, &[]);
        let f2 = |a: T, b: T| d.conditional_pdf(2, b, &[a]);
        let cdf2 = |a: T, b: T| d.conditional_cdf(2, b, &[a]);
        // h(a, b) = ∂₁F₂(b|a) / (f₁(a) f₂(b|a))
        let h = |a: T, b: T| -> Result<T> {
            let d1 = (cdf2(a + hs, b)? - cdf2(a - hs, b)?) / (two * hs);
            Ok(d1 / (f1(a)? * f2(a, b)?))
        };
        let v1 = f1(x1)?;
        let v2 = f2(x1, x2)?;
        let v1p = (f1(x1 + hs)? - f1(x1 - hs)?) / (two * hs);
        let v2p = (f2(x1, x2 + hs)? - f2(x1, x2 - hs)?) / (two * hs);
        let d1f2 = (f2(x1 + hs, x2)? - f2(x1 - hs, x2)?) / (two * hs);
        let hv = h(x1, x2)?;
        let d1h = (h(x1 + hl, x2)? - h(x1 - hl, x2)?) / (two * hl);
        let d2h = d1f2 / (v1 * v2) - hv * v2p / v2;
        let b = d1h / v1 - d2h * hv;

        let dg = [T::one() / v1, T::zero(), -hv, T::one() / v2];
        let h1 = [-v1p / (v1 * v1 * v1), T::zero(), T::zero(), T::zero()];
        let cross = -(d1f2 / v1 - v2p * hv) / (v2 * v2);
        let h2 = [-b, cross, cross, -v2p / (v2 * v2 * v2)];
        let s = self.cov.matrix();
        let half = lit::<T>(0.5);
        let contract = |hm: &[T; 4]| half * (0..4).map(|i| s[i] * hm[i]).sum::<T>();
        let l = self.cov.factor();
        let diffusion = vec![
            dg[0] * l[0],
            T::zero(),
            dg[2] * l[0] + dg[3] * l[2],
            dg[3] * l[3],
        ];
        Ok(SdeCoefficients {
            drift: vec![contract(&h1), contract(&h2)],
            diffusion,
        })
    }

    /// The general `p = 2` coefficient route regardless of structure; used
    /// to cross-check it against the closed forms of product densities.
    pub fn bivariate_coefficients_numeric(&self, theta: &[T]) -> Result<SdeCoefficients<T>> {
        match &self.stationary {
            Stationary::Toroidal(r) if self.dim() == 2 => self.bivariate_coefficients(r.density(), theta),
            _ => Err(Error::Domain("numeric coefficients need a bivariate model".into())),
        }
    }
}

impl<T: Real> TransitionKernel<T> for DiffusionModel<T> {
    fn dim(&self) -> usize {
        self.cov.dim()
    }

    fn log_transition_density(&self, from: &[T], to: &[T], t: T) -> Result<T> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(Error::Domain(format!("elapsed time must be > 0, got {t}")));
        }
        let r1 = self.transform(from)?;
        let r2 = self.transform(to)?;
        let d: Vec<T> = r2.iter().zip(&r1).map(|(&a, &b)| a - b).collect();
        let log_sum = log_lattice_gaussian_sum(&d, &self.cov.scaled(t))?;
        Ok(log_sum + self.pdf(to).ln())
    }

    fn stationary_pdf(&self, x: &[T]) -> T {
        self.pdf(x)
    }
}

/// A simulated path together with its unwrapped transform-space trajectory.
#[derive(Clone, Debug)]
pub struct TracedPath {
    pub path: PathSample,
    /// `(n+1) × p` values of `X_t = R(θ₀) + Σ^{1/2}W_t`, row-major
    pub transform: Vec<f64>,
}

impl DiffusionModel<f64> {
    /// Exact simulation through `Θ_t = R⁻¹(Σ^{1/2}W_t + R(θ₀)) mod 2π`.
    pub fn simulate_exact<R: Rng + ?Sized>(
        &self,
        theta0: &[f64],
        n: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<PathSample> {
        Ok(self.simulate_exact_traced(theta0, n, delta, rng)?.path)
    }

    pub fn simulate_exact_traced<R: Rng + ?Sized>(
        &self,
        theta0: &[f64],
        n: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<TracedPath> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        let p = self.dim();
        let start: Vec<f64> = theta0.iter().map(|&a| wrap_angle(a)).collect();
        let mut x = self.transform(&start)?;
        let l = self.cov.factor();
        let sd = delta.sqrt();
        let mut angles = Vec::with_capacity((n + 1) * p);
        let mut transform = Vec::with_capacity((n + 1) * p);
        angles.extend_from_slice(&start);
        transform.extend_from_slice(&x);
        let mut z = vec![0.0; p];
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = sd * rng.sample::<f64, _>(StandardNormal);
            }
            let inc = linalg::lower_mul(l, &z);
            for (xi, dx) in x.iter_mut().zip(&inc) {
                *xi += dx;
            }
            let theta = self.inverse_transform(&x)?;
            angles.extend(theta.iter().map(|&a| wrap_angle(a)));
            transform.extend_from_slice(&x);
        }
        Ok(TracedPath {
            path: PathSample::new(delta, p, angles)?,
            transform,
        })
    }

    /// Euler–Maruyama integration of the SDE with `substeps` steps per
    /// observation interval, wrapping after each step.
    pub fn simulate_euler<R: Rng + ?Sized>(
        &self,
        theta0: &[f64],
        n: usize,
        delta: f64,
        substeps: usize,
        rng: &mut R,
    ) -> Result<PathSample> {
        if substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be >= 1".into()));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        let p = self.dim();
        let h = delta / substeps as f64;
        let sh = h.sqrt();
        let mut theta: Vec<f64> = theta0.iter().map(|&a| wrap_angle(a)).collect();
        self.check_dim(&theta)?;
        let mut angles = Vec::with_capacity((n + 1) * p);
        angles.extend_from_slice(&theta);
        let mut z = vec![0.0; p];
        for _ in 0..n {
            for _ in 0..substeps {
                let c = self.sde_coefficients(&theta)?;
                for v in z.iter_mut() {
                    *v = sh * rng.sample::<f64, _>(StandardNormal);
                }
                for j in 0..p {
                    let noise: f64 = (0..p).map(|k| c.diffusion[j * p + k] * z[k]).sum();
                    theta[j] = wrap_angle(theta[j] + c.drift[j] * h + noise);
                }
            }
            angles.extend_from_slice(&theta);
        }
        PathSample::new(delta, p, angles)
    }

    /// One draw from the stationary law (inverse Rosenblatt map of uniforms).
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        let x = self.inverse_transform(&u)?;
        Ok(x.into_iter().map(wrap_angle).collect())
    }
}

/// `2π`-wrapped difference helper shared by tests and diagnostics.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(two_pi::<f64>() - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::VonMisesComponent;
    use crate::quadrature::integrate;
    use crate::rng::seeded;
    use crate::special::{wrapped_normal_pdf, WrappedNormalParams};
    use crate::toroidal::BvmParams;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn vm(mu: f64, kappa: f64, sigma: f64) -> DiffusionModel {
        DiffusionModel::circular(CircularDensity::von_mises(mu, kappa).unwrap(), sigma).unwrap()
    }

    #[test]
    fn uniform_tpd_is_wrapped_normal() {
        let sigma = 0.3;
        let m = DiffusionModel::circular(CircularDensity::uniform(), sigma).unwrap();
        for &(a, b, t) in &[(0.2, 1.1, 0.5), (6.0, 0.1, 2.0), (3.0, 3.0, 0.01)] {
            let wn = WrappedNormalParams::new(a, (TAU * sigma).powi(2) * t).unwrap();
            let direct = wrapped_normal_pdf(b, &wn).unwrap();
            let tpd = m.transition_density(&[a], &[b], t).unwrap();
            assert!((tpd - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn tpd_rejects_nonpositive_time() {
        assert!(vm(0.0, 1.0, 0.5).transition_density(&[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn tpd_normalizes() {
        let m = vm(0.0, 2.0, 0.25);
        for &t in &[0.05, 1.0, 10.0] {
            let i = integrate(|x| m.transition_density(&[FRAC_PI_2], &[x], t).unwrap(), 0.0, TAU, 1e-12, 1e-12)
                .unwrap();
            assert!((i.value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn von_mises_coefficients() {
        let sigma = 0.7f64;
        let kappa = 1.8;
        let d = CircularDensity::von_mises(0.0, kappa).unwrap();
        let m = DiffusionModel::with_unnormalized_volatility(d, sigma).unwrap();
        let c = m.sde_coefficients(&[0.0]).unwrap();
        assert!(c.drift[0].abs() < 1e-15);
        let c = m.sde_coefficients(&[FRAC_PI_2]).unwrap();
        assert!((c.drift[0] - sigma * sigma * kappa / 2.0).abs() < 1e-12);
        assert!((c.diffusion[0] - sigma).abs() < 1e-12);
    }

    #[test]
    fn uniform_coefficients_are_brownian() {
        let m = DiffusionModel::circular(CircularDensity::uniform(), 0.4).unwrap();
        let c = m.sde_coefficients(&[1.0]).unwrap();
        assert_eq!(c.drift[0], 0.0);
        assert!((c.diffusion[0] - TAU * 0.4).abs() < 1e-14);
    }

    #[test]
    fn singularity_below_floor() {
        let d = CircularDensity::von_mises(0.0, 40.0).unwrap();
        let m = DiffusionModel::circular(d, 1.0).unwrap();
        assert!(matches!(m.sde_coefficients(&[PI]), Err(Error::Singularity { .. })));
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let mut rng = seeded(1);
        let p = vm(0.0, 1.0, 0.5).simulate_exact(&[1.0], 0, 0.1, &mut rng).unwrap();
        assert_eq!(p.n_steps(), 0);
        assert_eq!(p.state(0), &[1.0]);
        assert!(vm(0.0, 1.0, 0.5).simulate_euler(&[1.0], 3, 0.1, 0, &mut rng).is_err());
    }

    #[test]
    fn uniform_transform_increments_have_brownian_variance() {
        let sigma = 0.2;
        let delta = 0.5;
        let m = DiffusionModel::circular(CircularDensity::uniform(), sigma).unwrap();
        let mut rng = seeded(11);
        let tr = m.simulate_exact_traced(&[0.0], 20_000, delta, &mut rng).unwrap();
        let inc: Vec<f64> = tr.transform.windows(2).map(|w| w[1] - w[0]).collect();
        let var = inc.iter().map(|x| x * x).sum::<f64>() / inc.len() as f64;
        let target = sigma * sigma * delta;
        // sd of the variance estimate is sqrt(2/n)·target
        assert!((var - target).abs() < 4.0 * (2.0 / inc.len() as f64).sqrt() * target);
    }

    #[test]
    fn product_consistency_of_toroidal_tpd() {
        let a = CircularDensity::von_mises(1.0, 2.0).unwrap();
        let b = CircularDensity::von_mises_mixture(vec![
            VonMisesComponent { weight: 0.5, mu: 0.0, kappa: 3.0 },
            VonMisesComponent { weight: 0.5, mu: 3.0, kappa: 1.0 },
        ])
        .unwrap();
        let cov = CovarianceSpec::new(vec![0.09, 0.0, 0.0, 0.25], 2).unwrap();
        let m = DiffusionModel::toroidal(ToroidalDensity::product(vec![a.clone(), b.clone()]).unwrap(), cov).unwrap();
        let m1 = DiffusionModel::circular(a, 0.3).unwrap();
        let m2 = DiffusionModel::circular(b, 0.5).unwrap();
        for &(x, y, t) in &[([0.1f64, 2.0], [1.0, 5.0], 0.3), ([4.0, 6.0], [2.0, 0.5], 2.0)] {
            let joint = m.transition_density(&x, &y, t).unwrap();
            let prod = m1.transition_density(&x[..1], &y[..1], t).unwrap()
                * m2.transition_density(&x[1..], &y[1..], t).unwrap();
            assert!((joint - prod).abs() < 1e-9 * prod.max(1.0));
        }
    }

    #[test]
    fn numeric_bivariate_coefficients_match_product_form() {
        let cov = CovarianceSpec::new(vec![0.09f64, 0.03, 0.03, 0.25], 2).unwrap();
        let bvm = ToroidalDensity::bivariate_von_mises(BvmParams::new(0.5f64, 2.0, 1.5, 0.8, 0.0)).unwrap();
        let prod = ToroidalDensity::product(vec![
            CircularDensity::von_mises(0.5, 1.5).unwrap(),
            CircularDensity::von_mises(2.0, 0.8).unwrap(),
        ])
        .unwrap();
        let mb = DiffusionModel::toroidal(bvm, cov.clone()).unwrap();
        let mp = DiffusionModel::toroidal(prod, cov).unwrap();
        for x in [[0.3f64, 4.0], [2.5, 1.0], [5.0, 5.5]] {
            let a = mb.sde_coefficients(&x).unwrap();
            let b = mp.sde_coefficients(&x).unwrap();
            for (u, v) in a.drift.iter().zip(&b.drift) {
                assert!((u - v).abs() < 1e-4 * v.abs().max(1.0), "{a:?} {b:?}");
            }
            for (u, v) in a.diffusion.iter().zip(&b.diffusion) {
                assert!((u - v).abs() < 1e-6 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn path_segment_and_columns() {
        let p = PathSample::new(0.5, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 7.0]).unwrap();
        assert_eq!(p.n_steps(), 2);
        assert!((p.state(2)[1] - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(p.column(0), vec![0.0, 2.0, 4.0]);
        let s = p.segment(1, 2).unwrap();
        assert_eq!(s.n_steps(), 1);
        assert!(p.segment(2, 2).is_err());
        assert!(angular_distance(0.1, TAU - 0.1) < 0.2 + 1e-15);
    }
}
