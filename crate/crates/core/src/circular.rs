//! Parametric circular densities `f`, their derivative `f′`, the circular
//! distribution function `F` extended to the real line, and `F⁻¹`.
//!
//! `F(x) = ∫₀ˣ f` satisfies `F(x + 2π) = F(x) + 1`, so it is a bijection of
//! the real line and the inverse obeys `F⁻¹(y) = F⁻¹(y mod 1) + 2π⌊y⌋`.
//! The von Mises distribution function is evaluated through its Fourier
//! series in the Bessel ratios `I_m(κ)/I₀(κ)`; the wrapped Cauchy one through
//! its arctangent antiderivative.

use rand::Rng;

use crate::error::{ensure_finite, Error, Result};
use crate::roots::solve_increasing;
use crate::scalar::{lit, log_sum_exp, reduce_angle, reduce_unit, two_pi};
use crate::special::{bessel_i_ratios, log_bessel_i0};
use crate::Real;

/// Density floor below which a warning is emitted at construction.
const LOW_DENSITY_WARNING: f64 = 1e-6;

/// One von Mises component of a mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VonMisesComponent<T: Real = f64> {
    pub weight: T,
    pub mu: T,
    pub kappa: T,
}

/// The supported parametric families.
#[derive(Clone, Debug, PartialEq)]
pub enum CircularFamily<T: Real = f64> {
    Uniform,
    VonMises { mu: T, kappa: T },
    WrappedCauchy { mu: T, rho: T },
    VonMisesMixture(Vec<VonMisesComponent<T>>),
}

/// Family label without parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Uniform,
    VonMises,
    WrappedCauchy,
    VonMisesMixture { components: usize },
}

impl FamilyKind {
    /// Length of the density parameter vector β.
    pub fn beta_len(&self) -> usize {
        match *self {
            FamilyKind::Uniform => 0,
            FamilyKind::VonMises | FamilyKind::WrappedCauchy => 2,
            FamilyKind::VonMisesMixture { components } => 3 * components - 1,
        }
    }

    /// Names of the β coordinates.
    pub fn beta_names(&self) -> Vec<String> {
        match *self {
            FamilyKind::Uniform => vec![],
            FamilyKind::VonMises => vec!["mu".into(), "kappa".into()],
            FamilyKind::WrappedCauchy => vec!["mu".into(), "rho".into()],
            FamilyKind::VonMisesMixture { components } => {
                let mut v: Vec<String> = (1..components).map(|j| format!("w{j}")).collect();
                for j in 1..=components {
                    v.push(format!("mu{j}"));
                    v.push(format!("kappa{j}"));
                }
                v
            }
        }
    }
}

impl<T: Real> CircularFamily<T> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            CircularFamily::Uniform => FamilyKind::Uniform,
            CircularFamily::VonMises { .. } => FamilyKind::VonMises,
            CircularFamily::WrappedCauchy { .. } => FamilyKind::WrappedCauchy,
            CircularFamily::VonMisesMixture(c) => FamilyKind::VonMisesMixture {
                components: c.len(),
            },
        }
    }
}

/// Precomputed pieces of one von Mises term.
#[derive(Clone, Debug)]
pub(crate) struct VmTerm<T: Real> {
    weight: T,
    mu: T,
    kappa: T,
    log_norm: T,
    /// `A_m = I_m(κ)/I₀(κ)`, `m = 0..=M+1`
    ratios: Vec<T>,
    /// number of series terms used in `F`
    terms: usize,
}

impl<T: Real> VmTerm<T> {
    pub(crate) fn new(weight: T, mu: T, kappa: T) -> Self {
        let kf = kappa.to_f64().unwrap_or(0.0);
        let max_order = ((78.0 * kf).sqrt() + 25.0).ceil() as usize;
        let ratios = bessel_i_ratios(kappa, max_order + 1);
        let tol = T::series_tolerance();
        let mut terms = max_order;
        for m in 1..=max_order {
            if ratios[m] < tol {
                terms = m;
                break;
            }
        }
        let log_norm = -(two_pi::<T>().ln() + log_bessel_i0(kappa));
        Self {
            weight,
            mu,
            kappa,
            log_norm,
            ratios,
            terms,
        }
    }

    #[inline]
    pub(crate) fn log_pdf(&self, theta: T) -> T {
        self.kappa * (theta - self.mu).cos() + self.log_norm
    }

    #[inline]
    pub(crate) fn pdf(&self, theta: T) -> T {
        self.log_pdf(theta).exp()
    }

    /// `Σ_m c_m (sin(m(x−μ)) + sin(mμ))/m` for coefficients `c_m`.
    fn sine_series(&self, x: T, coef: impl Fn(usize) -> T) -> T {
        let u = x - self.mu;
        let (su, cu) = u.sin_cos();
        let (sm, cm) = self.mu.sin_cos();
        let (mut s1, mut c1) = (su, cu);
        let (mut s2, mut c2) = (sm, cm);
        let mut acc = T::zero();
        for m in 1..=self.terms {
            acc += coef(m) * (s1 + s2) / lit::<T>(m as f64);
            let ns1 = s1 * cu + c1 * su;
            c1 = c1 * cu - s1 * su;
            s1 = ns1;
            let ns2 = s2 * cm + c2 * sm;
            c2 = c2 * cm - s2 * sm;
            s2 = ns2;
        }
        acc
    }

    /// `∫₀ˣ f` for `x ∈ [0, 2π]`.
    pub(crate) fn cdf(&self, x: T) -> T {
        let s = self.sine_series(x, |m| self.ratios[m]);
        (x + s + s) / two_pi::<T>()
    }

    /// `∂F/∂κ` at `x ∈ [0, 2π]`.
    fn cdf_dkappa(&self, x: T) -> T {
        let a1 = self.ratios[1];
        let half = lit::<T>(0.5);
        let s = self.sine_series(x, |m| {
            half * (self.ratios[m - 1] + self.ratios[m + 1]) - self.ratios[m] * a1
        });
        s / T::PI()
    }
}

/// Monotone Hermite table of `F` on `[0, 2π]`, used to seed inversions.
#[derive(Clone, Debug)]
pub struct CdfCache<T: Real = f64> {
    knots: Vec<T>,
    values: Vec<T>,
    slopes: Vec<T>,
    max_error: T,
}

impl<T: Real> CdfCache<T> {
    /// Largest forward interpolation error measured at cell midpoints.
    pub fn max_error(&self) -> T {
        self.max_error
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    fn hermite(&self, i: usize, x: T) -> T {
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// Interpolated `F` on `[0, 2π)`.
    pub fn interpolate(&self, x: T) -> T {
        let n = self.knots.len() - 1;
        let h = two_pi::<T>() / lit::<T>(n as f64);
        let i = ((x / h).floor().to_usize().unwrap_or(0)).min(n - 1);
        self.hermite(i, x)
    }

    /// Bracket and starting point for `F(x) = y`, `y ∈ [0, 1)`.
    fn seed(&self, y: T) -> (T, T, T) {
        let i = match self
            .values
            .binary_search_by(|v| v.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(self.knots.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.knots.len() - 2),
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        // inverse Hermite: x as a cubic in y with slopes 1/f
        let dy = y1 - y0;
        let guess = if dy > T::zero() {
            let t = (y - y0) / dy;
            let t2 = t * t;
            let t3 = t2 * t;
            let two = lit::<T>(2.0);
            let three = lit::<T>(3.0);
            let g = (two * t3 - three * t2 + T::one()) * x0
                + (t3 - two * t2 + t) * dy / self.slopes[i]
                + (three * t2 - two * t3) * x1
                + (t3 - t2) * dy / self.slopes[i + 1];
            g.max(x0).min(x1)
        } else {
            x0
        };
        (x0, x1, guess)
    }
}

/// A circular density with its distribution function machinery.
#[derive(Clone, Debug)]
pub struct CircularDensity<T: Real = f64> {
    family: CircularFamily<T>,
    vm: Vec<VmTerm<T>>,
    cache: Option<CdfCache<T>>,
}

impl<T: Real> CircularDensity<T> {
    pub fn new(family: CircularFamily<T>) -> Result<Self> {
        let density = Self::new_quiet(family)?;
        let min = density.min_density_on_grid(1024);
        if min < lit(LOW_DENSITY_WARNING) {
            log::warn!(
                "density minimum {min} on a 1024-point grid is below {LOW_DENSITY_WARNING}; \
                 diffusion coefficients scale like 1/f^3 there"
            );
        }
        Ok(density)
    }

    /// Validating constructor without the low-density scan, for hot loops.
    pub(crate) fn new_quiet(family: CircularFamily<T>) -> Result<Self> {
        let vm = match &family {
            CircularFamily::Uniform => vec![],
            CircularFamily::VonMises { mu, kappa } => {
                check_angle(*mu, "mu")?;
                check_concentration(*kappa)?;
                vec![VmTerm::new(T::one(), *mu, *kappa)]
            }
            CircularFamily::WrappedCauchy { mu, rho } => {
                check_angle(*mu, "mu")?;
                ensure_finite(*rho, "rho")?;
                if !(*rho >= T::zero() && *rho < T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "wrapped Cauchy rho must lie in [0, 1), got {rho}"
                    )));
                }
                vec![]
            }
            CircularFamily::VonMisesMixture(components) => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("mixture needs at least one component".into()));
                }
                let mut total = T::zero();
                for c in components {
                    ensure_finite(c.weight, "weight")?;
                    if c.weight < T::zero() {
                        return Err(Error::InvalidParameter(format!(
                            "mixture weights must be >= 0, got {}",
                            c.weight
                        )));
                    }
                    check_angle(c.mu, "mu")?;
                    check_concentration(c.kappa)?;
                    total += c.weight;
                }
                let tol = lit::<T>(1e-12).max(T::epsilon() * lit::<T>(16.0));
                if (total - T::one()).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
                components
                    .iter()
                    .map(|c| VmTerm::new(c.weight, c.mu, c.kappa))
                    .collect()
            }
        };
        Ok(Self {
            family,
            vm,
            cache: None,
        })
    }

    pub fn uniform() -> Self {
        Self::new(CircularFamily::Uniform).expect("uniform density is always valid")
    }

    pub fn von_mises(mu: T, kappa: T) -> Result<Self> {
        Self::new(CircularFamily::VonMises { mu, kappa })
    }

    pub fn wrapped_cauchy(mu: T, rho: T) -> Result<Self> {
        Self::new(CircularFamily::WrappedCauchy { mu, rho })
    }

    pub fn von_mises_mixture(components: Vec<VonMisesComponent<T>>) -> Result<Self> {
        Self::new(CircularFamily::VonMisesMixture(components))
    }

    /// Builds the density from an unnormalized kernel `c·f` with an
    /// arbitrary positive factor `c`. The factor only affects the kernel's
    /// stated scale; the constructed density is always normalized.
    pub fn from_unnormalized(family: CircularFamily<T>, stated_factor: T) -> Result<Self> {
        if !(stated_factor > T::zero()) || !stated_factor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel factor must be a positive finite number, got {stated_factor}"
            )));
        }
        Self::new(family)
    }

    /// Rebuilds a density of the given family from a β vector laid out as in
    /// [`FamilyKind::beta_names`].
    pub fn from_beta(kind: FamilyKind, beta: &[T]) -> Result<Self> {
        Self::new(Self::family_from_beta(kind, beta)?)
    }

    /// [`from_beta`](Self::from_beta) without the low-density scan.
    pub(crate) fn from_beta_quiet(kind: FamilyKind, beta: &[T]) -> Result<Self> {
        Self::new_quiet(Self::family_from_beta(kind, beta)?)
    }

    fn family_from_beta(kind: FamilyKind, beta: &[T]) -> Result<CircularFamily<T>> {
        if beta.len() != kind.beta_len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} density parameters, got {}",
                kind.beta_len(),
                beta.len()
            )));
        }
        let family = match kind {
            FamilyKind::Uniform => CircularFamily::Uniform,
            FamilyKind::VonMises => CircularFamily::VonMises {
                mu: beta[0],
                kappa: beta[1],
            },
            FamilyKind::WrappedCauchy => CircularFamily::WrappedCauchy {
                mu: beta[0],
                rho: beta[1],
            },
            FamilyKind::VonMisesMixture { components } => {
                let free: T = beta[..components - 1].iter().copied().sum();
                let mut comps = Vec::with_capacity(components);
                for j in 0..components {
                    let weight = if j + 1 < components { beta[j] } else { T::one() - free };
                    comps.push(VonMisesComponent {
                        weight,
                        mu: beta[components - 1 + 2 * j],
                        kappa: beta[components + 2 * j],
                    });
                }
                CircularFamily::VonMisesMixture(comps)
            }
        };
        Ok(family)
    }

    /// Builds the 512-knot (refined as needed) interpolation table used to
    /// seed inversions. The table is refined until the forward
    /// interpolation error is at most `1e-9`.
    pub fn with_cache(mut self) -> Result<Self> {
        let target = lit::<T>(1e-9).max(T::epsilon() * lit::<T>(64.0));
        let mut n = 512usize;
        loop {
            let h = two_pi::<T>() / lit::<T>(n as f64);
            let knots: Vec<T> = (0..=n).map(|i| h * lit::<T>(i as f64)).collect();
            let mut values: Vec<T> = knots.iter().map(|&x| self.cdf_reduced(x)).collect();
            values[0] = T::zero();
            values[n] = T::one();
            let slopes: Vec<T> = knots.iter().map(|&x| self.pdf(x)).collect();
            let mut cache = CdfCache {
                knots,
                values,
                slopes,
                max_error: T::zero(),
            };
            let mut err = T::zero();
            for i in 0..n {
                let mid = cache.knots[i] + h * lit::<T>(0.5);
                err = err.max((cache.hermite(i, mid) - self.cdf_reduced(mid)).abs());
            }
            cache.max_error = err;
            if err <= target || n >= 16_384 {
                if err > target {
                    log::warn!("CDF cache error {err} above target with {n} knots");
                }
                self.cache = Some(cache);
                return Ok(self);
            }
            n *= 2;
        }
    }

    pub fn cache(&self) -> Option<&CdfCache<T>> {
        self.cache.as_ref()
    }

    pub fn family(&self) -> &CircularFamily<T> {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    /// Density parameter vector β.
    pub fn beta(&self) -> Vec<T> {
        match &self.family {
            CircularFamily::Uniform => vec![],
            CircularFamily::VonMises { mu, kappa } => vec![*mu, *kappa],
            CircularFamily::WrappedCauchy { mu, rho } => vec![*mu, *rho],
            CircularFamily::VonMisesMixture(c) => {
                let mut v: Vec<T> = c[..c.len() - 1].iter().map(|c| c.weight).collect();
                for comp in c {
                    v.push(comp.mu);
                    v.push(comp.kappa);
                }
                v
            }
        }
    }

    /// Constant `c` with `f = c·k` for the family's natural kernel `k`
    /// (`e^{κ cos(θ−μ)}` for von Mises, `(1+ρ²−2ρ cos(θ−μ))⁻¹` for wrapped
    /// Cauchy, `1` for the uniform). Mixtures have no separate kernel: `c = 1`.
    pub fn kernel_constant(&self) -> T {
        match &self.family {
            CircularFamily::Uniform => T::one() / two_pi::<T>(),
            CircularFamily::VonMises { .. } => self.vm[0].log_norm.exp(),
            CircularFamily::WrappedCauchy { rho, .. } => (T::one() - *rho * *rho) / two_pi::<T>(),
            CircularFamily::VonMisesMixture(_) => T::one(),
        }
    }

    pub fn pdf(&self, theta: T) -> T {
        match &self.family {
            CircularFamily::Uniform => T::one() / two_pi::<T>(),
            CircularFamily::VonMises { .. } => self.vm[0].pdf(theta),
            CircularFamily::WrappedCauchy { mu, rho } => wc_pdf(theta, *mu, *rho),
            CircularFamily::VonMisesMixture(_) => {
                self.vm.iter().map(|c| c.weight * c.pdf(theta)).sum()
            }
        }
    }

    pub fn log_pdf(&self, theta: T) -> T {
        match &self.family {
            CircularFamily::Uniform => -two_pi::<T>().ln(),
            CircularFamily::VonMises { .. } => self.vm[0].log_pdf(theta),
            CircularFamily::WrappedCauchy { mu, rho } => {
                let d = wc_denominator(theta, *mu, *rho);
                (T::one() - *rho * *rho).ln() - two_pi::<T>().ln() - d.ln()
            }
            CircularFamily::VonMisesMixture(_) => {
                let terms: Vec<T> = self
                    .vm
                    .iter()
                    .filter(|c| c.weight > T::zero())
                    .map(|c| c.weight.ln() + c.log_pdf(theta))
                    .collect();
                log_sum_exp(&terms)
            }
        }
    }

    /// `f′(θ)`.
    pub fn pdf_derivative(&self, theta: T) -> T {
        match &self.family {
            CircularFamily::Uniform => T::zero(),
            CircularFamily::VonMises { .. } | CircularFamily::VonMisesMixture(_) => self
                .vm
                .iter()
                .map(|c| -c.weight * c.pdf(theta) * c.kappa * (theta - c.mu).sin())
                .sum(),
            CircularFamily::WrappedCauchy { mu, rho } => {
                let d = wc_denominator(theta, *mu, *rho);
                let two = lit::<T>(2.0);
                -(T::one() - *rho * *rho) / two_pi::<T>() * two * *rho * (theta - *mu).sin() / (d * d)
            }
        }
    }

    /// `F` on the reduced range `[0, 2π]`.
    pub fn cdf_reduced(&self, x: T) -> T {
        let tau = two_pi::<T>();
        match &self.family {
            CircularFamily::Uniform => x / tau,
            CircularFamily::VonMises { .. } | CircularFamily::VonMisesMixture(_) => {
                self.vm.iter().map(|c| c.weight * c.cdf(x)).sum()
            }
            CircularFamily::WrappedCauchy { mu, rho } => {
                wc_antiderivative(x - *mu, *rho) - wc_antiderivative(-*mu, *rho)
            }
        }
    }

    /// `F(x)` for any real `x`, via `F(x) = F(x mod 2π) + ⌊x/2π⌋`.
    pub fn cdf(&self, x: T) -> T {
        let (r, k) = reduce_angle(x);
        self.cdf_reduced(r) + lit::<T>(k as f64)
    }

    /// `F⁻¹(y)` for any real `y`, via `F⁻¹(y) = F⁻¹(y mod 1) + 2π⌊y⌋`.
    pub fn inverse_cdf(&self, y: T) -> Result<T> {
        ensure_finite(y, "y")?;
        let (u, k) = reduce_unit(y);
        Ok(self.inverse_cdf_reduced(u)? + two_pi::<T>() * lit::<T>(k as f64))
    }

    /// `F⁻¹` on `[0, 1)`, returning a value in `[0, 2π)`.
    pub fn inverse_cdf_reduced(&self, u: T) -> Result<T> {
        let tau = two_pi::<T>();
        if u <= T::zero() {
            return Ok(T::zero());
        }
        match &self.family {
            CircularFamily::Uniform => Ok(u * tau),
            CircularFamily::WrappedCauchy { mu, rho } => {
                let s = u + wc_antiderivative(-*mu, *rho);
                let j = (s + lit::<T>(0.5)).floor();
                let g = s - j;
                let (sg, cg) = (T::PI() * g).sin_cos();
                let v = lit::<T>(2.0) * ((T::one() - *rho) * sg).atan2((T::one() + *rho) * cg);
                let x = *mu + tau * j + v;
                // closed form is exact up to rounding; clamp onto the period
                let x = x.max(T::zero()).min(tau * (T::one() - T::epsilon()));
                Ok(x)
            }
            _ => {
                let (lo, hi, guess) = match &self.cache {
                    Some(c) => c.seed(u),
                    None => (T::zero(), tau, u * tau),
                };
                solve_increasing(
                    |x| self.cdf_reduced(x),
                    |x| self.pdf(x),
                    u,
                    lo,
                    hi,
                    Some(guess),
                )
            }
        }
    }

    /// `∂_β log f(θ)`.
    pub fn log_pdf_gradient(&self, theta: T) -> Vec<T> {
        match &self.family {
            CircularFamily::Uniform => vec![],
            CircularFamily::VonMises { mu, kappa } => {
                let (s, c) = (theta - *mu).sin_cos();
                vec![*kappa * s, c - self.vm[0].ratios[1]]
            }
            CircularFamily::WrappedCauchy { mu, rho } => {
                let d = wc_denominator(theta, *mu, *rho);
                let two = lit::<T>(2.0);
                let r = *rho;
                vec![
                    two * r * (theta - *mu).sin() / d,
                    -two * r / (T::one() - r * r) - (two * r - two * (theta - *mu).cos()) / d,
                ]
            }
            CircularFamily::VonMisesMixture(_) => {
                let f = self.pdf(theta);
                let k = self.vm.len();
                let comps: Vec<T> = self.vm.iter().map(|c| c.pdf(theta)).collect();
                let mut g = Vec::with_capacity(3 * k - 1);
                for j in 0..k - 1 {
                    g.push((comps[j] - comps[k - 1]) / f);
                }
                for (j, c) in self.vm.iter().enumerate() {
                    let (s, co) = (theta - c.mu).sin_cos();
                    g.push(c.weight * comps[j] * c.kappa * s / f);
                    g.push(c.weight * comps[j] * (co - c.ratios[1]) / f);
                }
                g
            }
        }
    }

    /// `∂_β F(x)` for `x ∈ [0, 2π]` (the integer part of `F` does not
    /// depend on β).
    pub fn cdf_gradient(&self, x: T) -> Vec<T> {
        match &self.family {
            CircularFamily::Uniform => vec![],
            CircularFamily::VonMises { .. } => {
                let c = &self.vm[0];
                vec![c.pdf(T::zero()) - c.pdf(x), c.cdf_dkappa(x)]
            }
            CircularFamily::WrappedCauchy { mu, rho } => {
                let dmu = wc_pdf(T::zero(), *mu, *rho) - wc_pdf(x, *mu, *rho);
                let drho = wc_antiderivative_drho(x - *mu, *rho) - wc_antiderivative_drho(-*mu, *rho);
                vec![dmu, drho]
            }
            CircularFamily::VonMisesMixture(_) => {
                let k = self.vm.len();
                let cdfs: Vec<T> = self.vm.iter().map(|c| c.cdf(x)).collect();
                let mut g = Vec::with_capacity(3 * k - 1);
                for j in 0..k - 1 {
                    g.push(cdfs[j] - cdfs[k - 1]);
                }
                for c in &self.vm {
                    g.push(c.weight * (c.pdf(T::zero()) - c.pdf(x)));
                    g.push(c.weight * c.cdf_dkappa(x));
                }
                g
            }
        }
    }

    /// Smallest density value over an equispaced grid of `n` points.
    pub fn min_density_on_grid(&self, n: usize) -> T {
        let h = two_pi::<T>() / lit::<T>(n as f64);
        (0..n)
            .map(|i| self.pdf(h * lit::<T>(i as f64)))
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// `n` i.i.d. draws by inverse-CDF sampling of uniforms.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<T>> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                self.inverse_cdf_reduced(lit::<T>(u))
            })
            .collect()
    }
}

fn check_angle<T: Real>(mu: T, name: &str) -> Result<()> {
    ensure_finite(mu, name)
}

fn check_concentration<T: Real>(kappa: T) -> Result<()> {
    ensure_finite(kappa, "kappa")?;
    if kappa < T::zero() {
        return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
    }
    Ok(())
}

/// `1 + ρ² − 2ρ cos(θ − μ)`, written as `(1−ρ)² + 4ρ sin²((θ−μ)/2)`.
#[inline]
fn wc_denominator<T: Real>(theta: T, mu: T, rho: T) -> T {
    let s = ((theta - mu) * lit::<T>(0.5)).sin();
    let one_m = T::one() - rho;
    one_m * one_m + lit::<T>(4.0) * rho * s * s
}

#[inline]
fn wc_pdf<T: Real>(theta: T, mu: T, rho: T) -> T {
    (T::one() - rho * rho) / (two_pi::<T>() * wc_denominator(theta, mu, rho))
}

/// Continuous antiderivative of the wrapped Cauchy density in `u = θ − μ`,
/// increasing by exactly 1 per turn.
fn wc_antiderivative<T: Real>(u: T, rho: T) -> T {
    let tau = two_pi::<T>();
    // u = 2πj + v with v ∈ [−π, π)
    let shifted = u + T::PI();
    let j = (shifted / tau).floor();
    let v = shifted - j * tau - T::PI();
    let (s, c) = (v * lit::<T>(0.5)).sin_cos();
    j + ((T::one() + rho) * s).atan2((T::one() - rho) * c) / T::PI()
}

/// `∂/∂ρ` of [`wc_antiderivative`]: `sin u / (π(1 + ρ² − 2ρ cos u))`.
fn wc_antiderivative_drho<T: Real>(u: T, rho: T) -> T {
    u.sin() / (T::PI() * wc_denominator(u, T::zero(), rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::f64::consts::{PI, TAU};

    fn families() -> Vec<CircularDensity> {
        vec![
            CircularDensity::uniform(),
            CircularDensity::von_mises(0.0, 2.0).unwrap(),
            CircularDensity::von_mises(4.0, 0.3).unwrap(),
            CircularDensity::wrapped_cauchy(1.0, 0.5).unwrap(),
            CircularDensity::von_mises_mixture(vec![
                VonMisesComponent { weight: 0.4, mu: 0.0, kappa: 8.0 },
                VonMisesComponent { weight: 0.3, mu: -PI / 2.0, kappa: 3.0 },
                VonMisesComponent { weight: 0.3, mu: PI / 2.0, kappa: 5.0 },
            ])
            .unwrap(),
        ]
    }

    #[test]
    fn uniform_values() {
        let u = CircularDensity::<f64>::uniform();
        assert_eq!(u.pdf(2.3), 1.0 / TAU);
        assert!((u.cdf(PI) - 0.5).abs() < 1e-16);
        assert!((u.inverse_cdf(0.25).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn von_mises_symmetry_values() {
        for kappa in [0.5, 2.0, 10.0] {
            let d = CircularDensity::von_mises(0.0, kappa).unwrap();
            assert!((d.cdf(PI) - 0.5).abs() < 1e-13);
            assert!(d.pdf_derivative(0.0).abs() < 1e-15);
        }
        let d = CircularDensity::von_mises(0.0, 2.0).unwrap();
        assert!((d.inverse_cdf(0.5).unwrap() - PI).abs() < 1e-10);
    }

    #[test]
    fn cdf_endpoints_and_periodic_extension() {
        for d in families() {
            assert!(d.cdf(0.0).abs() < 1e-14);
            assert!((d.cdf_reduced(TAU) - 1.0).abs() < 1e-13);
            for &x in &[-13.1, -0.2, 0.7, 5.0, 40.0] {
                assert!((d.cdf(x + TAU) - d.cdf(x) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for d in families() {
            let dc = d.clone().with_cache().unwrap();
            for i in 0..200 {
                let x = -10.0 * PI + 20.0 * PI * (i as f64 + 0.37) / 200.0;
                let back = d.inverse_cdf(d.cdf(x)).unwrap();
                assert!((back - x).abs() < 1e-8, "{:?} x={x} back={back}", d.kind());
                let back = dc.inverse_cdf(d.cdf(x)).unwrap();
                assert!((back - x).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cache_meets_tolerance() {
        for d in families() {
            let d = d.with_cache().unwrap();
            let c = d.cache().unwrap();
            assert!(c.max_error() <= 1e-9, "{}", c.max_error());
            assert!(c.knot_count() >= 513);
        }
    }

    #[test]
    fn wrapped_cauchy_matches_formula() {
        let d = CircularDensity::wrapped_cauchy(0.0, 0.5).unwrap();
        assert!((d.pdf(0.0) - 0.75 / (TAU * 0.25)).abs() < 1e-15);
        assert!((d.log_pdf(1.2) - d.pdf(1.2).ln()).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CircularDensity::von_mises(0.0, -1.0).is_err());
        assert!(CircularDensity::wrapped_cauchy(0.0, 1.0).is_err());
        assert!(CircularDensity::von_mises_mixture(vec![VonMisesComponent {
            weight: 0.9,
            mu: 0.0,
            kappa: 1.0
        }])
        .is_err());
        assert!(CircularDensity::<f64>::von_mises_mixture(vec![]).is_err());
    }

    #[test]
    fn beta_round_trip() {
        for d in families() {
            let b = d.beta();
            let back = CircularDensity::from_beta(d.kind(), &b).unwrap();
            for &x in &[0.1, 2.0, 5.5] {
                assert!((back.pdf(x) - d.pdf(x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sample_size_zero_is_empty() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = CircularDensity::<f64>::uniform();
        assert!(d.sample_stationary(0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn kernel_constant_relates_kernel_and_density() {
        let d = CircularDensity::von_mises(0.3, 1.7).unwrap();
        let x = 2.2f64;
        let kernel = (1.7 * (x - 0.3).cos()).exp();
        assert!((d.kernel_constant() * kernel - d.pdf(x)).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let d = CircularDensity::<f32>::von_mises(0.0, 2.0).unwrap();
        assert!((d.cdf(std::f32::consts::PI) - 0.5).abs() < 1e-5);
        let y = d.cdf(1.3);
        assert!((d.inverse_cdf(y).unwrap() - 1.3).abs() < 1e-4);
    }
}
