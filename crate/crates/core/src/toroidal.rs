//! Densities on the torus `T^p` through their conditional decomposition
//! `f(x) = f₁(x₁) f₂(x₂|x₁) ⋯`, the Rosenblatt map
//! `R(x) = (F₁(x₁), F₂(x₂|x₁), …)` with `R(x) = R(x mod 2π) + ⌊x/2π⌋`, and
//! its inverse.

use crate::circular::{CircularDensity, VmTerm};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg;
use crate::quadrature::gauss_legendre_10;
use crate::roots::solve_increasing;
use crate::scalar::{lit, reduce_angle, reduce_unit, two_pi};
use crate::special::{log_bessel_i0, log_bvm_normalizing_constant, BvmNormalizingInput};
use crate::Real;

/// Panels of the tabulated bivariate von Mises marginal distribution.
const MARGINAL_PANELS: usize = 256;

/// Parameters `(μ₁, μ₂, κ₁, κ₂, λ)` of the sine bivariate von Mises density
/// `C exp(κ₁cos(θ₁−μ₁) + κ₂cos(θ₂−μ₂) + λ sin(θ₁−μ₁) sin(θ₂−μ₂))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvmParams<T: Real = f64> {
    pub mu1: T,
    pub mu2: T,
    pub kappa1: T,
    pub kappa2: T,
    pub lambda: T,
}

impl<T: Real> BvmParams<T> {
    pub fn new(mu1: T, mu2: T, kappa1: T, kappa2: T, lambda: T) -> Self {
        Self {
            mu1,
            mu2,
            kappa1,
            kappa2,
            lambda,
        }
    }
}

/// How the toroidal density is assembled.
#[derive(Clone, Debug)]
pub enum ToroidalStructure<T: Real = f64> {
    Product(Vec<CircularDensity<T>>),
    Bvm(BvmParams<T>),
    BvmMixture(Vec<(T, BvmParams<T>)>),
    /// `(1 − α) f + α/(2π)^p`
    Blended { base: Box<ToroidalDensity<T>>, alpha: T },
}

/// Precomputed bivariate von Mises component.
#[derive(Clone, Debug)]
struct BvmComponent<T: Real> {
    weight: T,
    params: BvmParams<T>,
    log_c: T,
    /// `F₁` at the panel knots, normalized so the last entry is 1
    cum: Vec<T>,
    /// multiplies the analytic marginal so it integrates to exactly `cum`
    marginal_scale: T,
}

impl<T: Real> BvmComponent<T> {
    fn new(weight: T, params: BvmParams<T>) -> Result<Self> {
        for (v, n) in [
            (params.mu1, "mu1"),
            (params.mu2, "mu2"),
            (params.kappa1, "kappa1"),
            (params.kappa2, "kappa2"),
            (params.lambda, "lambda"),
        ] {
            ensure_finite(v, n)?;
        }
        let input = BvmNormalizingInput::new(params.kappa1, params.kappa2, params.lambda)?;
        let log_c = log_bvm_normalizing_constant(&input)?;
        let mut comp = Self {
            weight,
            params,
            log_c,
            cum: Vec::new(),
            marginal_scale: T::one(),
        };
        let h = two_pi::<T>() / lit::<T>(MARGINAL_PANELS as f64);
        let mut cum = Vec::with_capacity(MARGINAL_PANELS + 1);
        let mut acc = T::zero();
        cum.push(acc);
        for i in 0..MARGINAL_PANELS {
            let a = h * lit::<T>(i as f64);
            acc += gauss_legendre_10(|x| comp.raw_marginal(x), a, a + h);
            cum.push(acc);
        }
        let total = acc;
        for c in cum.iter_mut() {
            *c /= total;
        }
        cum[MARGINAL_PANELS] = T::one();
        comp.cum = cum;
        comp.marginal_scale = T::one() / total;
        Ok(comp)
    }

    /// `(μ₂λ(θ₁), κ₂λ(θ₁))` of the conditional von Mises law of `θ₂`.
    fn conditional_params(&self, x1: T) -> (T, T) {
        let p = &self.params;
        let s = p.lambda * (x1 - p.mu1).sin();
        let kappa = (p.kappa2 * p.kappa2 + s * s).sqrt();
        (p.mu2 + s.atan2(p.kappa2), kappa)
    }

    fn conditional(&self, x1: T) -> VmTerm<T> {
        let (mu, kappa) = self.conditional_params(x1);
        VmTerm::new(T::one(), mu, kappa)
    }

    fn raw_marginal(&self, x1: T) -> T {
        let (_, k2l) = self.conditional_params(x1);
        (self.log_c
            + two_pi::<T>().ln()
            + log_bessel_i0(k2l)
            + self.params.kappa1 * (x1 - self.params.mu1).cos())
        .exp()
    }

    fn marginal(&self, x1: T) -> T {
        self.raw_marginal(x1) * self.marginal_scale
    }

    fn marginal_cdf(&self, x1: T) -> T {
        let h = two_pi::<T>() / lit::<T>(MARGINAL_PANELS as f64);
        let i = (x1 / h).floor().to_usize().unwrap_or(0).min(MARGINAL_PANELS - 1);
        let a = h * lit::<T>(i as f64);
        self.cum[i] + gauss_legendre_10(|x| self.marginal(x), a, x1)
    }

    fn marginal_bracket(&self, u: T) -> (T, T) {
        let h = two_pi::<T>() / lit::<T>(MARGINAL_PANELS as f64);
        let i = self.cum.partition_point(|&c| c <= u).clamp(1, MARGINAL_PANELS) - 1;
        (h * lit::<T>(i as f64), h * lit::<T>((i + 1) as f64))
    }

    fn pdf(&self, x1: T, x2: T) -> T {
        let p = &self.params;
        let (d1, d2) = (x1 - p.mu1, x2 - p.mu2);
        (self.log_c + p.kappa1 * d1.cos() + p.kappa2 * d2.cos() + p.lambda * d1.sin() * d2.sin()).exp()
    }
}

/// A positive density on `T^p` with its conditional decomposition.
#[derive(Clone, Debug)]
pub struct ToroidalDensity<T: Real = f64> {
    structure: ToroidalStructure<T>,
    dim: usize,
    bvm: Vec<BvmComponent<T>>,
}

impl<T: Real> ToroidalDensity<T> {
    pub fn new(structure: ToroidalStructure<T>) -> Result<Self> {
        let (dim, bvm) = match &structure {
            ToroidalStructure::Product(m) => {
                if m.is_empty() {
                    return Err(Error::InvalidParameter("product density needs p >= 1 factors".into()));
                }
                (m.len(), vec![])
            }
            ToroidalStructure::Bvm(p) => (2, vec![BvmComponent::new(T::one(), *p)?]),
            ToroidalStructure::BvmMixture(c) => {
                if c.is_empty() {
                    return Err(Error::InvalidParameter("mixture needs at least one component".into()));
                }
                let mut total = T::zero();
                let mut comps = Vec::with_capacity(c.len());
                for (w, p) in c {
                    ensure_finite(*w, "weight")?;
                    if *w < T::zero() {
                        return Err(Error::InvalidParameter(format!("mixture weights must be >= 0, got {w}")));
                    }
                    total += *w;
                    comps.push(BvmComponent::new(*w, *p)?);
                }
                if (total - T::one()).abs() > lit::<T>(1e-12).max(T::epsilon() * lit::<T>(16.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
                (2, comps)
            }
            ToroidalStructure::Blended { base, alpha } => {
                ensure_finite(*alpha, "alpha")?;
                if *alpha < T::zero() || *alpha > T::one() {
                    return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
                }
                (base.dim, vec![])
            }
        };
        Ok(Self { structure, dim, bvm })
    }

    pub fn product(marginals: Vec<CircularDensity<T>>) -> Result<Self> {
        Self::new(ToroidalStructure::Product(marginals))
    }

    pub fn bivariate_von_mises(params: BvmParams<T>) -> Result<Self> {
        Self::new(ToroidalStructure::Bvm(params))
    }

    pub fn bvm_mixture(components: Vec<(T, BvmParams<T>)>) -> Result<Self> {
        Self::new(ToroidalStructure::BvmMixture(components))
    }

    pub fn blended(base: ToroidalDensity<T>, alpha: T) -> Result<Self> {
        Self::new(ToroidalStructure::Blended {
            base: Box::new(base),
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> &ToroidalStructure<T> {
        &self.structure
    }

    /// `f(x)` for any real `x` (each coordinate is wrapped).
    pub fn pdf(&self, x: &[T]) -> T {
        let r: Vec<T> = x.iter().map(|&v| reduce_angle(v).0).collect();
        self.head_density(self.dim, &r)
    }

    pub fn log_pdf(&self, x: &[T]) -> T {
        self.pdf(x).ln()
    }

    /// Density of the first `j` coordinates at reduced angles `x[..j]`.
    fn head_density(&self, j: usize, x: &[T]) -> T {
        if j == 0 {
            return T::one();
        }
        match &self.structure {
            ToroidalStructure::Product(m) => m[..j].iter().zip(x).map(|(d, &v)| d.pdf(v)).product(),
            ToroidalStructure::Bvm(_) | ToroidalStructure::BvmMixture(_) => self
                .bvm
                .iter()
                .map(|c| {
                    c.weight
                        * if j == 1 {
                            c.marginal(x[0])
                        } else {
                            c.pdf(x[0], x[1])
                        }
                })
                .sum(),
            ToroidalStructure::Blended { base, alpha } => {
                (T::one() - *alpha) * base.head_density(j, x)
                    + *alpha / two_pi::<T>().powi(j as i32)
            }
        }
    }

    /// `∫₀^{x_j} g_j(x₁, …, x_{j−1}, s) ds` with `g_j` the head density.
    fn head_cdf_numerator(&self, j: usize, x: &[T]) -> T {
        match &self.structure {
            ToroidalStructure::Product(m) => {
                let lead: T = m[..j - 1].iter().zip(x).map(|(d, &v)| d.pdf(v)).product();
                lead * m[j - 1].cdf_reduced(x[j - 1])
            }
            ToroidalStructure::Bvm(_) | ToroidalStructure::BvmMixture(_) => self
                .bvm
                .iter()
                .map(|c| {
                    c.weight
                        * if j == 1 {
                            c.marginal_cdf(x[0])
                        } else {
                            c.marginal(x[0]) * c.conditional(x[0]).cdf(x[1])
                        }
                })
                .sum(),
            ToroidalStructure::Blended { base, alpha } => {
                let tau = two_pi::<T>();
                (T::one() - *alpha) * base.head_cdf_numerator(j, x)
                    + *alpha * x[j - 1] / tau.powi(j as i32)
            }
        }
    }

    fn check_level(&self, level: usize, given: &[T]) -> Result<()> {
        if level == 0 || level > self.dim {
            return Err(Error::Domain(format!(
                "level must lie in 1..={}, got {level}",
                self.dim
            )));
        }
        if given.len() != level - 1 {
            return Err(Error::Domain(format!(
                "level {level} needs {} conditioning angles, got {}",
                level - 1,
                given.len()
            )));
        }
        Ok(())
    }

    /// Conditional density `f_j(x_j | x₁..x_{j−1})`, levels counted from 1.
    pub fn conditional_pdf(&self, level: usize, x: T, given: &[T]) -> Result<T> {
        self.check_level(level, given)?;
        let mut r: Vec<T> = given.iter().map(|&v| reduce_angle(v).0).collect();
        r.push(reduce_angle(x).0);
        Ok(self.conditional_pdf_reduced(level, &r))
    }

    /// Conditional distribution function `F_j(x_j | x₁..x_{j−1})` on the real
    /// line.
    pub fn conditional_cdf(&self, level: usize, x: T, given: &[T]) -> Result<T> {
        self.check_level(level, given)?;
        let mut r: Vec<T> = given.iter().map(|&v| reduce_angle(v).0).collect();
        let (xr, k) = reduce_angle(x);
        r.push(xr);
        Ok(self.conditional_cdf_reduced(level, &r) + lit::<T>(k as f64))
    }

    fn conditional_pdf_reduced(&self, level: usize, x: &[T]) -> T {
        match &self.structure {
            ToroidalStructure::Product(m) => m[level - 1].pdf(x[level - 1]),
            ToroidalStructure::Bvm(_) if level == 2 => self.bvm[0].conditional(x[0]).pdf(x[1]),
            _ => self.head_density(level, x) / self.head_density(level - 1, x),
        }
    }

    fn conditional_cdf_reduced(&self, level: usize, x: &[T]) -> T {
        match &self.structure {
            ToroidalStructure::Product(m) => m[level - 1].cdf_reduced(x[level - 1]),
            ToroidalStructure::Bvm(_) if level == 2 => self.bvm[0].conditional(x[0]).cdf(x[1]),
            _ => self.head_cdf_numerator(level, x) / self.head_density(level - 1, x),
        }
    }

    /// Solves `F_j(x | given) = u` for `u ∈ [0, 1)`, result in `[0, 2π)`.
    fn conditional_inverse_reduced(&self, level: usize, u: T, given: &[T]) -> Result<T> {
        let tau = two_pi::<T>();
        if u <= T::zero() {
            return Ok(T::zero());
        }
        match &self.structure {
            ToroidalStructure::Product(m) => return m[level - 1].inverse_cdf_reduced(u),
            ToroidalStructure::Bvm(_) if level == 2 => {
                let vm = self.bvm[0].conditional(given[0]);
                return solve_increasing(|x| vm.cdf(x), |x| vm.pdf(x), u, T::zero(), tau, None);
            }
            ToroidalStructure::Bvm(_) if level == 1 => {
                let c = &self.bvm[0];
                let (lo, hi) = c.marginal_bracket(u);
                return solve_increasing(|x| c.marginal_cdf(x), |x| c.marginal(x), u, lo, hi, None);
            }
            _ => {}
        }
        let mut buf: Vec<T> = given.to_vec();
        buf.push(T::zero());
        let denom = self.head_density(level - 1, given);
        let cdf = |x: T| {
            let mut b = buf.clone();
            b[level - 1] = x;
            self.head_cdf_numerator(level, &b) / denom
        };
        let pdf = |x: T| {
            let mut b = buf.clone();
            b[level - 1] = x;
            self.head_density(level, &b) / denom
        };
        solve_increasing(cdf, pdf, u, T::zero(), tau, None)
    }

    /// Smallest density value over a tensor grid with `n` points per axis
    /// (`p ≤ 2`) or along the diagonal otherwise.
    pub fn min_density_on_grid(&self, n: usize) -> T {
        let h = two_pi::<T>() / lit::<T>(n as f64);
        let mut min = T::infinity();
        if self.dim <= 2 {
            for i in 0..n {
                for j in 0..if self.dim == 2 { n } else { 1 } {
                    let x = [h * lit::<T>(i as f64), h * lit::<T>(j as f64)];
                    min = min.min(self.head_density(self.dim, &x[..self.dim]));
                }
            }
        } else {
            for i in 0..n {
                let x = vec![h * lit::<T>(i as f64); self.dim];
                min = min.min(self.head_density(self.dim, &x));
            }
        }
        min
    }
}

/// The Rosenblatt map of a toroidal density.
#[derive(Clone, Debug)]
pub struct RosenblattMap<T: Real = f64> {
    density: ToroidalDensity<T>,
}

impl<T: Real> RosenblattMap<T> {
    pub fn new(density: ToroidalDensity<T>) -> Self {
        Self { density }
    }

    pub fn density(&self) -> &ToroidalDensity<T> {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.density.dim
    }

    /// `R(x)` for any real `x`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let p = self.check_len(x)?;
        let mut reduced = Vec::with_capacity(p);
        let mut out = Vec::with_capacity(p);
        for (j, &v) in x.iter().enumerate() {
            ensure_finite(v, "angle")?;
            let (r, k) = reduce_angle(v);
            reduced.push(r);
            let val = if j == 0 {
                match &self.density.structure {
                    ToroidalStructure::Bvm(_) => self.density.bvm[0].marginal_cdf(r),
                    _ => self.density.conditional_cdf_reduced(1, &reduced),
                }
            } else {
                self.density.conditional_cdf_reduced(j + 1, &reduced)
            };
            out.push(val + lit::<T>(k as f64));
        }
        Ok(out)
    }

    /// `R⁻¹(y)` for any real `y`.
    pub fn inverse(&self, y: &[T]) -> Result<Vec<T>> {
        let p = self.check_len(y)?;
        let tau = two_pi::<T>();
        let mut reduced: Vec<T> = Vec::with_capacity(p);
        let mut out = Vec::with_capacity(p);
        for (j, &v) in y.iter().enumerate() {
            ensure_finite(v, "transform coordinate")?;
            let (u, k) = reduce_unit(v);
            let x = self.density.conditional_inverse_reduced(j + 1, u, &reduced)?;
            reduced.push(x);
            out.push(x + tau * lit::<T>(k as f64));
        }
        Ok(out)
    }

    /// Lower-triangular Jacobian `DR(x)` (row-major) by central differences.
    pub fn jacobian_fd(&self, x: &[T], step: T) -> Result<Vec<T>> {
        let p = self.check_len(x)?;
        let mut jac = vec![T::zero(); p * p];
        let two = lit::<T>(2.0);
        for c in 0..p {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += step;
            xm[c] -= step;
            let (rp, rm) = (self.forward(&xp)?, self.forward(&xm)?);
            for r in 0..p {
                jac[r * p + c] = (rp[r] - rm[r]) / (two * step);
            }
        }
        Ok(jac)
    }

    fn check_len(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.density.dim {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.density.dim,
                x.len()
            )));
        }
        Ok(x.len())
    }
}

/// Diffusion covariance `Σ` with its lower Cholesky factor used as `Σ^{1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpec<T: Real = f64> {
    p: usize,
    sigma: Vec<T>,
    factor: Vec<T>,
}

impl<T: Real> CovarianceSpec<T> {
    /// `matrix` is `p × p`, row-major.
    pub fn new(matrix: Vec<T>, p: usize) -> Result<Self> {
        if p == 0 || matrix.len() != p * p {
            return Err(Error::InvalidParameter(format!(
                "covariance must be a non-empty square matrix, got {} entries for p={p}",
                matrix.len()
            )));
        }
        for &v in &matrix {
            ensure_finite(v, "covariance entry")?;
        }
        if !linalg::is_symmetric(&matrix, p, lit(1e-12)) {
            return Err(Error::InvalidParameter("covariance must be symmetric".into()));
        }
        let factor = linalg::cholesky(&matrix, p)
            .map_err(|_| Error::InvalidParameter("covariance must be positive definite".into()))?;
        Ok(Self {
            p,
            sigma: matrix,
            factor,
        })
    }

    /// `σ² I_p`.
    pub fn isotropic(sigma: T, p: usize) -> Result<Self> {
        ensure_finite(sigma, "sigma")?;
        if !(sigma > T::zero()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        let mut m = vec![T::zero(); p * p];
        for i in 0..p {
            m[i * p + i] = sigma * sigma;
        }
        Self::new(m, p)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &[T] {
        &self.sigma
    }

    /// Lower-triangular `Σ^{1/2}`, row-major.
    pub fn factor(&self) -> &[T] {
        &self.factor
    }

    /// `tΣ`, row-major.
    pub fn scaled(&self, t: T) -> Vec<T> {
        self.sigma.iter().map(|&v| v * t).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.p).all(|i| (0..self.p).all(|j| i == j || self.sigma[i * self.p + j] == T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use std::f64::consts::{PI, TAU};

    fn bvm(m1: f64, m2: f64, k1: f64, k2: f64, l: f64) -> ToroidalDensity {
        ToroidalDensity::bivariate_von_mises(BvmParams::new(m1, m2, k1, k2, l)).unwrap()
    }

    fn mixture() -> ToroidalDensity {
        ToroidalDensity::bvm_mixture(vec![
            (0.4, BvmParams::new(-1.5, 2.0, 1.0, 1.0, -0.5)),
            (0.4, BvmParams::new(-1.5, -2.0, 1.0, 1.5, 1.0)),
            (0.2, BvmParams::new(1.0, 0.5, 2.0, 2.0, 0.0)),
        ])
        .unwrap()
    }

    fn all() -> Vec<ToroidalDensity> {
        vec![
            ToroidalDensity::product(vec![
                CircularDensity::von_mises(1.0, 2.0).unwrap(),
                CircularDensity::wrapped_cauchy(4.0, 0.3).unwrap(),
            ])
            .unwrap(),
            bvm(0.0, 0.0, 1.0, 1.5, 1.0),
            mixture(),
            ToroidalDensity::blended(mixture(), 0.25).unwrap(),
        ]
    }

    #[test]
    fn independent_bvm_conditional_ignores_first_angle() {
        let d = bvm(0.5, 1.0, 2.0, 3.0, 0.0);
        let vm = CircularDensity::von_mises(1.0, 3.0).unwrap();
        for &x1 in &[0.1, 2.0, 5.0] {
            let c = d.conditional_pdf(2, 0.7, &[x1]).unwrap();
            assert!((c - vm.pdf(0.7)).abs() < 1e-13);
        }
    }

    #[test]
    fn product_conditional_is_marginal() {
        let a = CircularDensity::von_mises(1.0f64, 2.0).unwrap();
        let b = CircularDensity::wrapped_cauchy(4.0f64, 0.3).unwrap();
        let d = ToroidalDensity::product(vec![a, b.clone()]).unwrap();
        assert!((d.conditional_pdf(2, 2.5, &[0.3]).unwrap() - b.pdf(2.5)).abs() < 1e-15);
        assert!((d.conditional_cdf(2, 2.5, &[0.3]).unwrap() - b.cdf(2.5)).abs() < 1e-15);
    }

    #[test]
    fn conditionals_integrate_to_one() {
        for d in all() {
            for &x1 in &[0.2, 1.7, 3.3, 4.1, 6.0] {
                let i = integrate(|x| d.conditional_pdf(2, x, &[x1]).unwrap(), 0.0, TAU, 1e-13, 1e-13)
                    .unwrap();
                assert!((i.value - 1.0).abs() < 1e-9);
                let top = d.conditional_cdf(2, TAU - 1e-15, &[x1]).unwrap();
                assert!((top - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_density_integrates_to_one() {
        for d in all() {
            let outer = integrate(
                |x1| integrate(|x2| d.pdf(&[x1, x2]), 0.0, TAU, 1e-12, 1e-12).unwrap().value,
                0.0,
                TAU,
                1e-11,
                1e-11,
            )
            .unwrap();
            assert!((outer.value - 1.0).abs() < 1e-8, "{}", outer.value);
        }
    }

    #[test]
    fn symmetric_bvm_centre_maps_to_half() {
        let r = RosenblattMap::new(bvm(0.0, 0.0, 1.0, 1.0, 0.5));
        let y = r.forward(&[PI, PI]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-8 && (y[1] - 0.5).abs() < 1e-8, "{y:?}");
    }

    #[test]
    fn uniform_product_is_linear() {
        let u = CircularDensity::<f64>::uniform();
        let r = RosenblattMap::new(ToroidalDensity::product(vec![u.clone(), u]).unwrap());
        let y = r.forward(&[1.0, 7.5]).unwrap();
        assert!((y[0] - 1.0 / TAU).abs() < 1e-15 && (y[1] - 7.5 / TAU).abs() < 1e-14);
        let x = r.inverse(&[0.3, -1.2]).unwrap();
        assert!((x[0] - 0.3 * TAU).abs() < 1e-14 && (x[1] + 1.2 * TAU).abs() < 1e-13);
    }

    #[test]
    fn round_trip_and_lattice_shift() {
        for d in all() {
            let r = RosenblattMap::new(d);
            for i in 0..40 {
                let x = [-6.0 * PI + 0.31 * i as f64 * 1.5, 6.0 * PI - 0.47 * i as f64];
                let y = r.forward(&x).unwrap();
                let back = r.inverse(&y).unwrap();
                assert!((back[0] - x[0]).abs() < 1e-7 && (back[1] - x[1]).abs() < 1e-7);
                let shifted = r.forward(&[x[0] + 2.0 * TAU, x[1] - TAU]).unwrap();
                assert!((shifted[0] - y[0] - 2.0).abs() < 1e-12);
                assert!((shifted[1] - y[1] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_determinant_is_density() {
        for d in all() {
            let r = RosenblattMap::new(d.clone());
            for &x in &[[0.4, 2.2], [3.0, 5.5], [5.9, 0.1]] {
                let j = r.jacobian_fd(&x, 1e-5).unwrap();
                let det = j[0] * j[3] - j[1] * j[2];
                assert!(j[1].abs() < 1e-12);
                assert!(((det - d.pdf(&x)) / d.pdf(&x)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn later_coordinates_do_not_move_earlier_levels() {
        let r = RosenblattMap::new(mixture());
        let a = r.forward(&[1.0, 2.0]).unwrap();
        let b = r.forward(&[1.0, 4.0]).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceSpec::new(vec![1.0, 0.5, 0.4, 1.0], 2).is_err());
        assert!(CovarianceSpec::new(vec![1.0, 2.0, 2.0, 1.0], 2).is_err());
        let c = CovarianceSpec::new(vec![2.0f64, 0.5, 0.5, 1.0], 2).unwrap();
        let l = c.factor();
        let back = [l[0] * l[0], l[0] * l[2], l[2] * l[0], l[2] * l[2] + l[3] * l[3]];
        for (a, b) in back.iter().zip(c.matrix()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn level_out_of_range_is_an_error() {
        assert!(mixture().conditional_pdf(3, 0.0, &[0.0, 0.0]).is_err());
        assert!(mixture().conditional_pdf(0, 0.0, &[]).is_err());
    }
}
