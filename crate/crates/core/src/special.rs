//! Special functions shared by the density, kernel and inference layers.

use crate::error::{ensure_finite, Error, Result};
use crate::linalg;
use crate::scalar::{centered_unit, lit, log_sum_exp, two_pi, wrap_angle};
use crate::Real;

/// Density of `N(0, variance)` at `x`.
#[inline]
pub fn normal_pdf<T: Real>(x: T, variance: T) -> T {
    (-(x * x) / (variance + variance)).exp() / (two_pi::<T>() * variance).sqrt()
}

#[inline]
pub fn log_normal_pdf<T: Real>(x: T, variance: T) -> T {
    -(x * x) / (variance + variance) - lit::<T>(0.5) * (two_pi::<T>() * variance).ln()
}

/// Cauchy density with the given location and scale.
pub fn cauchy_pdf<T: Real>(x: T, location: T, scale: T) -> Result<T> {
    if !(scale > T::zero()) {
        return Err(Error::Domain(format!("Cauchy scale must be > 0, got {scale}")));
    }
    ensure_finite(x, "x")?;
    let d = x - location;
    Ok(scale / (T::PI() * (d * d + scale * scale)))
}

/// Parameters of a wrapped normal law on the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WrappedNormalParams<T: Real = f64> {
    mean: T,
    variance: T,
}

impl<T: Real> WrappedNormalParams<T> {
    pub fn new(mean: T, variance: T) -> Result<Self> {
        ensure_finite(mean, "wrapped normal mean")?;
        ensure_finite(variance, "wrapped normal variance")?;
        if !(variance > T::zero()) {
            return Err(Error::Domain(format!(
                "wrapped normal variance must be > 0, got {variance}"
            )));
        }
        Ok(Self {
            mean: wrap_angle(mean),
            variance,
        })
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn variance(&self) -> T {
        self.variance
    }

    /// Whether the Fourier series is the preferred evaluation route.
    pub fn prefers_fourier(&self) -> bool {
        let tau = two_pi::<T>();
        self.variance > tau * tau
    }
}

/// Number of wrapping terms on each side of the direct sum.
fn direct_terms<T: Real>(variance: T) -> i64 {
    let k = (lit::<T>(8.0) * variance.sqrt() / two_pi::<T>()).ceil();
    k.to_i64().unwrap_or(1) + 1
}

/// Signed angular difference in `[-π, π)`.
#[inline]
fn centered_angle<T: Real>(d: T) -> T {
    let tau = two_pi::<T>();
    centered_unit(d / tau) * tau
}

/// Direct wrapping sum `Σ_{|k|≤K} φ(θ − μ + 2kπ)` with `K` chosen from the
/// variance.
pub fn wrapped_normal_direct<T: Real>(theta: T, mean: T, variance: T) -> T {
    let tau = two_pi::<T>();
    let d = centered_angle(theta - mean);
    let k_max = direct_terms(variance);
    let mut s = T::zero();
    for k in -k_max..=k_max {
        s += normal_pdf(d + tau * lit::<T>(k as f64), variance);
    }
    s
}

/// Fourier form `(1/2π)[1 + 2 Σ e^{−k²σ²/2} cos(k(θ − μ))]`.
pub fn wrapped_normal_fourier<T: Real>(theta: T, mean: T, variance: T) -> T {
    let d = theta - mean;
    let half_var = variance * lit::<T>(0.5);
    let tol = T::series_tolerance();
    let mut s = T::one();
    let mut k = 1u32;
    loop {
        let kf = lit::<T>(f64::from(k));
        let w = (-(kf * kf) * half_var).exp();
        if w < tol || k > 100_000 {
            break;
        }
        s += (w + w) * (kf * d).cos();
        k += 1;
    }
    s / two_pi::<T>()
}

/// Wrapped normal density, switching between the wrapping sum and the
/// Fourier series depending on the variance.
pub fn wrapped_normal_pdf<T: Real>(theta: T, params: &WrappedNormalParams<T>) -> Result<T> {
    ensure_finite(theta, "theta")?;
    Ok(if params.prefers_fourier() {
        wrapped_normal_fourier(theta, params.mean, params.variance)
    } else {
        wrapped_normal_direct(theta, params.mean, params.variance)
    })
}

/// Log of the wrapped normal density; the direct route is evaluated with a
/// log-sum-exp so tiny variances do not underflow.
pub fn log_wrapped_normal_pdf<T: Real>(theta: T, params: &WrappedNormalParams<T>) -> Result<T> {
    ensure_finite(theta, "theta")?;
    if params.prefers_fourier() {
        return Ok(wrapped_normal_fourier(theta, params.mean, params.variance).ln());
    }
    let tau = two_pi::<T>();
    let d = centered_angle(theta - params.mean);
    let k_max = direct_terms(params.variance);
    let terms: Vec<T> = (-k_max..=k_max)
        .map(|k| log_normal_pdf(d + tau * lit::<T>(k as f64), params.variance))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// `Σ_k φ_v(d + k)`: the wrapped Gaussian on the unit circle `ℝ/ℤ`, i.e.
/// `2π f_WN(2πd; 0, 4π²v)`.
pub fn wrapped_gaussian_unit<T: Real>(d: T, variance: T) -> Result<T> {
    let tau = two_pi::<T>();
    let params = WrappedNormalParams::new(T::zero(), tau * tau * variance)?;
    Ok(tau * wrapped_normal_pdf(tau * d, &params)?)
}

pub fn log_wrapped_gaussian_unit<T: Real>(d: T, variance: T) -> Result<T> {
    let tau = two_pi::<T>();
    let params = WrappedNormalParams::new(T::zero(), tau * tau * variance)?;
    Ok(tau.ln() + log_wrapped_normal_pdf(tau * d, &params)?)
}

/// Lattice sum `Σ_{k∈ℤ^p} φ_V(d + k)` for a `p × p` covariance `V`
/// (row-major). For `p = 1` this is [`wrapped_gaussian_unit`].
pub fn lattice_gaussian_sum<T: Real>(d: &[T], cov: &[T]) -> Result<T> {
    Ok(log_lattice_gaussian_sum(d, cov)?.exp())
}

pub fn log_lattice_gaussian_sum<T: Real>(d: &[T], cov: &[T]) -> Result<T> {
    let p = d.len();
    for &x in d {
        ensure_finite(x, "lattice offset")?;
    }
    if p == 1 {
        if cov.len() != 1 {
            return Err(Error::InvalidParameter("covariance must be 1x1".into()));
        }
        return log_wrapped_gaussian_unit(d[0], cov[0]);
    }
    let l = linalg::cholesky(cov, p)?;
    let inv = linalg::spd_inverse(&l, p);
    let frob_inv = inv.iter().map(|&x| x * x).sum::<T>().sqrt();
    let lambda_min = T::one() / frob_inv;
    let lambda_max = (0..p).map(|i| cov[i * p + i]).sum::<T>();
    let pi2 = T::PI() * T::PI();
    let r_fourier = (lit::<T>(37.0) / (lit::<T>(2.0) * pi2 * lambda_min))
        .sqrt()
        .ceil()
        .to_i64()
        .unwrap_or(i64::MAX / 4);
    let r_direct = (lit::<T>(74.0) * lambda_max).sqrt().ceil().to_i64().unwrap_or(i64::MAX / 4) + 1;
    let centered: Vec<T> = d.iter().map(|&x| centered_unit(x)).collect();
    if r_fourier < r_direct {
        let s = lattice_fourier(&centered, cov, r_fourier);
        if s > T::zero() {
            return Ok(s.ln());
        }
    }
    Ok(lattice_direct_log(&centered, &l, r_direct))
}

fn for_each_lattice_point(p: usize, radius: i64, mut f: impl FnMut(&[i64])) {
    let mut k = vec![-radius; p];
    loop {
        f(&k);
        let mut i = 0;
        loop {
            if i == p {
                return;
            }
            k[i] += 1;
            if k[i] <= radius {
                break;
            }
            k[i] = -radius;
            i += 1;
        }
    }
}

fn lattice_direct_log<T: Real>(d: &[T], l: &[T], radius: i64) -> T {
    let p = d.len();
    let log_norm = -lit::<T>(0.5)
        * (lit::<T>(p as f64) * two_pi::<T>().ln() + linalg::log_det_from_cholesky(l, p));
    let mut terms = Vec::with_capacity((2 * radius as usize + 1).pow(p as u32));
    let mut v = vec![T::zero(); p];
    for_each_lattice_point(p, radius, |k| {
        for i in 0..p {
            v[i] = d[i] + lit::<T>(k[i] as f64);
        }
        let z = linalg::lower_solve(l, &v);
        let q: T = z.iter().map(|&x| x * x).sum();
        terms.push(log_norm - lit::<T>(0.5) * q);
    });
    log_sum_exp(&terms)
}

fn lattice_fourier<T: Real>(d: &[T], cov: &[T], radius: i64) -> T {
    let p = d.len();
    let two_pi2 = lit::<T>(2.0) * T::PI() * T::PI();
    let tau = two_pi::<T>();
    let mut s = T::zero();
    for_each_lattice_point(p, radius, |m| {
        let mut q = T::zero();
        let mut phase = T::zero();
        for i in 0..p {
            let mi = lit::<T>(m[i] as f64);
            phase += mi * d[i];
            for j in 0..p {
                q += mi * cov[i * p + j] * lit::<T>(m[j] as f64);
            }
        }
        s += (-two_pi2 * q).exp() * (tau * phase).cos();
    });
    s
}

/// `e^{−x} I₀(x)` for `x ≥ 0`.
pub fn bessel_i0_scaled<T: Real>(x: T) -> T {
    let tol = T::series_tolerance();
    if x <= lit(20.0) {
        let q = x * x * lit::<T>(0.25);
        let mut term = T::one();
        let mut sum = T::one();
        let mut m = 1.0;
        loop {
            term = term * q / lit::<T>(m * m);
            sum += term;
            if term < tol * sum {
                break;
            }
            m += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Hankel asymptotic expansion
        let mut term = T::one();
        let mut sum = T::one();
        let mut k = 1.0;
        loop {
            let next = term * lit::<T>((2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k)) / x;
            if next > term || next < tol * sum {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (two_pi::<T>() * x).sqrt()
    }
}

/// `log I₀(x)`.
pub fn log_bessel_i0<T: Real>(x: T) -> T {
    bessel_i0_scaled(x.abs()).ln() + x.abs()
}

/// Ratios `A_m(x) = I_m(x) / I₀(x)` for `m = 0..=max_order`, from the
/// continued fraction `I_m/I_{m−1} = x / (2m + x I_{m+1}/I_m)` run downward.
pub fn bessel_i_ratios<T: Real>(x: T, max_order: usize) -> Vec<T> {
    let mut out = vec![T::zero(); max_order + 1];
    out[0] = T::one();
    if max_order == 0 || x == T::zero() {
        return out;
    }
    let x_int = x.to_f64().unwrap_or(0.0).ceil() as usize;
    let top = max_order.max(x_int) + 40;
    // starting value from the Amos-type approximation of I_{M}/I_{M-1}
    let mf = lit::<T>(top as f64);
    let mut r = x / (mf + (mf * mf + x * x).sqrt());
    let mut ratios = vec![T::zero(); max_order + 1];
    for m in (1..=top).rev() {
        r = x / (lit::<T>(2.0 * m as f64) + x * r);
        if m <= max_order {
            ratios[m] = r;
        }
    }
    let mut acc = T::one();
    for m in 1..=max_order {
        acc *= ratios[m];
        out[m] = acc;
    }
    out
}

/// Modified Bessel function of the first kind `I_order(x)`, `x ≥ 0`.
pub fn bessel_i<T: Real>(order: u32, x: T) -> Result<T> {
    ensure_finite(x, "x")?;
    if x < T::zero() {
        return Err(Error::Domain(format!("bessel_i requires x >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok(if order == 0 { T::one() } else { T::zero() });
    }
    let ratio = bessel_i_ratios(x, order as usize)[order as usize];
    let scaled = bessel_i0_scaled(x);
    if x < lit(600.0) {
        Ok(scaled * x.exp() * ratio)
    } else {
        Ok((scaled.ln() + x + ratio.ln()).exp())
    }
}

/// Parameters of the bivariate sine von Mises normalizing constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvmNormalizingInput<T: Real = f64> {
    pub kappa1: T,
    pub kappa2: T,
    pub lambda: T,
}

impl<T: Real> BvmNormalizingInput<T> {
    pub fn new(kappa1: T, kappa2: T, lambda: T) -> Result<Self> {
        for (v, n) in [(kappa1, "kappa1"), (kappa2, "kappa2"), (lambda, "lambda")] {
            ensure_finite(v, n)?;
        }
        if kappa1 < T::zero() || kappa2 < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "concentrations must be >= 0, got ({kappa1}, {kappa2})"
            )));
        }
        Ok(Self {
            kappa1,
            kappa2,
            lambda,
        })
    }
}

const BVM_MAX_TERMS: usize = 500;

/// `log(I_m(κ)/κ^m)` for `m = 0..=max_order`, finite at `κ = 0`.
fn log_bessel_over_power<T: Real>(kappa: T, max_order: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(max_order + 1);
    if kappa == T::zero() {
        // I_m(κ)/κ^m → 1/(2^m m!)
        let mut acc = T::zero();
        out.push(acc);
        for m in 1..=max_order {
            acc -= (lit::<T>(2.0 * m as f64)).ln();
            out.push(acc);
        }
        return out;
    }
    let ratios = bessel_i_ratios(kappa, max_order);
    let log_i0 = log_bessel_i0(kappa);
    let log_k = kappa.ln();
    for (m, a) in ratios.iter().enumerate() {
        out.push(log_i0 + a.ln() - lit::<T>(m as f64) * log_k);
    }
    out
}

/// Log of the normalizing constant `C(κ₁, κ₂, λ)` of the sine bivariate von
/// Mises density, from
/// `C⁻¹ = 4π² Σ_m binom(2m, m) (λ²/(4κ₁κ₂))^m I_m(κ₁) I_m(κ₂)`.
pub fn log_bvm_normalizing_constant<T: Real>(input: &BvmNormalizingInput<T>) -> Result<T> {
    let four_pi2 = lit::<T>(4.0) * T::PI() * T::PI();
    if input.lambda == T::zero() {
        return Ok(-(four_pi2.ln() + log_bessel_i0(input.kappa1) + log_bessel_i0(input.kappa2)));
    }
    let g1 = log_bessel_over_power(input.kappa1, BVM_MAX_TERMS);
    let g2 = log_bessel_over_power(input.kappa2, BVM_MAX_TERMS);
    let log_l = (input.lambda * input.lambda * lit::<T>(0.25)).ln();
    let rel_tol = lit::<T>(1e-14);
    let mut log_binom = T::zero();
    let mut log_terms: Vec<T> = Vec::new();
    let mut log_sum = T::neg_infinity();
    let mut converged = false;
    for m in 0..BVM_MAX_TERMS {
        if m > 0 {
            // binom(2m, m) = binom(2m−2, m−1)·(2m)(2m−1)/m²
            let mf = m as f64;
            log_binom += lit::<T>((2.0 * mf) * (2.0 * mf - 1.0) / (mf * mf)).ln();
        }
        let lt = log_binom + lit::<T>(m as f64) * log_l + g1[m] + g2[m];
        log_terms.push(lt);
        let prev_sum = log_sum;
        log_sum = if prev_sum == T::neg_infinity() {
            lt
        } else {
            let hi = prev_sum.max(lt);
            hi + ((prev_sum - hi).exp() + (lt - hi).exp()).ln()
        };
        let decreasing = m > 0 && lt < log_terms[m - 1];
        if decreasing && (lt - log_sum).exp() < rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "bivariate von Mises constant series did not converge in {BVM_MAX_TERMS} terms \
             (kappa1={}, kappa2={}, lambda={})",
            input.kappa1, input.kappa2, input.lambda
        )));
    }
    Ok(-(four_pi2.ln() + log_sum))
}

/// Normalizing constant `C(κ₁, κ₂, λ)`.
pub fn bvm_normalizing_constant<T: Real>(input: &BvmNormalizingInput<T>) -> Result<T> {
    Ok(log_bvm_normalizing_constant(input)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn bessel_trivial_values() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
        assert!(bessel_i(0, -1.0).is_err());
    }

    #[test]
    fn bessel_known_values() {
        // reference values from Abramowitz & Stegun tables
        let cases = [
            (0u32, 1.0f64, 1.266_065_877_752_008_4f64),
            (1, 1.0f64, 0.565_159_103_992_485),
            (0, 10.0f64, 2_815.716_628_466_254),
            (2, 5.0f64, 17.505_614_966_624_236),
            (0, 30.0f64, 781_672_297_823.977_5),
        ];
        for (n, x, expect) in cases {
            let v = bessel_i(n, x).unwrap();
            assert!(((v - expect) / expect).abs() < 1e-12, "I_{n}({x}) = {v}");
        }
    }

    #[test]
    fn bessel_continuity_across_branch() {
        let below = bessel_i0_scaled(20.0f64);
        let above = bessel_i0_scaled(20.0f64 + 1e-12);
        assert!(((below - above) / below).abs() < 1e-12);
    }

    #[test]
    fn bessel_recurrence_holds() {
        for &x in &[0.5, 1.0, 3.3, 12.0, 25.0, 50.0] {
            for m in 1..8u32 {
                let lhs = bessel_i(m - 1, x).unwrap() - bessel_i(m + 1, x).unwrap();
                let rhs = 2.0 * m as f64 / x * bessel_i(m, x).unwrap();
                assert!(((lhs - rhs) / rhs).abs() < 1e-9, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn wrapped_normal_uniform_limit() {
        let p = WrappedNormalParams::new(1.0, 1e4).unwrap();
        let v = wrapped_normal_pdf(1.0, &p).unwrap();
        assert!((v - 1.0 / TAU).abs() < 1e-10);
    }

    #[test]
    fn wrapped_normal_rejects_bad_input() {
        assert!(WrappedNormalParams::new(0.0, 0.0).is_err());
        assert!(WrappedNormalParams::new(f64::NAN, 1.0).is_err());
        let p = WrappedNormalParams::new(0.0, 1.0).unwrap();
        assert!(wrapped_normal_pdf(f64::INFINITY, &p).is_err());
    }

    #[test]
    fn wrapped_normal_symmetric_and_periodic() {
        for &(a, b, v) in &[(0.3f64, 2.0f64, 0.5f64), (5.9, 0.1, 3.0), (1.0, 4.0, 60.0)] {
            let p1 = WrappedNormalParams::new(b, v).unwrap();
            let p2 = WrappedNormalParams::new(a, v).unwrap();
            let x = wrapped_normal_pdf(a, &p1).unwrap();
            let y = wrapped_normal_pdf(b, &p2).unwrap();
            assert!((x - y).abs() < 1e-14);
            let z = wrapped_normal_pdf(a + TAU, &p1).unwrap();
            assert!((x - z).abs() < 1e-14);
        }
    }

    #[test]
    fn log_wrapped_normal_survives_tiny_variance() {
        let p = WrappedNormalParams::new(0.0, 1e-6).unwrap();
        let lv = log_wrapped_normal_pdf(PI, &p).unwrap();
        assert!(lv.is_finite() && lv < -1e5);
    }

    #[test]
    fn cauchy_values() {
        assert!((cauchy_pdf(2.0, 2.0, 0.5).unwrap() - 1.0 / (PI * 0.5)).abs() < 1e-15);
        assert!((cauchy_pdf(2.5, 2.0, 0.5).unwrap() - 1.0 / (2.0 * PI * 0.5)).abs() < 1e-15);
        assert!(cauchy_pdf(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn bvm_constant_trivial_cases() {
        let c = bvm_normalizing_constant(&BvmNormalizingInput::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert!((c - 1.0 / (4.0 * PI * PI)).abs() < 1e-16);
        let (k1, k2) = (1.3, 0.4);
        let c = bvm_normalizing_constant(&BvmNormalizingInput::new(k1, k2, 0.0).unwrap()).unwrap();
        let expect = 1.0 / (4.0 * PI * PI * bessel_i(0, k1).unwrap() * bessel_i(0, k2).unwrap());
        assert!(((c - expect) / expect).abs() < 1e-13);
    }

    #[test]
    fn bvm_constant_with_zero_concentration_and_coupling() {
        // κ₁ = κ₂ = 0: expanding exp(λ sin θ₁ sin θ₂) and integrating
        // sin^{2m} term by term gives C⁻¹ = 4π² Σ λ^{2m}/(2m)! (binom(2m,m)/4^m)²
        let lambda: f64 = 0.8;
        let mut total = 0.0;
        let mut fact = 1.0;
        let mut binom = 1.0;
        for m in 0..30 {
            if m > 0 {
                fact *= (2 * m - 1) as f64 * (2 * m) as f64;
                binom *= (2 * m - 1) as f64 * (2 * m) as f64 / (m * m) as f64;
            }
            let w = binom / 4f64.powi(m);
            total += lambda.powi(2 * m) / fact * w * w;
        }
        let c = bvm_normalizing_constant(&BvmNormalizingInput::new(0.0, 0.0, lambda).unwrap()).unwrap();
        let expect = 1.0 / (4.0 * PI * PI * total);
        assert!(((c - expect) / expect).abs() < 1e-13);
    }

    #[test]
    fn f32_paths_agree_with_f64() {
        let p64 = WrappedNormalParams::new(0.4f64, 0.7).unwrap();
        let p32 = WrappedNormalParams::new(0.4f32, 0.7).unwrap();
        let a = wrapped_normal_pdf(1.1f64, &p64).unwrap();
        let b = wrapped_normal_pdf(1.1f32, &p32).unwrap();
        assert!((a - f64::from(b)).abs() < 1e-5);
        assert!((bessel_i(0, 2.0f32).unwrap() - 2.279_585_3).abs() < 1e-5);
    }
}
