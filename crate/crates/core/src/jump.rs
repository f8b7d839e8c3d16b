//! The circular jump process `Θ_t = F⁻¹(V_t + F(θ₀)) mod 2π` driven by a
//! symmetric Cauchy process `V` with scale `σ`, and its exact bridge.
//!
//! The transition density is
//! `(1 − ρ²) f(θ₂) / (1 + ρ² − 2ρ cos(2π(F(θ₂) − F(θ₁))))` with
//! `ρ = e^{−2πtσ}`. Bridges use the subordination `V_t = W̃_{S_t}`, where
//! `W̃` has variance rate `2σ²` and `S_t` is Lévy with scale `t²/2`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::circular::CircularDensity;
use crate::diffusion::{PathSample, TransitionKernel};
use crate::error::{ensure_finite, Error, Result};
use crate::scalar::{lit, two_pi, wrap_angle};
use crate::Real;

/// Proposal budget of the acceptance-rejection step.
pub const MAX_PROPOSALS: usize = 1_000_000;
/// Smallest `|y|` used when bounding the acceptance ratio.
pub const MIN_ENDPOINT_GAP: f64 = 1e-8;
const MIN_WINDING_RADIUS: i64 = 10;

/// How transform-space increments are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    /// `Δσ·tan(π(U − ½))`
    Direct,
    /// `N(0, 2σ²S)` with `S = A⁻²`, `A ~ N(0, 2/Δ²)`
    Subordinated,
}

/// Jump process with stationary density `f` and Cauchy scale `σ`.
#[derive(Clone, Debug)]
pub struct JumpModel<T: Real = f64> {
    density: CircularDensity<T>,
    sigma: T,
}

impl<T: Real> JumpModel<T> {
    pub fn new(density: CircularDensity<T>, sigma: T) -> Result<Self> {
        ensure_finite(sigma, "sigma")?;
        if !(sigma > T::zero()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { density, sigma })
    }

    pub fn density(&self) -> &CircularDensity<T> {
        &self.density
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `ρ_t = e^{−2πtσ}`.
    pub fn rho(&self, t: T) -> T {
        (-two_pi::<T>() * t * self.sigma).exp()
    }

    /// Builds the inversion cache of the density.
    pub fn with_cache(self) -> Result<Self> {
        Ok(Self {
            density: self.density.with_cache()?,
            sigma: self.sigma,
        })
    }
}

impl<T: Real> TransitionKernel<T> for JumpModel<T> {
    fn dim(&self) -> usize {
        1
    }

    fn log_transition_density(&self, from: &[T], to: &[T], t: T) -> Result<T> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(Error::Domain(format!("elapsed time must be > 0, got {t}")));
        }
        ensure_finite(from[0], "angle")?;
        ensure_finite(to[0], "angle")?;
        let rho = self.rho(t);
        // 1 − ρ² without cancellation for short times
        let one_minus_rho2 = -(-lit::<T>(2.0) * two_pi::<T>() * t * self.sigma).exp_m1();
        let d = self.density.cdf(to[0]) - self.density.cdf(from[0]);
        let s = (T::PI() * d).sin();
        let one_minus_rho = -(-two_pi::<T>() * t * self.sigma).exp_m1();
        let denom = one_minus_rho * one_minus_rho + lit::<T>(4.0) * rho * s * s;
        Ok(one_minus_rho2.ln() - denom.ln() + self.density.log_pdf(to[0]))
    }

    fn stationary_pdf(&self, x: &[T]) -> T {
        self.density.pdf(x[0])
    }
}

/// `P[K_T = k]` for `k` in a central window, with the mass outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpWindingTable {
    /// smallest `k` in the window
    pub first: i64,
    pub probabilities: Vec<f64>,
    /// exact probability of falling outside the window
    pub tail_mass: f64,
    /// `F(θ_T) − F(θ₀)`
    pub gap: f64,
    /// `Tσ`
    pub scale: f64,
}

impl JumpWindingTable {
    pub fn probability(&self, k: i64) -> f64 {
        let i = k - self.first;
        if i >= 0 && (i as usize) < self.probabilities.len() {
            self.probabilities[i as usize]
        } else {
            winding_probability(self.gap, self.scale, k)
        }
    }

    pub fn last(&self) -> i64 {
        self.first + self.probabilities.len() as i64 - 1
    }

    /// Exact draw: inverse-CDF walk over the window, otherwise a tail draw
    /// from a rounded continuous Cauchy proposal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<i64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(self.first + i as i64);
            }
        }
        self.sample_tail(rng)
    }

    /// Samples `k` outside the window. The proposal rounds `Y ~ C(0, Tσ)` to
    /// `k = round(Y − gap)` and is accepted with probability
    /// `g(gap + k) / ∫_{bin} g`; the ratio is at most one because the Cauchy
    /// density is convex beyond `Tσ/√3`, which the window radius guarantees.
    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<i64> {
        let s = self.scale;
        for _ in 0..MAX_PROPOSALS {
            let u: f64 = rng.random();
            let y = s * (std::f64::consts::PI * (u - 0.5)).tan();
            let kf = (y - self.gap).round();
            if !kf.is_finite() || kf.abs() > 9e15 {
                continue;
            }
            let k = kf as i64;
            if k >= self.first && k <= self.last() {
                continue;
            }
            let mid = self.gap + kf;
            let bin = (((mid + 0.5) / s).atan() - ((mid - 0.5) / s).atan()) / std::f64::consts::PI;
            let g = s / (std::f64::consts::PI * (mid * mid + s * s));
            if rng.random::<f64>() * bin < g {
                return Ok(k);
            }
        }
        Err(Error::RejectionBudget(MAX_PROPOSALS))
    }
}

/// `P[K_T = k] = f_C(d + k; 0, s) / Σ_m f_C(d + m; 0, s)` using the closed form
/// `Σ_m f_C(d + m; 0, s) = sinh(2πs)/(cosh(2πs) − cos(2πd))`.
pub fn winding_probability(gap: f64, scale: f64, k: i64) -> f64 {
    let y = gap + k as f64;
    let tau = two_pi::<f64>();
    let fc = scale / (std::f64::consts::PI * (y * y + scale * scale));
    // (cosh − cos)/sinh written to stay finite for large scales
    let e = (-tau * scale).exp();
    let s = (std::f64::consts::PI * gap).sin();
    let ratio = ((1.0 - e).powi(2) + 4.0 * e * s * s) / (1.0 - e * e);
    fc * ratio
}

/// Law of the winding number of a jump bridge. The window has half-width
/// `max(10, ⌈0.6·Tσ⌉ + 2)` around `−gap` and the tail is handled exactly.
pub fn jump_winding_distribution(
    model: &JumpModel,
    theta0: f64,
    theta_t: f64,
    horizon: f64,
) -> Result<JumpWindingTable> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let gap = model.density.cdf(wrap_angle(theta_t)) - model.density.cdf(wrap_angle(theta0));
    let scale = horizon * model.sigma;
    let radius = MIN_WINDING_RADIUS.max((0.6 * scale).ceil() as i64 + 2);
    let centre = (-gap).round() as i64;
    let first = centre - radius;
    let probabilities: Vec<f64> = (first..=centre + radius)
        .map(|k| winding_probability(gap, scale, k))
        .collect();
    let tail_mass = (1.0 - probabilities.iter().sum::<f64>()).max(0.0);
    Ok(JumpWindingTable {
        first,
        probabilities,
        tail_mass,
        gap,
        scale,
    })
}

/// One exact jump-bridge draw.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyBridgeDraw {
    pub winding: i64,
    /// `y = F(θ_T) − F(θ₀) + K_T`
    pub endpoint: f64,
    /// accepted auxiliary normals `A₁, …, A_{n+1}`
    pub auxiliary: Vec<f64>,
    /// subordinator clock `S_{t_1} < … < S_{t_{n+1}}`
    pub clock: Vec<f64>,
    /// interior transform values `U_i`
    pub transform_values: Vec<f64>,
    /// interior states `B_i ∈ [0, 2π)`
    pub states: Vec<f64>,
    /// acceptance bound `M_A`
    pub bound: f64,
    /// proposals used by the acceptance-rejection step
    pub proposals: usize,
}

/// `M_A = π(y² + s²)/(s√(2πe)|y|)` with `s = Tσ` and `|y|` clamped at
/// [`MIN_ENDPOINT_GAP`].
pub fn acceptance_bound(y: f64, scale: f64) -> f64 {
    let ay = y.abs().max(MIN_ENDPOINT_GAP);
    std::f64::consts::PI * (ay * ay + scale * scale)
        / (scale * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt() * ay)
}

/// Ratio `φ_{2σ²ΣA⁻²}(y) / f_C(y; 0, s)` of the target to the proposal.
pub fn acceptance_ratio(y: f64, sigma: f64, scale: f64, auxiliary: &[f64]) -> f64 {
    let clock: f64 = auxiliary.iter().map(|a| 1.0 / (a * a)).sum();
    let var = 2.0 * sigma * sigma * clock;
    let phi = (-(y * y) / (2.0 * var)).exp() / (two_pi::<f64>() * var).sqrt();
    let fc = scale / (std::f64::consts::PI * (y * y + scale * scale));
    phi / fc
}

/// Proposal draw `A_i ~ N(0, 2/Δ_i²)`.
pub fn propose_auxiliary<R: Rng + ?Sized>(steps: &[f64], rng: &mut R) -> Vec<f64> {
    steps
        .iter()
        .map(|d| (2.0f64).sqrt() / d * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn check_times(horizon: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let mut prev = 0.0;
    let mut steps = Vec::with_capacity(times.len() + 1);
    for &t in times.iter().chain(std::iter::once(&horizon)) {
        if !(t > prev) || t > horizon || (t == horizon && steps.len() < times.len()) {
            return Err(Error::Domain(format!(
                "interior times must increase strictly inside (0, {horizon}), got {times:?}"
            )));
        }
        steps.push(t - prev);
        prev = t;
    }
    Ok(steps)
}

impl JumpModel<f64> {
    /// Simulates `Θ₀, Θ_Δ, …, Θ_{nΔ}`.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        theta0: f64,
        n: usize,
        delta: f64,
        mode: JumpMode,
        rng: &mut R,
    ) -> Result<PathSample> {
        Ok(self.simulate_path_traced(theta0, n, delta, mode, rng)?.0)
    }

    /// As [`simulate_path`](Self::simulate_path), also returning the
    /// transform-space values `V_{iΔ} + F(θ₀)`.
    pub fn simulate_path_traced<R: Rng + ?Sized>(
        &self,
        theta0: f64,
        n: usize,
        delta: f64,
        mode: JumpMode,
        rng: &mut R,
    ) -> Result<(PathSample, Vec<f64>)> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        ensure_finite(theta0, "theta0")?;
        let start = wrap_angle(theta0);
        let mut x = self.density.cdf(start);
        let mut angles = Vec::with_capacity(n + 1);
        let mut transform = Vec::with_capacity(n + 1);
        angles.push(start);
        transform.push(x);
        for _ in 0..n {
            x += self.increment(delta, mode, rng);
            angles.push(wrap_angle(self.density.inverse_cdf(x)?));
            transform.push(x);
        }
        Ok((PathSample::new(delta, 1, angles)?, transform))
    }

    /// One transform-space increment over a step of length `delta`.
    pub fn increment<R: Rng + ?Sized>(&self, delta: f64, mode: JumpMode, rng: &mut R) -> f64 {
        match mode {
            JumpMode::Direct => {
                let u: f64 = rng.random();
                delta * self.sigma * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            JumpMode::Subordinated => {
                let a = (2.0f64).sqrt() / delta * rng.sample::<f64, _>(StandardNormal);
                let clock = 1.0 / (a * a);
                (2.0 * self.sigma * self.sigma * clock).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    /// Exact bridge from `θ₀` at time 0 to `θ_T` at `horizon` observed at the
    /// interior `times`.
    pub fn sample_bridge<R: Rng + ?Sized>(
        &self,
        theta0: f64,
        theta_t: f64,
        horizon: f64,
        times: &[f64],
        rng: &mut R,
    ) -> Result<CauchyBridgeDraw> {
        let table = jump_winding_distribution(self, theta0, theta_t, horizon)?;
        self.sample_bridge_with_table(theta0, horizon, times, &table, rng)
    }

    pub fn sample_bridge_with_table<R: Rng + ?Sized>(
        &self,
        theta0: f64,
        horizon: f64,
        times: &[f64],
        table: &JumpWindingTable,
        rng: &mut R,
    ) -> Result<CauchyBridgeDraw> {
        let steps = check_times(horizon, times)?;
        let winding = table.sample(rng)?;
        let y = table.gap + winding as f64;
        let scale = horizon * self.sigma;
        let bound = acceptance_bound(y, scale);
        let y_eval = if y.abs() < MIN_ENDPOINT_GAP {
            MIN_ENDPOINT_GAP.copysign(if y == 0.0 { 1.0 } else { y })
        } else {
            y
        };
        let mut proposals = 0;
        let auxiliary = loop {
            if proposals == MAX_PROPOSALS {
                return Err(Error::RejectionBudget(MAX_PROPOSALS));
            }
            proposals += 1;
            let a = propose_auxiliary(&steps, rng);
            let ratio = acceptance_ratio(y_eval, self.sigma, scale, &a);
            if rng.random::<f64>() * bound < ratio {
                break a;
            }
        };
        let mut clock = Vec::with_capacity(steps.len());
        let mut acc = 0.0;
        let mut z_cum = Vec::with_capacity(steps.len());
        let mut zs = 0.0;
        for a in &auxiliary {
            let s = 1.0 / (a * a);
            acc += s;
            clock.push(acc);
            zs += (2.0 * self.sigma * self.sigma * s).sqrt() * rng.sample::<f64, _>(StandardNormal);
            z_cum.push(zs);
        }
        let n = times.len();
        let total = clock[n];
        let base = self.density.cdf(wrap_angle(theta0));
        let mut transform_values = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        for i in 0..n {
            let u = z_cum[i] - clock[i] / total * (z_cum[n] - y);
            transform_values.push(u);
            states.push(wrap_angle(self.density.inverse_cdf(u + base)?));
        }
        Ok(CauchyBridgeDraw {
            winding,
            endpoint: y,
            auxiliary,
            clock,
            transform_values,
            states,
            bound,
            proposals,
        })
    }
}
