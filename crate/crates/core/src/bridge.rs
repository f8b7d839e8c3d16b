//! Exact diffusion bridges.
//!
//! Conditioning `Θ` on both endpoints reduces to sampling the winding number
//! `K_T` from `P[K_T = k] ∝ φ_{TΣ}(R(θ_T) − R(θ₀) + k)`, drawing a Brownian
//! bridge from `0` to `y = Σ^{−1/2}(R(θ_T) − R(θ₀) + K_T)` and mapping it back
//! through `R⁻¹(Σ^{1/2}U + R(θ₀)) mod 2π`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffusion::{DiffusionModel, TransitionKernel};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg;
use crate::scalar::{log_sum_exp, wrap_angle};
use crate::special::log_normal_pdf;

/// Endpoints, horizon and interior times of a bridge.
#[derive(Clone, Debug)]
pub struct BridgeSpec<'a> {
    model: &'a DiffusionModel,
    start: Vec<f64>,
    end: Vec<f64>,
    horizon: f64,
    times: Vec<f64>,
}

impl<'a> BridgeSpec<'a> {
    pub fn new(
        model: &'a DiffusionModel,
        start: &[f64],
        end: &[f64],
        horizon: f64,
        times: Vec<f64>,
    ) -> Result<Self> {
        let p = model.dim();
        if start.len() != p || end.len() != p {
            return Err(Error::Domain(format!("bridge endpoints must have {p} coordinates")));
        }
        for &v in start.iter().chain(end) {
            ensure_finite(v, "endpoint")?;
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t < horizon) {
                return Err(Error::Domain(format!(
                    "interior times must increase strictly inside (0, {horizon}), got {times:?}"
                )));
            }
            prev = t;
        }
        Ok(Self {
            model,
            start: start.iter().map(|&a| wrap_angle(a)).collect(),
            end: end.iter().map(|&a| wrap_angle(a)).collect(),
            horizon,
            times,
        })
    }

    /// Equispaced interior grid `T·i/(n+1)`, `i = 1..=n`.
    pub fn equispaced(model: &'a DiffusionModel, start: &[f64], end: &[f64], horizon: f64, n: usize) -> Result<Self> {
        let times = (1..=n).map(|i| horizon * i as f64 / (n + 1) as f64).collect();
        Self::new(model, start, end, horizon, times)
    }

    pub fn model(&self) -> &DiffusionModel {
        self.model
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn end(&self) -> &[f64] {
        &self.end
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `R(θ_T) − R(θ₀)` for the reduced endpoints.
    fn transform_gap(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let r0 = self.model.transform(&self.start)?;
        let r1 = self.model.transform(&self.end)?;
        let d = r1.iter().zip(&r0).map(|(a, b)| a - b).collect();
        Ok((d, r0))
    }
}

/// Truncated law of the winding number, sorted by decreasing probability.
#[derive(Clone, Debug, PartialEq)]
pub struct WindingTable {
    pub entries: Vec<(Vec<i64>, f64)>,
}

impl WindingTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn probability(&self, k: &[i64]) -> f64 {
        self.entries.iter().find(|e| e.0 == k).map_or(0.0, |e| e.1)
    }

    /// Inverse-CDF walk in table order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in &self.entries {
            acc += p;
            if u < acc {
                return k;
            }
        }
        &self.entries[self.entries.len() - 1].0
    }
}

/// One exact bridge draw.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgeDraw {
    pub winding: Vec<i64>,
    /// `y = Σ^{−1/2}(R(θ_T) − R(θ₀) + K_T)`
    pub transform_endpoint: Vec<f64>,
    /// interior Brownian-bridge values `U_i`, `n × p` row-major
    pub transform_values: Vec<f64>,
    /// interior states `B_i ∈ [0, 2π)^p`, `n × p` row-major
    pub states: Vec<f64>,
}

/// Law of `K_T` over a box centred on the most likely winding; each
/// half-width is `max(3, ⌈7.5·sd⌉ + 1)` with `sd` the marginal standard
/// deviation of `TΣ`, so the omitted mass is below `1e−12`.
pub fn winding_distribution(spec: &BridgeSpec) -> Result<WindingTable> {
    let (d, _) = spec.transform_gap()?;
    let p = d.len();
    let v = spec.model.covariance().scaled(spec.horizon);
    let l = linalg::cholesky(&v, p)?;
    let centre: Vec<i64> = d.iter().map(|x| (-x).round() as i64).collect();
    let radius: Vec<i64> = (0..p)
        .map(|j| ((7.5 * v[j * p + j].sqrt()).ceil() as i64 + 1).max(3))
        .collect();
    let mut keys = Vec::new();
    let mut logs = Vec::new();
    let mut k = vec![0i64; p];
    let mut offs: Vec<i64> = radius.iter().map(|r| -r).collect();
    let mut shifted = vec![0.0; p];
    loop {
        for j in 0..p {
            k[j] = centre[j] + offs[j];
            shifted[j] = d[j] + k[j] as f64;
        }
        let z = linalg::lower_solve(&l, &shifted);
        let q: f64 = z.iter().map(|x| x * x).sum();
        logs.push(-0.5 * q);
        keys.push(k.clone());
        let mut j = 0;
        loop {
            if j == p {
                let norm = log_sum_exp(&logs);
                let mut entries: Vec<(Vec<i64>, f64)> = keys
                    .into_iter()
                    .zip(logs.iter().map(|lg| (lg - norm).exp()))
                    .collect();
                entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                return Ok(WindingTable { entries });
            }
            offs[j] += 1;
            if offs[j] <= radius[j] {
                break;
            }
            offs[j] = -radius[j];
            j += 1;
        }
    }
}

/// Draws `K_T`, the Brownian bridge `U` and the interior states `B`.
pub fn sample_bridge<R: Rng + ?Sized>(spec: &BridgeSpec, rng: &mut R) -> Result<BridgeDraw> {
    let table = winding_distribution(spec)?;
    sample_bridge_with_table(spec, &table, rng)
}

/// As [`sample_bridge`] with a precomputed winding table (reused across
/// draws with the same endpoints).
pub fn sample_bridge_with_table<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    table: &WindingTable,
    rng: &mut R,
) -> Result<BridgeDraw> {
    let (d, r0) = spec.transform_gap()?;
    let p = d.len();
    let l = spec.model.covariance().factor();
    let winding = table.sample(rng).to_vec();
    let gap: Vec<f64> = d.iter().zip(&winding).map(|(x, &k)| x + k as f64).collect();
    let y = linalg::lower_solve(l, &gap);

    let n = spec.times.len();
    let mut cum = vec![vec![0.0; p]; n + 1];
    let mut acc = vec![0.0; p];
    let mut prev = 0.0;
    for i in 0..=n {
        let t = if i < n { spec.times[i] } else { spec.horizon };
        let sd = (t - prev).sqrt();
        for a in acc.iter_mut() {
            *a += sd * rng.sample::<f64, _>(StandardNormal);
        }
        cum[i].copy_from_slice(&acc);
        prev = t;
    }
    let mut transform_values = Vec::with_capacity(n * p);
    let mut states = Vec::with_capacity(n * p);
    for i in 0..n {
        let w = spec.times[i] / spec.horizon;
        let u: Vec<f64> = (0..p).map(|j| cum[i][j] - w * (cum[n][j] - y[j])).collect();
        let lu = linalg::lower_mul(l, &u);
        let x: Vec<f64> = lu.iter().zip(&r0).map(|(a, b)| a + b).collect();
        let b = spec.model.inverse_transform(&x)?;
        transform_values.extend_from_slice(&u);
        states.extend(b.into_iter().map(wrap_angle));
    }
    Ok(BridgeDraw {
        winding,
        transform_endpoint: y,
        transform_values,
        states,
    })
}

/// Density of `Θ_t` given both endpoints:
/// `p_{T−t}(θ | θ_T) p_t(θ | θ₀) f(θ_T) / (p_T(θ_T | θ₀) f(θ))`.
pub fn bridge_marginal_density(spec: &BridgeSpec, t: f64, theta: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t < spec.horizon) {
        return Err(Error::Domain(format!("t must lie in (0, {}), got {t}", spec.horizon)));
    }
    let m = spec.model;
    let log = m.log_transition_density(&spec.end, theta, spec.horizon - t)?
        + m.log_transition_density(&spec.start, theta, t)?
        - m.log_transition_density(&spec.start, &spec.end, spec.horizon)?
        + m.pdf(&spec.end).ln()
        - m.pdf(theta).ln();
    Ok(log.exp())
}

/// Density of the midpoint `U` of a scalar Brownian bridge from `0` to `y`
/// over `[0, T]` at time `t` (unit variance rate).
pub fn brownian_bridge_log_density(u: f64, y: f64, t: f64, horizon: f64) -> f64 {
    let mean = y * t / horizon;
    let var = t * (horizon - t) / horizon;
    log_normal_pdf(u - mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::CircularDensity;
    use crate::quadrature::integrate;
    use crate::rng::seeded;
    use crate::special::{wrapped_normal_pdf, WrappedNormalParams};
    use crate::toroidal::{BvmParams, CovarianceSpec, ToroidalDensity};
    use std::f64::consts::TAU;

    fn vm_model() -> DiffusionModel {
        DiffusionModel::circular(CircularDensity::von_mises(0.0, 2.0).unwrap(), 0.15).unwrap()
    }

    #[test]
    fn winding_table_normalized_and_symmetric() {
        let m = DiffusionModel::circular(CircularDensity::von_mises(0.0, 2.0).unwrap(), 1.5).unwrap();
        let spec = BridgeSpec::new(&m, &[1.0], &[1.0], 2.0, vec![1.0]).unwrap();
        let t = winding_distribution(&spec).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-12);
        for k in 1..4 {
            assert!((t.probability(&[k]) - t.probability(&[-k])).abs() < 1e-14);
        }
    }

    #[test]
    fn short_horizon_concentrates_on_zero_winding() {
        let m = vm_model();
        let spec = BridgeSpec::new(&m, &[2.0], &[2.0], 1e-3, vec![5e-4]).unwrap();
        let t = winding_distribution(&spec).unwrap();
        assert!(t.probability(&[0]) > 1.0 - 1e-12);
    }

    #[test]
    fn invalid_times_rejected() {
        let m = vm_model();
        assert!(BridgeSpec::new(&m, &[0.0], &[1.0], 1.0, vec![0.5, 0.4]).is_err());
        assert!(BridgeSpec::new(&m, &[0.0], &[1.0], 1.0, vec![1.0]).is_err());
        let spec = BridgeSpec::new(&m, &[0.0], &[1.0], 1.0, vec![0.5]).unwrap();
        assert!(bridge_marginal_density(&spec, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn marginal_integrates_to_one() {
        let m = vm_model();
        let spec = BridgeSpec::new(&m, &[0.3], &[2.5], 1.0, vec![]).unwrap();
        for &t in &[0.1, 0.5, 0.9] {
            let i = integrate(|x| bridge_marginal_density(&spec, t, &[x]).unwrap(), 0.0, TAU, 1e-12, 1e-12)
                .unwrap();
            assert!((i.value - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_marginal_matches_wrapped_brownian_bridge() {
        let sigma = 0.4;
        let m = DiffusionModel::circular(CircularDensity::uniform(), sigma).unwrap();
        let (a, b, horizon, t) = (0.5, 4.0, 1.0, 0.3);
        let spec = BridgeSpec::new(&m, &[a], &[b], horizon, vec![]).unwrap();
        // mixture over windings of wrapped Brownian-bridge normals in angle space
        let s2 = (TAU * sigma).powi(2);
        let mut num = Vec::new();
        for k in -20i64..=20 {
            let gap = b - a + TAU * k as f64;
            let w = -(gap * gap) / (2.0 * s2 * horizon);
            num.push((k, w));
        }
        let logs: Vec<f64> = num.iter().map(|e| e.1).collect();
        let norm = log_sum_exp(&logs);
        for &x in &[0.0, 1.5, 3.0, 5.0] {
            let mut dens = 0.0;
            for &(k, w) in &num {
                let gap = b - a + TAU * k as f64;
                let params = WrappedNormalParams::new(a + gap * t / horizon, s2 * t * (horizon - t) / horizon).unwrap();
                dens += (w - norm).exp() * wrapped_normal_pdf(x, &params).unwrap();
            }
            let ours = bridge_marginal_density(&spec, t, &[x]).unwrap();
            assert!((ours - dens).abs() < 1e-10, "{ours} vs {dens}");
        }
    }

    #[test]
    fn draws_land_on_the_torus_and_full_construction_hits_endpoint() {
        let cov = CovarianceSpec::new(vec![0.04, 0.01, 0.01, 0.09], 2).unwrap();
        let d = ToroidalDensity::bivariate_von_mises(BvmParams::new(0.0, 1.0, 1.0, 2.0, 0.5)).unwrap();
        let m = DiffusionModel::toroidal(d, cov).unwrap();
        let spec = BridgeSpec::equispaced(&m, &[0.2, 6.0], &[3.0, 1.0], 1.0, 9).unwrap();
        let mut rng = seeded(5);
        for _ in 0..20 {
            let draw = sample_bridge(&spec, &mut rng).unwrap();
            assert_eq!(draw.states.len(), 18);
            assert!(draw.states.iter().all(|&x| (0.0..TAU).contains(&x)));
            // the U formula at t = T returns y, so R⁻¹(LY + R(θ₀)) = θ_T
            let l = m.covariance().factor();
            let r0 = m.transform(spec.start()).unwrap();
            let x: Vec<f64> = linalg::lower_mul(l, &draw.transform_endpoint)
                .iter()
                .zip(&r0)
                .map(|(a, b)| a + b)
                .collect();
            let end = m.inverse_transform(&x).unwrap();
            for j in 0..2 {
                assert!(crate::diffusion::angular_distance(end[j], spec.end()[j]) < 1e-8);
            }
        }
    }
}
