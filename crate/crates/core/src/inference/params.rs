//! Parameter vectors `ξ = (β, σ)` and their unconstrained coordinates.

use serde::{Deserialize, Serialize};

use crate::circular::{CircularDensity, CircularFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::scalar::wrap_angle;

/// Which process a parameter vector drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Diffusion,
    Jump,
}

/// Stationary family plus process type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: FamilyKind,
    pub process: ProcessKind,
}

impl ModelSpec {
    pub fn diffusion(family: FamilyKind) -> Self {
        Self {
            family,
            process: ProcessKind::Diffusion,
        }
    }

    pub fn jump(family: FamilyKind) -> Self {
        Self {
            family,
            process: ProcessKind::Jump,
        }
    }

    /// `q`, the number of natural parameters.
    pub fn dim(&self) -> usize {
        self.family.beta_len() + 1
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = self.family.beta_names();
        v.push("sigma".into());
        v
    }

    /// Kind of each natural coordinate.
    pub fn coordinate_kinds(&self) -> Vec<CoordKind> {
        let mut v = match self.family {
            FamilyKind::Uniform => vec![],
            FamilyKind::VonMises => vec![CoordKind::Angle, CoordKind::Concentration],
            FamilyKind::WrappedCauchy => vec![CoordKind::Angle, CoordKind::UnitInterval],
            FamilyKind::VonMisesMixture { components } => {
                let mut v = vec![CoordKind::Weight; components - 1];
                for _ in 0..components {
                    v.push(CoordKind::Angle);
                    v.push(CoordKind::Concentration);
                }
                v
            }
        };
        v.push(CoordKind::Volatility);
        v
    }
}

/// Role of a natural coordinate, which fixes its unconstrained transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    Angle,
    Concentration,
    UnitInterval,
    Weight,
    Volatility,
}

impl CoordKind {
    pub fn is_positive(&self) -> bool {
        matches!(self, CoordKind::Concentration | CoordKind::Volatility)
    }
}

/// Density parameters `β` and volatility `σ` of a circular model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub family: FamilyKind,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl ParamVector {
    pub fn new(family: FamilyKind, beta: Vec<f64>, sigma: f64) -> Result<Self> {
        let p = Self { family, beta, sigma };
        p.validate()?;
        Ok(p)
    }

    /// From the natural vector `(β, σ)`.
    pub fn from_natural(family: FamilyKind, xi: &[f64]) -> Result<Self> {
        if xi.len() != family.beta_len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                family.beta_len() + 1,
                xi.len()
            )));
        }
        Self::new(family, xi[..xi.len() - 1].to_vec(), xi[xi.len() - 1])
    }

    pub fn natural(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.sigma);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        CircularDensity::from_beta_quiet(self.family, &self.beta).map(|_| ())
    }

    pub fn density(&self) -> Result<CircularDensity> {
        CircularDensity::from_beta(self.family, &self.beta)
    }

    /// Wraps angles into `[0, 2π)` and orders mixture components by
    /// ascending mean.
    pub fn canonicalize(&mut self) {
        match self.family {
            FamilyKind::VonMises | FamilyKind::WrappedCauchy => self.beta[0] = wrap_angle(self.beta[0]),
            FamilyKind::VonMisesMixture { components } => {
                if let Ok(d) = CircularDensity::from_beta_quiet(self.family, &self.beta) {
                    if let CircularFamily::VonMisesMixture(mut c) = d.family().clone() {
                        for comp in &mut c {
                            comp.mu = wrap_angle(comp.mu);
                        }
                        c.sort_by(|a, b| a.mu.total_cmp(&b.mu));
                        let mut beta: Vec<f64> = c[..components - 1].iter().map(|c| c.weight).collect();
                        for comp in &c {
                            beta.push(comp.mu);
                            beta.push(comp.kappa);
                        }
                        self.beta = beta;
                    }
                }
            }
            FamilyKind::Uniform => {}
        }
    }
}

#[derive(Clone, Debug)]
enum Block {
    Identity(usize),
    Log(usize),
    Logit(usize),
    /// `(κ cos μ, κ sin μ)`, smooth through `κ = 0`
    Polar { mu: usize, kappa: usize },
    /// additive log-ratio of the free weights against the last one
    Simplex(Vec<usize>),
}

impl Block {
    fn width(&self) -> usize {
        match self {
            Block::Identity(_) | Block::Log(_) | Block::Logit(_) => 1,
            Block::Polar { .. } => 2,
            Block::Simplex(ix) => ix.len(),
        }
    }
}

/// Map between the free natural coordinates and `ℝ^m`. Coordinates listed as
/// fixed keep their value.
#[derive(Clone, Debug)]
pub struct Parameterization {
    spec: ModelSpec,
    fixed: Vec<Option<f64>>,
    blocks: Vec<Block>,
}

impl Parameterization {
    pub fn new(spec: ModelSpec, fixed: Vec<Option<f64>>) -> Result<Self> {
        let q = spec.dim();
        if fixed.len() != q {
            return Err(Error::InvalidParameter(format!(
                "restriction has {} entries for {q} parameters",
                fixed.len()
            )));
        }
        let kinds = spec.coordinate_kinds();
        let free = |i: usize| fixed[i].is_none();
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < q {
            match kinds[i] {
                CoordKind::Weight => {
                    let mut ix = vec![];
                    while i < q && kinds[i] == CoordKind::Weight {
                        ix.push(i);
                        i += 1;
                    }
                    let n_free = ix.iter().filter(|&&j| free(j)).count();
                    if n_free != 0 && n_free != ix.len() {
                        return Err(Error::InvalidParameter(
                            "mixture weights must be all free or all fixed".into(),
                        ));
                    }
                    if n_free > 0 {
                        blocks.push(Block::Simplex(ix));
                    }
                    continue;
                }
                CoordKind::Angle
                    if spec.family == FamilyKind::VonMises
                        && kinds.get(i + 1) == Some(&CoordKind::Concentration)
                        && free(i)
                        && free(i + 1) =>
                {
                    blocks.push(Block::Polar { mu: i, kappa: i + 1 });
                    i += 2;
                    continue;
                }
                _ if !free(i) => {}
                CoordKind::Angle => blocks.push(Block::Identity(i)),
                CoordKind::Concentration | CoordKind::Volatility => blocks.push(Block::Log(i)),
                CoordKind::UnitInterval => blocks.push(Block::Logit(i)),
            }
            i += 1;
        }
        Ok(Self { spec, fixed, blocks })
    }

    pub fn unrestricted(spec: ModelSpec) -> Self {
        Self::new(spec, vec![None; spec.dim()]).expect("unrestricted layout is valid")
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn fixed(&self) -> &[Option<f64>] {
        &self.fixed
    }

    /// Number of free unconstrained coordinates.
    pub fn free_dim(&self) -> usize {
        self.blocks.iter().map(Block::width).sum()
    }

    /// Unconstrained coordinates of the natural vector `xi`.
    pub fn to_unconstrained(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut u = Vec::with_capacity(self.free_dim());
        for b in &self.blocks {
            match b {
                Block::Identity(i) => u.push(xi[*i]),
                Block::Log(i) => {
                    if !(xi[*i] > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "coordinate {i} must be > 0 to log-transform, got {}",
                            xi[*i]
                        )));
                    }
                    u.push(xi[*i].ln())
                }
                Block::Logit(i) => {
                    let r = xi[*i];
                    if !(r > 0.0 && r < 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "coordinate {i} must lie in (0, 1), got {r}"
                        )));
                    }
                    u.push((r / (1.0 - r)).ln())
                }
                Block::Polar { mu, kappa } => {
                    u.push(xi[*kappa] * xi[*mu].cos());
                    u.push(xi[*kappa] * xi[*mu].sin());
                }
                Block::Simplex(ix) => {
                    let last = 1.0 - ix.iter().map(|&j| xi[j]).sum::<f64>();
                    if !(last > 0.0) || ix.iter().any(|&j| !(xi[j] > 0.0)) {
                        return Err(Error::InvalidParameter(
                            "mixture weights must be strictly positive".into(),
                        ));
                    }
                    for &j in ix {
                        u.push((xi[j] / last).ln());
                    }
                }
            }
        }
        Ok(u)
    }

    /// Natural vector from unconstrained coordinates.
    pub fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        self.to_natural_with_jacobian(u).0
    }

    /// Natural vector and the Jacobian `∂ξ/∂u` (row-major `q × m`).
    pub fn to_natural_with_jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let q = self.spec.dim();
        let m = self.free_dim();
        let mut xi: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        let mut jac = vec![0.0; q * m];
        let mut c = 0;
        for b in &self.blocks {
            match b {
                Block::Identity(i) => {
                    xi[*i] = u[c];
                    jac[i * m + c] = 1.0;
                }
                Block::Log(i) => {
                    xi[*i] = u[c].exp();
                    jac[i * m + c] = xi[*i];
                }
                Block::Logit(i) => {
                    let r = 1.0 / (1.0 + (-u[c]).exp());
                    xi[*i] = r;
                    jac[i * m + c] = r * (1.0 - r);
                }
                Block::Polar { mu, kappa } => {
                    let (a, bb) = (u[c], u[c + 1]);
                    let r = a.hypot(bb);
                    xi[*kappa] = r;
                    xi[*mu] = bb.atan2(a);
                    if r > 0.0 {
                        jac[kappa * m + c] = a / r;
                        jac[kappa * m + c + 1] = bb / r;
                        jac[mu * m + c] = -bb / (r * r);
                        jac[mu * m + c + 1] = a / (r * r);
                    }
                }
                Block::Simplex(ix) => {
                    let mx = u[c..c + ix.len()].iter().fold(0.0f64, |a, &b| a.max(b));
                    let e: Vec<f64> = u[c..c + ix.len()].iter().map(|v| (v - mx).exp()).collect();
                    let denom = (-mx).exp() + e.iter().sum::<f64>();
                    let w: Vec<f64> = e.iter().map(|v| v / denom).collect();
                    for (r, &i) in ix.iter().enumerate() {
                        xi[i] = w[r];
                        for s in 0..ix.len() {
                            let delta = if r == s { w[r] } else { 0.0 };
                            jac[i * m + c + s] = delta - w[r] * w[s];
                        }
                    }
                }
            }
            c += b.width();
        }
        (xi, jac)
    }

    /// `Jᵀ g`, the gradient in unconstrained coordinates.
    pub fn pull_back(&self, jac: &[f64], grad_natural: &[f64]) -> Vec<f64> {
        let m = self.free_dim();
        let mut g = vec![0.0; m];
        for (i, gi) in grad_natural.iter().enumerate() {
            for (c, gc) in g.iter_mut().enumerate() {
                *gc += jac[i * m + c] * gi;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_are_exact() {
        let cases = [
            (ModelSpec::diffusion(FamilyKind::VonMises), vec![0.7, 1.3, 0.16]),
            (ModelSpec::diffusion(FamilyKind::WrappedCauchy), vec![-1.1, 0.45, 0.3]),
            (
                ModelSpec::jump(FamilyKind::VonMisesMixture { components: 2 }),
                vec![0.3, 1.0, 2.0, 4.0, 0.5, 0.2],
            ),
            (ModelSpec::diffusion(FamilyKind::Uniform), vec![0.2]),
        ];
        for (spec, xi) in cases {
            let p = Parameterization::unrestricted(spec);
            let u = p.to_unconstrained(&xi).unwrap();
            let back = p.to_natural(&u);
            for (a, b) in xi.iter().zip(&back) {
                assert!((a - b).abs() < 1e-14, "{spec:?}: {xi:?} vs {back:?}");
            }
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        let spec = ModelSpec::diffusion(FamilyKind::VonMisesMixture { components: 3 });
        let p = Parameterization::unrestricted(spec);
        let xi = [0.2, 0.3, 0.5, 1.0, 2.0, 0.7, 4.0, 3.0, 0.25];
        let u = p.to_unconstrained(&xi).unwrap();
        let (_, jac) = p.to_natural_with_jacobian(&u);
        let m = p.free_dim();
        let h = 1e-6;
        for c in 0..m {
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[c] += h;
            dn[c] -= h;
            let (a, b) = (p.to_natural(&up), p.to_natural(&dn));
            for i in 0..xi.len() {
                assert!(((a[i] - b[i]) / (2.0 * h) - jac[i * m + c]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn fixed_coordinates_are_kept() {
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        let p = Parameterization::new(spec, vec![Some(0.0), Some(1.0), None]).unwrap();
        assert_eq!(p.free_dim(), 1);
        let xi = p.to_natural(&[(0.2f64).ln()]);
        assert_eq!(xi[0], 0.0);
        assert_eq!(xi[1], 1.0);
        assert!((xi[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn partial_weight_restriction_is_rejected() {
        let spec = ModelSpec::diffusion(FamilyKind::VonMisesMixture { components: 3 });
        let mut fixed = vec![None; spec.dim()];
        fixed[0] = Some(0.2);
        assert!(Parameterization::new(spec, fixed).is_err());
    }

    #[test]
    fn canonical_order_sorts_means() {
        let mut p = ParamVector::new(
            FamilyKind::VonMisesMixture { components: 2 },
            vec![0.3, 4.0, 1.0, 1.0, 2.0],
            0.2,
        )
        .unwrap();
        p.canonicalize();
        assert_eq!(p.beta, vec![0.7, 1.0, 2.0, 4.0, 1.0]);
    }
}
