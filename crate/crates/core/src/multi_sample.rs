//! Likelihood-ratio tests across `k` independent groups of paths, with
//! linear restrictions `ξ = M a` on the stacked parameter vector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diffusion::PathSample;
use crate::error::{Error, Result};
use crate::inference::fit::{fit_mle, FitOptions, FitResult};
use crate::inference::likelihood::log_likelihood_with_score;
use crate::inference::optim::maximize;
use crate::inference::params::{CoordKind, ModelSpec, ParamVector};
use crate::scalar::wrap_angle;
use crate::stats::chi_square_sf;

/// `k` groups of replicate paths. Replicates within a group share `Δ`.
#[derive(Clone, Debug)]
pub struct GroupedSample {
    groups: Vec<Vec<PathSample>>,
    labels: Vec<String>,
}

impl GroupedSample {
    pub fn new(groups: Vec<Vec<PathSample>>) -> Result<Self> {
        let labels = (1..=groups.len()).map(|j| format!("group{j}")).collect();
        Self::with_labels(groups, labels)
    }

    pub fn with_labels(groups: Vec<Vec<PathSample>>, labels: Vec<String>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidParameter("need at least one group".into()));
        }
        if labels.len() != groups.len() {
            return Err(Error::InvalidParameter("one label per group required".into()));
        }
        for (j, g) in groups.iter().enumerate() {
            let Some(first) = g.first() else {
                return Err(Error::InvalidParameter(format!("group {} is empty", j + 1)));
            };
            if g.iter().any(|p| (p.delta() - first.delta()).abs() > 1e-12 * first.delta()) {
                return Err(Error::InvalidParameter(format!(
                    "replicates of group {} have different time steps",
                    j + 1
                )));
            }
            if g.iter().any(|p| p.dim() != 1) {
                return Err(Error::InvalidParameter("grouped tests need circular paths".into()));
            }
        }
        Ok(Self { groups, labels })
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<PathSample>] {
        &self.groups
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Named homogeneity hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Means,
    Concentrations,
    Volatilities,
    ConcsAndVolas,
    StationaryDistrs,
    Diffusions,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Means,
        Preset::Concentrations,
        Preset::Volatilities,
        Preset::ConcsAndVolas,
        Preset::StationaryDistrs,
        Preset::Diffusions,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Preset::Means => "Means",
            Preset::Concentrations => "Concentrations",
            Preset::Volatilities => "Volatilities",
            Preset::ConcsAndVolas => "Concs. & volas.",
            Preset::StationaryDistrs => "Stationary distrs.",
            Preset::Diffusions => "Diffusions",
        }
    }

    fn ties(&self, kind: CoordKind) -> bool {
        let conc = matches!(kind, CoordKind::Concentration | CoordKind::UnitInterval);
        match self {
            Preset::Means => kind == CoordKind::Angle,
            Preset::Concentrations => conc,
            Preset::Volatilities => kind == CoordKind::Volatility,
            Preset::ConcsAndVolas => conc || kind == CoordKind::Volatility,
            Preset::StationaryDistrs => kind != CoordKind::Volatility,
            Preset::Diffusions => true,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Parse(format!("unknown preset '{s}'")))
    }
}

/// `H₀: ξ = M a` with `M` of size `kq × q̃` and full column rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearHypothesis {
    rows: usize,
    cols: usize,
    /// row-major
    matrix: Vec<f64>,
    /// coordinate kind driving each column's transform
    column_kinds: Vec<Option<CoordKind>>,
}

impl LinearHypothesis {
    /// Validates rank and shape. Columns whose non-zero entries are all `1`
    /// on coordinates of one kind are optimised on that kind's natural scale
    /// (log for positive coordinates); other columns are left unconstrained.
    pub fn from_matrix(spec: &ModelSpec, k: usize, rows: usize, cols: usize, matrix: Vec<f64>) -> Result<Self> {
        let q = spec.dim();
        if rows != k * q {
            return Err(Error::InvalidParameter(format!(
                "restriction matrix needs {} rows for {k} groups, got {rows}",
                k * q
            )));
        }
        if matrix.len() != rows * cols {
            return Err(Error::InvalidParameter("matrix data does not match its shape".into()));
        }
        if cols == 0 || cols >= rows {
            return Err(Error::InvalidParameter(format!(
                "free dimension must satisfy 0 < {cols} < {rows}"
            )));
        }
        let m = DMatrix::from_row_slice(rows, cols, &matrix);
        if m.rank(1e-10) != cols {
            return Err(Error::InvalidParameter("restriction matrix is not of full column rank".into()));
        }
        let kinds = spec.coordinate_kinds();
        let column_kinds = (0..cols)
            .map(|c| {
                let nz: Vec<usize> = (0..rows).filter(|&r| matrix[r * cols + c] != 0.0).collect();
                let first = kinds[nz[0] % q];
                let uniform = nz
                    .iter()
                    .all(|&r| matrix[r * cols + c] == 1.0 && kinds[r % q] == first);
                uniform.then_some(first)
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            matrix,
            column_kinds,
        })
    }

    /// Ties the preset's coordinates across all groups. Free coordinates are
    /// ordered group by group, a tied coordinate taking its slot in group 1.
    pub fn preset(preset: Preset, spec: &ModelSpec, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter("homogeneity presets need k >= 2".into()));
        }
        let q = spec.dim();
        let kinds = spec.coordinate_kinds();
        let mut column_of = vec![usize::MAX; k * q];
        let mut cols = 0;
        for j in 0..k {
            for i in 0..q {
                if preset.ties(kinds[i]) && j > 0 {
                    column_of[j * q + i] = column_of[i];
                } else {
                    column_of[j * q + i] = cols;
                    cols += 1;
                }
            }
        }
        let mut matrix = vec![0.0; k * q * cols];
        for (r, &c) in column_of.iter().enumerate() {
            matrix[r * cols + c] = 1.0;
        }
        Self::from_matrix(spec, k, k * q, cols, matrix)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn free_dimension(&self) -> usize {
        self.cols
    }

    pub fn df(&self) -> usize {
        self.rows - self.cols
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.cols + c]
    }

    fn apply(&self, a: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.entry(r, c) * a[c]).sum())
            .collect()
    }

    fn transpose_apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.entry(r, c) * g[r]).sum())
            .collect()
    }

    /// `a` and `da/du` from unconstrained `u`.
    fn from_unconstrained(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        u.iter()
            .zip(&self.column_kinds)
            .map(|(&v, k)| match k {
                Some(CoordKind::Concentration | CoordKind::Volatility) => (v.exp(), v.exp()),
                Some(CoordKind::UnitInterval) => {
                    let r = 1.0 / (1.0 + (-v).exp());
                    (r, r * (1.0 - r))
                }
                _ => (v, 1.0),
            })
            .unzip()
    }

    fn to_unconstrained(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(&self.column_kinds)
            .map(|(&v, k)| match k {
                Some(CoordKind::Concentration | CoordKind::Volatility) => v.max(1e-8).ln(),
                Some(CoordKind::UnitInterval) => {
                    let r = v.clamp(1e-8, 1.0 - 1e-8);
                    (r / (1.0 - r)).ln()
                }
                _ => v,
            })
            .collect()
    }

    /// Least-squares projection of stacked estimates onto the column space,
    /// with circular averaging for angle columns.
    fn project(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                let rows: Vec<usize> = (0..self.rows).filter(|&r| self.entry(r, c) != 0.0).collect();
                if self.column_kinds[c] == Some(CoordKind::Angle) {
                    let (s, co) = rows
                        .iter()
                        .fold((0.0, 0.0), |(s, co), &r| (s + xi[r].sin(), co + xi[r].cos()));
                    s.atan2(co)
                } else {
                    rows.iter().map(|&r| xi[r] / self.entry(r, c)).sum::<f64>() / rows.len() as f64
                }
            })
            .collect()
    }
}

/// `Σ_j Σ_replicates ℓ(ξ_j)`.
pub fn grouped_log_likelihood(spec: &ModelSpec, xi_per_group: &[Vec<f64>], data: &GroupedSample) -> Result<f64> {
    if xi_per_group.len() != data.k() {
        return Err(Error::InvalidParameter(format!(
            "{} parameter vectors for {} groups",
            xi_per_group.len(),
            data.k()
        )));
    }
    let mut ll = 0.0;
    for (xi, g) in xi_per_group.iter().zip(data.groups()) {
        for p in g {
            ll += crate::inference::log_likelihood(spec, xi, p)?;
        }
    }
    Ok(ll)
}

fn grouped_with_score(spec: &ModelSpec, stacked: &[f64], data: &GroupedSample) -> Result<(f64, Vec<f64>)> {
    let q = spec.dim();
    let mut ll = 0.0;
    let mut g = vec![0.0; stacked.len()];
    for (j, group) in data.groups().iter().enumerate() {
        let xi = &stacked[j * q..(j + 1) * q];
        for p in group {
            let (l, s) = log_likelihood_with_score(spec, xi, p)?;
            ll += l;
            for (a, b) in g[j * q..(j + 1) * q].iter_mut().zip(&s) {
                *a += b;
            }
        }
    }
    Ok((ll, g))
}

/// Maximum of the grouped likelihood under `ξ = M a`.
#[derive(Clone, Debug, Serialize)]
pub struct RestrictedGroupFit {
    pub free: Vec<f64>,
    pub per_group: Vec<ParamVector>,
    pub loglik: f64,
    /// `Mᵀ ∂ℓ/∂ξ` at the optimum
    pub projected_score: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupTestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub unrestricted: Vec<FitResult>,
    pub restricted: RestrictedGroupFit,
    pub warnings: Vec<String>,
}

impl GroupTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Fits the restricted grouped model from `start` (stacked natural values).
pub fn fit_restricted(
    spec: &ModelSpec,
    data: &GroupedSample,
    hypothesis: &LinearHypothesis,
    start: &[f64],
    opts: &FitOptions,
) -> Result<RestrictedGroupFit> {
    let q = spec.dim();
    if hypothesis.rows() != data.k() * q {
        return Err(Error::InvalidParameter("hypothesis does not match the number of groups".into()));
    }
    let u0 = hypothesis.to_unconstrained(&hypothesis.project(start));
    let objective = |u: &[f64]| {
        let (a, da) = hypothesis.from_unconstrained(u);
        let xi = hypothesis.apply(&a);
        let (ll, g) = grouped_with_score(spec, &xi, data).ok()?;
        if !ll.is_finite() {
            return None;
        }
        let ga = hypothesis.transpose_apply(&g);
        Some((ll, ga.iter().zip(&da).map(|(x, y)| x * y).collect()))
    };
    let report = maximize(objective, u0, &opts.optim).ok_or_else(|| Error::Optimization {
        reason: "restricted likelihood not finite at the start".into(),
        iterations: 0,
        gradient_norm: f64::NAN,
        best_loglik: f64::NAN,
        best_estimate: start.to_vec(),
    })?;
    let (a, _) = hypothesis.from_unconstrained(&report.x);
    let xi = hypothesis.apply(&a);
    if !report.converged {
        return Err(Error::Optimization {
            reason: report.reason.clone(),
            iterations: report.iterations,
            gradient_norm: report.gradient_norm(),
            best_loglik: report.value,
            best_estimate: xi,
        });
    }
    let (loglik, g) = grouped_with_score(spec, &xi, data)?;
    let per_group = (0..data.k())
        .map(|j| {
            let mut p = ParamVector::from_natural(spec.family, &xi[j * q..(j + 1) * q])?;
            p.canonicalize();
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RestrictedGroupFit {
        free: a,
        per_group,
        loglik,
        projected_score: hypothesis.transpose_apply(&g),
        iterations: report.iterations,
        converged: true,
    })
}

/// Separate fits of every group.
pub fn fit_groups(spec: &ModelSpec, data: &GroupedSample, opts: &FitOptions) -> Result<Vec<FitResult>> {
    data.groups().iter().map(|g| fit_mle(spec, g, None, opts)).collect()
}

/// Linear-hypothesis likelihood-ratio test with `df = kq − q̃`.
pub fn lr_test_linear(
    spec: &ModelSpec,
    data: &GroupedSample,
    hypothesis: &LinearHypothesis,
    opts: &FitOptions,
) -> Result<GroupTestResult> {
    let unrestricted = fit_groups(spec, data, opts)?;
    lr_test_linear_with_fits(spec, data, hypothesis, unrestricted, opts)
}

/// As [`lr_test_linear`] reusing already computed group fits.
pub fn lr_test_linear_with_fits(
    spec: &ModelSpec,
    data: &GroupedSample,
    hypothesis: &LinearHypothesis,
    unrestricted: Vec<FitResult>,
    opts: &FitOptions,
) -> Result<GroupTestResult> {
    let stacked: Vec<f64> = unrestricted.iter().flat_map(|f| f.estimate.natural()).collect();
    let restricted = fit_restricted(spec, data, hypothesis, &align_angles(spec, &stacked), opts)?;
    let ll_u: f64 = unrestricted.iter().map(|f| f.loglik).sum();
    let raw = 2.0 * (ll_u - restricted.loglik);
    if raw < -1e-8 {
        return Err(Error::Convergence(format!(
            "restricted grouped log-likelihood exceeds the unrestricted one by {}",
            -raw / 2.0
        )));
    }
    let statistic = raw.max(0.0);
    let df = hypothesis.df();
    Ok(GroupTestResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
        unrestricted,
        restricted,
        warnings: vec![],
    })
}

/// Moves each angle to the representative nearest to group 1's so that
/// tied angles average sensibly.
fn align_angles(spec: &ModelSpec, stacked: &[f64]) -> Vec<f64> {
    let q = spec.dim();
    let kinds = spec.coordinate_kinds();
    let mut out = stacked.to_vec();
    for (r, v) in out.iter_mut().enumerate() {
        if kinds[r % q] == CoordKind::Angle {
            let reference = stacked[r % q];
            let d = wrap_angle(*v - reference + std::f64::consts::PI) - std::f64::consts::PI;
            *v = reference + d;
        }
    }
    out
}

/// Index of the split time on the observation grid.
pub fn split_index(path: &PathSample, split_time: f64) -> Result<usize> {
    let x = split_time / path.delta();
    let i = x.round();
    if (x - i).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "split time {split_time} is not on the observation grid (step {})",
            path.delta()
        )));
    }
    if i < 1.0 || i as usize >= path.n_steps() {
        return Err(Error::Domain(format!(
            "split time {split_time} must lie strictly inside (0, {})",
            path.n_steps() as f64 * path.delta()
        )));
    }
    Ok(i as usize)
}

/// Change-point test: the segments before and after `split_time` form two
/// groups tested for equal parameters (`df = q`).
pub fn change_point_test(
    spec: &ModelSpec,
    paths: &[PathSample],
    split_time: f64,
    opts: &FitOptions,
) -> Result<GroupTestResult> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let mut before = Vec::with_capacity(paths.len());
    let mut after = Vec::with_capacity(paths.len());
    for p in paths {
        let i = split_index(p, split_time)?;
        before.push(p.segment(0, i)?);
        after.push(p.segment(i, p.n_steps())?);
    }
    let data = GroupedSample::with_labels(vec![before, after], vec!["before".into(), "after".into()])?;
    let h = LinearHypothesis::preset(Preset::Diffusions, spec, 2)?;
    lr_test_linear(spec, &data, &h, opts)
}
