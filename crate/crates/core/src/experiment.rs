//! Seeded Monte Carlo experiments: z-score normality, chi-square
//! calibration of the likelihood-ratio statistic, rejection rates and the
//! two-group homogeneity table.
//!
//! Replicate `i` draws from [`replicate_rng`]`(seed, i)`, so reports do not
//! depend on thread count or scheduling.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{CircularDensity, FamilyKind};
use crate::diffusion::{DiffusionModel, PathSample};
use crate::error::{Error, Result};
use crate::inference::fit::{fit_mle, FitOptions};
use crate::inference::likelihood::transition_scores;
use crate::inference::lrt::lr_test;
use crate::inference::params::{ModelSpec, ProcessKind};
use crate::io::CircularSpec;
use crate::jump::{JumpMode, JumpModel};
use crate::multi_sample::{fit_groups, lr_test_linear_with_fits, GroupedSample, LinearHypothesis, Preset};
use crate::rng::{replicate_rng, SimRng};
use crate::scalar::two_pi;
use crate::stats::{binomial_se, chi_square_cdf, ks_one_sample, standard_normal_cdf, KsResult};

/// Fraction of failed fits above which an experiment is abandoned.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

fn default_alphas() -> Vec<f64> {
    vec![0.10, 0.05, 0.01]
}

fn default_sigma() -> f64 {
    1.0 / two_pi::<f64>()
}

fn default_process() -> ProcessKind {
    ProcessKind::Diffusion
}

/// Data-generating process and test setup of a one-sample experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneSampleConfig {
    /// stationary density of the data-generating process
    pub density: CircularSpec,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_process")]
    pub process: ProcessKind,
    /// family fitted to the data; defaults to that of `density`
    #[serde(default)]
    pub fit_family: Option<FamilyKind>,
    /// coordinates fixed by the null (`null` = free); defaults to the true
    /// `β` with `σ` free
    #[serde(default)]
    pub restriction: Option<Vec<Option<f64>>>,
    pub replicates: usize,
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl OneSampleConfig {
    /// The von Mises setup `ξ₀ = (0, κ, 1/(2π))` with `H₀: (μ, κ) = (0, κ)`.
    pub fn von_mises(kappa: f64, replicates: usize, n: usize, delta: f64, seed: u64) -> Self {
        Self {
            density: CircularSpec::VonMises { mu: 0.0, kappa },
            sigma: default_sigma(),
            process: ProcessKind::Diffusion,
            fit_family: None,
            restriction: None,
            replicates,
            n,
            delta,
            seed,
            alphas: default_alphas(),
        }
    }

    /// Uniform data tested for `κ = 0` inside the von Mises family.
    pub fn boundary(replicates: usize, n: usize, delta: f64, seed: u64) -> Self {
        Self {
            density: CircularSpec::Uniform,
            fit_family: Some(FamilyKind::VonMises),
            restriction: Some(vec![None, Some(0.0), None]),
            ..Self::von_mises(0.0, replicates, n, delta, seed)
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.fit_family.unwrap_or_else(|| self.density.family().kind()),
            process: self.process,
        }
    }

    /// True natural parameters of the data-generating process.
    pub fn truth(&self) -> Result<Vec<f64>> {
        let mut xi = self.density.build()?.beta();
        xi.push(self.sigma);
        Ok(xi)
    }

    fn restriction(&self) -> Result<Vec<Option<f64>>> {
        if let Some(r) = &self.restriction {
            return Ok(r.clone());
        }
        if self.fit_family.is_some_and(|f| f != self.density.family().kind()) {
            return Err(Error::InvalidParameter(
                "a restriction is required when the fitted family differs from the true one".into(),
            ));
        }
        let truth = self.truth()?;
        let q = truth.len();
        Ok(truth
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1 < q).then_some(v))
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.n == 0 || !(self.delta > 0.0) {
            return Err(Error::InvalidParameter("n must be >= 1 and delta > 0".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidParameter("significance levels must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Simulator for the configured process.
#[derive(Clone, Debug)]
pub enum Simulator {
    Diffusion(DiffusionModel),
    Jump(JumpModel),
}

impl Simulator {
    pub fn new(density: CircularDensity, sigma: f64, process: ProcessKind) -> Result<Self> {
        let density = density.with_cache()?;
        Ok(match process {
            ProcessKind::Diffusion => Simulator::Diffusion(DiffusionModel::circular(density, sigma)?),
            ProcessKind::Jump => Simulator::Jump(JumpModel::new(density, sigma)?),
        })
    }

    /// Path of `n` steps started from a stationary draw.
    pub fn stationary_path(&self, n: usize, delta: f64, rng: &mut SimRng) -> Result<PathSample> {
        match self {
            Simulator::Diffusion(m) => {
                let x0 = m.sample_stationary(rng)?;
                m.simulate_exact(&x0, n, delta, rng)
            }
            Simulator::Jump(m) => {
                let x0 = m.density().sample_stationary(1, rng)?[0];
                m.simulate_path(x0, n, delta, JumpMode::Direct, rng)
            }
        }
    }
}

/// A replicate that could not be completed.
#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub replicate: usize,
    pub error: String,
}

fn check_failures(failures: &[Failure], attempted: usize) -> Result<()> {
    if failures.len() as f64 > MAX_FAILURE_FRACTION * attempted as f64 {
        return Err(Error::Convergence(format!(
            "{} of {attempted} replicates failed (first: {})",
            failures.len(),
            failures[0].error
        )));
    }
    Ok(())
}

fn run_replicates<T: Send>(
    count: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> (Vec<(usize, T)>, Vec<Failure>) {
    let results: Vec<(usize, Result<T>)> = (0..count).into_par_iter().map(|i| (i, f(i))).collect();
    let mut ok = Vec::with_capacity(count);
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(v) => ok.push((i, v)),
            Err(e) => failures.push(Failure {
                replicate: i,
                error: e.to_string(),
            }),
        }
    }
    (ok, failures)
}

/// Rejection frequencies of the one-sample likelihood-ratio test.
#[derive(Clone, Debug, Serialize)]
pub struct RejectionReport {
    pub alphas: Vec<f64>,
    pub rates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub df: usize,
    /// `−2 log Q` of every completed replicate, in replicate order
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub attempted: usize,
    pub failures: Vec<Failure>,
}

impl RejectionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,rate,se,completed,failed\n");
        for ((a, r), se) in self.alphas.iter().zip(&self.rates).zip(&self.standard_errors) {
            let _ = writeln!(s, "{a},{r},{se},{},{}", self.statistics.len(), self.failures.len());
        }
        s
    }

    /// One `−2 log Q` sample per row for external plotting.
    pub fn statistics_csv(&self) -> String {
        let mut s = String::from("statistic,p_value\n");
        for (t, p) in self.statistics.iter().zip(&self.p_values) {
            let _ = writeln!(s, "{t},{p}");
        }
        s
    }
}

pub fn run_rejection_rates(config: &OneSampleConfig) -> Result<RejectionReport> {
    config.validate()?;
    let spec = config.spec();
    let restriction = config.restriction()?;
    let sim = Simulator::new(config.density.build()?, config.sigma, config.process)?;
    let opts = FitOptions::default();
    let (done, failures) = run_replicates(config.replicates, |i| {
        let mut rng = replicate_rng(config.seed, i as u64);
        let path = sim.stationary_path(config.n, config.delta, &mut rng)?;
        let t = lr_test(&spec, &[path], &restriction, &opts)?;
        Ok((t.statistic, t.p_value, t.df))
    });
    check_failures(&failures, config.replicates)?;
    let df = done.first().map(|d| d.1 .2).unwrap_or(0);
    let statistics: Vec<f64> = done.iter().map(|d| d.1 .0).collect();
    let p_values: Vec<f64> = done.iter().map(|d| d.1 .1).collect();
    let m = p_values.len();
    let rates: Vec<f64> = config
        .alphas
        .iter()
        .map(|&a| p_values.iter().filter(|&&p| p < a).count() as f64 / m.max(1) as f64)
        .collect();
    let standard_errors = rates.iter().map(|&r| binomial_se(r, m)).collect();
    Ok(RejectionReport {
        alphas: config.alphas.clone(),
        rates,
        standard_errors,
        df,
        statistics,
        p_values,
        attempted: config.replicates,
        failures,
    })
}

/// KS comparison of the simulated `−2 log Q` with its `χ²` reference.
#[derive(Clone, Debug, Serialize)]
pub struct ChisqCalibration {
    pub df: usize,
    pub ks: KsResult,
    pub report: RejectionReport,
}

pub fn run_chisq_calibration(config: &OneSampleConfig) -> Result<ChisqCalibration> {
    let report = run_rejection_rates(config)?;
    let df = report.df as f64;
    let ks = ks_one_sample(&report.statistics, |x| chi_square_cdf(x, df))?;
    Ok(ChisqCalibration {
        df: report.df,
        ks,
        report,
    })
}

/// `z = √n Î^{1/2}(ξ̂ − ξ₀)` per replicate with marginal KS tests.
#[derive(Clone, Debug, Serialize)]
pub struct NormalityReport {
    pub names: Vec<String>,
    pub z: Vec<Vec<f64>>,
    /// Monte Carlo information at the truth
    pub information: Vec<Vec<f64>>,
    /// per-coordinate KS against `N(0, 1)`; empty with fewer than two rows
    pub ks: Vec<KsResult>,
    pub correlation: Vec<Vec<f64>>,
    pub attempted: usize,
    pub failures: Vec<Failure>,
}

impl NormalityReport {
    pub fn z_csv(&self) -> String {
        let mut s = self.names.iter().map(|n| format!("z_{n}")).collect::<Vec<_>>().join(",");
        s.push('\n');
        for row in &self.z {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

fn symmetric_sqrt(m: &[Vec<f64>]) -> DMatrix<f64> {
    let q = m.len();
    let a = DMatrix::from_fn(q, q, |i, j| m[i][j]);
    let e = SymmetricEigen::new(a);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn run_normality_diagnostic(config: &OneSampleConfig) -> Result<NormalityReport> {
    config.validate()?;
    let spec = config.spec();
    let truth = config.truth()?;
    if spec.dim() != truth.len() {
        return Err(Error::InvalidParameter("normality diagnostic needs the true family to be fitted".into()));
    }
    let sim = Simulator::new(config.density.build()?, config.sigma, config.process)?;
    let opts = FitOptions::default();
    let q = spec.dim();
    let (done, failures) = run_replicates(config.replicates, |i| {
        let mut rng = replicate_rng(config.seed, i as u64);
        let path = sim.stationary_path(config.n, config.delta, &mut rng)?;
        let rows = transition_scores(&spec, &truth, &path)?;
        let mut info = vec![vec![0.0; q]; q];
        for r in &rows {
            for a in 0..q {
                for b in 0..q {
                    info[a][b] += r[a] * r[b] / rows.len() as f64;
                }
            }
        }
        let fit = fit_mle(&spec, &[path], None, &opts)?;
        Ok((fit.estimate.natural(), info))
    });
    check_failures(&failures, config.replicates)?;
    let m = done.len() as f64;
    let mut information = vec![vec![0.0; q]; q];
    for (_, (_, info)) in &done {
        for a in 0..q {
            for b in 0..q {
                information[a][b] += info[a][b] / m;
            }
        }
    }
    let root = symmetric_sqrt(&information);
    let kinds = spec.coordinate_kinds();
    let sn = (config.n as f64).sqrt();
    let z: Vec<Vec<f64>> = done
        .iter()
        .map(|(_, (est, _))| {
            let diff: Vec<f64> = (0..q)
                .map(|i| {
                    let d = est[i] - truth[i];
                    if kinds[i] == crate::inference::CoordKind::Angle {
                        crate::scalar::centered_unit(d / two_pi::<f64>()) * two_pi::<f64>()
                    } else {
                        d
                    }
                })
                .collect();
            (0..q).map(|i| sn * (0..q).map(|j| root[(i, j)] * diff[j]).sum::<f64>()).collect()
        })
        .collect();
    let ks = if z.len() >= 2 {
        (0..q)
            .map(|j| ks_one_sample(&z.iter().map(|r| r[j]).collect::<Vec<_>>(), standard_normal_cdf))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![]
    };
    let correlation = correlation_matrix(&z, q);
    Ok(NormalityReport {
        names: spec.names(),
        z,
        information,
        ks,
        correlation,
        attempted: config.replicates,
        failures,
    })
}

fn correlation_matrix(rows: &[Vec<f64>], q: usize) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..q).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov = |a: usize, b: usize| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n;
    (0..q)
        .map(|a| (0..q).map(|b| cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()).collect())
        .collect()
}

fn default_group_sizes() -> Vec<[usize; 2]> {
    vec![[3, 2], [10, 5]]
}

fn default_a_values() -> Vec<u32> {
    (0..=5).collect()
}

fn default_presets() -> Vec<Preset> {
    Preset::ALL.to_vec()
}

fn default_alpha() -> f64 {
    0.05
}

/// Two von Mises groups `ξ₁ = (0, 1, σ)`, `ξ₂ = (0, 1 + a/10, σ)` with
/// `N₁, N₂` replicate paths of `n` steps each.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneityConfig {
    pub replicates: usize,
    pub n: usize,
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_group_sizes")]
    pub group_sizes: Vec<[usize; 2]>,
    #[serde(default = "default_a_values")]
    pub a_values: Vec<u32>,
    #[serde(default = "default_presets")]
    pub presets: Vec<Preset>,
}

impl HomogeneityConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            n: 50,
            delta: 0.5,
            sigma: default_sigma(),
            seed,
            alpha: 0.05,
            group_sizes: default_group_sizes(),
            a_values: default_a_values(),
            presets: default_presets(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityCell {
    pub n1: usize,
    pub n2: usize,
    pub preset: Preset,
    pub a: u32,
    pub rate: f64,
    pub se: f64,
    pub completed: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityTable {
    pub alpha: f64,
    pub cells: Vec<HomogeneityCell>,
    pub failures: Vec<Failure>,
}

impl HomogeneityTable {
    pub fn cell(&self, n1: usize, n2: usize, preset: Preset, a: u32) -> Option<&HomogeneityCell> {
        self.cells
            .iter()
            .find(|c| c.n1 == n1 && c.n2 == n2 && c.preset == preset && c.a == a)
    }

    /// Long format, one cell per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n1,n2,hypothesis,a,rate_percent,se_percent,completed,failed\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.2},{:.2},{},{}",
                c.n1,
                c.n2,
                c.preset.label(),
                c.a,
                100.0 * c.rate,
                100.0 * c.se,
                c.completed,
                c.failures
            );
        }
        s
    }

    /// Wide layout: one row per `(N₁, N₂)` and hypothesis, one column per `a`.
    pub fn to_table_csv(&self) -> String {
        let mut a_values: Vec<u32> = self.cells.iter().map(|c| c.a).collect();
        a_values.sort_unstable();
        a_values.dedup();
        let mut s = String::from("N1,N2,hypothesis");
        for a in &a_values {
            let _ = write!(s, ",a={a}");
        }
        s.push('\n');
        let mut keys: Vec<(usize, usize, Preset)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.n1, c.n2, c.preset)) {
                keys.push((c.n1, c.n2, c.preset));
            }
        }
        for (n1, n2, p) in keys {
            let _ = write!(s, "{n1},{n2},{}", p.label());
            for &a in &a_values {
                match self.cell(n1, n2, p, a) {
                    Some(c) => {
                        let _ = write!(s, ",{:.2}", 100.0 * c.rate);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Simulates one two-group data set.
pub fn simulate_two_groups(
    sizes: [usize; 2],
    kappas: [f64; 2],
    sigma: f64,
    n: usize,
    delta: f64,
    rng: &mut SimRng,
) -> Result<GroupedSample> {
    let mut groups = Vec::with_capacity(2);
    for (count, kappa) in sizes.iter().zip(kappas) {
        let sim = Simulator::new(CircularDensity::von_mises(0.0, kappa)?, sigma, ProcessKind::Diffusion)?;
        groups.push(
            (0..*count)
                .map(|_| sim.stationary_path(n, delta, rng))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    GroupedSample::new(groups)
}

/// Rejections of each preset on one replicate.
fn homogeneity_replicate(
    config: &HomogeneityConfig,
    sizes: [usize; 2],
    a: u32,
    rng: &mut SimRng,
) -> Result<Vec<bool>> {
    let spec = ModelSpec::diffusion(FamilyKind::VonMises);
    let kappas = [1.0, 1.0 + a as f64 / 10.0];
    let data = simulate_two_groups(sizes, kappas, config.sigma, config.n, config.delta, rng)?;
    let opts = FitOptions::default();
    let fits = fit_groups(&spec, &data, &opts)?;
    config
        .presets
        .iter()
        .map(|&p| {
            let h = LinearHypothesis::preset(p, &spec, 2)?;
            Ok(lr_test_linear_with_fits(&spec, &data, &h, fits.clone(), &opts)?.rejects(config.alpha))
        })
        .collect()
}

/// Rejection rates of every preset for one `(N₁, N₂, a)` setting. All
/// presets are evaluated on the same simulated data.
pub fn homogeneity_cells(config: &HomogeneityConfig, sizes: [usize; 2], a: u32) -> Result<(Vec<HomogeneityCell>, Vec<Failure>)> {
    // distinct stream family per setting
    let base = config
        .seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(((sizes[0] as u64) << 40) ^ ((sizes[1] as u64) << 20) ^ a as u64);
    let (done, failures) = run_replicates(config.replicates, |i| {
        let mut rng = replicate_rng(base, i as u64);
        homogeneity_replicate(config, sizes, a, &mut rng)
    });
    check_failures(&failures, config.replicates)?;
    let m = done.len();
    let cells = config
        .presets
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let rate = done.iter().filter(|(_, r)| r[k]).count() as f64 / m.max(1) as f64;
            HomogeneityCell {
                n1: sizes[0],
                n2: sizes[1],
                preset: p,
                a,
                rate,
                se: binomial_se(rate, m),
                completed: m,
                failures: failures.len(),
            }
        })
        .collect();
    Ok((cells, failures))
}

pub fn run_homogeneity_table(config: &HomogeneityConfig) -> Result<HomogeneityTable> {
    if config.replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be >= 1".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &sizes in &config.group_sizes {
        for &a in &config.a_values {
            let (c, f) = homogeneity_cells(config, sizes, a)?;
            cells.extend(c);
            failures.extend(f);
        }
    }
    Ok(HomogeneityTable {
        alpha: config.alpha,
        cells,
        failures,
    })
}

/// JSON experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    NormalityDiag(OneSampleConfig),
    ChisqCalibration(OneSampleConfig),
    RejectionRates(OneSampleConfig),
    HomogeneityTable(HomogeneityConfig),
}
