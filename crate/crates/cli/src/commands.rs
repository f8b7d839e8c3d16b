use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Deserialize;
use serde_json::json;
use torus_diffusion::bridge::{sample_bridge_with_table, winding_distribution, BridgeSpec};
use torus_diffusion::experiment::{
    run_chisq_calibration, run_homogeneity_table, run_normality_diagnostic, run_rejection_rates, ExperimentConfig,
};
use torus_diffusion::ingest::{ingest_tracks, read_tracks, IngestOptions, TrackStatus};
use torus_diffusion::io::{path_to_string, read_path_file, DensitySpec};
use torus_diffusion::multi_sample::{change_point_test, lr_test_linear, GroupTestResult};
use torus_diffusion::rng::seeded;
use torus_diffusion::{
    fit_mle, lr_test, CovarianceSpec, DiffusionModel, Error, FamilyKind, FitOptions, FitResult, GroupedSample,
    JumpMode, JumpModel, LinearHypothesis, ModelSpec, PathSample, Preset, TransitionKernel,
};

use crate::{Cli, Command, Format, Mode, ModelArgs, Volatility};

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError { code: 1, error: e.into() }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Convergence(_)
            | Error::Quadrature { .. }
            | Error::RootFinding(_)
            | Error::Singularity { .. }
            | Error::Optimization { .. }
            | Error::RejectionBudget(_) => 2,
            Error::Domain(_) | Error::InvalidParameter(_) | Error::Parse(_) | Error::Io(_) => 1,
        };
        CliError { code, error: e.into() }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        usage(e)
    }
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Simulate(a) => {
            let model = diffusion_model(cli, &a.vol)?;
            let mut rng = seeded(cli.seed);
            let theta0 = match &a.theta0 {
                Some(t) => t.clone(),
                None => model.sample_stationary(&mut rng)?,
            };
            let path = match a.euler_substeps {
                Some(m) => model.simulate_euler(&theta0, a.n, a.delta, m, &mut rng)?,
                None => model.simulate_exact(&theta0, a.n, a.delta, &mut rng)?,
            };
            emit_path(cli, &path)?;
        }
        Command::Tpd(a) => {
            let log = if a.jump {
                let density = circular_density(cli)?;
                let sigma = a.vol.sigma.ok_or_else(|| anyhow!("--sigma is required"))?;
                JumpModel::new(density, sigma)?.log_transition_density(&a.from, &a.to, a.t)?
            } else {
                diffusion_model(cli, &a.vol)?.log_transition_density(&a.from, &a.to, a.t)?
            };
            match format(cli, Format::Json) {
                Format::Json => emit_json(cli, &json!({ "density": log.exp(), "log_density": log }))?,
                Format::Csv => emit(cli, &format!("density,log_density\n{},{}\n", log.exp(), log))?,
            }
        }
        Command::Fit(a) => {
            let spec = model_spec(&a.model)?;
            let paths = read_paths(&a.paths)?;
            let opts = FitOptions {
                seed: cli.seed,
                ..FitOptions::default()
            };
            let fit = fit_mle(&spec, &paths, None, &opts)?;
            for w in &fit.warnings {
                log::warn!("{w}");
            }
            match format(cli, Format::Json) {
                Format::Json => emit_json(cli, &fit)?,
                Format::Csv => emit(cli, &fit_csv(&fit))?,
            }
        }
        Command::Test(a) => {
            let spec = model_spec(&a.model)?;
            let restriction = parse_null(&spec, &a.null)?;
            let paths = read_paths(&a.paths)?;
            let opts = FitOptions {
                seed: cli.seed,
                ..FitOptions::default()
            };
            let t = lr_test(&spec, &paths, &restriction, &opts)?;
            for w in &t.warnings {
                log::warn!("{w}");
            }
            match format(cli, Format::Json) {
                Format::Json => emit_json(cli, &t)?,
                Format::Csv => emit(
                    cli,
                    &format!("statistic,df,p_value,boundary\n{},{},{},{}\n", t.statistic, t.df, t.p_value, t.boundary),
                )?,
            }
        }
        Command::Ktest(a) => {
            let spec = model_spec(&a.model)?;
            let opts = FitOptions {
                seed: cli.seed,
                ..FitOptions::default()
            };
            let result = match a.split {
                Some(time) => change_point_test(&spec, &read_paths(&a.paths)?, time, &opts)?,
                None => {
                    let manifest = a.groups.as_deref().ok_or_else(|| anyhow!("--groups is required"))?;
                    let data = read_manifest(manifest)?;
                    let hypothesis = match (&a.preset, &a.matrix) {
                        (Some(p), None) => LinearHypothesis::preset(p.parse::<Preset>()?, &spec, data.k())?,
                        (None, Some(m)) => read_matrix(&spec, data.k(), m)?,
                        _ => return Err(usage(anyhow!("give exactly one of --preset and --matrix"))),
                    };
                    lr_test_linear(&spec, &data, &hypothesis, &opts)?
                }
            };
            for w in &result.warnings {
                log::warn!("{w}");
            }
            match format(cli, Format::Json) {
                Format::Json => emit_json(cli, &group_test_json(&result))?,
                Format::Csv => emit(
                    cli,
                    &format!("statistic,df,p_value\n{},{},{}\n", result.statistic, result.df, result.p_value),
                )?,
            }
        }
        Command::Bridge(a) => {
            let model = diffusion_model(cli, &a.vol)?;
            let spec = BridgeSpec::equispaced(&model, &a.from, &a.to, a.horizon, a.n)?;
            let table = winding_distribution(&spec)?;
            let mut rng = seeded(cli.seed);
            let p = model.dim();
            let mut draws = Vec::with_capacity(a.draws);
            for _ in 0..a.draws {
                let d = sample_bridge_with_table(&spec, &table, &mut rng)?;
                let mut rows = vec![(0.0, spec.start().to_vec())];
                rows.extend(spec.times().iter().zip(d.states.chunks(p)).map(|(&t, s)| (t, s.to_vec())));
                rows.push((a.horizon, spec.end().to_vec()));
                draws.push((d.winding, rows));
            }
            let windings: Vec<_> = draws.iter().map(|d| d.0.clone()).collect();
            match format(cli, Format::Csv) {
                Format::Csv => {
                    emit(cli, &draws_csv(p, draws.iter().map(|d| &d.1)))?;
                    if let Some(out) = &cli.out {
                        let sidecar = sidecar_path(out);
                        let text = serde_json::to_string_pretty(&json!({ "seed": cli.seed, "windings": windings }))
                            .map_err(anyhow::Error::from)?;
                        fs::write(&sidecar, text).with_context(|| format!("writing {}", sidecar.display()))?;
                    }
                }
                Format::Json => emit_json(cli, &draws_json(cli.seed, &draws))?,
            }
        }
        Command::Jump(a) => {
            let model = JumpModel::new(circular_density(cli)?, a.sigma)?;
            let mut rng = seeded(cli.seed);
            match a.end {
                None => {
                    let delta = a.delta.ok_or_else(|| anyhow!("--delta is required for simulation"))?;
                    let mode = match a.mode {
                        Mode::Direct => JumpMode::Direct,
                        Mode::Subordinated => JumpMode::Subordinated,
                    };
                    emit_path(cli, &model.simulate_path(a.theta0, a.n, delta, mode, &mut rng)?)?;
                }
                Some(end) => {
                    let horizon = a.horizon.ok_or_else(|| anyhow!("--horizon is required for bridges"))?;
                    let times: Vec<f64> = (1..=a.n).map(|i| horizon * i as f64 / (a.n + 1) as f64).collect();
                    let table = torus_diffusion::jump::jump_winding_distribution(&model, a.theta0, end, horizon)?;
                    let start = torus_diffusion::scalar::wrap_angle(a.theta0);
                    let stop = torus_diffusion::scalar::wrap_angle(end);
                    let mut draws = Vec::with_capacity(a.draws);
                    for _ in 0..a.draws {
                        let d = model.sample_bridge_with_table(a.theta0, horizon, &times, &table, &mut rng)?;
                        let mut rows = vec![(0.0, vec![start])];
                        rows.extend(times.iter().zip(&d.states).map(|(&t, &s)| (t, vec![s])));
                        rows.push((horizon, vec![stop]));
                        draws.push((vec![d.winding], rows));
                    }
                    match format(cli, Format::Csv) {
                        Format::Csv => emit(cli, &draws_csv(1, draws.iter().map(|d| &d.1)))?,
                        Format::Json => emit_json(cli, &draws_json(cli.seed, &draws))?,
                    }
                }
            }
        }
        Command::Ingest(a) => {
            let file = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
            let tracks = read_tracks(file)?;
            let opts = IngestOptions {
                max_missing_fraction: a.max_missing,
                immobile_floor: a.immobile_floor,
            };
            let report = ingest_tracks(&tracks, &opts);
            if let Some(dir) = &a.paths_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for t in report.accepted() {
                    if let Some(p) = &t.path {
                        let file = dir.join(format!("{}.csv", t.id));
                        fs::write(&file, path_to_string(p)?).with_context(|| format!("writing {}", file.display()))?;
                    }
                }
            }
            match format(cli, Format::Json) {
                Format::Json => emit_json(cli, &report)?,
                Format::Csv => {
                    let mut s = String::from("id,rows,missing_fraction,status,delta,immobile\n");
                    for t in &report.tracks {
                        let status = match &t.status {
                            TrackStatus::Accepted => "accepted",
                            TrackStatus::Rejected { .. } => "rejected",
                        };
                        let delta = t.delta.map(|d| d.to_string()).unwrap_or_default();
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{}",
                            t.id, t.rows, t.missing_fraction, status, delta, t.immobile
                        );
                    }
                    emit(cli, &s)?;
                }
            }
            if report.rejected_count() > 0 {
                eprintln!("{} of {} tracks rejected", report.rejected_count(), report.tracks.len());
                return Ok(3);
            }
        }
        Command::Experiment(a) => {
            let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
            let config: ExperimentConfig = serde_json::from_str(&text).map_err(Error::from)?;
            let fmt = format(cli, Format::Json);
            match config {
                ExperimentConfig::RejectionRates(c) => {
                    let r = run_rejection_rates(&c)?;
                    write_samples(a.samples.as_deref(), &r.statistics_csv())?;
                    emit_either(cli, fmt, &r, &r.to_csv())?;
                }
                ExperimentConfig::ChisqCalibration(c) => {
                    let r = run_chisq_calibration(&c)?;
                    write_samples(a.samples.as_deref(), &r.report.statistics_csv())?;
                    let csv = format!(
                        "df,ks_statistic,ks_p_value\n{},{},{}\n",
                        r.df, r.ks.statistic, r.ks.p_value
                    );
                    emit_either(cli, fmt, &r, &csv)?;
                }
                ExperimentConfig::NormalityDiag(c) => {
                    let r = run_normality_diagnostic(&c)?;
                    write_samples(a.samples.as_deref(), &r.z_csv())?;
                    let mut csv = String::from("parameter,ks_statistic,ks_p_value\n");
                    for (name, ks) in r.names.iter().zip(&r.ks) {
                        let _ = writeln!(csv, "{name},{},{}", ks.statistic, ks.p_value);
                    }
                    emit_either(cli, fmt, &r, &csv)?;
                }
                ExperimentConfig::HomogeneityTable(c) => {
                    let r = run_homogeneity_table(&c)?;
                    write_samples(a.samples.as_deref(), &r.to_csv())?;
                    emit_either(cli, fmt, &r, &r.to_table_csv())?;
                }
            }
        }
    }
    Ok(0)
}

fn format(cli: &Cli, default: Format) -> Format {
    cli.format.unwrap_or(default)
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")?;
        }
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(cli: &Cli, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    text.push('\n');
    emit(cli, &text)
}

fn emit_either<T: serde::Serialize>(cli: &Cli, fmt: Format, value: &T, csv: &str) -> CliResult<()> {
    match fmt {
        Format::Json => emit_json(cli, value),
        Format::Csv => emit(cli, csv),
    }
}

fn emit_path(cli: &Cli, path: &PathSample) -> CliResult<()> {
    match format(cli, Format::Csv) {
        Format::Csv => emit(cli, &path_to_string(path)?),
        Format::Json => {
            let p = path.dim();
            let theta: Vec<&[f64]> = path.angles().chunks(p).collect();
            emit_json(cli, &json!({ "delta": path.delta(), "t": path.times(), "theta": theta }))
        }
    }
}

fn write_samples(target: Option<&Path>, text: &str) -> CliResult<()> {
    if let Some(p) = target {
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// `foo.csv` gets its winding numbers in `foo.json`.
fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

type Draw = (Vec<i64>, Vec<(f64, Vec<f64>)>);

fn draws_csv<'a>(p: usize, draws: impl Iterator<Item = &'a Vec<(f64, Vec<f64>)>>) -> String {
    let mut s = String::from("draw,t");
    for j in 1..=p {
        let _ = write!(s, ",theta{j}");
    }
    s.push('\n');
    for (i, rows) in draws.enumerate() {
        for (t, theta) in rows {
            let _ = write!(s, "{i},{t}");
            for v in theta {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

fn draws_json(seed: u64, draws: &[Draw]) -> serde_json::Value {
    let list: Vec<_> = draws
        .iter()
        .map(|(w, rows)| {
            let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let theta: Vec<&Vec<f64>> = rows.iter().map(|r| &r.1).collect();
            json!({ "winding": w, "t": t, "theta": theta })
        })
        .collect();
    json!({ "seed": seed, "draws": list })
}

fn density_spec(cli: &Cli) -> CliResult<DensitySpec> {
    let raw = cli.density.as_deref().ok_or_else(|| anyhow!("--density is required"))?;
    let text = if raw.trim_start().starts_with('{') {
        raw.to_owned()
    } else {
        fs::read_to_string(raw).with_context(|| format!("reading density file {raw}"))?
    };
    Ok(DensitySpec::from_json(&text)?)
}

fn circular_density(cli: &Cli) -> CliResult<torus_diffusion::CircularDensity> {
    match density_spec(cli)? {
        DensitySpec::Circular(c) => Ok(c.build()?),
        DensitySpec::Toroidal(_) => Err(usage(anyhow!("this command needs a circular density"))),
    }
}

fn diffusion_model(cli: &Cli, vol: &Volatility) -> CliResult<DiffusionModel> {
    let model = match density_spec(cli)? {
        DensitySpec::Circular(c) => {
            if vol.cov.is_some() {
                return Err(usage(anyhow!("--cov applies to toroidal densities; use --sigma")));
            }
            let sigma = vol.sigma.ok_or_else(|| anyhow!("--sigma is required"))?;
            DiffusionModel::circular(c.build()?, sigma)?
        }
        DensitySpec::Toroidal(t) => {
            let density = t.build()?;
            let p = density.dim();
            let cov = match (&vol.cov, vol.sigma) {
                (Some(m), None) => CovarianceSpec::new(m.clone(), p)?,
                (None, Some(s)) => CovarianceSpec::isotropic(s, p)?,
                _ => return Err(usage(anyhow!("give exactly one of --sigma and --cov"))),
            };
            DiffusionModel::toroidal(density, cov)?
        }
    };
    Ok(model)
}

/// `von_mises`, `wrapped_cauchy`, `uniform` or `von_mises_mixture:<k>`.
fn parse_family(s: &str) -> CliResult<FamilyKind> {
    let s = s.replace('-', "_");
    let family = match s.split_once(':') {
        Some(("von_mises_mixture", k)) => {
            let components: usize = k.parse().map_err(|_| anyhow!("bad component count '{k}'"))?;
            if components < 1 {
                return Err(usage(anyhow!("a mixture needs at least one component")));
            }
            FamilyKind::VonMisesMixture { components }
        }
        None => match s.as_str() {
            "uniform" => FamilyKind::Uniform,
            "von_mises" => FamilyKind::VonMises,
            "wrapped_cauchy" => FamilyKind::WrappedCauchy,
            "von_mises_mixture" => return Err(usage(anyhow!("write von_mises_mixture:<k>"))),
            other => return Err(usage(anyhow!("unknown family '{other}'"))),
        },
        Some(_) => return Err(usage(anyhow!("unknown family '{s}'"))),
    };
    Ok(family)
}

fn model_spec(m: &ModelArgs) -> CliResult<ModelSpec> {
    let family = parse_family(&m.family)?;
    Ok(if m.jump {
        ModelSpec::jump(family)
    } else {
        ModelSpec::diffusion(family)
    })
}

/// `mu=0,kappa=1` into one optional value per natural coordinate.
fn parse_null(spec: &ModelSpec, text: &str) -> CliResult<Vec<Option<f64>>> {
    let names = spec.names();
    let mut out = vec![None; names.len()];
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("expected name=value, got '{item}'"))?;
        let j = names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| anyhow!("unknown parameter '{}' (have {})", name.trim(), names.join(", ")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| anyhow!("cannot parse value '{}' for {name}", value.trim()))?;
        out[j] = Some(v);
    }
    Ok(out)
}

fn read_paths(files: &[PathBuf]) -> CliResult<Vec<PathSample>> {
    files
        .iter()
        .map(|f| {
            read_path_file(f)
                .map(|p| p.with_label(f.display().to_string()))
                .map_err(CliError::from)
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    groups: Vec<ManifestGroup>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestGroup {
    #[serde(default)]
    label: Option<String>,
    paths: Vec<PathBuf>,
}

/// Group manifest; relative paths resolve against the manifest's directory.
fn read_manifest(file: &Path) -> CliResult<GroupedSample> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(Error::from)?;
    let base = file.parent().unwrap_or(Path::new("."));
    let mut groups = Vec::new();
    let mut labels = Vec::new();
    for (i, g) in manifest.groups.iter().enumerate() {
        let files: Vec<PathBuf> = g.paths.iter().map(|p| base.join(p)).collect();
        groups.push(read_paths(&files)?);
        labels.push(g.label.clone().unwrap_or_else(|| format!("group{}", i + 1)));
    }
    Ok(GroupedSample::with_labels(groups, labels)?)
}

/// Headerless numeric CSV, one row of `M` per line.
fn read_matrix(spec: &ModelSpec, k: usize, file: &Path) -> CliResult<LinearHypothesis> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let mut rows = 0;
    let mut cols = None;
    let mut values = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| anyhow!("matrix row {} is not numeric: '{line}'", rows + 1))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(usage(anyhow!("matrix row {} has {} entries, expected {c}", rows + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| anyhow!("matrix file is empty"))?;
    Ok(LinearHypothesis::from_matrix(spec, k, rows, cols, values)?)
}

fn fit_csv(fit: &FitResult) -> String {
    let mut s = String::from("parameter,estimate,se\n");
    for ((name, v), se) in fit.names.iter().zip(fit.estimate.natural()).zip(&fit.standard_errors) {
        let se = se.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{name},{v},{se}");
    }
    s
}

fn group_test_json(r: &GroupTestResult) -> serde_json::Value {
    let unrestricted: Vec<_> = r
        .unrestricted
        .iter()
        .map(|f| json!({ "estimate": f.estimate.natural(), "loglik": f.loglik, "converged": f.converged }))
        .collect();
    let restricted: Vec<_> = r.restricted.per_group.iter().map(|p| p.natural()).collect();
    json!({
        "statistic": r.statistic,
        "df": r.df,
        "p_value": r.p_value,
        "unrestricted": unrestricted,
        "restricted": { "estimate": restricted, "loglik": r.restricted.loglik, "converged": r.restricted.converged },
        "warnings": r.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_parse() {
        assert_eq!(parse_family("von-mises").unwrap(), FamilyKind::VonMises);
        assert_eq!(
            parse_family("von_mises_mixture:3").unwrap(),
            FamilyKind::VonMisesMixture { components: 3 }
        );
        assert_eq!(parse_family("gamma").unwrap_err().code, 1);
        assert!(parse_family("von_mises_mixture").is_err());
        assert!(parse_family("von_mises_mixture:0").is_err());
    }

    #[test]
    fn null_values_map_to_coordinates() {
        let spec = ModelSpec::diffusion(FamilyKind::VonMises);
        assert_eq!(parse_null(&spec, "kappa=2, mu=0").unwrap(), vec![Some(0.0), Some(2.0), None]);
        assert!(parse_null(&spec, "rho=1").is_err());
        assert!(parse_null(&spec, "mu").is_err());
        assert!(parse_null(&spec, "mu=x").is_err());
    }
}
