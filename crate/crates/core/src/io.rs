//! Path CSV files and JSON density specifications.
//!
//! A path file has header `t,theta1[,theta2,...]`, angles in radians, and
//! row 0 holding the initial condition. Values are written in shortest
//! round-trip form so reading a written path gives back identical numbers.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::circular::{CircularDensity, CircularFamily, VonMisesComponent};
use crate::diffusion::PathSample;
use crate::error::{Error, Result};
use crate::toroidal::{BvmParams, ToroidalDensity};

/// Relative tolerance on the spacing of time stamps.
const SPACING_TOLERANCE: f64 = 1e-9;

pub fn path_header(dim: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=dim).map(|j| format!("theta{j}")))
        .collect()
}

pub fn write_path<W: Write>(path: &PathSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(path_header(path.dim()))?;
    for (i, t) in path.times().iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(path.state(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn path_to_string(path: &PathSample) -> Result<String> {
    let mut buf = Vec::new();
    write_path(path, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn parse_field(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {row}: cannot parse {col} value '{s}'")))
}

/// Reads a path. The step is taken from the first two time stamps and every
/// later gap must match it; a single-row file uses `delta_hint` (default 1).
pub fn read_path<R: Read>(input: R, delta_hint: Option<f64>) -> Result<PathSample> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let dim = header.len().saturating_sub(1);
    if dim == 0 || &header[0] != "t" {
        return Err(Error::Parse(format!(
            "expected header 't,theta1[,theta2,...]', got '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    for (j, h) in header.iter().skip(1).enumerate() {
        if h != format!("theta{}", j + 1) {
            return Err(Error::Parse(format!("unexpected column '{h}' at position {}", j + 2)));
        }
    }
    let mut times = Vec::new();
    let mut angles = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::Parse(format!("row {}: expected {} fields", i + 1, dim + 1)));
        }
        times.push(parse_field(&rec[0], i + 1, "t")?);
        for j in 0..dim {
            angles.push(parse_field(&rec[j + 1], i + 1, &header[j + 1])?);
        }
    }
    if times.is_empty() {
        return Err(Error::Parse("path file has no rows".into()));
    }
    let delta = if times.len() > 1 {
        times[1] - times[0]
    } else {
        delta_hint.unwrap_or(1.0)
    };
    if !(delta > 0.0) {
        return Err(Error::Parse(format!("time stamps must increase, got step {delta}")));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - delta).abs() > SPACING_TOLERANCE * delta.max(w[1].abs()) {
            return Err(Error::Parse(format!(
                "row {}: time step {} differs from {delta}",
                i + 2,
                w[1] - w[0]
            )));
        }
    }
    PathSample::new(delta, dim, angles)
}

pub fn read_path_file(path: &std::path::Path) -> Result<PathSample> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_path(f, None)
}

/// One mixture component of a circular spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub w: f64,
    pub mu: f64,
    pub kappa: f64,
}

/// JSON circular density, e.g.
/// `{"family":"von_mises_mixture","components":[{"w":0.4,"mu":0,"kappa":8}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircularSpec {
    Uniform,
    VonMises { mu: f64, kappa: f64 },
    WrappedCauchy { mu: f64, rho: f64 },
    VonMisesMixture { components: Vec<ComponentSpec> },
}

impl CircularSpec {
    pub fn build(&self) -> Result<CircularDensity> {
        CircularDensity::new(self.family())
    }

    pub fn family(&self) -> CircularFamily {
        match self {
            CircularSpec::Uniform => CircularFamily::Uniform,
            CircularSpec::VonMises { mu, kappa } => CircularFamily::VonMises { mu: *mu, kappa: *kappa },
            CircularSpec::WrappedCauchy { mu, rho } => CircularFamily::WrappedCauchy { mu: *mu, rho: *rho },
            CircularSpec::VonMisesMixture { components } => CircularFamily::VonMisesMixture(
                components
                    .iter()
                    .map(|c| VonMisesComponent {
                        weight: c.w,
                        mu: c.mu,
                        kappa: c.kappa,
                    })
                    .collect(),
            ),
        }
    }

    pub fn from_family(family: &CircularFamily) -> Self {
        match family {
            CircularFamily::Uniform => CircularSpec::Uniform,
            CircularFamily::VonMises { mu, kappa } => CircularSpec::VonMises { mu: *mu, kappa: *kappa },
            CircularFamily::WrappedCauchy { mu, rho } => CircularSpec::WrappedCauchy { mu: *mu, rho: *rho },
            CircularFamily::VonMisesMixture(c) => CircularSpec::VonMisesMixture {
                components: c
                    .iter()
                    .map(|c| ComponentSpec {
                        w: c.weight,
                        mu: c.mu,
                        kappa: c.kappa,
                    })
                    .collect(),
            },
        }
    }
}

/// Bivariate von Mises parameters in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvmSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda: f64,
}

impl BvmSpec {
    fn params(&self) -> BvmParams {
        BvmParams::new(self.mu1, self.mu2, self.kappa1, self.kappa2, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvmComponentSpec {
    pub w: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ToroidalFamilySpec {
    Product { marginals: Vec<CircularSpec> },
    Bvm(BvmSpec),
    BvmMixture { components: Vec<BvmComponentSpec> },
}

/// JSON toroidal density: a product, `bvm` or `bvm_mixture` family with an
/// optional `alpha` blending it with the uniform density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToroidalSpec {
    #[serde(flatten)]
    pub family: ToroidalFamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ToroidalSpec {
    pub fn build(&self) -> Result<ToroidalDensity> {
        let base = match &self.family {
            ToroidalFamilySpec::Product { marginals } => {
                ToroidalDensity::product(marginals.iter().map(|m| m.build()).collect::<Result<_>>()?)?
            }
            ToroidalFamilySpec::Bvm(b) => ToroidalDensity::bivariate_von_mises(b.params())?,
            ToroidalFamilySpec::BvmMixture { components } => ToroidalDensity::bvm_mixture(
                components
                    .iter()
                    .map(|c| {
                        (
                            c.w,
                            BvmParams::new(c.mu1, c.mu2, c.kappa1, c.kappa2, c.lambda),
                        )
                    })
                    .collect(),
            )?,
        };
        match self.alpha {
            Some(a) => ToroidalDensity::blended(base, a),
            None => Ok(base),
        }
    }
}

/// Either kind of density.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Circular(CircularSpec),
    Toroidal(ToroidalSpec),
}

impl DensitySpec {
    /// Parses a JSON spec. Circular families are tried first; an `alpha`
    /// field or a toroidal family makes it toroidal.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let family = value
            .get("family")
            .and_then(|f| f.as_str())
            .map(str::to_owned)
            .ok_or_else(|| Error::Parse("density spec needs a string 'family' field".into()))?;
        match family.as_str() {
            "uniform" | "von_mises" | "wrapped_cauchy" | "von_mises_mixture" if value.get("alpha").is_none() => {
                Ok(DensitySpec::Circular(serde_json::from_value(value).map_err(|e| {
                    Error::Parse(format!("invalid {family} spec: {e}"))
                })?))
            }
            "product" | "bvm" | "bvm_mixture" => Ok(DensitySpec::Toroidal(
                serde_json::from_value(value).map_err(|e| Error::Parse(format!("invalid {family} spec: {e}")))?,
            )),
            other if value.get("alpha").is_some() => Err(Error::Parse(format!(
                "'alpha' blending applies to toroidal families, not '{other}'"
            ))),
            other => Err(Error::Parse(format!("unknown density family '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Circular(_) => 1,
            DensitySpec::Toroidal(t) => match &t.family {
                ToroidalFamilySpec::Product { marginals } => marginals.len(),
                _ => 2,
            },
        }
    }
}
