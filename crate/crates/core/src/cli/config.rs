//! Run configuration: a TOML file with nested sections, `--set` overrides
//! and explicit flags, applied in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::EnsembleSpec;
use crate::error::{Error, Result};
use crate::green::{DensityField, DiskGrid, ProbeSpec, QuadratureSpec};
use crate::model::{MuellerMode, MuellerSpec, OperatorSpec, WeightSequence};
use crate::similarity::{CriterionConfig, FrameSpec};
use crate::wirtinger::{DiskPoint, StepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Accepted residuals of the verification commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Closed forms against series oracles, relative.
    pub kernel: f64,
    /// Finite-difference `‖∂Π₁‖²` against the closed form, relative.
    pub curvature_fd: f64,
    /// `Δ log ‖k_λ‖²` against the closed form, relative.
    pub curvature_route: f64,
    /// Factor-n additivity residual, relative to `‖∂Π‖²`.
    pub additivity: f64,
    /// Analytic against finite-difference `∂Π₂`, relative.
    pub dpi2: f64,
    /// `Δφ = ‖F′‖²`, relative.
    pub laplace: f64,
    pub margin: f64,
    pub hypothesis: f64,
    /// Absolute error of Green potentials with known values.
    pub green_anchor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            kernel: 1e-9,
            curvature_fd: 1e-4,
            curvature_route: 1e-5,
            additivity: 1e-6,
            dpi2: 1e-6,
            laplace: 1e-5,
            margin: 1e-6,
            hypothesis: 1e-10,
            green_anchor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelTableSection {
    pub points: usize,
    pub r_max: f64,
    pub series_terms: usize,
}

impl Default for KernelTableSection {
    fn default() -> Self {
        KernelTableSection {
            points: 50,
            r_max: 0.9,
            series_terms: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureSection {
    pub points: usize,
    pub r_max: f64,
    /// Dirichlet truncation of the finite-difference `Π₁`.
    pub fd_truncation: usize,
}

impl Default for CurvatureSection {
    fn default() -> Self {
        CurvatureSection {
            points: 100,
            r_max: 0.7,
            fd_truncation: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thm32Section {
    pub points_per_frame: usize,
    pub r_max: f64,
    /// Step of the tensor-projection differences.
    pub step: StepSpec,
}

impl Default for Thm32Section {
    fn default() -> Self {
        Thm32Section {
            points_per_frame: 10,
            r_max: 0.6,
            step: StepSpec {
                base_step: 1e-4,
                boundary_scaling: true,
            },
        }
    }
}

/// Densities addressed by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Zero,
    Constant { value: f64 },
    AbsSq,
    Hyperbolic,
    Bump { re: f64, im: f64, radius: f64, height: f64 },
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Constant { value: 1.0 }
    }
}

impl DensitySpec {
    pub fn build(&self) -> Result<DensityField> {
        match *self {
            DensitySpec::Zero => Ok(DensityField::zero()),
            DensitySpec::Constant { value } => DensityField::constant(value),
            DensitySpec::AbsSq => Ok(DensityField::abs_sq()),
            DensitySpec::Hyperbolic => Ok(DensityField::hyperbolic()),
            DensitySpec::Bump { re, im, radius, height } => {
                DensityField::bump(DiskPoint::new(re, im)?, radius, height)
            }
        }
    }

    /// `G(λ)` where it is known in closed form.
    pub fn exact_potential(&self, lambda: DiskPoint) -> Option<f64> {
        let x = lambda.abs_sq();
        match *self {
            DensitySpec::Zero => Some(0.0),
            DensitySpec::Constant { value } => Some(value * (x - 1.0)),
            DensitySpec::AbsSq => Some((x * x - 1.0) / 4.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSection {
    pub density: DensitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    Dirichlet,
    Constant { value: f64 },
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightSequence> {
        match *self {
            WeightSpec::Dirichlet => Ok(WeightSequence::dirichlet()),
            WeightSpec::Constant { value } => WeightSequence::constant(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuellerSection {
    pub operator: OperatorSpec,
    pub weights: WeightSpec,
    pub max_terms: usize,
    pub mode: MuellerMode,
    pub relative_stop: f64,
}

impl Default for MuellerSection {
    fn default() -> Self {
        let spec = MuellerSpec::default();
        MuellerSection {
            operator: OperatorSpec::default(),
            weights: WeightSpec::default(),
            max_terms: spec.max_terms,
            mode: spec.mode,
            relative_stop: spec.relative_stop,
        }
    }
}

impl MuellerSection {
    pub fn spec(&self) -> MuellerSpec {
        MuellerSpec {
            max_terms: self.max_terms,
            mode: self.mode,
            relative_stop: self.relative_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilaritySection {
    pub frame: FrameSpec,
    /// Multiplier of `‖F‖²` in the candidate `φ`; `None` means 1.
    pub candidate_scale: Option<f64>,
    /// Density replacing `‖∂Π₂‖²`.
    pub density: Option<DensitySpec>,
    pub quadrature: QuadratureSpec,
    pub probe: ProbeSpec,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        let c = CriterionConfig::default();
        SimilaritySection {
            frame: FrameSpec::default(),
            candidate_scale: None,
            density: None,
            quadrature: c.quadrature,
            probe: c.probe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Fixes every randomized frame.
    pub seed: u64,
    /// Dirichlet truncation of the tensor ambient space.
    pub truncation: usize,
    pub format: Format,
    /// Output file; standard output when absent.
    pub output: Option<PathBuf>,
    pub grid: DiskGrid,
    pub step: StepSpec,
    pub quadrature: QuadratureSpec,
    pub probe: ProbeSpec,
    pub tolerances: Tolerances,
    pub ensemble: EnsembleSpec,
    pub kernel_table: KernelTableSection,
    pub curvature: CurvatureSection,
    pub thm32: Thm32Section,
    pub green: GreenSection,
    pub mueller: MuellerSection,
    pub similarity: SimilaritySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            truncation: 120,
            format: Format::default(),
            output: None,
            grid: DiskGrid::default(),
            step: StepSpec::default(),
            quadrature: QuadratureSpec::default(),
            probe: ProbeSpec::default(),
            tolerances: Tolerances::default(),
            ensemble: EnsembleSpec::default(),
            kernel_table: KernelTableSection::default(),
            curvature: CurvatureSection::default(),
            thm32: Thm32Section::default(),
            green: GreenSection::default(),
            mueller: MuellerSection::default(),
            similarity: SimilaritySection::default(),
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive, got {v}")))
    }
}

fn radius(field: &str, v: f64, limit: f64) -> Result<()> {
    if (0.0..=limit).contains(&v) {
        Ok(())
    } else {
        Err(bad(field, format!("must lie in [0, {limit}], got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(field, format!("must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn criterion(&self) -> CriterionConfig {
        CriterionConfig {
            grid: self.grid,
            step: self.step,
            quadrature: self.similarity.quadrature,
            probe: self.similarity.probe.clone(),
            margin_tolerance: self.tolerances.margin,
            identity_tolerance: self.tolerances.laplace,
            hypothesis_tolerance: self.tolerances.hypothesis,
        }
    }

    /// Range checks; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        at_least("truncation", self.truncation, 2)?;
        self.grid.validate()?;
        StepSpec::new(self.step.base_step, true).map_err(|_| bad("step.base_step", "must be positive"))?;
        self.quadrature.validate()?;
        self.similarity
            .quadrature
            .validate()
            .map_err(|e| prefix("similarity.", e))?;

        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.kernel", t.kernel),
            ("tolerances.curvature_fd", t.curvature_fd),
            ("tolerances.curvature_route", t.curvature_route),
            ("tolerances.additivity", t.additivity),
            ("tolerances.dpi2", t.dpi2),
            ("tolerances.laplace", t.laplace),
            ("tolerances.margin", t.margin),
            ("tolerances.hypothesis", t.hypothesis),
            ("tolerances.green_anchor", t.green_anchor),
        ] {
            positive(name, v)?;
        }

        let e = &self.ensemble;
        at_least("ensemble.max_rank", e.max_rank, 1)?;
        if e.max_dim < e.max_rank {
            return Err(bad("ensemble.max_dim", format!("must be at least max_rank={}", e.max_rank)));
        }

        let k = &self.kernel_table;
        at_least("kernel_table.points", k.points, 1)?;
        radius("kernel_table.r_max", k.r_max, 0.95)?;
        at_least("kernel_table.series_terms", k.series_terms, 1)?;

        let c = &self.curvature;
        at_least("curvature.points", c.points, 1)?;
        radius("curvature.r_max", c.r_max, 0.95)?;
        at_least("curvature.fd_truncation", c.fd_truncation, 2)?;

        let b = &self.thm32;
        at_least("thm32.points_per_frame", b.points_per_frame, 1)?;
        radius("thm32.r_max", b.r_max, 0.95)?;
        positive("thm32.step.base_step", b.step.base_step)?;

        at_least("mueller.max_terms", self.mueller.max_terms, 1)?;
        positive("mueller.relative_stop", self.mueller.relative_stop)?;
        if let Some(s) = self.similarity.candidate_scale {
            positive("similarity.candidate_scale", s)?;
        }
        Ok(())
    }
}

fn prefix(p: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, message } => Error::InvalidParameter {
            field: format!("{p}{field}"),
            message,
        },
        other => other,
    }
}

/// Problems while assembling a configuration.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("malformed override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
}

/// Parses an override value as TOML, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> std::result::Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.into()));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(ConfigError::Field {
                    field: key.trim().into(),
                    message: format!("`{part}` is not a section"),
                })
            }
        };
    }
    node.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

/// Reads the optional file and applies the overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> std::result::Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            text.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
                path: p.to_path_buf(),
                message: e.message().to_string(),
            })?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let field = e.path().to_string();
        ConfigError::Field {
            field: if field == "." { "<root>".into() } else { field },
            message: e.into_inner().message().to_string(),
        }
    })
}
