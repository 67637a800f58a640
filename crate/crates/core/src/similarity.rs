//! The criterion pipeline for a polynomial frame `F`.
//!
//! The density is `HS(∂Π₂)²`, the default candidate is `φ = HS(F)²` with
//! `Δφ = HS(F')²`, and the report combines the subharmonicity margins, the
//! boundedness probe of the Green potential, the Laplace identity, the
//! derivative bound and the projection hypotheses into one verdict. The
//! verdict speaks about the inequality and boundedness on the scanned grid,
//! not about similarity itself.

use serde::{Deserialize, Serialize};

use crate::bundle::{dpi2_analytic, frame_projection, hs_norm_sq, op_norm, PolynomialFrame};
use crate::error::{Error, Result};
use crate::exec;
use crate::green::{
    boundedness_probe, subharmonicity_scan, BoundedVerdict, DensityField, DiskGrid, PotentialReport, ProbeSpec,
    QuadratureSpec,
};
use crate::wirtinger::{DiskPoint, ScalarField, StepSpec};

/// `HS(∂Π₂)²` through `tr((F*F)⁻¹ F'*(I − Π₂)F')`, falling back to the
/// explicit derivative when the Gram matrix is badly conditioned.
fn dpi2_hs_sq(frame: &PolynomialFrame, p: DiskPoint) -> Result<f64> {
    let f = frame.eval(p);
    let d = frame.derivative(p);
    let g = f.adjoint() * &f;
    if let Some(chol) = g.clone().cholesky() {
        let fd = f.adjoint() * &d;
        let m = d.adjoint() * &d - fd.adjoint() * chol.solve(&fd);
        let value = chol.solve(&m).trace().re;
        // accept the short route only when cancellation is mild
        if value >= 1e-8 * hs_norm_sq(&d) / g.diagonal().iter().map(|v| v.re).fold(f64::INFINITY, f64::min) {
            return Ok(value);
        }
    }
    Ok(hs_norm_sq(&dpi2_analytic(frame, p)?))
}

/// `λ ↦ HS(∂Π₂(λ))²`.
pub fn density_from_frame(frame: &PolynomialFrame) -> DensityField {
    let f = frame.clone();
    DensityField::new("hs-dpi2-sq", move |p| dpi2_hs_sq(&f, p))
}

/// `λ ↦ HS(F(λ))²`.
pub fn phi_from_frame(frame: &PolynomialFrame) -> ScalarField {
    phi_from_frame_scaled(frame, 1.0)
}

/// `λ ↦ s·HS(F(λ))²`.
pub fn phi_from_frame_scaled(frame: &PolynomialFrame, scale: f64) -> ScalarField {
    let f = frame.clone();
    let label = if scale == 1.0 {
        "hs-frame-sq".to_string()
    } else {
        format!("{scale}·hs-frame-sq")
    };
    ScalarField::closed_form(label, move |p| scale * hs_norm_sq(&f.eval(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceIdentityReport {
    /// `max |Δφ − HS(F')²|` over the grid.
    pub max_abs_residual: f64,
    /// `max HS(F')²` over the grid.
    pub scale: f64,
    pub relative_residual: f64,
    pub worst_point: DiskPoint,
}

/// Compares the finite-difference `Δ HS(F)²` with `HS(F')²`.
pub fn verify_laplace_identity(frame: &PolynomialFrame, grid: &[DiskPoint], s: &StepSpec) -> Result<LaplaceIdentityReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            field: "grid".into(),
            message: "empty grid".into(),
        });
    }
    let phi = phi_from_frame(frame);
    let rows = exec::try_map(grid, |&p| {
        let lap = phi.laplacian(p, s)?;
        let rhs = hs_norm_sq(&frame.derivative(p));
        Ok(((lap - rhs).abs(), rhs))
    })?;
    let scale = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let (worst, max_abs_residual) = rows
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r.0 > acc.1 { (i, r.0) } else { acc });
    let relative_residual = if scale > 0.0 {
        max_abs_residual / scale
    } else {
        max_abs_residual
    };
    Ok(LaplaceIdentityReport {
        max_abs_residual,
        scale,
        relative_residual,
        worst_point: grid[worst],
    })
}

/// The analytic bound `‖∂Π₂‖ ≤ c‖F'‖` with `c = max(upper, 1/lower)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `max ‖∂Π₂‖/‖F'‖` (operator norms) over the grid.
    pub measured_constant: f64,
    /// `max HS(∂Π₂)²/HS(F')²` over the grid.
    pub measured_hs_ratio: f64,
    pub frame_constant: f64,
    pub holds: bool,
}

/// Pointwise projection hypotheses: `Π₂` Hermitian idempotent of constant
/// rank and `Π₂·∂Π₂ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub max_hermitian_defect: f64,
    pub max_idempotent_defect: f64,
    pub max_trace_defect: f64,
    /// `max ‖Π₂ ∂Π₂‖_F / max(1, ‖∂Π₂‖_F)`.
    pub max_product_residual: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub point: DiskPoint,
    pub density: f64,
    pub phi: f64,
    pub laplacian_phi: f64,
    pub margin: f64,
    pub hs_derivative_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    NegativeMargin,
    PotentialGrowth,
}

/// A concrete point supporting a `violated` verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub point: DiskPoint,
    /// The margin `Δφ − ρ`, or the potential value for growth witnesses.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    CriterionHoldsOnScan,
    Violated { witness: Witness },
    Inconclusive { cause: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub rank: usize,
    pub dim_e: usize,
    pub degree: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// Settings for [`check_criterion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriterionConfig {
    pub grid: DiskGrid,
    pub step: StepSpec,
    pub quadrature: QuadratureSpec,
    pub probe: ProbeSpec,
    /// Margins below `−margin_tolerance` are violations.
    pub margin_tolerance: f64,
    /// Accepted relative residual of the Laplace identity.
    pub identity_tolerance: f64,
    /// Accepted projection-hypothesis defects.
    pub hypothesis_tolerance: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            grid: DiskGrid::default(),
            step: StepSpec::default(),
            // frame densities are smooth and bounded, so a lighter rule
            // meets the same tolerance
            quadrature: QuadratureSpec {
                radial_nodes: 96,
                angular_nodes: 64,
                ..QuadratureSpec::default()
            },
            probe: ProbeSpec {
                directions: 4,
                ..ProbeSpec::default()
            },
            margin_tolerance: 1e-6,
            identity_tolerance: 1e-5,
            hypothesis_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub frame: FrameSummary,
    pub phi: String,
    pub density: String,
    pub density_summary: Option<DensitySummary>,
    pub min_margin: Option<f64>,
    pub mean_margin: Option<f64>,
    pub violation_count: usize,
    pub records: Vec<GridRecord>,
    pub potential: Option<PotentialReport>,
    pub laplace_identity: Option<LaplaceIdentityReport>,
    pub bound: Option<BoundCheck>,
    pub hypotheses: Option<HypothesisCheck>,
    pub verdict: Verdict,
}

fn bound_and_hypotheses(
    frame: &PolynomialFrame,
    grid: &[DiskPoint],
    tol: f64,
) -> Result<(BoundCheck, HypothesisCheck)> {
    let rows = exec::try_map(grid, |&p| {
        let proj = frame_projection(frame, p)?;
        let dpi2 = dpi2_analytic(frame, p)?;
        let d = frame.derivative(p);
        let defects = proj.defects();
        let product = (&proj.entries * &dpi2).norm() / dpi2.norm().max(1.0);
        let (dn, fn_) = (op_norm(&dpi2), op_norm(&d));
        let ratio = if fn_ > 0.0 { dn / fn_ } else { 0.0 };
        let hs_ratio = if fn_ > 0.0 { hs_norm_sq(&dpi2) / hs_norm_sq(&d) } else { 0.0 };
        Ok((ratio, hs_ratio, defects, product))
    })?;
    let max = |f: &dyn Fn(&(f64, f64, crate::bundle::ProjectionDefects, f64)) -> f64| {
        rows.iter().map(f).fold(0.0, f64::max)
    };
    let measured_constant = max(&|r| r.0);
    let frame_constant = frame.frame_constant();
    let bound = BoundCheck {
        measured_constant,
        measured_hs_ratio: max(&|r| r.1),
        frame_constant,
        holds: measured_constant <= frame_constant * (1.0 + 1e-9),
    };
    let h = HypothesisCheck {
        max_hermitian_defect: max(&|r| r.2.hermitian),
        max_idempotent_defect: max(&|r| r.2.idempotent),
        max_trace_defect: max(&|r| r.2.trace),
        max_product_residual: max(&|r| r.3),
        holds: false,
    };
    let holds = h.max_hermitian_defect <= tol
        && h.max_idempotent_defect <= tol
        && h.max_trace_defect <= 1e-8
        && h.max_product_residual <= tol;
    Ok((bound, HypothesisCheck { holds, ..h }))
}

fn frame_summary(frame: &PolynomialFrame) -> FrameSummary {
    FrameSummary {
        rank: frame.rank(),
        dim_e: frame.dim_e(),
        degree: frame.poly().degree(),
        lower_bound: frame.lower_bound(),
        upper_bound: frame.upper_bound(),
    }
}

/// Runs every check of the pipeline and aggregates the verdict. Errors in a
/// sub-check make the report inconclusive rather than failing the call.
pub fn check_criterion(
    frame: &PolynomialFrame,
    phi: Option<&ScalarField>,
    density_override: Option<&DensityField>,
    cfg: &CriterionConfig,
) -> SimilarityReport {
    let phi = phi.cloned().unwrap_or_else(|| phi_from_frame(frame));
    let density = density_override.cloned().unwrap_or_else(|| density_from_frame(frame));
    let mut report = SimilarityReport {
        frame: frame_summary(frame),
        phi: phi.label().to_string(),
        density: density.label().to_string(),
        density_summary: None,
        min_margin: None,
        mean_margin: None,
        violation_count: 0,
        records: Vec::new(),
        potential: None,
        laplace_identity: None,
        bound: None,
        hypotheses: None,
        verdict: Verdict::CriterionHoldsOnScan,
    };
    let inconclusive = |cause: String| Verdict::Inconclusive { cause };
    let grid = match cfg.grid.points() {
        Ok(g) => g,
        Err(e) => {
            report.verdict = inconclusive(format!("grid: {e}"));
            return report;
        }
    };

    let scan = match subharmonicity_scan(&phi, &density, &grid, &cfg.step, cfg.margin_tolerance) {
        Ok(s) => s,
        Err(e) => {
            report.verdict = inconclusive(format!("subharmonicity scan: {e}"));
            return report;
        }
    };
    let n = scan.records.len() as f64;
    report.density_summary = Some(DensitySummary {
        min: scan.records.iter().map(|r| r.density).fold(f64::INFINITY, f64::min),
        max: scan.records.iter().map(|r| r.density).fold(0.0, f64::max),
        mean: scan.records.iter().map(|r| r.density).sum::<f64>() / n,
    });
    report.min_margin = Some(scan.min_margin);
    report.mean_margin = Some(scan.mean_margin);
    report.violation_count = scan.violations.len();
    let phis: Vec<f64> = match exec::try_map(&grid, |&p| phi.eval(p)) {
        Ok(v) => v,
        Err(e) => {
            report.verdict = inconclusive(format!("candidate evaluation: {e}"));
            return report;
        }
    };
    report.records = scan
        .records
        .iter()
        .zip(&phis)
        .map(|(r, &phi_value)| GridRecord {
            point: r.point,
            density: r.density,
            phi: phi_value,
            laplacian_phi: r.laplacian,
            margin: r.margin,
            hs_derivative_sq: hs_norm_sq(&frame.derivative(r.point)),
        })
        .collect();

    let mut causes = Vec::new();
    match boundedness_probe(&density, &cfg.probe, &cfg.quadrature) {
        Ok(p) => report.potential = Some(p),
        Err(e) => causes.push(format!("boundedness probe: {e}")),
    }
    match verify_laplace_identity(frame, &grid, &cfg.step) {
        Ok(l) => {
            if l.relative_residual > cfg.identity_tolerance {
                causes.push(format!(
                    "Laplace identity residual {:e} above {:e}",
                    l.relative_residual, cfg.identity_tolerance
                ));
            }
            report.laplace_identity = Some(l);
        }
        Err(e) => causes.push(format!("Laplace identity: {e}")),
    }
    match bound_and_hypotheses(frame, &grid, cfg.hypothesis_tolerance) {
        Ok((b, h)) => {
            if !b.holds {
                causes.push(format!(
                    "derivative bound constant {} exceeds frame constant {}",
                    b.measured_constant, b.frame_constant
                ));
            }
            if !h.holds {
                causes.push("projection hypotheses fail".into());
            }
            report.bound = Some(b);
            report.hypotheses = Some(h);
        }
        Err(e) => causes.push(format!("bound check: {e}")),
    }

    let worst = scan
        .violations
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .copied();
    if let Some(w) = worst {
        report.verdict = Verdict::Violated {
            witness: Witness {
                kind: WitnessKind::NegativeMargin,
                point: w.point,
                value: w.margin,
            },
        };
    } else if let Some(p) = report
        .potential
        .as_ref()
        .filter(|p| p.bounded_verdict == BoundedVerdict::GrowthDetected)
    {
        let rec = p
            .records
            .iter()
            .max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
            .expect("probe records are nonempty");
        report.verdict = Verdict::Violated {
            witness: Witness {
                kind: WitnessKind::PotentialGrowth,
                point: rec.point,
                value: rec.value,
            },
        };
    } else if !causes.is_empty() {
        report.verdict = inconclusive(causes.join("; "));
    }
    report
}

/// Frames addressed by name in configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrameSpec {
    ConstantIdentity { n: usize },
    Line,
    PerturbedIdentity { eps: f64 },
    /// Member `index` of the seeded random ensemble.
    Random { index: usize },
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec::PerturbedIdentity { eps: 0.1 }
    }
}

impl FrameSpec {
    pub fn build(&self, seed: u64, ensemble: &crate::bundle::EnsembleSpec) -> Result<PolynomialFrame> {
        match *self {
            FrameSpec::ConstantIdentity { n } => PolynomialFrame::constant_identity(n),
            FrameSpec::Line => PolynomialFrame::line(),
            FrameSpec::PerturbedIdentity { eps } => PolynomialFrame::perturbed_identity(eps),
            FrameSpec::Random { index } => {
                let spec = crate::bundle::EnsembleSpec {
                    count: ensemble.count.max(index + 1),
                    ..*ensemble
                };
                Ok(crate::bundle::frame_ensemble(seed, &spec)?.swap_remove(index))
            }
        }
    }
}
