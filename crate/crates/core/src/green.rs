//! Green potentials of nonnegative densities on the unit disk.
//!
//! `G(λ) = (2/π) ∬_{|z| ≤ R} log|(z − λ)/(1 − λ̄z)| ρ(z) dA(z)` is computed in
//! polar coordinates centred at λ. Each ray is split at the singularity
//! radius: the inner piece subtracts `ρ(λ)` and integrates `t·log t` in closed
//! form, the outer piece uses Gauss–Legendre panels graded towards the cutoff
//! circle. With `Δ = ∂∂̄`, `ΔG = ρ`.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::wirtinger::{DiskPoint, ScalarField, StepSpec};

/// `log|(z − λ)/(1 − λ̄z)|`, the disk Green kernel (≤ 0).
pub fn green_kernel(z: DiskPoint, lambda: DiskPoint) -> Result<f64> {
    if z == lambda {
        return Err(Error::GreenSingularity {
            re: z.re,
            im: z.im,
        });
    }
    let num = (z.z() - lambda.z()).norm();
    let den = (Complex64::new(1.0, 0.0) - lambda.z().conj() * z.z()).norm();
    Ok((num / den).ln())
}

type DensityRule = dyn Fn(DiskPoint) -> Result<f64> + Send + Sync;

/// A labelled nonnegative density on the disk.
#[derive(Clone)]
pub struct DensityField {
    label: String,
    rule: Arc<DensityRule>,
}

impl DensityField {
    pub fn new<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(DiskPoint) -> Result<f64> + Send + Sync + 'static,
    {
        DensityField {
            label: label.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn closed_form<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(DiskPoint) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, move |p| Ok(rule(p)))
    }

    pub fn zero() -> Self {
        Self::closed_form("zero", |_| 0.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "density.constant".into(),
                message: format!("must be finite and nonnegative, got {c}"),
            });
        }
        Ok(Self::closed_form(format!("constant({c})"), move |_| c))
    }

    /// `|z|²`.
    pub fn abs_sq() -> Self {
        Self::closed_form("abs_sq", |p| p.abs_sq())
    }

    /// `(1 − |z|²)⁻²`, the hyperbolic area density.
    pub fn hyperbolic() -> Self {
        Self::closed_form("hyperbolic", |p| {
            let d = 1.0 - p.abs_sq();
            1.0 / (d * d)
        })
    }

    /// `height·(1 − |z − c|²/a²)³` on the disk `|z − c| < a`, zero outside.
    pub fn bump(centre: DiskPoint, radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0 && centre.abs() + radius < 1.0 && height >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "density.bump".into(),
                message: format!("support |z − {centre}| < {radius} must lie in the disk"),
            });
        }
        Ok(Self::closed_form(format!("bump({centre}, {radius})"), move |p| {
            let s = (p.z() - centre.z()).norm_sqr() / (radius * radius);
            if s >= 1.0 {
                0.0
            } else {
                height * (1.0 - s).powi(3)
            }
        }))
    }

    /// `a·ρ₁ + b·ρ₂` for `a, b ≥ 0`.
    pub fn combine(a: f64, first: &DensityField, b: f64, second: &DensityField) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "density.combine".into(),
                message: "coefficients must be nonnegative".into(),
            });
        }
        let (f, g) = (first.clone(), second.clone());
        Ok(Self::new(
            format!("{a}·{} + {b}·{}", first.label, second.label),
            move |p| Ok(a * f.eval(p)? + b * g.eval(p)?),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates the rule, rejecting negative or non-finite values.
    pub fn eval(&self, p: DiskPoint) -> Result<f64> {
        let v = (self.rule)(p)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                field: format!("density `{}`", self.label),
                message: format!("value {v} at {p} is not a finite nonnegative number"),
            });
        }
        Ok(v)
    }
}

impl fmt::Debug for DensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityField")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Quadrature parameters for [`green_potential`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub singularity_radius: f64,
    pub r_cutoff: f64,
    /// Accepted error estimate, relative to `max(1, |G|)`.
    pub tolerance: f64,
    /// Number of node doublings tried before giving up.
    pub max_refinements: usize,
    /// Extrapolate the discarded boundary annulus from a second cutoff.
    pub richardson: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial_nodes: 400,
            angular_nodes: 256,
            singularity_radius: 0.05,
            r_cutoff: 0.995,
            tolerance: 1e-6,
            max_refinements: 2,
            richardson: true,
        }
    }
}

const OUTER_PANELS: usize = 8;
const PANEL_RATIO: f64 = 0.3;

fn invalid(field: &str, message: String) -> Error {
    Error::InvalidParameter {
        field: format!("quadrature.{field}"),
        message,
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 2 * OUTER_PANELS + 4 {
            return Err(invalid(
                "radial_nodes",
                format!("need at least {}, got {}", 2 * OUTER_PANELS + 4, self.radial_nodes),
            ));
        }
        if self.angular_nodes < 8 {
            return Err(invalid("angular_nodes", format!("need at least 8, got {}", self.angular_nodes)));
        }
        if !(self.singularity_radius > 0.0 && self.singularity_radius < 0.1) {
            return Err(invalid(
                "singularity_radius",
                format!("must lie in (0, 0.1), got {}", self.singularity_radius),
            ));
        }
        if !(self.r_cutoff > 0.0 && self.r_cutoff <= 0.999) {
            return Err(invalid("r_cutoff", format!("must lie in (0, 0.999], got {}", self.r_cutoff)));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", format!("must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// A potential value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    /// Difference to the half-resolution rule (plus that of the second cutoff).
    pub error_estimate: f64,
    /// Richardson correction for the annulus beyond the cutoff (0 if unused).
    pub cutoff_correction: f64,
    pub r_cutoff: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
struct UnitRule(Vec<(f64, f64)>);

impl UnitRule {
    fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("positive order"));
        UnitRule(
            gl.as_node_weight_pairs()
                .iter()
                .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                .collect(),
        )
    }
}

struct RayRules {
    inner: UnitRule,
    panel: UnitRule,
}

impl RayRules {
    fn new(radial_nodes: usize) -> Self {
        let inner = (radial_nodes / 10).max(4);
        let per_panel = ((radial_nodes - inner) / OUTER_PANELS).max(2);
        RayRules {
            inner: UnitRule::new(inner),
            panel: UnitRule::new(per_panel),
        }
    }
}

/// Panel breakpoints on `[a, b]` with lengths shrinking geometrically towards `b`.
fn graded_breaks(a: f64, b: f64) -> [f64; OUTER_PANELS + 1] {
    let total: f64 = (0..OUTER_PANELS).map(|k| PANEL_RATIO.powi(k as i32)).sum();
    let mut out = [a; OUTER_PANELS + 1];
    let mut acc = a;
    for k in 0..OUTER_PANELS {
        acc += (b - a) * PANEL_RATIO.powi(k as i32) / total;
        out[k + 1] = acc;
    }
    out[OUTER_PANELS] = b;
    out
}

fn single_rule(
    lambda: DiskPoint,
    rho: &DensityField,
    rho_lambda: f64,
    rules: &RayRules,
    angular: usize,
    s0: f64,
    cutoff: f64,
) -> Result<f64> {
    let lz = lambda.z();
    let lbar = lz.conj();
    let one = Complex64::new(1.0, 0.0);
    let r2 = lambda.abs_sq();
    let at = |t: f64, e: Complex64| -> Result<(f64, f64)> {
        let z = lz + e * t;
        let p = DiskPoint::from_complex(z)?;
        Ok((rho.eval(p)?, (one - lbar * z).norm().ln()))
    };
    let mut total = 0.0;
    for j in 0..angular {
        let theta = 2.0 * PI * j as f64 / angular as f64;
        let e = Complex64::from_polar(1.0, theta);
        let b = lambda.re * e.re + lambda.im * e.im;
        let t_max = -b + (b * b + cutoff * cutoff - r2).sqrt();
        let s = s0.min(t_max);
        // inner piece, t = s·u²
        let mut ray = rho_lambda * (0.5 * s * s * s.ln() - 0.25 * s * s);
        for &(u, w) in &rules.inner.0 {
            let t = s * u * u;
            let (rho_z, log_den) = at(t, e)?;
            ray += w * 2.0 * s * s * u * u * u * (t.ln() * (rho_z - rho_lambda) - log_den * rho_z);
        }
        if t_max > s {
            let breaks = graded_breaks(s, t_max);
            for k in 0..OUTER_PANELS {
                let (a, len) = (breaks[k], breaks[k + 1] - breaks[k]);
                for &(u, w) in &rules.panel.0 {
                    let t = a + len * u;
                    let (rho_z, log_den) = at(t, e)?;
                    ray += w * len * t * (t.ln() - log_den) * rho_z;
                }
            }
        }
        total += ray;
    }
    // (2/π)·(2π/M)
    Ok(4.0 * total / angular as f64)
}

/// Value at the requested resolution, refined until the half-resolution
/// comparison meets the tolerance.
fn converged(
    lambda: DiskPoint,
    rho: &DensityField,
    rho_lambda: f64,
    q: &QuadratureSpec,
    cutoff: f64,
) -> Result<(f64, f64, usize, usize)> {
    let (mut radial, mut angular) = (q.radial_nodes, q.angular_nodes);
    let mut coarse = single_rule(
        lambda,
        rho,
        rho_lambda,
        &RayRules::new(radial / 2),
        angular / 2,
        q.singularity_radius,
        cutoff,
    )?;
    let mut estimate = f64::INFINITY;
    for attempt in 0..=q.max_refinements {
        let fine = single_rule(lambda, rho, rho_lambda, &RayRules::new(radial), angular, q.singularity_radius, cutoff)?;
        let err = (fine - coarse).abs();
        if err <= q.tolerance * fine.abs().max(1.0) {
            return Ok((fine, err, radial, angular));
        }
        estimate = err;
        if attempt < q.max_refinements {
            coarse = fine;
            radial *= 2;
            angular *= 2;
        }
    }
    Err(Error::QuadratureNonconvergence {
        re: lambda.re,
        im: lambda.im,
        estimate,
        tolerance: q.tolerance,
    })
}

/// Green potential at `λ` with the quadrature cutoff from `q`.
pub fn green_potential(lambda: DiskPoint, rho: &DensityField, q: &QuadratureSpec) -> Result<PotentialValue> {
    green_potential_with_cutoff(lambda, rho, q, q.r_cutoff)
}

/// Green potential over `|z| ≤ cutoff`; `cutoff` may exceed `q.r_cutoff` up to 0.9999.
pub fn green_potential_with_cutoff(
    lambda: DiskPoint,
    rho: &DensityField,
    q: &QuadratureSpec,
    cutoff: f64,
) -> Result<PotentialValue> {
    q.validate()?;
    if !(cutoff > 0.0 && cutoff <= 0.9999) {
        return Err(invalid("r_cutoff", format!("must lie in (0, 0.9999], got {cutoff}")));
    }
    if lambda.abs() >= cutoff {
        return Err(Error::BeyondMargin {
            re: lambda.re,
            im: lambda.im,
            modulus: lambda.abs(),
            r_max: cutoff,
        });
    }
    let rho_lambda = rho.eval(lambda)?;
    let (value, err, radial, angular) = converged(lambda, rho, rho_lambda, q, cutoff)?;
    let second = 2.0 * cutoff - 1.0;
    if q.richardson && lambda.abs() < second {
        // the discarded annulus contributes O((1 − R)²) for bounded densities
        let (near, err2, _, _) = converged(lambda, rho, rho_lambda, q, second)?;
        let correction = (value - near) / 3.0;
        return Ok(PotentialValue {
            value: value + correction,
            error_estimate: err + err2,
            cutoff_correction: correction,
            r_cutoff: cutoff,
            radial_nodes: radial,
            angular_nodes: angular,
        });
    }
    Ok(PotentialValue {
        value,
        error_estimate: err,
        cutoff_correction: 0.0,
        r_cutoff: cutoff,
        radial_nodes: radial,
        angular_nodes: angular,
    })
}

/// Potentials at many points, evaluated concurrently and returned in order.
pub fn green_potentials(points: &[DiskPoint], rho: &DensityField, q: &QuadratureSpec) -> Result<Vec<PotentialValue>> {
    exec::try_map(points, |&p| green_potential(p, rho, q))
}

/// Polar scan grid with `1 − r` spaced geometrically, so radii cluster
/// towards the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiskGrid {
    pub radii: usize,
    pub angles: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for DiskGrid {
    fn default() -> Self {
        DiskGrid {
            radii: 20,
            angles: 32,
            r_min: 0.05,
            r_max: 0.9,
        }
    }
}

impl DiskGrid {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidParameter {
            field: "grid".into(),
            message,
        };
        if self.radii == 0 || self.angles == 0 {
            return Err(bad("radii and angles must be positive".into()));
        }
        if !(0.0 <= self.r_min && self.r_min <= self.r_max && self.r_max < 1.0) {
            return Err(bad(format!(
                "need 0 ≤ r_min ≤ r_max < 1, got r_min={} r_max={}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn radius_values(&self) -> Vec<f64> {
        if self.radii == 1 {
            return vec![self.r_max];
        }
        let (a, b) = ((1.0 - self.r_min).ln(), (1.0 - self.r_max).ln());
        (0..self.radii)
            .map(|i| 1.0 - (a + (b - a) * i as f64 / (self.radii - 1) as f64).exp())
            .collect()
    }

    /// Grid points, radius-major.
    pub fn points(&self) -> Result<Vec<DiskPoint>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.radii * self.angles);
        for r in self.radius_values() {
            for j in 0..self.angles {
                let theta = 2.0 * PI * j as f64 / self.angles as f64;
                out.push(DiskPoint::polar(r, theta)?);
            }
        }
        Ok(out)
    }

    /// Same range with twice the radii and angles.
    pub fn refined(&self) -> DiskGrid {
        DiskGrid {
            radii: 2 * self.radii,
            angles: 2 * self.angles,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub point: DiskPoint,
    pub laplacian: f64,
    pub density: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicityReport {
    pub phi: String,
    pub density: String,
    pub records: Vec<MarginRecord>,
    pub min_margin: f64,
    pub mean_margin: f64,
    /// Records with `margin < −tolerance`.
    pub violations: Vec<MarginRecord>,
    pub tolerance: f64,
    pub sup_abs_phi: f64,
}

/// Compares `Δφ` against `ρ` on the grid.
pub fn subharmonicity_scan(
    phi: &ScalarField,
    rho: &DensityField,
    grid: &[DiskPoint],
    s: &StepSpec,
    tolerance: f64,
) -> Result<SubharmonicityReport> {
    let rows = exec::try_map(grid, |&p| {
        let lap = phi.laplacian(p, s)?;
        let density = rho.eval(p)?;
        Ok((
            MarginRecord {
                point: p,
                laplacian: lap,
                density,
                margin: lap - density,
            },
            phi.eval(p)?.abs(),
        ))
    })?;
    let records: Vec<MarginRecord> = rows.iter().map(|r| r.0).collect();
    let sup_abs_phi = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let min_margin = records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let mean_margin = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.margin).sum::<f64>() / records.len() as f64
    };
    let violations = records.iter().copied().filter(|r| r.margin < -tolerance).collect();
    Ok(SubharmonicityReport {
        phi: phi.label().to_string(),
        density: rho.label().to_string(),
        records,
        min_margin,
        mean_margin,
        violations,
        tolerance,
        sup_abs_phi,
    })
}

/// Radii, directions and the growth decision rule of [`boundedness_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub radii: Vec<f64>,
    pub directions: usize,
    /// Growth is declared when `slope − 2·stderr` exceeds this.
    pub growth_threshold: f64,
    /// Cutoff at radius `r` is `1 − κ(1 − r)²`, capped at `max_cutoff`, so the
    /// discarded annulus stays thin compared with the distance `1 − r`.
    pub cutoff_kappa: f64,
    pub max_cutoff: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            radii: vec![0.3, 0.45, 0.6, 0.7, 0.8, 0.85],
            directions: 8,
            growth_threshold: 0.25,
            cutoff_kappa: 0.05,
            max_cutoff: 0.999,
        }
    }
}

impl ProbeSpec {
    pub fn cutoff_at(&self, r: f64) -> f64 {
        (1.0 - self.cutoff_kappa * (1.0 - r) * (1.0 - r)).min(self.max_cutoff)
    }

    fn validate(&self, q: &QuadratureSpec) -> Result<()> {
        let bad = |message: String| Error::InvalidParameter {
            field: "probe".into(),
            message,
        };
        if self.radii.len() < 3 {
            return Err(bad("need at least three radii for the growth fit".into()));
        }
        if self.radii.windows(2).any(|w| w[1] <= w[0]) || self.radii[0] < 0.0 {
            return Err(bad("radii must be nonnegative and strictly increasing".into()));
        }
        if *self.radii.last().unwrap() >= q.r_cutoff {
            return Err(bad(format!("last radius must be below r_cutoff={}", q.r_cutoff)));
        }
        if self.directions == 0 {
            return Err(bad("directions must be positive".into()));
        }
        if !(self.max_cutoff >= q.r_cutoff && self.max_cutoff <= 0.9999) {
            return Err(bad("need r_cutoff ≤ max_cutoff ≤ 0.9999".into()));
        }
        if !(self.cutoff_kappa > 0.0 && self.cutoff_kappa < 0.5) {
            return Err(bad(format!("cutoff_kappa must lie in (0, 0.5), got {}", self.cutoff_kappa)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundedVerdict {
    BoundedOnScan,
    GrowthDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub point: DiskPoint,
    pub radius: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub r_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub density: String,
    pub records: Vec<PotentialRecord>,
    pub sup_abs: f64,
    pub bounded_verdict: BoundedVerdict,
    pub growth_fit: GrowthFit,
    pub growth_threshold: f64,
}

/// Least-squares line through `(x, y)` with the slope's standard error.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> GrowthFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    GrowthFit {
        slope,
        intercept,
        stderr,
    }
}

/// Scans `|G|` along circles and fits its per-circle maximum against
/// `−log(1 − r)`.
pub fn boundedness_probe(rho: &DensityField, probe: &ProbeSpec, q: &QuadratureSpec) -> Result<PotentialReport> {
    q.validate()?;
    probe.validate(q)?;
    let mut jobs = Vec::with_capacity(probe.radii.len() * probe.directions);
    for &r in &probe.radii {
        for j in 0..probe.directions {
            let theta = 2.0 * PI * (j as f64 + 0.5) / probe.directions as f64;
            jobs.push((r, DiskPoint::polar(r, theta)?));
        }
    }
    let records = exec::try_map(&jobs, |&(r, p)| {
        let cutoff = probe.cutoff_at(r);
        let v = green_potential_with_cutoff(p, rho, q, cutoff)?;
        Ok(PotentialRecord {
            point: p,
            radius: r,
            value: v.value,
            error_estimate: v.error_estimate,
            r_cutoff: cutoff,
        })
    })?;
    let sup_abs = records.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    let xs: Vec<f64> = probe.radii.iter().map(|r| -(1.0 - r).ln()).collect();
    let ys: Vec<f64> = records
        .chunks(probe.directions)
        .map(|c| c.iter().map(|r| r.value.abs()).fold(0.0, f64::max))
        .collect();
    let growth_fit = fit_line(&xs, &ys);
    let bounded_verdict = if growth_fit.slope - 2.0 * growth_fit.stderr > probe.growth_threshold {
        BoundedVerdict::GrowthDetected
    } else {
        BoundedVerdict::BoundedOnScan
    };
    Ok(PotentialReport {
        density: rho.label().to_string(),
        records,
        sup_abs,
        bounded_verdict,
        growth_fit,
        growth_threshold: probe.growth_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(re: f64, im: f64) -> DiskPoint {
        DiskPoint::new(re, im).unwrap()
    }

    fn fast() -> QuadratureSpec {
        QuadratureSpec {
            radial_nodes: 120,
            angular_nodes: 64,
            ..QuadratureSpec::default()
        }
    }

    /// Adaptive Simpson on `[a, b]`.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn kernel_examples() {
        let half = (0.5f64).ln();
        assert!((green_kernel(p(0.5, 0.0), DiskPoint::ORIGIN).unwrap() - half).abs() < 1e-15);
        assert!((green_kernel(p(0.0, 0.5), DiskPoint::ORIGIN).unwrap() - half).abs() < 1e-15);
        assert!((green_kernel(DiskPoint::ORIGIN, p(0.5, 0.0)).unwrap() - half).abs() < 1e-15);
        let near = green_kernel(p(0.0, 0.999999), p(0.3, 0.2)).unwrap();
        assert!(near <= 0.0 && near > -1e-5);
        assert!(matches!(
            green_kernel(p(0.1, 0.2), p(0.1, 0.2)),
            Err(Error::GreenSingularity { .. })
        ));
    }

    #[test]
    fn zero_density() {
        let v = green_potential(p(0.3, -0.4), &DensityField::zero(), &fast()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn constant_density_anchor() {
        let q = QuadratureSpec::default();
        let v = green_potential(DiskPoint::ORIGIN, &DensityField::constant(1.0).unwrap(), &q).unwrap();
        assert!((v.value + 1.0).abs() < 1e-3, "{v:?}");
        // without extrapolation the cutoff value is 2R² log R − R²
        let raw = QuadratureSpec {
            richardson: false,
            ..q
        };
        let v = green_potential(DiskPoint::ORIGIN, &DensityField::constant(1.0).unwrap(), &raw).unwrap();
        let r = raw.r_cutoff;
        assert!((v.value - (2.0 * r * r * r.ln() - r * r)).abs() < 1e-10, "{v:?}");
    }

    #[test]
    fn constant_density_closed_form_off_centre() {
        // Δ(|λ|² − 1) = 1 with zero boundary values
        let rho = DensityField::constant(1.0).unwrap();
        for lam in [p(0.3, 0.4), p(-0.7, 0.1), p(0.0, -0.85)] {
            let v = green_potential(lam, &rho, &QuadratureSpec::default()).unwrap();
            assert!((v.value - (lam.abs_sq() - 1.0)).abs() < 1e-5, "{lam}: {v:?}");
        }
    }

    #[test]
    fn abs_sq_density_anchor() {
        let rho = DensityField::abs_sq();
        let v = green_potential(DiskPoint::ORIGIN, &rho, &QuadratureSpec::default()).unwrap();
        assert!((v.value + 0.25).abs() < 1e-3, "{v:?}");
        let lam = p(0.5, 0.2);
        let v = green_potential(lam, &rho, &QuadratureSpec::default()).unwrap();
        let exact = (lam.abs_sq().powi(2) - 1.0) / 4.0;
        assert!((v.value - exact).abs() < 1e-5, "{v:?} vs {exact}");
    }

    #[test]
    fn hyperbolic_density_matches_radial_oracle() {
        let q = QuadratureSpec {
            richardson: false,
            ..QuadratureSpec::default()
        };
        let r = q.r_cutoff;
        let integrand = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                4.0 * t * t.ln() / (1.0 - t * t).powi(2)
            }
        };
        let oracle = simpson(&integrand, 0.0, r, 1e-12);
        let v = green_potential(DiskPoint::ORIGIN, &DensityField::hyperbolic(), &q).unwrap();
        assert!(((v.value - oracle) / oracle).abs() < 1e-8, "{} vs {oracle}", v.value);
    }

    #[test]
    fn laplacian_calibration_is_one() {
        let rho = DensityField::bump(p(0.2, 0.1), 0.4, 1.0).unwrap();
        let q = QuadratureSpec {
            tolerance: 1e-8,
            ..QuadratureSpec::default()
        };
        let field = {
            let rho = rho.clone();
            ScalarField::new("potential", move |l| Ok(green_potential(l, &rho, &q)?.value))
        };
        let s = StepSpec::new(0.02, false).unwrap();
        for lam in [p(0.2, 0.1), p(0.35, 0.0), p(0.1, 0.25)] {
            let ratio = field.laplacian(lam, &s).unwrap() / rho.eval(lam).unwrap();
            assert!((ratio - 1.0).abs() < 0.05, "{lam}: ratio {ratio}");
        }
    }

    #[test]
    fn monotone_and_linear_in_density() {
        let q = fast();
        let a = DensityField::abs_sq();
        let b = DensityField::bump(p(-0.3, 0.2), 0.3, 2.0).unwrap();
        let lam = p(0.1, -0.2);
        let ga = green_potential(lam, &a, &q).unwrap().value;
        let gb = green_potential(lam, &b, &q).unwrap().value;
        let twice = DensityField::combine(2.0, &a, 0.0, &b).unwrap();
        let g2 = green_potential(lam, &twice, &q).unwrap().value;
        assert!(g2 <= ga);
        assert!((g2 - 2.0 * ga).abs() < 1e-9);
        let mix = DensityField::combine(0.7, &a, 1.3, &b).unwrap();
        let gm = green_potential(lam, &mix, &q).unwrap().value;
        assert!((gm - (0.7 * ga + 1.3 * gb)).abs() < 1e-9);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let q = QuadratureSpec {
            radial_nodes: 20,
            angular_nodes: 8,
            tolerance: 1e-14,
            max_refinements: 0,
            ..QuadratureSpec::default()
        };
        let r = green_potential(p(0.5, 0.0), &DensityField::hyperbolic(), &q);
        assert!(matches!(r, Err(Error::QuadratureNonconvergence { .. })), "{r:?}");
    }

    #[test]
    fn spec_validation() {
        let bad = [
            QuadratureSpec {
                singularity_radius: 0.2,
                ..QuadratureSpec::default()
            },
            QuadratureSpec {
                r_cutoff: 0.9995,
                ..QuadratureSpec::default()
            },
            QuadratureSpec {
                angular_nodes: 0,
                ..QuadratureSpec::default()
            },
        ];
        for q in bad {
            assert!(q.validate().is_err());
        }
        assert!(DensityField::constant(-1.0).is_err());
        let neg = DensityField::closed_form("negative", |_| -1.0);
        assert!(neg.eval(DiskPoint::ORIGIN).is_err());
    }

    #[test]
    fn subharmonicity_examples() {
        let grid = DiskGrid::default().points().unwrap();
        let s = StepSpec::default();
        let phi = ScalarField::closed_form("abs_sq", |l| l.abs_sq());
        let r = subharmonicity_scan(&phi, &DensityField::constant(1.0).unwrap(), &grid, &s, 1e-6).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.min_margin.abs() < 1e-6);
        let r = subharmonicity_scan(&phi, &DensityField::constant(0.5).unwrap(), &grid, &s, 1e-6).unwrap();
        assert!((r.min_margin - 0.5).abs() < 1e-6 && (r.mean_margin - 0.5).abs() < 1e-6);
        assert!((r.sup_abs_phi - 0.81).abs() < 1e-12);
        let harmonic = ScalarField::closed_form("re", |l| l.re);
        let r = subharmonicity_scan(&harmonic, &DensityField::constant(0.1).unwrap(), &grid, &s, 1e-6).unwrap();
        assert_eq!(r.violations.len(), grid.len());
    }

    #[test]
    fn grid_geometry() {
        let g = DiskGrid::default();
        let radii = g.radius_values();
        assert_eq!(radii.len(), 20);
        assert!((radii[0] - 0.05).abs() < 1e-15 && (radii[19] - 0.9).abs() < 1e-15);
        let gaps: Vec<f64> = radii.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(g.points().unwrap().len(), 640);
        assert_eq!(g.refined().points().unwrap().len(), 2560);
    }

    #[test]
    fn probe_examples() {
        let q = QuadratureSpec::default();
        let probe = ProbeSpec::default();
        let zero = boundedness_probe(&DensityField::zero(), &probe, &q).unwrap();
        assert_eq!(zero.bounded_verdict, BoundedVerdict::BoundedOnScan);
        assert_eq!(zero.sup_abs, 0.0);
        let one = boundedness_probe(&DensityField::constant(1.0).unwrap(), &probe, &q).unwrap();
        assert_eq!(one.bounded_verdict, BoundedVerdict::BoundedOnScan);
        assert!(one.records.iter().all(|r| r.value <= 0.0 && r.value >= -1.0));
        let hyp = boundedness_probe(&DensityField::hyperbolic(), &probe, &q).unwrap();
        assert_eq!(hyp.bounded_verdict, BoundedVerdict::GrowthDetected, "{:?}", hyp.growth_fit);
        assert!(hyp.sup_abs >= hyp.records.iter().map(|r| r.value.abs()).fold(0.0, f64::max));
    }

    #[test]
    fn line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && f.stderr < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn potential_is_nonpositive(r in 0.0f64..0.9, theta in 0.0f64..6.28, c in 0.0f64..3.0) {
            let lam = DiskPoint::polar(r, theta).unwrap();
            let rho = DensityField::combine(c, &DensityField::abs_sq(), 1.0, &DensityField::constant(0.2).unwrap()).unwrap();
            let v = green_potential(lam, &rho, &fast()).unwrap();
            prop_assert!(v.value <= 0.0);
        }
    }
}
