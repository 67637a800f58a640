//! The command pipelines. Each returns typed reports plus a flat table.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::output::{Cell, CommandOutput};
use crate::bundle::{
    curvature_pi1_closed, dpi1_fd, frame_ensemble, hs_norm_sq, spiral_points, thm32_report, BundleConfig,
    BundleDerivativeReport,
};
use crate::error::Result;
use crate::exec;
use crate::green::{boundedness_probe, green_potential};
use crate::kernel::{self, series, SeriesSpec};
use crate::model::{mueller_b, mueller_sum, Satisfied};
use crate::similarity::{check_criterion, phi_from_frame_scaled, verify_laplace_identity, Verdict};
use crate::wirtinger::{laplacian, DiskPoint};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub point: DiskPoint,
    pub abs_sq: f64,
    pub kernel_norm_sq: f64,
    pub derivative_kernel_norm_sq: f64,
    pub kernel_deriv_inner_re: f64,
    pub kernel_deriv_inner_im: f64,
    pub combination_norm_sq: f64,
    pub kernel_residual: f64,
    pub derivative_residual: f64,
    pub inner_residual: f64,
    pub combination_residual: f64,
}

pub fn kernel_rows(cfg: &RunConfig) -> Result<Vec<KernelRow>> {
    let k = &cfg.kernel_table;
    let spec = SeriesSpec::new(k.series_terms, SeriesSpec::default().tail_tolerance)?;
    let pts = spiral_points(k.points, k.r_max);
    Ok(exec::map(&pts, |&p| {
        let x = p.abs_sq();
        let kn = kernel::kernel_norm_sq(p);
        let dn = kernel::derivative_kernel_norm_sq(p);
        let inner = kernel::kernel_deriv_inner(p);
        let comb = kernel::combination_norm_sq(p);
        let s_kn = series::kernel_norm_sq(x, &spec).value;
        let s_dn = series::derivative_kernel_norm_sq(x, &spec).value;
        let s_inner = series::kernel_deriv_inner(p.z(), &spec).value;
        let l = (-x).ln_1p();
        let a = l + x / (1.0 - x);
        let b = p.z() * l;
        let s_comb = a * a * s_kn + b.norm_sqr() * s_dn + 2.0 * (b * a * s_inner).re;
        KernelRow {
            point: p,
            abs_sq: x,
            kernel_norm_sq: kn,
            derivative_kernel_norm_sq: dn,
            kernel_deriv_inner_re: inner.re,
            kernel_deriv_inner_im: inner.im,
            combination_norm_sq: comb,
            kernel_residual: rel(kn, s_kn),
            derivative_residual: rel(dn, s_dn),
            inner_residual: (inner - s_inner).norm() / s_inner.norm().max(f64::MIN_POSITIVE),
            combination_residual: rel(comb, s_comb),
        }
    }))
}

pub fn kernel_table(cfg: &RunConfig) -> Result<CommandOutput> {
    let rows = kernel_rows(cfg)?;
    let mut out = CommandOutput::new(&[
        "re",
        "im",
        "abs_sq",
        "kernel_norm_sq",
        "derivative_kernel_norm_sq",
        "kernel_deriv_inner_re",
        "kernel_deriv_inner_im",
        "combination_norm_sq",
        "kernel_residual",
        "derivative_residual",
        "inner_residual",
        "combination_residual",
    ]);
    for r in &rows {
        out.report(r);
        out.row(vec![
            r.point.re.into(),
            r.point.im.into(),
            r.abs_sq.into(),
            r.kernel_norm_sq.into(),
            r.derivative_kernel_norm_sq.into(),
            r.kernel_deriv_inner_re.into(),
            r.kernel_deriv_inner_im.into(),
            r.combination_norm_sq.into(),
            r.kernel_residual.into(),
            r.derivative_residual.into(),
            r.inner_residual.into(),
            r.combination_residual.into(),
        ]);
    }
    let worst = max_of(rows.iter().map(|r| {
        r.kernel_residual
            .max(r.derivative_residual)
            .max(r.inner_residual)
            .max(r.combination_residual)
    }));
    out.set("max_residual", worst);
    out.set("tolerance", cfg.tolerances.kernel);
    out.violation = !(worst <= cfg.tolerances.kernel);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRow {
    pub point: DiskPoint,
    pub closed_form: f64,
    /// `‖∂Π₁‖²` from finite differences of the truncated projection.
    pub hs_dpi1_sq: f64,
    /// `Δ log ‖k_λ‖²`.
    pub laplacian_route: f64,
    pub fd_residual: f64,
    pub route_residual: f64,
}

pub fn curvature_rows(cfg: &RunConfig) -> Result<Vec<CurvatureRow>> {
    let c = &cfg.curvature;
    let mut pts = vec![DiskPoint::ORIGIN];
    pts.extend(spiral_points(c.points.saturating_sub(1), c.r_max));
    exec::try_map(&pts, |&p| {
        let closed = curvature_pi1_closed(p);
        let fd = hs_norm_sq(&dpi1_fd(p, c.fd_truncation, &cfg.step)?);
        let route = laplacian(|q| Ok(kernel::kernel_norm_sq(q).ln()), p, &cfg.step)?;
        Ok(CurvatureRow {
            point: p,
            closed_form: closed,
            hs_dpi1_sq: fd,
            laplacian_route: route,
            fd_residual: rel(fd, closed),
            route_residual: rel(route, closed),
        })
    })
}

pub fn curvature_scan(cfg: &RunConfig) -> Result<CommandOutput> {
    let rows = curvature_rows(cfg)?;
    let mut out = CommandOutput::new(&[
        "re",
        "im",
        "closed_form",
        "hs_dpi1_sq",
        "laplacian_route",
        "fd_residual",
        "route_residual",
    ]);
    for r in &rows {
        out.report(r);
        out.row(vec![
            r.point.re.into(),
            r.point.im.into(),
            r.closed_form.into(),
            r.hs_dpi1_sq.into(),
            r.laplacian_route.into(),
            r.fd_residual.into(),
            r.route_residual.into(),
        ]);
    }
    let fd = max_of(rows.iter().map(|r| r.fd_residual));
    let route = max_of(rows.iter().map(|r| r.route_residual));
    out.set("max_fd_residual", fd);
    out.set("max_route_residual", route);
    out.violation = !(fd <= cfg.tolerances.curvature_fd && route <= cfg.tolerances.curvature_route);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm32Record {
    pub frame: usize,
    pub dim_e: usize,
    pub report: BundleDerivativeReport,
}

pub fn thm32_records(cfg: &RunConfig) -> Result<Vec<Thm32Record>> {
    let frames = frame_ensemble(cfg.seed, &cfg.ensemble)?;
    let bundle = BundleConfig {
        truncation: cfg.truncation,
        step: cfg.thm32.step,
        identity_tolerance: cfg.tolerances.additivity,
    };
    let pts = spiral_points(cfg.thm32.points_per_frame, cfg.thm32.r_max);
    let jobs: Vec<(usize, DiskPoint)> = (0..frames.len())
        .flat_map(|i| pts.iter().map(move |&p| (i, p)))
        .collect();
    exec::try_map(&jobs, |&(i, p)| {
        Ok(Thm32Record {
            frame: i,
            dim_e: frames[i].dim_e(),
            report: thm32_report(&frames[i], p, &bundle)?,
        })
    })
}

fn relative_alt(r: &BundleDerivativeReport) -> f64 {
    r.alt_additivity_residual / r.hs_dpi_sq.max(f64::MIN_POSITIVE)
}

pub fn thm32_verify(cfg: &RunConfig) -> Result<CommandOutput> {
    let recs = thm32_records(cfg)?;
    let mut out = CommandOutput::new(&[
        "frame",
        "rank",
        "dim_e",
        "re",
        "im",
        "hs_dpi1_sq",
        "hs_dpi2_sq",
        "hs_dpi_sq",
        "additivity_residual",
        "alt_additivity_residual",
        "dpi2_fd_residual",
        "orthogonality_residual",
        "reproduction_residual",
    ]);
    for rec in &recs {
        let r = &rec.report;
        out.report(rec);
        out.row(vec![
            rec.frame.into(),
            r.rank.into(),
            rec.dim_e.into(),
            r.point.re.into(),
            r.point.im.into(),
            r.hs_dpi1_sq.into(),
            r.hs_dpi2_sq.into(),
            r.hs_dpi_sq.into(),
            r.relative_additivity_residual().into(),
            relative_alt(r).into(),
            r.dpi2_fd_residual.into(),
            r.orthogonality_residual.into(),
            r.reproduction_residual.into(),
        ]);
    }
    let add = max_of(recs.iter().map(|r| r.report.relative_additivity_residual()));
    let dpi2 = max_of(recs.iter().map(|r| r.report.dpi2_fd_residual));
    let violations: usize = recs.iter().map(|r| r.report.violations.len()).sum();
    let alt_worse = recs
        .iter()
        .filter(|r| r.report.rank >= 2)
        .all(|r| r.report.alt_additivity_residual > r.report.additivity_residual);
    out.set("max_additivity_residual", add);
    out.set("max_dpi2_fd_residual", dpi2);
    out.set("identity_violations", violations);
    out.set("alternative_worse_for_rank_at_least_2", alt_worse);
    out.violation = !(add <= cfg.tolerances.additivity && dpi2 <= cfg.tolerances.dpi2) || violations > 0;
    Ok(out)
}

pub fn green_potential_cmd(cfg: &RunConfig) -> Result<CommandOutput> {
    let spec = cfg.green.density;
    let rho = spec.build()?;
    let report = boundedness_probe(&rho, &cfg.probe, &cfg.quadrature)?;
    let origin = green_potential(DiskPoint::ORIGIN, &rho, &cfg.quadrature)?;
    let mut out = CommandOutput::new(&["re", "im", "radius", "value", "error_estimate", "r_cutoff", "exact"]);
    let exact = |p: DiskPoint| spec.exact_potential(p).map_or(Cell::Text(String::new()), Cell::Num);
    out.row(vec![
        0.0.into(),
        0.0.into(),
        0.0.into(),
        origin.value.into(),
        origin.error_estimate.into(),
        origin.r_cutoff.into(),
        exact(DiskPoint::ORIGIN),
    ]);
    for r in &report.records {
        out.row(vec![
            r.point.re.into(),
            r.point.im.into(),
            r.radius.into(),
            r.value.into(),
            r.error_estimate.into(),
            r.r_cutoff.into(),
            exact(r.point),
        ]);
    }
    out.set("origin_value", origin.value);
    out.set("bounded_verdict", report.bounded_verdict);
    out.set("growth_slope", report.growth_fit.slope);
    if let Some(e) = spec.exact_potential(DiskPoint::ORIGIN) {
        let err = (origin.value - e).abs();
        out.set("origin_exact", e);
        out.set("origin_error", err);
        out.violation = !(err <= cfg.tolerances.green_anchor);
    }
    out.report(&origin);
    out.report(&report);
    Ok(out)
}

pub fn mueller_check(cfg: &RunConfig) -> Result<CommandOutput> {
    let m = &cfg.mueller;
    let t = m.operator.build()?;
    let alpha = m.weights.build()?;
    let report = mueller_sum(&t, &alpha, &m.spec())?;
    let mut out = CommandOutput::new(&["n", "b_n", "term", "partial_sum"]);
    for (n, (term, sum)) in report.terms.iter().zip(&report.partial_sums).enumerate() {
        out.row(vec![n.into(), mueller_b(&alpha, n).into(), (*term).into(), (*sum).into()]);
    }
    out.set("operator", m.operator.label());
    out.set("limit_estimate", report.limit_estimate);
    out.set("satisfied", report.satisfied);
    out.set("unit_terms", report.unit_terms);
    out.violation = report.satisfied == Satisfied::No;
    out.report(&report);
    Ok(out)
}

pub fn similarity_scan(cfg: &RunConfig) -> Result<CommandOutput> {
    let s = &cfg.similarity;
    let frame = s.frame.build(cfg.seed, &cfg.ensemble)?;
    let phi = s.candidate_scale.map(|c| phi_from_frame_scaled(&frame, c));
    let density = s.density.map(|d| d.build()).transpose()?;
    let report = check_criterion(&frame, phi.as_ref(), density.as_ref(), &cfg.criterion());
    let mut out = CommandOutput::new(&["re", "im", "density", "phi", "laplacian_phi", "margin", "hs_derivative_sq"]);
    for r in &report.records {
        out.row(vec![
            r.point.re.into(),
            r.point.im.into(),
            r.density.into(),
            r.phi.into(),
            r.laplacian_phi.into(),
            r.margin.into(),
            r.hs_derivative_sq.into(),
        ]);
    }
    out.set("verdict", &report.verdict);
    out.set("min_margin", report.min_margin);
    out.set("violation_count", report.violation_count);
    out.violation = matches!(report.verdict, Verdict::Violated { .. });
    out.report(&report);
    Ok(out)
}

/// One line of the identity suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name: name.into(),
        samples,
        max_residual,
        tolerance,
        passed: max_residual <= tolerance,
    }
}

pub fn identity_suite(cfg: &RunConfig) -> Result<CommandOutput> {
    let t = &cfg.tolerances;
    let kernel = kernel_rows(cfg)?;
    let curvature = curvature_rows(cfg)?;
    let thm32 = thm32_records(cfg)?;
    let frames = frame_ensemble(cfg.seed, &cfg.ensemble)?;
    let grid = cfg.grid.points()?;
    let laplace = frames
        .iter()
        .map(|f| verify_laplace_identity(f, &grid, &cfg.step).map(|r| r.relative_residual))
        .collect::<Result<Vec<_>>>()?;

    let checks = vec![
        check(
            "kernel-closed-forms",
            kernel.len(),
            max_of(kernel.iter().map(|r| {
                r.kernel_residual
                    .max(r.derivative_residual)
                    .max(r.inner_residual)
                    .max(r.combination_residual)
            })),
            t.kernel,
        ),
        check(
            "curvature-finite-difference",
            curvature.len(),
            max_of(curvature.iter().map(|r| r.fd_residual)),
            t.curvature_fd,
        ),
        check(
            "curvature-laplacian-route",
            curvature.len(),
            max_of(curvature.iter().map(|r| r.route_residual)),
            t.curvature_route,
        ),
        check(
            "bundle-additivity",
            thm32.len(),
            max_of(thm32.iter().map(|r| r.report.relative_additivity_residual())),
            t.additivity,
        ),
        check(
            "dpi2-formula",
            thm32.len(),
            max_of(thm32.iter().map(|r| r.report.dpi2_fd_residual)),
            t.dpi2,
        ),
        check(
            "dpi2-orthogonality",
            thm32.len(),
            max_of(
                thm32
                    .iter()
                    .map(|r| r.report.orthogonality_residual.max(r.report.reproduction_residual)),
            ),
            t.additivity,
        ),
        check("laplace-identity", laplace.len(), max_of(laplace.into_iter()), t.laplace),
    ];

    let mut out = CommandOutput::new(&["name", "samples", "max_residual", "tolerance", "passed"]);
    for c in &checks {
        out.report(c);
        out.row(vec![
            c.name.as_str().into(),
            c.samples.into(),
            c.max_residual.into(),
            c.tolerance.into(),
            (if c.passed { "true" } else { "false" }).into(),
        ]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    out.set("failed", &failed);
    out.violation = !failed.is_empty();
    Ok(out)
}

