//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after printing every line. With `ACCEPTANCE_STRICT=1` any FAIL
//! makes the process exit 1.

use std::process::Command;
use std::time::Instant;

use dirichlet_shift::bundle::{
    curvature_pi1_closed, dpi1_fd, frame_ensemble, hs_norm_sq, spiral_points, thm32_report, BundleConfig, EnsembleSpec,
};
use dirichlet_shift::coeff_space::{embed_kernel, kernel_tail_bound, truncated_backward_shift};
use dirichlet_shift::green::{boundedness_probe, green_potential, BoundedVerdict, DensityField, DiskGrid, ProbeSpec, QuadratureSpec};
use dirichlet_shift::kernel;
use dirichlet_shift::model::{
    eigen_space, eigenvalues, match_distance, mueller_b_exact, mueller_sum, operator_norm, restrict_to_kernel_span,
    MuellerSpec, WeightSequence,
};
use dirichlet_shift::similarity::verify_laplace_identity;
use dirichlet_shift::wirtinger::laplacian;
use dirichlet_shift::{DiskPoint, StepSpec};
use nalgebra::DVector;
use num_complex::Complex64;
use num_rational::Rational64;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            detail,
            notes: Vec::new(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// Independent series oracles: plain partial sums with a fixed term count.
const TERMS: usize = 20_000;

fn oracle_kernel_norm_sq(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for n in 0..TERMS {
        sum += pow / (n + 1) as f64;
        pow *= x;
        if pow == 0.0 {
            break;
        }
    }
    sum
}

fn oracle_derivative_norm_sq(x: f64) -> f64 {
    // Σ n² x^{n−1} / (n+1)
    let mut sum = 0.0;
    let mut pow = 1.0;
    for n in 1..TERMS {
        let nf = n as f64;
        sum += nf * nf * pow / (nf + 1.0);
        pow *= x;
        if pow == 0.0 {
            break;
        }
    }
    sum
}

fn oracle_inner(lambda: Complex64) -> Complex64 {
    // coordinatewise pairing: Σ n λ^{n−1} conj(λⁿ)/(n+1) = λ̄ Σ n xⁿ⁻¹/(n+1)
    let mut sum = c(0.0, 0.0);
    let x = lambda.norm_sqr();
    let mut pow = 1.0;
    for n in 1..TERMS {
        let nf = n as f64;
        sum += lambda.conj() * (nf * pow / (nf + 1.0));
        pow *= x;
        if pow == 0.0 {
            break;
        }
    }
    sum
}

fn oracle_curvature(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let l = (-x).ln_1p();
    // −(L + x) through its series to avoid cancellation at small x
    let mut m = 0.0;
    let mut pow = x * x;
    for k in 2..400 {
        m += pow / k as f64;
        pow *= x;
    }
    m / (l * (1.0 - x)).powi(2)
}

fn criterion_1() -> Outcome {
    let pts = spiral_points(50, 0.9);
    let mut worst = [0.0f64; 4];
    for p in &pts {
        let x = p.abs_sq();
        let kn = oracle_kernel_norm_sq(x);
        let dn = oracle_derivative_norm_sq(x);
        let inner = oracle_inner(p.z());
        let l = (-x).ln_1p();
        let a = l + x / (1.0 - x);
        let b = p.z() * l;
        let comb = a * a * kn + b.norm_sqr() * dn + 2.0 * (b * a * inner).re;
        worst[0] = worst[0].max(rel(kernel::kernel_norm_sq(*p), kn));
        worst[1] = worst[1].max(rel(kernel::derivative_kernel_norm_sq(*p), dn));
        worst[2] = worst[2].max((kernel::kernel_deriv_inner(*p) - inner).norm() / inner.norm());
        worst[3] = worst[3].max(rel(kernel::combination_norm_sq(*p), comb));
    }
    let half = DiskPoint::real(0.5f64.sqrt());
    let anchors = [
        ("kernel_norm_sq(|λ|²=0.5)", kernel::kernel_norm_sq(half), 1.3862944, oracle_kernel_norm_sq(0.5)),
        (
            "derivative_kernel_norm_sq(|λ|²=0.5)",
            kernel::derivative_kernel_norm_sq(half),
            2.7725887,
            oracle_derivative_norm_sq(0.5),
        ),
        (
            "kernel_deriv_inner(λ=0.5)",
            kernel::kernel_deriv_inner(DiskPoint::real(0.5)).re,
            0.3652087,
            oracle_inner(c(0.5, 0.0)).re,
        ),
    ];
    let mut pass = worst.iter().all(|w| *w <= 1e-9);
    let mut notes = Vec::new();
    for (name, value, quoted, oracle) in anchors {
        let agrees = rel(value, oracle) <= 1e-9;
        pass &= agrees;
        notes.push(format!(
            "{name} = {value:.10} (series oracle {oracle:.10}, quoted {quoted}, |value − quoted| = {:.1e})",
            (value - quoted).abs()
        ));
    }
    let mut o = Outcome::new(
        pass,
        format!(
            "max rel residuals: norm {:.1e}, derivative {:.1e}, inner {:.1e}, combination {:.1e} (tol 1e-9, 50 points)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
    o.notes = notes;
    o
}

fn criterion_2() -> Outcome {
    let step = StepSpec::default();
    let mut pts = vec![DiskPoint::ORIGIN];
    pts.extend(spiral_points(99, 0.7));
    let mut worst = 0.0f64;
    let mut closed = 0.0f64;
    for p in &pts {
        let fd = hs_norm_sq(&dpi1_fd(*p, 400, &step).unwrap());
        let exact = oracle_curvature(p.abs_sq());
        closed = closed.max(rel(curvature_pi1_closed(*p), exact));
        worst = worst.max(rel(fd, exact));
    }
    let tiny = DiskPoint::real(1e-3);
    let near_zero = hs_norm_sq(&dpi1_fd(tiny, 400, &step).unwrap());
    let origin = hs_norm_sq(&dpi1_fd(DiskPoint::ORIGIN, 400, &step).unwrap());
    let zero_err = (near_zero - 0.5).abs().max((origin - 0.5).abs());
    Outcome::new(
        worst <= 1e-4 && zero_err <= 1e-4 && closed <= 1e-12,
        format!(
            "max rel FD residual {worst:.2e} over 100 points |λ| ≤ 0.7 (tol 1e-4); |value − 0.5| near 0: {zero_err:.1e}; closed form vs oracle {closed:.1e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let step = StepSpec::default();
    let mut worst = 0.0f64;
    for p in spiral_points(100, 0.8) {
        let route = laplacian(|q| Ok(oracle_kernel_norm_sq(q.abs_sq()).ln()), p, &step).unwrap();
        worst = worst.max(rel(route, oracle_curvature(p.abs_sq())));
    }
    Outcome::new(
        worst <= 1e-5,
        format!("max rel |Δ log‖k‖² − closed form| = {worst:.2e} over 100 points |λ| ≤ 0.8 (tol 1e-5)"),
    )
}

struct EnsembleRun {
    worst_additivity: f64,
    alt_strictly_worse: bool,
    rank2_cases: usize,
    worst_dpi2: f64,
    reports: usize,
}

fn ensemble_run() -> EnsembleRun {
    let frames = frame_ensemble(7, &EnsembleSpec::default()).unwrap();
    let cfg = BundleConfig::default();
    let pts = spiral_points(10, 0.6);
    let mut run = EnsembleRun {
        worst_additivity: 0.0,
        alt_strictly_worse: true,
        rank2_cases: 0,
        worst_dpi2: 0.0,
        reports: 0,
    };
    for f in &frames {
        for p in &pts {
            let r = thm32_report(f, *p, &cfg).unwrap();
            run.reports += 1;
            run.worst_additivity = run.worst_additivity.max(r.relative_additivity_residual());
            run.worst_dpi2 = run.worst_dpi2.max(r.dpi2_fd_residual);
            if r.rank >= 2 {
                run.rank2_cases += 1;
                run.alt_strictly_worse &= r.alt_additivity_residual > r.additivity_residual;
            }
        }
    }
    run
}

fn criterion_4(run: &EnsembleRun) -> Outcome {
    Outcome::new(
        run.worst_additivity <= 1e-6 && run.alt_strictly_worse && run.rank2_cases > 0,
        format!(
            "max rel additivity residual {:.2e} over {} reports (tol 1e-6); alternative worse in all {} rank ≥ 2 cases: {}",
            run.worst_additivity, run.reports, run.rank2_cases, run.alt_strictly_worse
        ),
    )
}

fn criterion_5(run: &EnsembleRun) -> Outcome {
    Outcome::new(
        run.worst_dpi2 <= 1e-6,
        format!("max rel |∂Π₂ analytic − FD| = {:.2e} over {} reports (tol 1e-6)", run.worst_dpi2, run.reports),
    )
}

fn criterion_6() -> Outcome {
    let frames = frame_ensemble(7, &EnsembleSpec::default()).unwrap();
    let grid = DiskGrid::default().points().unwrap();
    let step = StepSpec::default();
    let worst = frames
        .iter()
        .map(|f| verify_laplace_identity(f, &grid, &step).unwrap().relative_residual)
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-5,
        format!("max rel Laplace identity residual {worst:.2e} over {} frames × {} points (tol 1e-5)", frames.len(), grid.len()),
    )
}

fn criterion_7() -> Outcome {
    let q = QuadratureSpec::default();
    let probe = ProbeSpec::default();
    let one = DensityField::constant(1.0).unwrap();
    let g1 = green_potential(DiskPoint::ORIGIN, &one, &q).unwrap().value;
    let g2 = green_potential(DiskPoint::ORIGIN, &DensityField::abs_sq(), &q).unwrap().value;
    let hyp = boundedness_probe(&DensityField::hyperbolic(), &probe, &q).unwrap();
    let flat = boundedness_probe(&one, &probe, &q).unwrap();
    let e1 = (g1 + 1.0).abs();
    let e2 = (g2 + 0.25).abs();
    Outcome::new(
        e1 <= 1e-3
            && e2 <= 1e-3
            && hyp.bounded_verdict == BoundedVerdict::GrowthDetected
            && flat.bounded_verdict == BoundedVerdict::BoundedOnScan,
        format!(
            "G₁(0) = {g1:.7} (err {e1:.1e}), G_|z|²(0) = {g2:.7} (err {e2:.1e}), tol 1e-3; hyperbolic slope {:.3} → {:?}, constant slope {:.3} → {:?}",
            hyp.growth_fit.slope, hyp.bounded_verdict, flat.growth_fit.slope, flat.bounded_verdict
        ),
    )
}

fn criterion_8() -> Outcome {
    let d = WeightSequence::dirichlet();
    let exact_ok = (0..=30).all(|n| mueller_b_exact(&d, n).unwrap() == Some(Rational64::new(1, n as i64 + 1)));

    // power-sum oracle: Σ_{n≥1} ‖Tⁿ‖² / (n+1) from explicit matrix powers
    let t = truncated_backward_shift(50).unwrap() * c(0.9, 0.0);
    let report = mueller_sum(&t, &d, &MuellerSpec::default()).unwrap();
    let mut pow = t.clone();
    let mut oracle = 0.0;
    let mut worst = 0.0f64;
    for (i, s) in report.partial_sums.iter().enumerate() {
        let n = i + 1;
        let norm = pow.clone().singular_values().max();
        oracle += norm * norm / (n + 1) as f64;
        worst = worst.max((s - oracle).abs());
        pow = &pow * &t;
    }
    let tail_norm = operator_norm(&pow);

    let unit = mueller_sum(&truncated_backward_shift(50).unwrap(), &d, &MuellerSpec::default()).unwrap();
    let unit_ok = unit.unit_terms == 49 && (unit.limit_estimate - 49.0).abs() < 1e-8;

    let mut o = Outcome::new(
        exact_ok && worst <= 1e-10 && tail_norm == 0.0 && unit_ok,
        format!(
            "bₙ = 1/(n+1) exact for n ≤ 30: {exact_ok}; max |partial sum − power-sum oracle| = {worst:.1e} over {} terms (tol 1e-10)",
            report.partial_sums.len()
        ),
    );
    o.notes.push(format!(
        "scale 0.9: limit {:.12}, satisfied {:?}; scale 1: {} unit terms, partial sum {:.9} (grows by 1 per term until the truncation)",
        report.limit_estimate, report.satisfied, unit.unit_terms, unit.limit_estimate
    ));
    o
}

fn criterion_9() -> Outcome {
    let lam = DiskPoint::real(0.5);
    let mut residuals = Vec::new();
    let mut aligned = true;
    let mut notes = Vec::new();
    for n in [50usize, 100, 200] {
        let t = truncated_backward_shift(n).unwrap();
        let e = eigen_space(&t, lam.z(), 1e-10).unwrap();
        let k = embed_kernel(lam, n, 0.95).unwrap();
        let kn = k.vector.coords() / c(k.vector.coords().norm(), 0.0);
        let overlap = e.basis.column(0).dotc(&kn).norm();
        let misalignment = (1.0 - overlap * overlap).max(0.0).sqrt();
        let bound = kernel_tail_bound(lam, n).sqrt();
        // the rounding floor of a unit vector compared entrywise
        let floor = 8.0 * f64::EPSILON * (n as f64).sqrt();
        aligned &= e.dimension == 1 && misalignment <= bound + floor;
        notes.push(format!(
            "N={n}: residual {:.2e}, analytic |λ|ᴺ/√N = {:.1e}, misalignment {misalignment:.1e} (tail bound {bound:.1e}, rounding floor {floor:.1e})",
            e.residual,
            lam.abs().powi(n as i32) / (n as f64).sqrt()
        ));
        residuals.push(e.residual);
    }
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);

    let mu1 = DiskPoint::new(0.3, -0.2).unwrap();
    let mu2 = DiskPoint::new(-0.4, 0.1).unwrap();
    let dirs = [DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])];
    let span = restrict_to_kernel_span(&[mu1, mu2], &dirs, 200, 0.95).unwrap();
    let dist = match_distance(&eigenvalues(&span.matrix), &[mu1.z(), mu2.z()]);
    let restricted = dist <= 1e-10 && span.matrix.shape() == (2, 2);
    notes.push(format!(
        "restriction to two kernel samples: eigenvalue distance {dist:.1e} (tol 1e-10), invariance residual {:.1e}",
        span.invariance_residual
    ));
    if !monotone {
        notes.push(
            "residuals sit at the double-precision floor for every N, so they cannot decrease with N".into(),
        );
    }
    let mut o = Outcome::new(
        monotone && aligned && restricted,
        format!(
            "residual decreasing over N ∈ {{50,100,200}}: {monotone}; aligned with kernel: {aligned}; restriction eigenvalues exact: {restricted}"
        ),
    );
    o.notes = notes;
    o
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 11\nformat = \"json\"\n\n[similarity.frame]\nkind = \"random\"\nindex = 2\n",
    )
    .unwrap();
    let out = dir.path().join("scan.json");
    let run = || {
        let _ = std::fs::remove_file(&out);
        let status = Command::new(env!("CARGO_BIN_EXE_dshift"))
            .arg("similarity-scan")
            .arg("--config")
            .arg(&cfg)
            .arg("--output")
            .arg(&out)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        (status.code(), std::fs::read(&out).unwrap_or_default())
    };
    let (s1, a) = run();
    let (s2, b) = run();
    let ok_status = matches!(s1, Some(0) | Some(1)) && s1 == s2;
    let parsed = serde_json::from_slice::<serde_json::Value>(&a).is_ok();
    Outcome::new(
        ok_status && parsed && !a.is_empty() && a == b,
        format!("two similarity-scan runs, seed 11: {} bytes each, identical: {}, exit codes {:?}/{:?}", a.len(), a == b, s1, s2),
    )
}

fn main() {
    let start = Instant::now();
    let run = ensemble_run();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "kernel closed forms vs series", criterion_1()),
        (2, "rank-one term by finite differences", criterion_2()),
        (3, "curvature by the Laplacian route", criterion_3()),
        (4, "additivity with multiplicity", criterion_4(&run)),
        (5, "∂Π₂ formula", criterion_5(&run)),
        (6, "Laplace identity", criterion_6()),
        (7, "Green potential anchors and growth", criterion_7()),
        (8, "Müller quantities", criterion_8()),
        (9, "eigen-structure", criterion_9()),
        (10, "pipeline determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (index, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} criterion {index:>2} ({name}): {}", o.detail);
        for note in &o.notes {
            println!("        {note}");
        }
    }
    println!(
        "{} of {} criteria pass in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
