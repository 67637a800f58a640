//! Eigenvector-bundle projections and their derivatives.
//!
//! `Π₁(λ)` projects the truncated Dirichlet space onto the line through
//! `k_λ̄`, `Π₂(λ)` projects the coefficient space `E` onto the column span of
//! a polynomial frame `F(λ)`, and the bundle projection of the restricted
//! backward shift is the Kronecker product `Π₁ ⊗ Π₂` (ambient index
//! `n·dim E + a`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeff_space::embed_kernel;
use crate::error::{Error, Result};
use crate::exec;
use crate::wirtinger::{d_dlambda, DiskPoint, StepSpec};
use crate::DEFAULT_R_MAX;

pub type CMatrix = DMatrix<Complex64>;

/// Condition number of `F*F` above which `Π₂` is built from a QR factor.
pub const QR_SWITCH_CONDITION: f64 = 1e6;

/// Squared Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

/// Operator norm (largest singular value).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// A Hermitian idempotent matrix together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub entries: CMatrix,
    pub rank: usize,
}

/// Measured departures from the projection laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDefects {
    pub hermitian: f64,
    pub idempotent: f64,
    pub trace: f64,
}

impl ProjectionDefects {
    /// Hermitian to 1e-12, idempotent to 1e-10 (both relative), trace to 1e-8.
    pub fn within_tolerance(&self) -> bool {
        self.hermitian <= 1e-12 && self.idempotent <= 1e-10 && self.trace <= 1e-8
    }
}

impl ProjectionMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn defects(&self) -> ProjectionDefects {
        let p = &self.entries;
        let scale = p.norm().max(f64::MIN_POSITIVE);
        ProjectionDefects {
            hermitian: (p - p.adjoint()).norm() / scale,
            idempotent: (p * p - p).norm() / scale,
            trace: (p.trace().re - self.rank as f64).abs(),
        }
    }
}

/// Matrix-valued polynomial `Σ_j C_j λ^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidFrame("no coefficient matrices".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidFrame("empty coefficient matrix".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| c.shape() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient of shape {:?} in a polynomial of shape {:?}",
                bad.shape(),
                shape
            )));
        }
        Ok(MatrixPolynomial { coeffs })
    }

    pub fn constant(c: CMatrix) -> Result<Self> {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn eval(&self, lambda: Complex64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.nrows(), self.ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * lambda + c;
        }
        acc
    }

    /// `F'(λ)` from the differentiated coefficients.
    pub fn derivative(&self, lambda: Complex64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.nrows(), self.ncols());
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * lambda + c * Complex64::new(j as f64, 0.0);
        }
        acc
    }

    /// `U·F(λ)` for a constant matrix `U`.
    pub fn left_mul(&self, u: &CMatrix) -> Result<Self> {
        if u.ncols() != self.nrows() {
            return Err(Error::DimensionMismatch("left factor".into()));
        }
        Self::new(self.coeffs.iter().map(|c| u * c).collect())
    }

    /// Pointwise product `F(λ)·G(λ)`.
    pub fn mul(&self, g: &MatrixPolynomial) -> Result<Self> {
        if self.ncols() != g.nrows() {
            return Err(Error::DimensionMismatch("polynomial product".into()));
        }
        let mut out = vec![CMatrix::zeros(self.nrows(), g.ncols()); self.coeffs.len() + g.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in g.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }
}

/// Polar grid used to validate frame bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameGrid {
    pub radii: usize,
    pub angles: usize,
    pub r_max: f64,
}

impl Default for FrameGrid {
    fn default() -> Self {
        FrameGrid {
            radii: 24,
            angles: 64,
            r_max: DEFAULT_R_MAX,
        }
    }
}

impl FrameGrid {
    pub fn points(&self) -> Vec<DiskPoint> {
        let mut pts = vec![DiskPoint::ORIGIN];
        for i in 1..=self.radii {
            let r = self.r_max * i as f64 / self.radii as f64;
            for j in 0..self.angles {
                let theta = std::f64::consts::TAU * j as f64 / self.angles as f64;
                pts.push(DiskPoint::polar(r, theta).expect("grid radius below one"));
            }
        }
        pts
    }
}

/// Relative widening applied to the observed frame bounds.
pub const FRAME_BOUND_MARGIN: f64 = 0.1;

/// A polynomial frame `F(λ): Cⁿ → E` with validated bounds
/// `lower·I ≤ F*F ≤ upper·I` on a disk grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFrame {
    poly: MatrixPolynomial,
    lower_bound: f64,
    upper_bound: f64,
    eigen_floor: f64,
}

impl PolynomialFrame {
    pub fn new(poly: MatrixPolynomial) -> Result<Self> {
        Self::with_grid(poly, &FrameGrid::default(), 1e-8)
    }

    pub fn with_grid(poly: MatrixPolynomial, grid: &FrameGrid, eigen_floor: f64) -> Result<Self> {
        if poly.ncols() > poly.nrows() {
            return Err(Error::InvalidFrame(format!(
                "rank {} exceeds ambient dimension {}",
                poly.ncols(),
                poly.nrows()
            )));
        }
        let pts = grid.points();
        let extremes = exec::try_map(&pts, |p| {
            let f = poly.eval(p.z());
            let (lo, hi) = gram_extremes(&f);
            if lo < eigen_floor {
                return Err(Error::DegenerateFrame {
                    re: p.re,
                    im: p.im,
                    min_eigenvalue: lo,
                    floor: eigen_floor,
                });
            }
            Ok((lo, hi))
        })?;
        let lo = extremes.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = extremes.iter().map(|e| e.1).fold(0.0, f64::max);
        Ok(PolynomialFrame {
            poly,
            lower_bound: lo * (1.0 - FRAME_BOUND_MARGIN),
            upper_bound: hi * (1.0 + FRAME_BOUND_MARGIN),
            eigen_floor,
        })
    }

    pub fn poly(&self) -> &MatrixPolynomial {
        &self.poly
    }

    pub fn rank(&self) -> usize {
        self.poly.ncols()
    }

    pub fn dim_e(&self) -> usize {
        self.poly.nrows()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    /// The symmetric constant `c` with `c⁻¹ I ≤ F*F ≤ c I`.
    pub fn frame_constant(&self) -> f64 {
        self.upper_bound.max(1.0 / self.lower_bound)
    }

    pub fn eval(&self, p: DiskPoint) -> CMatrix {
        self.poly.eval(p.z())
    }

    pub fn derivative(&self, p: DiskPoint) -> CMatrix {
        self.poly.derivative(p.z())
    }

    pub fn constant_identity(n: usize) -> Result<Self> {
        Self::new(MatrixPolynomial::constant(identity(n))?)
    }

    /// `F(λ) = (1, λ)ᵀ`.
    pub fn line() -> Result<Self> {
        let c0 = CMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let c1 = CMatrix::from_column_slice(2, 1, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        Self::new(MatrixPolynomial::new(vec![c0, c1])?)
    }

    /// `F(λ) = I + ε λ E₀₁` on `C²`.
    pub fn perturbed_identity(eps: f64) -> Result<Self> {
        let mut c1 = CMatrix::zeros(2, 2);
        c1[(0, 1)] = Complex64::new(eps, 0.0);
        Self::new(MatrixPolynomial::new(vec![identity(2), c1])?)
    }
}

fn gram_extremes(f: &CMatrix) -> (f64, f64) {
    let g = f.adjoint() * f;
    let ev = g.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// `Π₂ = F(F*F)⁻¹F*`, through QR when `F*F` is badly conditioned.
pub fn frame_projection(frame: &PolynomialFrame, p: DiskPoint) -> Result<ProjectionMatrix> {
    let f = frame.eval(p);
    Ok(frame_projection_parts(&f, frame.eigen_floor, p)?.0)
}

/// Returns `Π₂` and `(F*F)⁻¹F*`.
fn frame_projection_parts(f: &CMatrix, floor: f64, p: DiskPoint) -> Result<(ProjectionMatrix, CMatrix)> {
    let rank = f.ncols();
    let fh = f.adjoint();
    let g = &fh * f;
    let ev = g.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if !(lo >= floor) {
        return Err(Error::DegenerateFrame {
            re: p.re,
            im: p.im,
            min_eigenvalue: lo,
            floor,
        });
    }
    let (proj, pinv) = if hi / lo <= QR_SWITCH_CONDITION {
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::InvalidFrame(format!("F*F not positive definite at {p}")))?;
        let pinv = chol.solve(&fh);
        (f * &pinv, pinv)
    } else {
        let qr = f.clone().qr();
        let q = qr.q();
        let r = qr.r();
        // F = QR with R invertible: (F*F)⁻¹F* = R⁻¹Q*
        let pinv = r
            .solve_upper_triangular(&q.adjoint())
            .ok_or_else(|| Error::InvalidFrame(format!("singular QR factor at {p}")))?;
        (&q * q.adjoint(), pinv)
    };
    let herm = (&proj + proj.adjoint()) * Complex64::new(0.5, 0.0);
    Ok((ProjectionMatrix { entries: herm, rank }, pinv))
}

/// `∂Π₂/∂λ = (I − Π₂) F' (F*F)⁻¹ F*`, exact in λ.
pub fn dpi2_analytic(frame: &PolynomialFrame, p: DiskPoint) -> Result<CMatrix> {
    let f = frame.eval(p);
    let (proj, pinv) = frame_projection_parts(&f, frame.eigen_floor, p)?;
    let dim = frame.dim_e();
    Ok((identity(dim) - proj.entries) * frame.derivative(p) * pinv)
}

/// Rank-one projection onto the line through `k_λ̄` in the truncated space.
pub fn project_rank1(p: DiskPoint, truncation: usize) -> Result<ProjectionMatrix> {
    let v = embed_kernel(p, truncation, DEFAULT_R_MAX)?.vector.into_coords();
    let norm_sq = v.norm_squared();
    let entries = &v * v.adjoint() / Complex64::new(norm_sq, 0.0);
    Ok(ProjectionMatrix { entries, rank: 1 })
}

/// `P1 ⊗ P2`.
pub fn tensor_projection(p1: &ProjectionMatrix, p2: &ProjectionMatrix) -> ProjectionMatrix {
    ProjectionMatrix {
        entries: p1.entries.kronecker(&p2.entries),
        rank: p1.rank * p2.rank,
    }
}

/// `‖∂Π₁/∂λ‖²_HS = −(log(1−x) + x) / (log(1−x)(1−x))²` with `x = |λ|²`;
/// limit 1/2 at the origin.
pub fn curvature_pi1_closed(p: DiskPoint) -> f64 {
    let x = p.abs_sq();
    if x == 0.0 {
        return 0.5;
    }
    let l = (-x).ln_1p();
    let denom = l * (1.0 - x);
    -crate::kernel::log1m_plus_x(x) / (denom * denom)
}

/// Finite-difference `∂Π₁/∂λ` of the full truncated matrix.
pub fn dpi1_fd(p: DiskPoint, truncation: usize, step: &StepSpec) -> Result<CMatrix> {
    d_dlambda(|q| project_rank1(q, truncation).map(|m| m.entries), p, step)
}

/// Finite-difference `∂Π₂/∂λ`.
pub fn dpi2_fd(frame: &PolynomialFrame, p: DiskPoint, step: &StepSpec) -> Result<CMatrix> {
    d_dlambda(|q| frame_projection(frame, q).map(|m| m.entries), p, step)
}

/// Finite-difference `∂(Π₁ ⊗ Π₂)/∂λ`.
pub fn dpi_tensor_fd(frame: &PolynomialFrame, p: DiskPoint, truncation: usize, step: &StepSpec) -> Result<CMatrix> {
    d_dlambda(
        |q| {
            let p1 = project_rank1(q, truncation)?;
            let p2 = frame_projection(frame, q)?;
            Ok(tensor_projection(&p1, &p2).entries)
        },
        p,
        step,
    )
}

/// Settings for [`thm32_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BundleConfig {
    /// Truncation of the Dirichlet factor in the tensor ambient space.
    pub truncation: usize,
    pub step: StepSpec,
    /// Relative tolerance for the projection-derivative identities.
    pub identity_tolerance: f64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig {
            truncation: 120,
            step: StepSpec {
                base_step: 1e-4,
                boundary_scaling: true,
            },
            identity_tolerance: 1e-6,
        }
    }
}

/// HS norms of the projection derivatives at one point and the additivity
/// residual `|‖∂Π‖² − n‖∂Π₁‖² − ‖∂Π₂‖²|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDerivativeReport {
    pub point: DiskPoint,
    pub rank: usize,
    pub hs_dpi1_sq: f64,
    pub hs_dpi2_sq: f64,
    pub hs_dpi_sq: f64,
    pub additivity_residual: f64,
    /// Residual against `‖∂Π₁‖² + ‖∂Π₂‖²` without the rank factor.
    pub alt_additivity_residual: f64,
    /// `‖Π₂ ∂Π₂‖` for the finite-difference derivative.
    pub orthogonality_residual: f64,
    /// `‖(I − Π₂) ∂Π₂ Π₂ − ∂Π₂‖` for the finite-difference derivative.
    pub reproduction_residual: f64,
    /// Relative gap between the analytic and finite-difference `∂Π₂`.
    pub dpi2_fd_residual: f64,
    pub violations: Vec<String>,
}

impl BundleDerivativeReport {
    pub fn relative_additivity_residual(&self) -> f64 {
        self.additivity_residual / self.hs_dpi_sq.max(f64::MIN_POSITIVE)
    }
}

pub fn thm32_report(frame: &PolynomialFrame, p: DiskPoint, cfg: &BundleConfig) -> Result<BundleDerivativeReport> {
    let n = frame.rank();
    let hs1 = hs_norm_sq(&dpi1_fd(p, cfg.truncation, &cfg.step)?);
    let dpi2 = dpi2_analytic(frame, p)?;
    let hs2 = hs_norm_sq(&dpi2);
    let hs = hs_norm_sq(&dpi_tensor_fd(frame, p, cfg.truncation, &cfg.step)?);

    let p2 = frame_projection(frame, p)?.entries;
    let fd2 = dpi2_fd(frame, p, &cfg.step)?;
    let scale = fd2.norm().max(1.0);
    let orth = (&p2 * &fd2).norm();
    let repro = ((identity(frame.dim_e()) - &p2) * &fd2 * &p2 - &fd2).norm();
    let dpi2_fd_residual = (&fd2 - &dpi2).norm() / dpi2.norm().max(f64::MIN_POSITIVE);

    let mut violations = Vec::new();
    if orth > cfg.identity_tolerance * scale {
        violations.push(format!("Π₂·∂Π₂ = {orth:e} at {p}"));
    }
    if repro > cfg.identity_tolerance * scale {
        violations.push(format!("(I−Π₂)∂Π₂Π₂ − ∂Π₂ = {repro:e} at {p}"));
    }
    Ok(BundleDerivativeReport {
        point: p,
        rank: n,
        hs_dpi1_sq: hs1,
        hs_dpi2_sq: hs2,
        hs_dpi_sq: hs,
        additivity_residual: (hs - n as f64 * hs1 - hs2).abs(),
        alt_additivity_residual: (hs - hs1 - hs2).abs(),
        orthogonality_residual: orth,
        reproduction_residual: repro,
        dpi2_fd_residual,
        violations,
    })
}

/// Shape of a random polynomial frame ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub count: usize,
    pub max_rank: usize,
    pub max_dim: usize,
    pub max_degree: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            count: 20,
            max_rank: 3,
            max_dim: 6,
            max_degree: 3,
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    })
}

/// Random frame: orthonormal constant term plus damped higher coefficients,
/// resampled until the frame bounds validate.
pub fn random_frame(rng: &mut ChaCha8Rng, rank: usize, dim_e: usize, degree: usize) -> Result<PolynomialFrame> {
    if rank == 0 || rank > dim_e {
        return Err(Error::InvalidFrame(format!("need 1 ≤ rank ≤ dim E, got {rank} and {dim_e}")));
    }
    let mut scale = 0.6 / (dim_e as f64).sqrt();
    for _ in 0..32 {
        let c0 = random_matrix(rng, dim_e, rank, 1.0).qr().q();
        let mut coeffs = vec![c0];
        for j in 1..=degree {
            coeffs.push(random_matrix(rng, dim_e, rank, scale / j as f64));
        }
        let poly = MatrixPolynomial::new(coeffs)?;
        match PolynomialFrame::with_grid(poly, &FrameGrid::default(), 1e-4) {
            Ok(frame) if frame.lower_bound() > 1e-2 => return Ok(frame),
            _ => scale *= 0.8,
        }
    }
    Err(Error::InvalidFrame("could not draw a well-conditioned frame".into()))
}

/// Seeded ensemble with ranks cycling through `1..=max_rank` and `rank < dim E`.
pub fn frame_ensemble(seed: u64, spec: &EnsembleSpec) -> Result<Vec<PolynomialFrame>> {
    if spec.max_rank == 0 || spec.max_dim <= spec.max_rank || spec.max_degree == 0 {
        return Err(Error::InvalidParameter {
            field: "ensemble".into(),
            message: "need max_rank ≥ 1, max_dim > max_rank and max_degree ≥ 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.count)
        .map(|i| {
            let rank = 1 + i % spec.max_rank;
            let dim_e = rng.gen_range(rank + 1..=spec.max_dim);
            let degree = 1 + (i / spec.max_rank) % spec.max_degree;
            random_frame(&mut rng, rank, dim_e, degree)
        })
        .collect()
}

/// `count` points on a golden-angle spiral with radii `r·k/count`.
pub fn spiral_points(count: usize, r: f64) -> Vec<DiskPoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (1..=count)
        .map(|k| DiskPoint::polar(r * k as f64 / count as f64, golden * k as f64).expect("r < 1"))
        .collect()
}
