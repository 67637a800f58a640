//! Müller's model condition, operator-norm powers, numerical eigenspaces
//! and example operators built from the truncated backward shift.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{CheckedMul, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{op_norm, CMatrix};
use crate::coeff_space::{dirichlet_weight, embed_kernel, kernel_tail_bound};
use crate::error::{Error, Result};
use crate::wirtinger::DiskPoint;

type WeightRule = dyn Fn(usize) -> f64 + Send + Sync;
type ExactRule = dyn Fn(usize) -> Rational64 + Send + Sync;

/// Weights `αₙ > 0`, `n ≥ 1`, of a weighted backward shift.
#[derive(Clone)]
pub struct WeightSequence {
    label: String,
    rule: Arc<WeightRule>,
    exact_sq: Option<Arc<ExactRule>>,
    /// A known lower bound for `inf αₙ`, used by tail bounds.
    infimum: Option<f64>,
}

impl WeightSequence {
    pub fn new<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        WeightSequence {
            label: label.into(),
            rule: Arc::new(rule),
            exact_sq: None,
            infimum: None,
        }
    }

    /// Attaches the exact rational values of `αₙ²`.
    pub fn with_exact_squares<F>(mut self, rule: F) -> Self
    where
        F: Fn(usize) -> Rational64 + Send + Sync + 'static,
    {
        self.exact_sq = Some(Arc::new(rule));
        self
    }

    pub fn with_infimum(mut self, inf: f64) -> Self {
        self.infimum = Some(inf);
        self
    }

    /// `αₙ = √((n+1)/n)`.
    pub fn dirichlet() -> Self {
        Self::new("dirichlet", dirichlet_weight)
            .with_exact_squares(|n| Rational64::new(n as i64 + 1, n as i64))
            .with_infimum(1.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidWeights(format!("constant weight must be positive, got {c}")));
        }
        Ok(Self::new(format!("constant({c})"), move |_| c).with_infimum(c))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn alpha(&self, n: usize) -> f64 {
        (self.rule)(n)
    }

    pub fn infimum(&self) -> Option<f64> {
        self.infimum
    }

    /// Checks `α_j ≥ α_{j+1} > 0` for `1 ≤ j < terms`.
    pub fn validate_monotone(&self, terms: usize) -> Result<()> {
        let mut prev = self.alpha(1);
        if !(prev > 0.0 && prev.is_finite()) {
            return Err(Error::InvalidWeights(format!("α_1 = {prev} is not positive")));
        }
        for j in 2..=terms.max(1) {
            let a = self.alpha(j);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidWeights(format!("α_{j} = {a} is not positive")));
            }
            if a > prev {
                return Err(Error::InvalidWeights(format!(
                    "weights increase at n={j}: α_{} = {prev} < α_{j} = {a}",
                    j - 1
                )));
            }
            prev = a;
        }
        Ok(())
    }
}

impl fmt::Debug for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSequence")
            .field("label", &self.label)
            .field("exact", &self.exact_sq.is_some())
            .field("infimum", &self.infimum)
            .finish_non_exhaustive()
    }
}

/// `bₙ = α₁⁻² ⋯ αₙ⁻²`, accumulated in log space.
pub fn mueller_b(alpha: &WeightSequence, n: usize) -> f64 {
    let log: f64 = (1..=n).map(|k| alpha.alpha(k).ln()).sum();
    (-2.0 * log).exp()
}

/// `bₙ` in rational arithmetic, when the weights carry exact squares.
pub fn mueller_b_exact(alpha: &WeightSequence, n: usize) -> Result<Option<Rational64>> {
    let Some(sq) = &alpha.exact_sq else {
        return Ok(None);
    };
    let mut acc = Rational64::one();
    for k in 1..=n {
        acc = acc
            .checked_mul(&sq(k).recip())
            .ok_or_else(|| Error::InvalidWeights(format!("rational overflow in b_{k}")))?;
    }
    Ok(Some(acc))
}

/// Weighted backward shift on `N` coordinates: `S eₙ = αₙ eₙ₋₁`.
pub fn weighted_backward_shift(alpha: &WeightSequence, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = Complex64::new(alpha.alpha(k), 0.0);
    }
    m
}

/// How the terms of Müller's sum are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MuellerMode {
    /// `Σ ‖Tⁿ‖² bₙ`.
    #[default]
    PowerNorm,
    /// `Σ ‖T‖² bₙ` with the norm of `T` itself.
    Literal,
    /// `sup_{‖x‖=1} Σ bₙ ‖Tⁿx‖²`, the largest eigenvalue of `Σ bₙ Tⁿ*Tⁿ`.
    VectorWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuellerSpec {
    pub max_terms: usize,
    pub mode: MuellerMode,
    /// Stop once a term falls below this fraction of the running sum.
    pub relative_stop: f64,
}

impl Default for MuellerSpec {
    fn default() -> Self {
        MuellerSpec {
            max_terms: 2000,
            mode: MuellerMode::PowerNorm,
            relative_stop: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Satisfied {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckReport {
    pub weights: String,
    pub mode: MuellerMode,
    pub dimension: usize,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub limit_estimate: f64,
    /// Bound on the omitted terms; `None` if no bound is available.
    pub tail_bound: Option<f64>,
    pub satisfied: Satisfied,
    pub terms_used: usize,
    /// Terms equal to 1 within 1e-9; a long run of these signals a
    /// divergent series for the untruncated operator.
    pub unit_terms: usize,
}

/// Largest singular value; power iteration on `T*T` above 400 columns.
pub fn operator_norm(t: &CMatrix) -> f64 {
    if t.ncols() <= 400 {
        return op_norm(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(t.ncols(), |_, _| Complex64::new(rng.gen::<f64>() + 0.5, 0.0));
    x /= Complex64::new(x.norm(), 0.0);
    let mut est = 0.0;
    for _ in 0..10_000 {
        let y = t.adjoint() * (t * &x);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        x = y / Complex64::new(norm, 0.0);
        if (next - est).abs() <= 1e-12 * next {
            return next;
        }
        est = next;
    }
    est
}

fn largest_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().max()
}

/// Partial sums of Müller's series for `T` and the weights `α`.
pub fn mueller_sum(t: &CMatrix, alpha: &WeightSequence, spec: &MuellerSpec) -> Result<ModelCheckReport> {
    if t.nrows() != t.ncols() {
        return Err(Error::DimensionMismatch(format!("T is {}×{}", t.nrows(), t.ncols())));
    }
    if spec.max_terms == 0 {
        return Err(Error::InvalidParameter {
            field: "mueller.max_terms".into(),
            message: "must be positive".into(),
        });
    }
    alpha.validate_monotone(spec.max_terms)?;
    let dim = t.nrows();
    let norm_t = operator_norm(t);
    let weights_at_least_one = alpha.infimum().is_some_and(|a| a >= 1.0);
    let mut power = t.clone();
    let mut gram = CMatrix::zeros(dim, dim);
    let mut log_b = 0.0;
    // max_{0 ≤ j < n} ‖T^j‖
    let mut max_power_norm: f64 = 1.0;
    let (mut terms, mut partial_sums) = (Vec::new(), Vec::new());
    let mut sum = 0.0;
    let mut tail_bound = None;
    for n in 1..=spec.max_terms {
        log_b -= 2.0 * alpha.alpha(n).ln();
        let b = log_b.exp();
        let pn = operator_norm(&power);
        let term = match spec.mode {
            MuellerMode::PowerNorm => pn * pn * b,
            MuellerMode::Literal => norm_t * norm_t * b,
            MuellerMode::VectorWise => {
                gram += power.adjoint() * &power * Complex64::new(b, 0.0);
                (largest_hermitian_eigenvalue(&gram) - sum).max(0.0)
            }
        };
        sum += term;
        terms.push(term);
        partial_sums.push(sum);
        let vanished = pn == 0.0 && spec.mode != MuellerMode::Literal;
        if vanished {
            tail_bound = Some(0.0);
            break;
        }
        if term <= spec.relative_stop * sum && spec.mode != MuellerMode::Literal && weights_at_least_one && pn < 1.0 {
            // ‖T^{n+k}‖ ≤ ‖T^n‖^⌊(n+k)/n⌋ · max_{j<n} ‖T^j‖ and b is nonincreasing
            let q2 = pn * pn;
            let b_next = b / alpha.alpha(n + 1).powi(2);
            tail_bound = Some(b_next * n as f64 * max_power_norm.powi(2) * q2 / (1.0 - q2));
            break;
        }
        max_power_norm = max_power_norm.max(pn);
        power = &power * t;
    }
    let terms_used = terms.len();
    let unit_terms = terms.iter().filter(|x| (*x - 1.0).abs() <= 1e-9).count();
    let satisfied = if partial_sums.iter().any(|&s| s > 1.0) {
        Satisfied::No
    } else if tail_bound.is_some_and(|tb| sum + tb <= 1.0) {
        Satisfied::Yes
    } else {
        Satisfied::Inconclusive
    };
    Ok(ModelCheckReport {
        weights: alpha.label().to_string(),
        mode: spec.mode,
        dimension: dim,
        terms,
        partial_sums,
        limit_estimate: sum,
        tail_bound,
        satisfied,
        terms_used,
        unit_terms,
    })
}

/// Minimum separation between retained and discarded singular values.
pub const MIN_RANK_GAP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenspaceResult {
    /// Orthonormal columns spanning the numerical kernel of `T − λ`.
    pub basis: CMatrix,
    pub dimension: usize,
    /// `‖(T − λ)·basis‖_F`.
    pub residual: f64,
    /// Smallest retained over largest discarded singular value.
    pub gap: f64,
    pub singular_values: Vec<f64>,
}

/// Numerical `ker(T − λ)` from an SVD; singular values at most
/// `rank_tolerance·σ_max` count as zero.
pub fn eigen_space(t: &CMatrix, lambda: Complex64, rank_tolerance: f64) -> Result<EigenspaceResult> {
    let n = t.nrows();
    if n != t.ncols() || n == 0 {
        return Err(Error::DimensionMismatch(format!("T is {}×{}", t.nrows(), t.ncols())));
    }
    if !(rank_tolerance > 0.0 && rank_tolerance < 1.0) {
        return Err(Error::InvalidParameter {
            field: "rank_tolerance".into(),
            message: format!("must lie in (0, 1), got {rank_tolerance}"),
        });
    }
    let shifted = t - CMatrix::identity(n, n) * lambda;
    let svd = shifted.clone().svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = sv[0];
    let cut = rank_tolerance * sigma_max;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let dimension = n - rank;
    let smallest_kept = if rank > 0 { sv[rank - 1] } else { sigma_max };
    let largest_dropped = if dimension > 0 { sv[rank] } else { 0.0 };
    let gap = smallest_kept / largest_dropped.max(sigma_max * f64::EPSILON).max(f64::MIN_POSITIVE);
    if gap < MIN_RANK_GAP {
        return Err(Error::InconclusiveRank {
            gap,
            singular_values: sv,
        });
    }
    let basis = CMatrix::from_fn(n, dimension, |i, j| v_t[(rank + j, i)].conj());
    let residual = (&shifted * &basis).norm();
    Ok(EigenspaceResult {
        basis,
        dimension,
        residual,
        gap,
        singular_values: sv,
    })
}

/// Smallest singular value accepted for column-normalized kernel generators.
pub const SPAN_CONDITION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpanRestriction {
    /// Compression of `D*⊗I` to the span, in the orthonormal basis below.
    pub matrix: CMatrix,
    /// Orthonormal basis of the span; ambient index `n·dim E + a`.
    pub basis: CMatrix,
    /// `‖(D*⊗I)Q − Q·matrix‖_F`.
    pub invariance_residual: f64,
    pub smallest_singular_value: f64,
    /// Largest kernel tail bound among the samples.
    pub tail_bound: f64,
    pub truncation: usize,
}

/// Restricts `D*_N ⊗ I` to `span{k_μ̄ᵢ ⊗ eᵢ}`.
pub fn restrict_to_kernel_span(
    samples: &[DiskPoint],
    directions: &[DVector<Complex64>],
    truncation: usize,
    r_max: f64,
) -> Result<KernelSpanRestriction> {
    if samples.is_empty() || samples.len() != directions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} directions",
            samples.len(),
            directions.len()
        )));
    }
    let dim_e = directions[0].len();
    if dim_e == 0 || directions.iter().any(|d| d.len() != dim_e) {
        return Err(Error::DimensionMismatch("directions differ in length".into()));
    }
    for (i, a) in samples.iter().enumerate() {
        if samples[..i].contains(a) {
            return Err(Error::InvalidParameter {
                field: "samples".into(),
                message: format!("sample {a} is repeated"),
            });
        }
    }
    let m = samples.len();
    let mut gens = CMatrix::zeros(truncation * dim_e, m);
    let mut tail_bound: f64 = 0.0;
    for (j, (mu, e)) in samples.iter().zip(directions).enumerate() {
        let norm = e.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                field: "directions".into(),
                message: format!("direction {j} is zero"),
            });
        }
        let k = embed_kernel(*mu, truncation, r_max)?;
        tail_bound = tail_bound.max(kernel_tail_bound(*mu, truncation));
        let g = k.vector.coords().kronecker(&(e / Complex64::new(norm, 0.0)));
        let g = &g / Complex64::new(g.norm(), 0.0);
        gens.set_column(j, &g);
    }
    let smallest = gens.clone().singular_values().min();
    if smallest < SPAN_CONDITION_FLOOR {
        return Err(Error::IllConditionedSpan { smallest });
    }
    let q = gens.qr().q();
    let shift = crate::coeff_space::truncated_backward_shift(truncation)?;
    let ambient = shift.kronecker(&CMatrix::identity(dim_e, dim_e));
    let aq = &ambient * &q;
    let matrix = q.adjoint() * &aq;
    let invariance_residual = (aq - &q * &matrix).norm();
    Ok(KernelSpanRestriction {
        matrix,
        basis: q,
        invariance_residual,
        smallest_singular_value: smallest,
        tail_bound,
        truncation,
    })
}

/// Eigenvalues of a square complex matrix from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let (_, t) = m.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// Largest distance in an optimal matching of two small point sets,
/// chosen greedily by nearest neighbour.
pub fn match_distance(found: &[Complex64], expected: &[Complex64]) -> f64 {
    if found.len() != expected.len() {
        return f64::INFINITY;
    }
    let mut left: Vec<Complex64> = found.to_vec();
    let mut worst: f64 = 0.0;
    for e in expected {
        let (idx, d) = left
            .iter()
            .enumerate()
            .map(|(i, f)| (i, (f - e).norm()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        worst = worst.max(d);
        left.remove(idx);
    }
    worst
}

/// Example operators addressed by name in configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `scale·D*_N`.
    DirichletTruncated { truncation: usize, scale: f64 },
    /// `scale·J` with `J` the nilpotent Jordan block of size `dim`.
    Jordan { dim: usize, scale: f64 },
    Zero { dim: usize },
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::DirichletTruncated {
            truncation: 50,
            scale: 0.9,
        }
    }
}

impl OperatorSpec {
    pub fn build(&self) -> Result<CMatrix> {
        match *self {
            OperatorSpec::DirichletTruncated { truncation, scale } => {
                Ok(crate::coeff_space::truncated_backward_shift(truncation)? * Complex64::new(scale, 0.0))
            }
            OperatorSpec::Jordan { dim, scale } => {
                if dim == 0 {
                    return Err(Error::InvalidParameter {
                        field: "operator.dim".into(),
                        message: "must be positive".into(),
                    });
                }
                Ok(weighted_backward_shift(&WeightSequence::constant(1.0)?, dim) * Complex64::new(scale, 0.0))
            }
            OperatorSpec::Zero { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidParameter {
                        field: "operator.dim".into(),
                        message: "must be positive".into(),
                    });
                }
                Ok(DMatrix::zeros(dim, dim))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            OperatorSpec::DirichletTruncated { truncation, scale } => {
                format!("dirichlet-truncated N={truncation} scale={scale}")
            }
            OperatorSpec::Jordan { dim, scale } => format!("jordan dim={dim} scale={scale}"),
            OperatorSpec::Zero { dim } => format!("zero dim={dim}"),
        }
    }
}
