//! Dirichlet-space reproducing kernel, its λ-derivative kernel, and the
//! norms and inner products between them.
//!
//! With `x = |λ|²` and `L = log(1 − x)`:
//!
//! * `‖k_λ‖² = −L/x`
//! * `‖k̃_λ‖² = −((1−x)²L + x − 2x²) / ((1−x)² x²)`
//! * `⟨k̃_λ̄, k_λ̄⟩ = λ̄ (x + (1−x)L) / ((1−x) x²)`
//!
//! Every closed form has a power-series counterpart in [`series`] that
//! reports its own truncation bound, so the two can be compared.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wirtinger::DiskPoint;

/// `|λ̄z|` (or `|λ|²`) below which the series is used instead of the closed form.
pub const SERIES_SWITCH: f64 = 1e-3;
const SWITCH_TERMS: usize = 30;

/// A kernel evaluation with an absolute truncation bound (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Stopping rule for the series evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub max_terms: usize,
    pub tail_tolerance: f64,
}

impl Default for SeriesSpec {
    fn default() -> Self {
        SeriesSpec {
            max_terms: 20_000,
            tail_tolerance: 1e-17,
        }
    }
}

impl SeriesSpec {
    pub fn new(max_terms: usize, tail_tolerance: f64) -> Result<Self> {
        if max_terms == 0 {
            return Err(Error::InvalidParameter {
                field: "series.max_terms".into(),
                message: "must be at least 1".into(),
            });
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                field: "series.tail_tolerance".into(),
                message: format!("must be positive, got {tail_tolerance}"),
            });
        }
        Ok(SeriesSpec {
            max_terms,
            tail_tolerance,
        })
    }

    fn fixed(terms: usize) -> Self {
        SeriesSpec {
            max_terms: terms,
            tail_tolerance: f64::MIN_POSITIVE,
        }
    }
}

/// `log(1 − x) + x` without cancellation for small `x`.
pub fn log1m_plus_x(x: f64) -> f64 {
    if x < 0.1 {
        let mut sum = 0.0;
        let mut pow = x;
        for k in 2..200 {
            pow *= x;
            let term = pow / k as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        -sum
    } else {
        (-x).ln_1p() + x
    }
}

/// `k_λ(z) = (1/(λ̄z)) log(1/(1 − λ̄z))`.
pub fn eval_kernel(lambda: DiskPoint, z: DiskPoint) -> KernelValue {
    let w = lambda.z().conj() * z.z();
    if w.norm() < SERIES_SWITCH {
        return series::kernel(w, &SeriesSpec::fixed(SWITCH_TERMS)).into();
    }
    // Re(1 − w) > 0 on the bidisk, so the principal log is the right branch
    let one = Complex64::new(1.0, 0.0);
    KernelValue {
        value: -(one - w).ln() / w,
        tail_bound: 0.0,
    }
}

/// `k̃_λ̄(z) = ∂/∂λ k_λ̄(z)`; note the pairing of λ (not λ̄) with `z`.
pub fn eval_derivative_kernel(lambda: DiskPoint, z: DiskPoint) -> KernelValue {
    let zz = z.z();
    let u = lambda.z() * zz;
    if u.norm() < SERIES_SWITCH {
        return series::derivative_kernel(lambda.z(), zz, &SeriesSpec::fixed(SWITCH_TERMS)).into();
    }
    let one = Complex64::new(1.0, 0.0);
    let log = (one - u).ln();
    KernelValue {
        value: (lambda.z() * zz * zz + zz * (one - u) * log) / ((one - u) * u * u),
        tail_bound: 0.0,
    }
}

/// `‖k_λ‖² = −log(1 − |λ|²)/|λ|²`, with limit 1 at the origin.
pub fn kernel_norm_sq(lambda: DiskPoint) -> f64 {
    let x = lambda.abs_sq();
    if x < SERIES_SWITCH {
        return series::kernel_norm_sq(x, &SeriesSpec::fixed(SWITCH_TERMS)).value;
    }
    -(-x).ln_1p() / x
}

/// `‖k̃_λ‖²`; limit 1/2 at the origin.
pub fn derivative_kernel_norm_sq(lambda: DiskPoint) -> f64 {
    let x = lambda.abs_sq();
    if x < SERIES_SWITCH {
        return series::derivative_kernel_norm_sq(x, &SeriesSpec::fixed(SWITCH_TERMS)).value;
    }
    // numerator rewritten with L + x so that no leading terms cancel
    let m = log1m_plus_x(x);
    let omx = 1.0 - x;
    (x * x * x - omx * omx * m) / (omx * omx * x * x)
}

/// `⟨k̃_λ̄, k_λ̄⟩`; vanishes at the origin.
pub fn kernel_deriv_inner(lambda: DiskPoint) -> Complex64 {
    let x = lambda.abs_sq();
    if x < SERIES_SWITCH {
        return series::kernel_deriv_inner(lambda.z(), &SeriesSpec::fixed(SWITCH_TERMS)).value;
    }
    let m = log1m_plus_x(x);
    let omx = 1.0 - x;
    lambda.z().conj() * ((omx * m + x * x) / (omx * x * x))
}

/// Closed form of `‖A k_λ̄ + B k̃_λ̄‖²` with `A = L + x/(1−x)`, `B = λL`:
/// `(L² + xL)/(1 − x)²`.
pub fn combination_norm_sq(lambda: DiskPoint) -> f64 {
    let x = lambda.abs_sq();
    let l = (-x).ln_1p();
    let omx = 1.0 - x;
    l * log1m_plus_x(x) / (omx * omx)
}

/// The same norm by bilinear expansion
/// `|A|²‖k‖² + |B|²‖k̃‖² + 2 Re(Ā B ⟨k̃, k⟩)`.
pub fn combination_norm_sq_bilinear(lambda: DiskPoint) -> f64 {
    let x = lambda.abs_sq();
    let l = (-x).ln_1p();
    // L + x/(1−x) = (L + x) + x²/(1−x)
    let a = log1m_plus_x(x) + x * x / (1.0 - x);
    let b = lambda.z() * l;
    a * a * kernel_norm_sq(lambda)
        + b.norm_sqr() * derivative_kernel_norm_sq(lambda)
        + 2.0 * (b * a * kernel_deriv_inner(lambda)).re
}

/// Truncated power series with explicit tail bounds.
pub mod series {
    use num_complex::Complex64;
    use serde::{Deserialize, Serialize};

    use super::{KernelValue, SeriesSpec};

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct SeriesSum<T> {
        pub value: T,
        pub tail_bound: f64,
        pub terms: usize,
    }

    impl From<SeriesSum<Complex64>> for KernelValue {
        fn from(s: SeriesSum<Complex64>) -> Self {
            KernelValue {
                value: s.value,
                tail_bound: s.tail_bound,
            }
        }
    }

    /// Sums `term(n)` for `n = first, first+1, …` until `tail(next_n)` drops below
    /// the tolerance or the term budget is spent.
    fn sum_with_tail<T, F, B>(first: usize, spec: &SeriesSpec, term: F, tail: B) -> SeriesSum<T>
    where
        T: Default + std::ops::AddAssign,
        F: Fn(usize) -> T,
        B: Fn(usize) -> f64,
    {
        let mut value = T::default();
        let mut n = first;
        let mut terms = 0;
        loop {
            value += term(n);
            n += 1;
            terms += 1;
            let bound = tail(n);
            if bound < spec.tail_tolerance || terms >= spec.max_terms {
                return SeriesSum {
                    value,
                    tail_bound: bound,
                    terms,
                };
            }
        }
    }

    fn geometric_remainder(r: f64, from: usize) -> f64 {
        if r >= 1.0 {
            f64::INFINITY
        } else {
            r.powi(from as i32) / (1.0 - r)
        }
    }

    /// `Σ_{n≥0} w^n/(n+1)`.
    pub fn kernel(w: Complex64, spec: &SeriesSpec) -> SeriesSum<Complex64> {
        let r = w.norm();
        sum_with_tail(
            0,
            spec,
            |n| w.powu(n as u32) / (n as f64 + 1.0),
            |m| geometric_remainder(r, m) / (m as f64 + 1.0),
        )
    }

    /// `Σ_{n≥1} n λ^{n−1} z^n/(n+1)`.
    pub fn derivative_kernel(lambda: Complex64, z: Complex64, spec: &SeriesSpec) -> SeriesSum<Complex64> {
        let u = lambda * z;
        let r = u.norm();
        sum_with_tail(
            1,
            spec,
            |n| z * u.powu(n as u32 - 1) * (n as f64 / (n as f64 + 1.0)),
            |m| z.norm() * geometric_remainder(r, m - 1),
        )
    }

    /// `Σ_{n≥0} x^n/(n+1)`, i.e. `‖k_λ‖²` at `x = |λ|²`.
    pub fn kernel_norm_sq(x: f64, spec: &SeriesSpec) -> SeriesSum<f64> {
        sum_with_tail(
            0,
            spec,
            |n| x.powi(n as i32) / (n as f64 + 1.0),
            |m| geometric_remainder(x, m) / (m as f64 + 1.0),
        )
    }

    /// `Σ_{n≥1} n² x^{n−1}/(n+1)`, i.e. `‖k̃_λ‖²`.
    pub fn derivative_kernel_norm_sq(x: f64, spec: &SeriesSpec) -> SeriesSum<f64> {
        sum_with_tail(
            1,
            spec,
            |n| {
                let nf = n as f64;
                nf * nf * x.powi(n as i32 - 1) / (nf + 1.0)
            },
            // n²/(n+1) ≤ n and Σ_{n≥m} n x^{n−1} = (m x^{m−1} − (m−1) x^m)/(1−x)²
            |m| {
                if x >= 1.0 {
                    return f64::INFINITY;
                }
                let mf = m as f64;
                x.powi(m as i32 - 1) * (mf - (mf - 1.0) * x) / ((1.0 - x) * (1.0 - x))
            },
        )
    }

    /// `λ̄ Σ_{n≥1} n x^{n−1}/(n+1)`, i.e. `⟨k̃_λ̄, k_λ̄⟩`.
    pub fn kernel_deriv_inner(lambda: Complex64, spec: &SeriesSpec) -> SeriesSum<Complex64> {
        let x = lambda.norm_sqr();
        let s = sum_with_tail(
            1,
            spec,
            |n| {
                let nf = n as f64;
                nf * x.powi(n as i32 - 1) / (nf + 1.0)
            },
            |m| geometric_remainder(x, m - 1),
        );
        SeriesSum {
            value: lambda.conj() * s.value,
            tail_bound: lambda.norm() * s.tail_bound,
            terms: s.terms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(x: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        (0..20_000).rev().map(|n| f(n as f64, x)).sum()
    }

    #[test]
    fn kernel_examples() {
        let k = eval_kernel(DiskPoint::ORIGIN, DiskPoint::real(0.7));
        assert_eq!(k.value, Complex64::new(1.0, 0.0));
        let oracle = brute(0.25, |n, x| x.powf(n) / (n + 1.0));
        let k = eval_kernel(DiskPoint::real(0.5), DiskPoint::real(0.5));
        assert!((k.value.re - oracle).abs() < 1e-14);
        assert!((k.value.re - 1.1507283).abs() < 5e-8);
        let k = eval_kernel(DiskPoint::real(0.9), DiskPoint::real(0.9));
        assert!((k.value.re - (1.0f64 / 0.19).ln() / 0.81).abs() < 1e-14);
        assert!((k.value.re - 2.0502855).abs() < 1e-7);
    }

    #[test]
    fn kernel_switch_is_continuous() {
        let z = DiskPoint::real(0.5);
        let below = eval_kernel(DiskPoint::new(0.0, 0.00199).unwrap(), z);
        let above = eval_kernel(DiskPoint::new(0.0, 0.00201).unwrap(), z);
        assert!(below.tail_bound > 0.0 && below.tail_bound < 1e-40);
        assert_eq!(above.tail_bound, 0.0);
        assert!((below.value - above.value).norm() < 1e-5);
        let s = series::kernel(Complex64::new(0.0, -0.5 * 0.00201), &SeriesSpec::default());
        let d = (above.value - s.value).norm();
        assert!(d < 1e-12, "{d:e}");
    }

    #[test]
    fn hermitian_symmetry() {
        let a = DiskPoint::new(0.3, -0.6).unwrap();
        let b = DiskPoint::new(-0.5, 0.2).unwrap();
        let ab = eval_kernel(a, b).value;
        let ba = eval_kernel(b, a).value;
        assert!((ab - ba.conj()).norm() < 1e-15);
    }

    #[test]
    fn derivative_kernel_examples() {
        let v = eval_derivative_kernel(DiskPoint::ORIGIN, DiskPoint::real(0.6));
        assert!((v.value - Complex64::new(0.3, 0.0)).norm() < 1e-15);
        let v = eval_derivative_kernel(DiskPoint::new(0.4, 0.3).unwrap(), DiskPoint::ORIGIN);
        assert_eq!(v.value, Complex64::new(0.0, 0.0));
        let closed = eval_derivative_kernel(DiskPoint::real(0.5), DiskPoint::real(0.5));
        assert_eq!(closed.tail_bound, 0.0);
        let oracle = brute(0.25, |n, u| if n == 0.0 { 0.0 } else { 0.5 * n * u.powf(n - 1.0) / (n + 1.0) });
        assert!((closed.value.re - oracle).abs() < 1e-12);
    }

    #[test]
    fn norm_anchors() {
        assert_eq!(kernel_norm_sq(DiskPoint::ORIGIN), 1.0);
        let half = DiskPoint::real(0.5f64.sqrt());
        assert!((kernel_norm_sq(half) - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((kernel_norm_sq(DiskPoint::real(0.75f64.sqrt())) - 1.8483925).abs() < 5e-8);
        assert_eq!(derivative_kernel_norm_sq(DiskPoint::ORIGIN), 0.5);
        assert!((derivative_kernel_norm_sq(half) - 2.7725887).abs() < 5e-8);
        let a = derivative_kernel_norm_sq(DiskPoint::new(0.0, 0.5).unwrap());
        let b = derivative_kernel_norm_sq(DiskPoint::real(0.5));
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn inner_anchors() {
        assert_eq!(kernel_deriv_inner(DiskPoint::ORIGIN), Complex64::new(0.0, 0.0));
        let v = kernel_deriv_inner(DiskPoint::real(0.5));
        let oracle = 0.5 * brute(0.25, |n, x| if n == 0.0 { 0.0 } else { n * x.powf(n - 1.0) / (n + 1.0) });
        assert!((v.re - oracle).abs() < 1e-14);
        assert_eq!(v.im, 0.0);
        // the frequently quoted 0.3652087 is off in the seventh digit
        assert!((v.re - 0.3652101).abs() < 5e-8);
    }

    #[test]
    fn combination_routes_agree() {
        assert_eq!(combination_norm_sq(DiskPoint::ORIGIN), 0.0);
        let half = DiskPoint::real(0.5f64.sqrt());
        assert!((combination_norm_sq(half) - 0.5355177).abs() < 5e-8);
        for k in 0..40 {
            let r = 0.9 * (k as f64 + 0.5) / 40.0;
            let p = DiskPoint::polar(r, 0.7 * k as f64).unwrap();
            let a = combination_norm_sq(p);
            let b = combination_norm_sq_bilinear(p);
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "r={r}: {a} vs {b}");
        }
        // leading order |λ|⁶/2
        let small = DiskPoint::real(0.01);
        let v = combination_norm_sq(small);
        assert!((v / (0.5 * 1e-12) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn series_tail_bounds_hold() {
        let spec = SeriesSpec::new(25, 1e-30).unwrap();
        for x in [0.1, 0.5, 0.81] {
            let s = series::kernel_norm_sq(x, &spec);
            let exact = -(-x as f64).ln_1p() / x;
            assert_eq!(s.terms, 25);
            assert!((exact - s.value).abs() <= s.tail_bound + 4.0 * f64::EPSILON * exact);
            let d = series::derivative_kernel_norm_sq(x, &spec);
            let exact = derivative_kernel_norm_sq(DiskPoint::real(x.sqrt()));
            assert!(
                (exact - d.value).abs() <= d.tail_bound + 8.0 * f64::EPSILON * exact,
                "x={x}: {} vs {}",
                exact - d.value,
                d.tail_bound
            );
        }
    }

    #[test]
    fn series_spec_validation() {
        assert!(SeriesSpec::new(0, 1e-3).is_err());
        assert!(SeriesSpec::new(5, 0.0).is_err());
    }
}
