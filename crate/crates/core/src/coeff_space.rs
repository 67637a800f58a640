//! Truncated Dirichlet space in the orthonormal basis `eₙ = zⁿ/√(n+1)`.
//!
//! In these coordinates the Dirichlet inner product is the Euclidean one,
//! multiplication by `z` is a weighted forward shift and the backward shift
//! `D*` has weights `αₙ = √((n+1)/n)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wirtinger::DiskPoint;

/// A Dirichlet-space element truncated to its first `N` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    coords: DVector<Complex64>,
}

impl CoefficientVector {
    pub fn from_coords(coords: DVector<Complex64>) -> Self {
        CoefficientVector { coords }
    }

    pub fn zeros(n: usize) -> Self {
        CoefficientVector {
            coords: DVector::zeros(n),
        }
    }

    pub fn coords(&self) -> &DVector<Complex64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<Complex64> {
        self.coords
    }

    pub fn truncation(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.norm_squared()
    }

    /// `⟨self, other⟩`, linear in the first slot.
    pub fn inner(&self, other: &CoefficientVector) -> Complex64 {
        other.coords.dotc(&self.coords)
    }

    /// Point evaluation `f(z) = Σ cₙ zⁿ/√(n+1)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, c) in self.coords.iter().enumerate().rev() {
            acc = acc * z + c / ((n + 1) as f64).sqrt();
        }
        acc
    }

    /// `f'(z)`.
    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, c) in self.coords.iter().enumerate().skip(1).rev() {
            acc = acc * z + c * (n as f64 / ((n + 1) as f64).sqrt());
        }
        acc
    }
}

/// Embeds `Σ aₙ zⁿ`; coordinate `n` is `aₙ √(n+1)`.
pub fn embed_polynomial(monomial_coeffs: &[Complex64], n: usize) -> Result<CoefficientVector> {
    let degree = monomial_coeffs
        .iter()
        .rposition(|c| *c != Complex64::new(0.0, 0.0))
        .unwrap_or(0);
    if degree >= n {
        return Err(Error::TruncationTooSmall {
            degree,
            truncation: n,
        });
    }
    let mut coords = DVector::zeros(n);
    for (k, c) in monomial_coeffs.iter().enumerate().take(n) {
        coords[k] = c * ((k + 1) as f64).sqrt();
    }
    Ok(CoefficientVector { coords })
}

/// Truncated `k_λ̄` together with a bound on the discarded norm².
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEmbedding {
    pub vector: CoefficientVector,
    pub tail_bound: f64,
}

/// Bound on `Σ_{n≥N} |λ|^{2n}/(n+1)`, the norm² lost by truncating `k_λ̄`.
pub fn kernel_tail_bound(lambda: DiskPoint, n: usize) -> f64 {
    let x = lambda.abs_sq();
    x.powi(n as i32) / (n as f64 * (1.0 - x))
}

/// Exact `‖(D*_N − λ) k_λ̄‖` for the truncated kernel: only the top coordinate
/// loses its image.
pub fn kernel_eigen_residual(lambda: DiskPoint, n: usize) -> f64 {
    lambda.abs().powi(n as i32) / (n as f64).sqrt()
}

fn kernel_coords(lambda: Complex64, n: usize) -> DVector<Complex64> {
    let mut pow = Complex64::new(1.0, 0.0);
    DVector::from_fn(n, |k, _| {
        let c = pow / ((k + 1) as f64).sqrt();
        pow *= lambda;
        c
    })
}

/// Embeds `k_λ̄`, whose coordinates are `λⁿ/√(n+1)`; holomorphic in λ.
pub fn embed_kernel(lambda: DiskPoint, n: usize, r_max: f64) -> Result<KernelEmbedding> {
    lambda.require_within(r_max)?;
    Ok(KernelEmbedding {
        vector: CoefficientVector {
            coords: kernel_coords(lambda.z(), n),
        },
        tail_bound: kernel_tail_bound(lambda, n),
    })
}

/// Embeds `∂/∂λ k_λ̄ = k̃_λ̄`; coordinate `n` is `n λ^{n−1}/√(n+1)`.
pub fn embed_derivative_kernel(lambda: DiskPoint, n: usize, r_max: f64) -> Result<CoefficientVector> {
    lambda.require_within(r_max)?;
    let z = lambda.z();
    let mut pow = Complex64::new(1.0, 0.0);
    let coords = DVector::from_fn(n, |k, _| {
        if k == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let c = pow * (k as f64 / ((k + 1) as f64).sqrt());
        pow *= z;
        c
    });
    Ok(CoefficientVector { coords })
}

/// Truncated multiplication by `z` and its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMatrices {
    pub forward: DMatrix<Complex64>,
    pub backward: DMatrix<Complex64>,
    pub truncation: usize,
}

/// Dirichlet shift weight `αₙ = √((n+1)/n)`, `n ≥ 1`.
pub fn dirichlet_weight(n: usize) -> f64 {
    ((n + 1) as f64 / n as f64).sqrt()
}

pub fn build_shift_matrices(n: usize) -> Result<ShiftMatrices> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            field: "truncation".into(),
            message: format!("shift matrices need N ≥ 2, got {n}"),
        });
    }
    let mut forward = DMatrix::zeros(n, n);
    for k in 0..n - 1 {
        forward[(k + 1, k)] = Complex64::new(dirichlet_weight(k + 1), 0.0);
    }
    let backward = forward.adjoint();
    Ok(ShiftMatrices {
        forward,
        backward,
        truncation: n,
    })
}

/// Truncated backward shift `D*_N`.
pub fn truncated_backward_shift(n: usize) -> Result<DMatrix<Complex64>> {
    Ok(build_shift_matrices(n)?.backward)
}
