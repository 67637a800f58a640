//! Wirtinger derivatives and the normalized Laplacian by central differences.
//!
//! Conventions: `∂ = (∂x − i∂y)/2`, `∂̄ = (∂x + i∂y)/2` and
//! `Δ = ∂∂̄ = (∂xx + ∂yy)/4`, so `Δ|λ|² = 1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub re: f64,
    pub im: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) || re * re + im * im >= 1.0 {
            return Err(Error::OutsideDisk { re, im });
        }
        Ok(DiskPoint { re, im })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn polar(r: f64, theta: f64) -> Result<Self> {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    /// Real point `x`; panics outside the disk. Convenient for tests and tables.
    pub fn real(x: f64) -> Self {
        Self::new(x, 0.0).expect("real point inside the disk")
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn abs_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// Refuses points with `|λ| > r_max`.
    pub fn require_within(&self, r_max: f64) -> Result<()> {
        let modulus = self.abs();
        if modulus > r_max {
            return Err(Error::BeyondMargin {
                re: self.re,
                im: self.im,
                modulus,
                r_max,
            });
        }
        Ok(())
    }

    fn offset(&self, dz: Complex64, step: f64) -> Result<Self> {
        let w = self.z() + dz;
        DiskPoint::from_complex(w).map_err(|_| Error::StencilOutsideDisk {
            re: self.re,
            im: self.im,
            step,
        })
    }
}

impl fmt::Display for DiskPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.re, self.im)
    }
}

/// Finite-difference step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSpec {
    pub base_step: f64,
    /// Use `h = base_step·(1 − |λ|)` so stencils stay inside the disk.
    pub boundary_scaling: bool,
}

impl Default for StepSpec {
    fn default() -> Self {
        StepSpec {
            base_step: 1e-3,
            boundary_scaling: true,
        }
    }
}

impl StepSpec {
    pub fn new(base_step: f64, boundary_scaling: bool) -> Result<Self> {
        if !(base_step > 0.0 && base_step.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "step.base_step".into(),
                message: format!("must be positive, got {base_step}"),
            });
        }
        Ok(StepSpec {
            base_step,
            boundary_scaling,
        })
    }

    pub fn step_at(&self, p: DiskPoint) -> f64 {
        if self.boundary_scaling {
            self.base_step * (1.0 - p.abs())
        } else {
            self.base_step
        }
    }

    /// The four stencil neighbours `λ+h, λ−h, λ+ih, λ−ih` and the step.
    fn stencil(&self, p: DiskPoint) -> Result<([DiskPoint; 4], f64)> {
        let h = self.step_at(p);
        let pts = [
            p.offset(Complex64::new(h, 0.0), h)?,
            p.offset(Complex64::new(-h, 0.0), h)?,
            p.offset(Complex64::new(0.0, h), h)?,
            p.offset(Complex64::new(0.0, -h), h)?,
        ];
        Ok((pts, h))
    }
}

/// Values that can be combined by the Wirtinger difference quotients.
pub trait StencilValue: Sized {
    type Derivative;

    /// Combines `f(λ±h)`, `f(λ±ih)` into `∂f` (or `∂̄f` when `conjugate`).
    fn wirtinger(xp: Self, xm: Self, yp: Self, ym: Self, h: f64, conjugate: bool)
        -> Self::Derivative;
}

fn y_sign(conjugate: bool) -> Complex64 {
    if conjugate {
        Complex64::i()
    } else {
        -Complex64::i()
    }
}

impl StencilValue for f64 {
    type Derivative = Complex64;

    fn wirtinger(xp: f64, xm: f64, yp: f64, ym: f64, h: f64, conjugate: bool) -> Complex64 {
        let dx = (xp - xm) / (2.0 * h);
        let dy = (yp - ym) / (2.0 * h);
        (Complex64::new(dx, 0.0) + y_sign(conjugate) * dy) * 0.5
    }
}

impl StencilValue for Complex64 {
    type Derivative = Complex64;

    fn wirtinger(
        xp: Complex64,
        xm: Complex64,
        yp: Complex64,
        ym: Complex64,
        h: f64,
        conjugate: bool,
    ) -> Complex64 {
        let dx = (xp - xm) / (2.0 * h);
        let dy = (yp - ym) / (2.0 * h);
        (dx + y_sign(conjugate) * dy) * 0.5
    }
}

impl StencilValue for DMatrix<Complex64> {
    type Derivative = DMatrix<Complex64>;

    fn wirtinger(
        xp: Self,
        xm: Self,
        yp: Self,
        ym: Self,
        h: f64,
        conjugate: bool,
    ) -> DMatrix<Complex64> {
        let scale = Complex64::new(0.25 / h, 0.0);
        let dx = xp - xm;
        let dy = yp - ym;
        (dx + dy * y_sign(conjugate)) * scale
    }
}

fn wirtinger_fd<V, F>(f: F, p: DiskPoint, s: &StepSpec, conjugate: bool) -> Result<V::Derivative>
where
    V: StencilValue,
    F: Fn(DiskPoint) -> Result<V>,
{
    let ([xp, xm, yp, ym], h) = s.stencil(p)?;
    Ok(V::wirtinger(f(xp)?, f(xm)?, f(yp)?, f(ym)?, h, conjugate))
}

/// Central-difference `∂f/∂λ` at `p`.
pub fn d_dlambda<V, F>(f: F, p: DiskPoint, s: &StepSpec) -> Result<V::Derivative>
where
    V: StencilValue,
    F: Fn(DiskPoint) -> Result<V>,
{
    wirtinger_fd(f, p, s, false)
}

/// Central-difference `∂f/∂λ̄` at `p`.
pub fn d_dbar<V, F>(f: F, p: DiskPoint, s: &StepSpec) -> Result<V::Derivative>
where
    V: StencilValue,
    F: Fn(DiskPoint) -> Result<V>,
{
    wirtinger_fd(f, p, s, true)
}

/// Five-point normalized Laplacian `¼(∂xx + ∂yy) f` of a real field.
pub fn laplacian<F>(f: F, p: DiskPoint, s: &StepSpec) -> Result<f64>
where
    F: Fn(DiskPoint) -> Result<f64>,
{
    let ([xp, xm, yp, ym], h) = s.stencil(p)?;
    let centre = f(p)?;
    let sum = f(xp)? + f(xm)? + f(yp)? + f(ym)?;
    Ok((sum - 4.0 * centre) / (4.0 * h * h))
}

type FieldRule = dyn Fn(DiskPoint) -> Result<f64> + Send + Sync;

/// A labelled real-valued field on the disk.
#[derive(Clone)]
pub struct ScalarField {
    label: String,
    rule: Arc<FieldRule>,
}

impl ScalarField {
    pub fn new<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(DiskPoint) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField {
            label: label.into(),
            rule: Arc::new(rule),
        }
    }

    /// Field from an infallible closed form.
    pub fn closed_form<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(DiskPoint) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, move |p| Ok(rule(p)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: DiskPoint) -> Result<f64> {
        (self.rule)(p)
    }

    pub fn laplacian(&self, p: DiskPoint, s: &StepSpec) -> Result<f64> {
        laplacian(|q| self.eval(q), p, s)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}
