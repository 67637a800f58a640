use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {re}+{im}i is not inside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },

    #[error("point {re}+{im}i has modulus {modulus} beyond the allowed margin r_max={r_max}")]
    BeyondMargin {
        re: f64,
        im: f64,
        modulus: f64,
        r_max: f64,
    },

    #[error("finite-difference stencil at {re}+{im}i with step {step} leaves the disk")]
    StencilOutsideDisk { re: f64, im: f64, step: f64 },

    #[error("polynomial of degree {degree} does not fit truncation N={truncation}")]
    TruncationTooSmall { degree: usize, truncation: usize },

    #[error("degenerate frame at {re}+{im}i: smallest eigenvalue of F*F is {min_eigenvalue} (floor {floor})")]
    DegenerateFrame {
        re: f64,
        im: f64,
        min_eigenvalue: f64,
        floor: f64,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("Green kernel evaluated on its diagonal at {re}+{im}i")]
    GreenSingularity { re: f64, im: f64 },

    #[error("quadrature did not converge at {re}+{im}i: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNonconvergence {
        re: f64,
        im: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("inconclusive rank decision (gap {gap}); singular values {singular_values:?}")]
    InconclusiveRank {
        gap: f64,
        singular_values: Vec<f64>,
    },

    #[error("kernel-span generators are nearly dependent (smallest singular value {smallest:e})")]
    IllConditionedSpan { smallest: f64 },

    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
