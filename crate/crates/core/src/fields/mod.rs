//! Sampled fields on the periodic unit torus and their spectral calculus.
//!
//! Every field lives on a [`Grid`]. Differentiation is exact for the
//! trigonometric interpolant; quadrature is the equal-weight rule, which is
//! exact for resolved trigonometric polynomials and integrates to the mean
//! value because the torus has unit volume.

mod calculus;
pub mod cfld;
mod grid;
mod scalar;
mod tensor;

use thiserror::Error;

pub(crate) use calculus::apply_multiplier;
pub use calculus::{gradient, integrate, laplacian, partial, spectral_coefficients};
pub use grid::Grid;
pub use scalar::ScalarField;
pub use tensor::{sym_index, SymTensorField, VectorField};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field contains non-finite samples")]
    NonFinite,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} components, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Overflow-safe `(mean |v|^p)^{1/p}` of a slice (unit-volume measure).
pub(crate) fn lp_mean<T: crate::Real>(values: impl Iterator<Item = T> + Clone, p: T) -> T {
    let scale = values.clone().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let mut count = 0usize;
    let sum = neumaier(values.map(|v| {
        count += 1;
        (v.abs() / scale).powf(p)
    }));
    scale * (sum / T::from_count(count.max(1))).powf(T::one() / p)
}

/// Compensated summation, deterministic for a fixed input order.
pub(crate) fn neumaier<T: crate::Real>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
