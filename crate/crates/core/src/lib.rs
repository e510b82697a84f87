//! Spectral solvers for the vacuum Einstein constraint equations in the
//! conformal method, on the flat unit-volume torus `T^n`.
//!
//! Given a mean curvature `tau`, a transverse-traceless tensor `sigma` and a
//! positive weight `eta`, the unknowns are the conformal factor `phi` and a
//! vector field `W` solving the coupled system
//!
//! ```text
//! -kappa Lap(phi) + (n-1)/n tau^2 phi^(N-1) = |sigma + LW/(2 eta)|^2 phi^(-N-1)
//!  Lap_L W = (n-1)/n phi^N grad(tau)
//! ```
//!
//! with `N = 2n/(n-2)` and `kappa = 4(n-1)/(n-2)`. Two constructions are
//! provided: a Picard iteration for small `sigma` ([`coupled`]) and a
//! continuation in the scaling parameter `lambda` ([`continuation`]).
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases at
//! the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod coupled;
pub mod diagnostics;
pub mod elliptic;
mod error;
mod krylov;
pub mod fields;
pub mod geometry;
pub mod lichnerowicz;
pub mod presets;
mod real;
pub mod rng;

pub use error::{Result, SolveError};
pub use real::{Exponents, Real};

pub type Grid = fields::Grid<f64>;
pub type ScalarField = fields::ScalarField<f64>;
pub type VectorField = fields::VectorField<f64>;
pub type SymTensorField = fields::SymTensorField<f64>;
pub type ConformalSeed = geometry::ConformalSeed<f64>;
pub type SplitField = elliptic::SplitField<f64>;
pub type Bracket = lichnerowicz::Bracket<f64>;
pub type StabilityReport = coupled::StabilityReport<f64>;
pub type ScaledState = continuation::ScaledState<f64>;
pub type BootstrapTable = coupled::BootstrapTable<f64>;
pub type ExactBootstrapTable = coupled::BootstrapTable<num_rational::BigRational>;
