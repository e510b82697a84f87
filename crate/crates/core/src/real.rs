use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar used by every field and solver in this crate.
///
/// Implemented for `f32` and `f64`. The tolerances used throughout the
/// solvers assume `f64`; `f32` works for smoke tests and coarse runs.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the two supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Dimension-dependent constants of the conformal method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents<T> {
    pub n: usize,
    /// Critical exponent `2n/(n-2)`.
    pub big_n: T,
    /// Conformal Laplacian coefficient `4(n-1)/(n-2)`.
    pub kappa: T,
    /// `(n-1)/n`.
    pub tau_coef: T,
}

impl<T: Real> Exponents<T> {
    pub fn new(n: usize) -> Self {
        let nf = T::from_count(n);
        let one = T::one();
        let two = T::lit(2.0);
        Self {
            n,
            big_n: two * nf / (nf - two),
            kappa: T::lit(4.0) * (nf - one) / (nf - two),
            tau_coef: (nf - one) / nf,
        }
    }

    /// `t0 = 2n(n-1)/(3n-2)`, the threshold regularity exponent for `tau`.
    pub fn t0(&self) -> T {
        let nf = T::from_count(self.n);
        T::lit(2.0) * nf * (nf - T::one()) / (T::lit(3.0) * nf - T::lit(2.0))
    }

    /// `N/2 + 1`, the Lebesgue exponent of the admissible set.
    pub fn half_n_plus_one(&self) -> T {
        self.big_n / T::lit(2.0) + T::one()
    }
}
