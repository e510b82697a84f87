use std::ops::{Add, Mul, Neg, Sub};

use super::{lp_mean, neumaier, FieldError, Grid};
use crate::real::Real;

/// Real samples of a function on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Skips the finiteness scan; used on solver internals.
    pub(crate) fn from_raw(grid: &Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        self.map(|v| v + s)
    }

    /// Integral over the torus, i.e. the mean value.
    pub fn integrate(&self) -> T {
        neumaier(self.values.iter().copied()) / T::from_count(self.values.len())
    }

    pub fn mean(&self) -> T {
        self.integrate()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn norm_linf(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn norm_l2(&self) -> T {
        self.norm_lp(T::lit(2.0))
    }

    /// `L^p` norm for the unit-volume measure, `p >= 1`.
    pub fn norm_lp(&self, p: T) -> T {
        lp_mean(self.values.iter().copied(), p)
    }

    /// `f - mean(f)`.
    pub fn zero_mean(&self) -> Self {
        let mu = self.mean();
        self.add_scalar(-mu)
    }

    /// The field composed with `x -> -x`.
    pub fn reflect(&self) -> Self {
        let values = (0..self.values.len()).map(|i| self.values[self.grid.reflected_index(i)]).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// Largest deviation from evenness, relative to the sup norm.
    pub fn parity_defect(&self) -> T {
        let scale = self.norm_linf();
        if scale == T::zero() {
            return T::zero();
        }
        (self - &self.reflect()).norm_linf() / scale
    }

    /// Samples at every other point along each axis (halved resolution).
    pub fn restrict_by_two(&self, coarse: &Grid<T>) -> Result<Self, FieldError> {
        if coarse.n() != self.grid.n() || coarse.m() * 2 != self.grid.m() {
            return Err(FieldError::GridMismatch);
        }
        let values = (0..coarse.len())
            .map(|i| {
                let fine: Vec<usize> = coarse.multi_index(i).into_iter().map(|d| 2 * d).collect();
                self.values[self.grid.linear_index(&fine)]
            })
            .collect();
        Ok(Self { grid: coarse.clone(), values })
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a, T: Real> $trait<&'a ScalarField<T>> for &'a ScalarField<T> {
            type Output = ScalarField<T>;
            fn $method(self, rhs: &'a ScalarField<T>) -> ScalarField<T> {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl<T: Real> $trait<ScalarField<T>> for ScalarField<T> {
            type Output = ScalarField<T>;
            fn $method(self, rhs: ScalarField<T>) -> ScalarField<T> {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl<T: Real> Neg for &ScalarField<T> {
    type Output = ScalarField<T>;
    fn neg(self) -> ScalarField<T> {
        self.map(|v| -v)
    }
}
