use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FieldError;
use crate::real::Real;

/// Uniform periodic grid on the unit-volume flat torus `[0,1)^n`.
///
/// Samples are stored row-major with axis 0 slowest. The grid owns the FFT
/// plans and the wavenumber tables, so cloning is cheap (one `Arc`).
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

struct GridInner<T: Real> {
    n: usize,
    m: usize,
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// `2*pi*k_a` per axis and linear index, Nyquist zeroed.
    deriv: Vec<Vec<T>>,
    /// `-(2*pi)^2 |k|^2` per linear index, Nyquist kept.
    lap: Vec<T>,
    /// Modes annihilated by every first derivative.
    kernel: Vec<bool>,
}

impl<T: Real> Grid<T> {
    /// Builds an `n`-dimensional grid with `m` points per axis.
    ///
    /// `n >= 3` and `m` even with `m >= 4`.
    pub fn new(n: usize, m: usize) -> Result<Self, FieldError> {
        if n < 3 {
            return Err(FieldError::InvalidGrid(format!("dimension n = {n} must be at least 3")));
        }
        if m < 4 || !m.is_multiple_of(2) {
            return Err(FieldError::InvalidGrid(format!(
                "points per axis m = {m} must be even and at least 4"
            )));
        }
        let len = m
            .checked_pow(n as u32)
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| FieldError::InvalidGrid(format!("grid {m}^{n} is too large")))?;

        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);

        let two_pi = T::lit(2.0) * T::PI();
        let half = m / 2;
        let mut deriv = vec![vec![T::zero(); len]; n];
        let mut lap = vec![T::zero(); len];
        let mut kernel = vec![true; len];
        for idx in 0..len {
            let mut rem = idx;
            let mut k2 = T::zero();
            for axis in (0..n).rev() {
                let digit = rem % m;
                rem /= m;
                let k = if digit < half { digit as f64 } else { digit as f64 - m as f64 };
                let w = two_pi * T::lit(k);
                k2 += w * w;
                if digit != half {
                    deriv[axis][idx] = w;
                }
                if digit != 0 && digit != half {
                    kernel[idx] = false;
                }
            }
            lap[idx] = -k2;
        }

        Ok(Self {
            inner: Arc::new(GridInner { n, m, len, forward, inverse, deriv, lap, kernel }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.inner.m
    }

    /// Total number of samples, `m^n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    /// Grid spacing `h = 1/m`.
    pub fn spacing(&self) -> T {
        T::one() / T::from_count(self.inner.m)
    }

    /// Quadrature weight of a single sample; the weights sum to one.
    pub fn cell_volume(&self) -> T {
        T::one() / T::from_count(self.inner.len)
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let m = self.inner.m;
        let mut out = vec![0; self.inner.n];
        let mut rem = idx;
        for axis in (0..self.inner.n).rev() {
            out[axis] = rem % m;
            rem /= m;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &d| acc * self.inner.m + d)
    }

    /// Coordinates of sample `idx` in `[0,1)^n`.
    pub fn coords(&self, idx: usize) -> Vec<T> {
        let h = self.spacing();
        self.multi_index(idx).into_iter().map(|d| T::from_count(d) * h).collect()
    }

    /// Index of the sample at `-x` (mod 1).
    pub fn reflected_index(&self, idx: usize) -> usize {
        let m = self.inner.m;
        let multi: Vec<usize> = self.multi_index(idx).into_iter().map(|d| (m - d) % m).collect();
        self.linear_index(&multi)
    }

    /// Spectral first-derivative multipliers for `axis` (Nyquist set to 0).
    pub fn derivative_symbol(&self, axis: usize) -> &[T] {
        &self.inner.deriv[axis]
    }

    /// Spectral Laplacian multipliers `-(2 pi |k|)^2`.
    pub fn laplacian_symbol(&self) -> &[T] {
        &self.inner.lap
    }

    /// Modes on which every discrete first derivative vanishes: the constant
    /// mode plus the pure-Nyquist corners.
    pub fn derivative_kernel(&self) -> &[bool] {
        &self.inner.kernel
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse transform (normalized by `1/len`), keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex<T>>) -> Vec<T> {
        self.transform(&mut spectrum, true);
        let scale = self.cell_volume();
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        let GridInner { n, m, len, .. } = *self.inner;
        debug_assert_eq!(data.len(), len);
        let plan = if inverse { &self.inner.inverse } else { &self.inner.forward };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];

        // last axis is contiguous
        plan.process_with_scratch(data, &mut scratch);

        let mut buf = Vec::new();
        let mut stride = m;
        for _axis in (0..n - 1).rev() {
            let block = m * stride;
            buf.resize(block, Complex::new(T::zero(), T::zero()));
            for chunk in data.chunks_mut(block) {
                for k in 0..m {
                    let row = &chunk[k * stride..(k + 1) * stride];
                    for (s, v) in row.iter().enumerate() {
                        buf[s * m + k] = *v;
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for k in 0..m {
                    let row = &mut chunk[k * stride..(k + 1) * stride];
                    for (s, v) in row.iter_mut().enumerate() {
                        *v = buf[s * m + k];
                    }
                }
            }
            stride *= m;
        }
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.m == other.inner.m
    }
}

impl<T: Real> Eq for Grid<T> {}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.inner.n).field("m", &self.inner.m).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::<f64>::new(2, 8).is_err());
        assert!(Grid::<f64>::new(3, 7).is_err());
        assert!(Grid::<f64>::new(3, 2).is_err());
        assert!(Grid::<f64>::new(3, 8).is_ok());
    }

    #[test]
    fn transform_round_trip() {
        let g = Grid::<f64>::new(3, 6).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let back = g.inverse_real(g.forward(&vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn wavenumbers_are_symmetric() {
        let g = Grid::<f64>::new(3, 8).unwrap();
        for idx in 0..g.len() {
            let r = g.reflected_index(idx);
            for axis in 0..3 {
                let a = g.derivative_symbol(axis)[idx];
                let b = g.derivative_symbol(axis)[r];
                assert_eq!(a, -b);
            }
            assert_eq!(g.laplacian_symbol()[idx], g.laplacian_symbol()[r]);
        }
        let kernel = g.derivative_kernel().iter().filter(|&&k| k).count();
        assert_eq!(kernel, 8);
    }

    #[test]
    fn cell_volumes_sum_to_one() {
        let g = Grid::<f64>::new(3, 8).unwrap();
        let total: f64 = (0..g.len()).map(|_| g.cell_volume()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
