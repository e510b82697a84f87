use num_complex::Complex;

use super::{Grid, ScalarField, VectorField};
use crate::real::Real;

/// Spectral gradient; the Nyquist plane has zero derivative weight.
pub fn gradient<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let comps = (0..grid.n()).map(|axis| derivative_of_spectrum(grid, &spec, axis)).collect();
    VectorField::from_components(grid, comps)
}

/// `d f / d x^axis`.
pub fn partial<T: Real>(f: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    derivative_of_spectrum(grid, &spec, axis)
}

pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let sym = grid.laplacian_symbol();
    apply_multiplier(f, |idx| sym[idx])
}

/// Integral over the unit torus.
pub fn integrate<T: Real>(f: &ScalarField<T>) -> T {
    f.integrate()
}

/// Fourier coefficients normalized so that `f = sum_k c_k e^{2 pi i k.x}`.
pub fn spectral_coefficients<T: Real>(f: &ScalarField<T>) -> Vec<Complex<T>> {
    let scale = f.grid().cell_volume();
    f.grid().forward(f.values()).into_iter().map(|c| c * scale).collect()
}

fn derivative_of_spectrum<T: Real>(grid: &Grid<T>, spec: &[Complex<T>], axis: usize) -> ScalarField<T> {
    let sym = grid.derivative_symbol(axis);
    let out = spec.iter().zip(sym).map(|(c, &k)| Complex::new(-c.im * k, c.re * k)).collect();
    ScalarField::from_raw(grid, grid.inverse_real(out))
}

/// Applies a real Fourier multiplier given per linear mode index.
pub(crate) fn apply_multiplier<T: Real>(f: &ScalarField<T>, mult: impl Fn(usize) -> T) -> ScalarField<T> {
    let grid = f.grid();
    let mut spec = grid.forward(f.values());
    for (idx, c) in spec.iter_mut().enumerate() {
        *c *= mult(idx);
    }
    ScalarField::from_raw(grid, grid.inverse_real(spec))
}

/// Divergence of a vector field, `sum_a d_a V_a`, computed in one inverse transform.
#[allow(dead_code)]
pub(crate) fn vector_divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let grid = v.grid();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for axis in 0..grid.n() {
        let spec = grid.forward(v.component(axis).values());
        let sym = grid.derivative_symbol(axis);
        for ((a, c), &k) in acc.iter_mut().zip(&spec).zip(sym) {
            *a += Complex::new(-c.im * k, c.re * k);
        }
    }
    ScalarField::from_raw(grid, grid.inverse_real(acc))
}
