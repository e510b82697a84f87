//! Linear elliptic solves on the torus: the scalar operator `-kappa Lap + m`
//! and the weighted vector Laplacian, with explicit handling of their kernels.
//!
//! Scalar solutions are carried as a constant plus a zero-mean fluctuation so
//! that a large constant part does not pollute the fluctuation through the
//! spectral Laplacian.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolveError};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::geometry::{check_eta, half_inverse, vector_laplacian_weighted};
use crate::krylov::pcg;
use crate::real::{Exponents, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveOptions<T> {
    /// Target relative residual.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for LinearSolveOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-11), max_iter: 10_000 }
    }
}

impl<T: Real> LinearSolveOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) || self.max_iter == 0 {
            return Err(SolveError::InvalidArgument("tol must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

/// Threshold on `|mean f| / max(1, |f|_2)` for the projected scalar problem.
pub const SOLVABILITY_TOL: f64 = 1e-10;

/// Scalar field split as `mean + fluct` with `fluct` of zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitField<T: Real> {
    pub mean: T,
    pub fluct: ScalarField<T>,
}

impl<T: Real> SplitField<T> {
    pub fn from_field(f: &ScalarField<T>) -> Self {
        let mean = f.mean();
        Self { mean, fluct: f.add_scalar(-mean) }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self { mean: c, fluct: ScalarField::zeros(grid) }
    }

    pub fn to_field(&self) -> ScalarField<T> {
        self.fluct.add_scalar(self.mean)
    }

    pub fn grid(&self) -> &Grid<T> {
        self.fluct.grid()
    }

    /// `-kappa Lap` of the represented field, using only the fluctuation.
    pub fn neg_kappa_laplacian(&self, kappa: T) -> ScalarField<T> {
        neg_kappa_laplacian(&self.fluct, kappa)
    }

    fn to_flat(&self) -> Vec<T> {
        let mut v = self.fluct.values().to_vec();
        v.push(self.mean);
        v
    }

    fn from_flat(grid: &Grid<T>, mut v: Vec<T>) -> Self {
        let mean = v.pop().expect("non-empty");
        Self { mean, fluct: ScalarField::from_raw(grid, v) }
    }
}

pub(crate) fn neg_kappa_laplacian<T: Real>(f: &ScalarField<T>, kappa: T) -> ScalarField<T> {
    let sym = f.grid().laplacian_symbol();
    crate::fields::apply_multiplier(f, |idx| -kappa * sym[idx])
}

/// Solves `-kappa Lap u + m u = f`, `kappa = 4(n-1)/(n-2)`.
///
/// With `m >= 0`, `m != 0` the solution is unique. With `m == 0` the
/// zero-mean solution of the projected problem is returned; `f` must then
/// have zero mean.
pub fn solve_scalar<T: Real>(
    m: &ScalarField<T>,
    f: &ScalarField<T>,
    opts: &LinearSolveOptions<T>,
) -> Result<ScalarField<T>> {
    Ok(solve_scalar_split(m, f, opts, None)?.to_field())
}

/// [`solve_scalar`] returning the split representation, optionally warm-started.
pub fn solve_scalar_split<T: Real>(
    m: &ScalarField<T>,
    f: &ScalarField<T>,
    opts: &LinearSolveOptions<T>,
    guess: Option<&SplitField<T>>,
) -> Result<SplitField<T>> {
    opts.validate()?;
    let grid = f.grid();
    if m.grid() != grid {
        return Err(crate::fields::FieldError::GridMismatch.into());
    }
    let kappa = Exponents::<T>::new(grid.n()).kappa;
    if m.min() < T::zero() {
        return Err(SolveError::InvalidArgument("scalar potential must be non-negative".into()));
    }
    if m.norm_linf() == T::zero() {
        return Ok(SplitField { mean: T::zero(), fluct: solve_projected(f, kappa)? });
    }
    let m_bar = m.mean();
    let lap = grid.laplacian_symbol().to_vec();
    let len = grid.len();
    let inv_len = T::one() / T::from_count(len);

    let split_residual = |field: Vec<T>| -> Vec<T> {
        let mean = crate::fields::neumaier(field.iter().copied()) * inv_len;
        let mut v: Vec<T> = field.into_iter().map(|x| x - mean).collect();
        v.push(mean);
        v
    };
    let apply = |x: &[T]| -> Vec<T> {
        let c = x[len];
        let fl = ScalarField::from_raw(grid, x[..len].to_vec());
        let lap_part = neg_kappa_laplacian(&fl, kappa);
        let out: Vec<T> = lap_part
            .values()
            .iter()
            .zip(m.values())
            .zip(&x[..len])
            .map(|((&l, &mi), &vi)| l + mi * (c + vi))
            .collect();
        split_residual(out)
    };
    let precond = |r: &[T]| -> Vec<T> {
        let mut spec = grid.forward(&r[..len]);
        spec[0] = Complex::new(T::zero(), T::zero());
        for (c, &l) in spec.iter_mut().zip(&lap).skip(1) {
            *c /= -kappa * l + m_bar;
        }
        let mut z = grid.inverse_real(spec);
        let zm = crate::fields::neumaier(z.iter().copied()) * inv_len;
        z.iter_mut().for_each(|v| *v -= zm);
        z.push(r[len] / m_bar);
        z
    };
    let dot = |a: &[T], b: &[T]| -> T {
        crate::fields::neumaier(a[..len].iter().zip(&b[..len]).map(|(&x, &y)| x * y)) * inv_len + a[len] * b[len]
    };
    let b = SplitField::from_field(f).to_flat();
    let x0 = guess.map_or_else(|| vec![T::zero(); len + 1], SplitField::to_flat);
    let out = pcg("scalar PCG", &b, x0, apply, precond, dot, opts.tol, opts.max_iter)?;
    Ok(SplitField::from_flat(grid, out.x))
}

/// Zero-mean solution of `-kappa Lap u = f`; `f` must have zero mean.
pub(crate) fn solve_projected<T: Real>(f: &ScalarField<T>, kappa: T) -> Result<ScalarField<T>> {
    let mean = f.mean();
    if mean.abs() > T::lit(SOLVABILITY_TOL) * T::one().max(f.norm_l2()) {
        return Err(SolveError::SolvabilityViolation { mean: mean.to_f64_lossy() });
    }
    Ok(invert_neg_kappa_laplacian(f, kappa))
}

/// Applies the inverse of `-kappa Lap` on zero-mean fields; the mean of `f` is dropped.
pub(crate) fn invert_neg_kappa_laplacian<T: Real>(f: &ScalarField<T>, kappa: T) -> ScalarField<T> {
    let sym = f.grid().laplacian_symbol();
    crate::fields::apply_multiplier(f, |idx| if idx == 0 { T::zero() } else { -T::one() / (kappa * sym[idx]) })
}

#[derive(Debug, Clone)]
pub struct VectorSolveResult<T: Real> {
    /// Zero-mean solution of the projected equation.
    pub w: VectorField<T>,
    /// Component means of the right-hand side, its part along the constant
    /// conformal Killing fields.
    pub obstruction: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
}

impl<T: Real> VectorSolveResult<T> {
    pub fn obstruction_norm(&self) -> T {
        self.obstruction.iter().map(|&o| o * o).sum::<T>().sqrt()
    }
}

/// Solves `Lap_L W = xi - P xi` where `P` removes the part of `xi` in the
/// cokernel (the constant fields, plus pure Nyquist modes of the grid).
pub fn solve_vector<T: Real>(
    xi: &VectorField<T>,
    eta: &ScalarField<T>,
    opts: &LinearSolveOptions<T>,
) -> Result<VectorSolveResult<T>> {
    solve_vector_from(xi, eta, opts, None)
}

pub fn solve_vector_from<T: Real>(
    xi: &VectorField<T>,
    eta: &ScalarField<T>,
    opts: &LinearSolveOptions<T>,
    guess: Option<&VectorField<T>>,
) -> Result<VectorSolveResult<T>> {
    opts.validate()?;
    check_eta(eta)?;
    let grid = xi.grid();
    let n = grid.n();
    let len = grid.len();
    let beta = half_inverse(eta);
    let beta_bar = beta.mean();
    let obstruction = xi.means();
    let rhs = project_range(xi);

    let to_field = |x: &[T]| -> VectorField<T> {
        VectorField::from_components(grid, x.chunks(len).map(|c| ScalarField::from_raw(grid, c.to_vec())).collect())
    };
    let flatten = |v: &VectorField<T>| -> Vec<T> { v.components().iter().flat_map(|c| c.values().to_vec()).collect() };

    // SPD form: -Lap_L
    let apply = |x: &[T]| -> Vec<T> { flatten(&vector_laplacian_weighted(&to_field(x), &beta).scale(-T::one())) };
    let alpha = T::one() - T::lit(2.0) / T::from_count(n);
    let precond = |r: &[T]| -> Vec<T> {
        let specs: Vec<Vec<Complex<T>>> = r.chunks(len).map(|c| grid.forward(c)).collect();
        let mut out = vec![vec![Complex::new(T::zero(), T::zero()); len]; n];
        let kernel = grid.derivative_kernel();
        let mut d = vec![T::zero(); n];
        for idx in 0..len {
            if kernel[idx] {
                continue;
            }
            let mut d2 = T::zero();
            for (a, da) in d.iter_mut().enumerate() {
                *da = grid.derivative_symbol(a)[idx];
                d2 += *da * *da;
            }
            let mut dr = Complex::new(T::zero(), T::zero());
            for a in 0..n {
                dr += specs[a][idx] * d[a];
            }
            let inv = T::one() / (beta_bar * d2);
            let coupling = alpha / (T::one() + alpha) / d2;
            for a in 0..n {
                out[a][idx] = (specs[a][idx] - dr * (coupling * d[a])) * inv;
            }
        }
        out.into_iter().flat_map(|s| grid.inverse_real(s)).collect()
    };
    let inv_len = T::one() / T::from_count(len);
    let dot = |a: &[T], b: &[T]| -> T { crate::fields::neumaier(a.iter().zip(b).map(|(&x, &y)| x * y)) * inv_len };

    let b: Vec<T> = flatten(&rhs.scale(-T::one()));
    let x0 = guess.map_or_else(|| vec![T::zero(); n * len], |g| flatten(&project_range(g)));
    let out = pcg("vector PCG", &b, x0, apply, precond, dot, opts.tol, opts.max_iter)?;
    let w = project_range(&to_field(&out.x));
    Ok(VectorSolveResult { w, obstruction, iterations: out.iterations, relative_residual: out.relative_residual })
}

/// Removes the derivative-kernel modes (constants and Nyquist corners) of each component.
pub(crate) fn project_range<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let kernel = v.grid().derivative_kernel();
    v.map_components(|c| crate::fields::apply_multiplier(c, |idx| if kernel[idx] { T::zero() } else { T::one() }))
}
