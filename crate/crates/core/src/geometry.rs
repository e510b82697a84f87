//! Tensor algebra of the conformal method on the flat torus.

use num_complex::Complex;

use crate::elliptic::{solve_vector, LinearSolveOptions};
use crate::error::{Result, SolveError};
use crate::fields::{sym_index, Grid, ScalarField, SymTensorField, VectorField};
use crate::real::Real;

/// Free data of the conformal method: mean curvature, TT tensor and lapse weight.
#[derive(Debug, Clone)]
pub struct ConformalSeed<T: Real> {
    pub tau: ScalarField<T>,
    pub sigma: SymTensorField<T>,
    pub eta: ScalarField<T>,
    /// Lebesgue exponent of the metric regularity, `p > n`.
    pub p: T,
    /// Sobolev exponent of `tau`, `t > 1`.
    pub t: T,
    /// All data even under `x -> -x`.
    pub parity: bool,
}

/// Absolute tolerances for the TT check, scaled by `max(1, |sigma|_inf)`.
pub const TRACE_TOL: f64 = 1e-10;
pub const DIVERGENCE_TOL: f64 = 1e-8;
pub const PARITY_TOL: f64 = 1e-12;

impl<T: Real> ConformalSeed<T> {
    pub fn new(
        tau: ScalarField<T>,
        sigma: SymTensorField<T>,
        eta: ScalarField<T>,
        p: T,
        t: T,
        parity: bool,
    ) -> Result<Self> {
        let seed = Self { tau, sigma, eta, p, t, parity };
        seed.validate()?;
        Ok(seed)
    }

    pub fn grid(&self) -> &Grid<T> {
        self.tau.grid()
    }

    pub fn n(&self) -> usize {
        self.grid().n()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        if self.sigma.grid() != grid || self.eta.grid() != grid {
            return Err(crate::fields::FieldError::GridMismatch.into());
        }
        if !(self.tau.is_finite() && self.sigma.is_finite() && self.eta.is_finite()) {
            return Err(crate::fields::FieldError::NonFinite.into());
        }
        check_eta(&self.eta)?;
        let nf = T::from_count(self.n());
        if !(self.p > nf) {
            return Err(SolveError::InvalidSeed(format!("p = {} must exceed n = {}", self.p, self.n())));
        }
        if !(self.t > T::one()) {
            return Err(SolveError::InvalidSeed(format!("t = {} must exceed 1", self.t)));
        }
        let scale = T::one().max(self.sigma.norm_linf());
        let tr = self.sigma.trace().norm_linf();
        if tr > T::lit(TRACE_TOL) * scale {
            return Err(SolveError::InvalidSeed(format!("sigma is not trace-free (|tr| = {tr:e})")));
        }
        let div = divergence(&self.sigma).norm_l2();
        if div > T::lit(DIVERGENCE_TOL) * scale {
            return Err(SolveError::InvalidSeed(format!("sigma is not divergence-free (|div| = {div:e})")));
        }
        if self.parity {
            let tol = T::lit(PARITY_TOL);
            let sigma_defect = self.sigma.sub(&self.sigma.reflect()).norm_linf() / scale;
            if self.tau.parity_defect() > tol || self.eta.parity_defect() > tol || sigma_defect > tol {
                return Err(SolveError::InvalidSeed("parity mode requires even tau, eta and sigma".into()));
            }
        }
        Ok(())
    }

    /// Same seed with `sigma` replaced; `sigma` is trusted to be TT.
    pub fn with_sigma(&self, sigma: SymTensorField<T>) -> Self {
        Self { sigma, ..self.clone() }
    }

    /// `x = |sigma|_{L^2}`.
    pub fn sigma_norm(&self) -> T {
        self.sigma.norm_l2()
    }

    /// `(n-1)/n int tau^2`, zero only for vanishing mean curvature.
    pub fn tau_mass(&self) -> T {
        let c = crate::real::Exponents::<T>::new(self.n()).tau_coef;
        c * self.tau.map(|v| v * v).integrate()
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.tau.norm_linf() == T::zero() {
            return Err(SolveError::DegenerateData("tau vanishes identically".into()));
        }
        if self.sigma.norm_linf() == T::zero() {
            return Err(SolveError::DegenerateData("sigma vanishes identically".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_eta<T: Real>(eta: &ScalarField<T>) -> Result<()> {
    let min = eta.min();
    if !(min > T::zero()) {
        return Err(SolveError::NonPositiveEta { min_eta: min.to_f64_lossy() });
    }
    Ok(())
}

fn zero_spectrum<T: Real>(len: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::zero(), T::zero()); len]
}

/// `i k c` for a real multiplier `k`.
#[inline]
fn ik<T: Real>(c: Complex<T>, k: T) -> Complex<T> {
    Complex::new(-c.im * k, c.re * k)
}

/// `(LW)_ij = d_i W_j + d_j W_i - (2/n) div W delta_ij`.
pub fn conformal_killing<T: Real>(w: &VectorField<T>) -> SymTensorField<T> {
    let grid = w.grid();
    let n = grid.n();
    let len = grid.len();
    let specs: Vec<Vec<Complex<T>>> = (0..n).map(|a| grid.forward(w.component(a).values())).collect();
    let mut div = zero_spectrum::<T>(len);
    for (a, spec) in specs.iter().enumerate() {
        let sym = grid.derivative_symbol(a);
        for ((d, &c), &k) in div.iter_mut().zip(spec).zip(sym) {
            *d += ik(c, k);
        }
    }
    let two_over_n = T::lit(2.0) / T::from_count(n);
    let mut comps = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let (si, sj) = (grid.derivative_symbol(i), grid.derivative_symbol(j));
            let out: Vec<Complex<T>> = (0..len)
                .map(|idx| {
                    let mut v = ik(specs[j][idx], si[idx]) + ik(specs[i][idx], sj[idx]);
                    if i == j {
                        v -= div[idx] * two_over_n;
                    }
                    v
                })
                .collect();
            comps.push(ScalarField::from_raw(grid, grid.inverse_real(out)));
        }
    }
    SymTensorField::from_components(grid, comps)
}

/// `(div S)_j = sum_i d_i S_ij`.
pub fn divergence<T: Real>(s: &SymTensorField<T>) -> VectorField<T> {
    let grid = s.grid();
    let n = grid.n();
    let len = grid.len();
    let specs: Vec<Vec<Complex<T>>> = s.components().iter().map(|c| grid.forward(c.values())).collect();
    let comps = (0..n)
        .map(|j| {
            let mut acc = zero_spectrum::<T>(len);
            for i in 0..n {
                let spec = &specs[sym_index(i, j, n)];
                let sym = grid.derivative_symbol(i);
                for ((a, &c), &k) in acc.iter_mut().zip(spec).zip(sym) {
                    *a += ik(c, k);
                }
            }
            ScalarField::from_raw(grid, grid.inverse_real(acc))
        })
        .collect();
    VectorField::from_components(grid, comps)
}

/// `Lap_L W = div(LW / (2 eta))`.
pub fn vector_laplacian_apply<T: Real>(w: &VectorField<T>, eta: &ScalarField<T>) -> Result<VectorField<T>> {
    check_eta(eta)?;
    Ok(vector_laplacian_weighted(w, &half_inverse(eta)))
}

/// `1 / (2 eta)`.
pub(crate) fn half_inverse<T: Real>(eta: &ScalarField<T>) -> ScalarField<T> {
    eta.map(|e| T::one() / (T::lit(2.0) * e))
}

/// `div(beta LW)` for a precomputed weight `beta = 1/(2 eta)`.
pub(crate) fn vector_laplacian_weighted<T: Real>(w: &VectorField<T>, beta: &ScalarField<T>) -> VectorField<T> {
    divergence(&conformal_killing(w).mul_scalar_field(beta))
}

/// York projection: `S0 - LV/(2 eta)` with `Lap_L V = div S0` and `S0` the
/// trace-free part of `S`.
pub fn tt_project<T: Real>(
    s: &SymTensorField<T>,
    eta: &ScalarField<T>,
    opts: &LinearSolveOptions<T>,
) -> Result<SymTensorField<T>> {
    let s0 = s.trace_free();
    let rhs = divergence(&s0);
    let v = solve_vector(&rhs, eta, opts)?.w;
    let beta = half_inverse(eta);
    Ok(s0.sub(&conformal_killing(&v).mul_scalar_field(&beta)).trace_free())
}
