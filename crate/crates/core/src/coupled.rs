//! Picard iteration of the map `Psi` for small TT tensors, its invariant set,
//! the constants that certify stability of that set, and the exponent
//! bootstrap.

mod bootstrap;
mod stability;

use serde::{Deserialize, Serialize};

use crate::diagnostics::energy_identity_residual;
use crate::elliptic::{solve_vector_from, LinearSolveOptions, SplitField};
use crate::error::{Result, SolveError};
use crate::fields::{gradient, ScalarField, VectorField};
use crate::geometry::{conformal_killing, half_inverse, ConformalSeed};
use crate::lichnerowicz::{solvability_identity_residual, solve_lichnerowicz_from, LichnerowiczOptions};
use crate::real::{Exponents, Real};

pub use bootstrap::{bootstrap_exponents, BootstrapRow, BootstrapTable, Exact};
pub use stability::{stability_params, StabilityOptions, StabilityReport};

/// `E_tau[f] = int tau^2 f / int tau^2`.
pub fn tau_expectation<T: Real>(f: &ScalarField<T>, tau: &ScalarField<T>) -> Result<T> {
    let w = tau.map(|t| t * t).integrate();
    if !(w > T::zero()) {
        return Err(SolveError::DegenerateData("tau vanishes identically".into()));
    }
    Ok(f.zip_map(tau, |v, t| t * t * v).integrate() / w)
}

/// `u = c + psi` with `c = E_tau[u]` and `E_tau[psi] = 0`.
#[derive(Debug, Clone)]
pub struct TauDecomposition<T: Real> {
    pub c: T,
    pub psi: ScalarField<T>,
}

impl<T: Real> TauDecomposition<T> {
    pub fn new(u: &ScalarField<T>, tau: &ScalarField<T>) -> Result<Self> {
        let c = tau_expectation(u, tau)?;
        Ok(Self { c, psi: u.add_scalar(-c) })
    }

    pub fn reconstruct(&self) -> ScalarField<T> {
        self.psi.add_scalar(self.c)
    }
}

/// The set `{u >= 0, E_tau[u] <= c_max, |u - E_tau[u]|_{L^(N/2+1)} <= r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet<T> {
    pub c_max: T,
    pub r: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub nonnegative: bool,
    pub mean: f64,
    pub deviation: f64,
    pub inside: bool,
}

impl<T: Real> AdmissibleSet<T> {
    pub fn new(c_max: T, r: T) -> Result<Self> {
        if !(c_max > T::zero() && r > T::zero()) {
            return Err(SolveError::InvalidArgument("c_max and r must be positive".into()));
        }
        Ok(Self { c_max, r })
    }

    pub fn membership(&self, u: &ScalarField<T>, tau: &ScalarField<T>) -> Result<Membership> {
        let ex = Exponents::<T>::new(u.grid().n());
        let d = TauDecomposition::new(u, tau)?;
        let deviation = d.psi.norm_lp(ex.half_n_plus_one());
        let nonnegative = u.min() >= T::zero();
        Ok(Membership {
            nonnegative,
            mean: d.c.to_f64_lossy(),
            deviation: deviation.to_f64_lossy(),
            inside: nonnegative && d.c <= self.c_max && deviation <= self.r,
        })
    }

    pub fn contains(&self, u: &ScalarField<T>, tau: &ScalarField<T>) -> Result<bool> {
        Ok(self.membership(u, tau)?.inside)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions<T> {
    pub lichnerowicz: LichnerowiczOptions<T>,
    pub linear: LinearSolveOptions<T>,
    /// Relative change of `u` in the `L^{p0}` norm at which iteration stops.
    pub fixpoint_tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            lichnerowicz: LichnerowiczOptions::default(),
            linear: LinearSolveOptions::default(),
            fixpoint_tol: T::lit(1e-12),
            max_iter: 200,
        }
    }
}

/// Obstruction above which a warning is logged outside parity mode.
pub const OBSTRUCTION_WARN: f64 = 1e-8;
/// Obstruction bound in parity mode.
pub const PARITY_OBSTRUCTION_TOL: f64 = 1e-10;

/// One evaluation of `Psi`.
#[derive(Debug, Clone)]
pub struct PsiOutput<T: Real> {
    pub u_next: ScalarField<T>,
    pub phi: SplitField<T>,
    pub w: VectorField<T>,
    pub decomposition: TauDecomposition<T>,
    pub obstruction: Vec<T>,
    pub lichnerowicz_residual: T,
    pub newton_iterations: usize,
    /// Energy identity defect relative to `int |sigma + LW/(2 eta)|^2`.
    pub energy_residual: T,
    /// `|c' int tau^2 psi'|` relative to `c'^2 int tau^2`.
    pub cross_term: T,
    /// Solvability identity defect relative to `(n-1)/n int tau^2 phi^(N-1)`.
    pub solvability_residual: T,
    /// `int |sigma + LW/(2 eta)|^2`.
    pub source_energy: T,
}

impl<T: Real> PsiOutput<T> {
    pub fn obstruction_norm(&self) -> T {
        self.obstruction.iter().map(|&o| o * o).sum::<T>().sqrt()
    }
}

/// `|sigma + LW/(2 eta)|` pointwise.
pub fn source_magnitude<T: Real>(seed: &ConformalSeed<T>, w: &VectorField<T>) -> ScalarField<T> {
    let b = seed.sigma.add(&conformal_killing(w).mul_scalar_field(&half_inverse(&seed.eta)));
    b.norm_sq().map(|v| v.sqrt())
}

/// Evaluates `Psi(u)`: vector solve, Lichnerowicz solve, `phi^N`.
pub fn psi_map<T: Real>(u: &ScalarField<T>, seed: &ConformalSeed<T>, opts: &FixedPointOptions<T>) -> Result<PsiOutput<T>> {
    psi_map_warm(u, seed, opts, None, None)
}

/// [`psi_map`] with warm starts for the vector and Lichnerowicz solves.
pub fn psi_map_warm<T: Real>(
    u: &ScalarField<T>,
    seed: &ConformalSeed<T>,
    opts: &FixedPointOptions<T>,
    w_guess: Option<&VectorField<T>>,
    phi_guess: Option<&SplitField<T>>,
) -> Result<PsiOutput<T>> {
    if u.min() < T::zero() {
        return Err(SolveError::InvalidArgument("Psi is defined on non-negative functions".into()));
    }
    let ex = Exponents::<T>::new(seed.n());
    let xi = gradient(&seed.tau).mul_scalar_field(&u.scale(ex.tau_coef));
    let vec = solve_vector_from(&xi, &seed.eta, &opts.linear, w_guess)?;
    let obstruction_norm = vec.obstruction_norm();
    let xi_scale = T::one().max(xi.norm_l2());
    if seed.parity && obstruction_norm > T::lit(PARITY_OBSTRUCTION_TOL) * xi_scale {
        log::warn!("parity seed produced a kernel obstruction of {obstruction_norm:e}");
    } else if !seed.parity && obstruction_norm > T::lit(OBSTRUCTION_WARN) {
        log::warn!("vector equation has a kernel obstruction of {obstruction_norm:e}; solving the projected equation");
    }
    let w = vec.w;
    let a = source_magnitude(seed, &w);
    let lich = solve_lichnerowicz_from(&seed.tau, &a, phi_guess, &opts.lichnerowicz)?;
    let phi = lich.phi_field();
    let u_next = phi.map(|p| p.powf(ex.big_n));
    let decomposition = TauDecomposition::new(&u_next, &seed.tau)?;

    let source_energy = a.map(|v| v * v).integrate();
    let energy = energy_identity_residual(&phi, &w, seed);
    let tau_sq = seed.tau.map(|t| t * t);
    let cross = (decomposition.c * decomposition.psi.zip_map(&tau_sq, |p, t| p * t).integrate()).abs();
    let cross_scale = decomposition.c * decomposition.c * tau_sq.integrate();
    let solv = solvability_identity_residual(&phi, &seed.tau, &a);
    let solv_scale = ex.tau_coef * phi.zip_map(&tau_sq, |p, t| t * p.powf(ex.big_n - T::one())).integrate();

    Ok(PsiOutput {
        u_next,
        phi: lich.phi,
        w,
        decomposition,
        obstruction: vec.obstruction,
        lichnerowicz_residual: lich.relative_residual,
        newton_iterations: lich.newton_iterations,
        energy_residual: energy.abs() / source_energy,
        cross_term: cross / cross_scale,
        solvability_residual: solv.abs() / solv_scale,
        source_energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `E_tau[Psi(u)]`.
    pub c: f64,
    /// `|psi'|_{L^(N/2+1)}`.
    pub psi_norm: f64,
    /// Relative `L^{p0}` change of `u`.
    pub step: f64,
    pub obstruction: f64,
    pub newton_iterations: usize,
    pub lichnerowicz_residual: f64,
    pub energy_residual: f64,
    pub cross_term: f64,
    pub solvability_residual: f64,
    pub in_set: Option<bool>,
    pub estimate_chain: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct FixedPointResult<T: Real> {
    pub phi: SplitField<T>,
    pub w: VectorField<T>,
    pub u: ScalarField<T>,
    pub records: Vec<IterationRecord>,
}

impl<T: Real> FixedPointResult<T> {
    pub fn phi_field(&self) -> ScalarField<T> {
        self.phi.to_field()
    }
}

/// Iterates `Psi` from the constant `x / A0` until the relative change
/// of `u` drops below `opts.fixpoint_tol`.
///
/// With a feasible `guard`, every iterate is checked against its admissible
/// set and leaving it is reported as [`SolveError::SetEscape`].
pub fn run_fixed_point<T: Real>(
    seed: &ConformalSeed<T>,
    guard: Option<&StabilityReport<T>>,
    opts: &FixedPointOptions<T>,
) -> Result<FixedPointResult<T>> {
    seed.require_nondegenerate()?;
    let ex = Exponents::<T>::new(seed.n());
    let x = seed.sigma_norm();
    let a0 = seed.tau_mass().sqrt();
    let p_norm = stability::fixed_point_exponent(seed);
    let beta = ex.half_n_plus_one();
    let set = match guard {
        Some(report) if report.feasible => Some(AdmissibleSet::new(report.c_max, report.r)?),
        Some(_) => {
            log::warn!("stability constants are not feasible; iterating without set checks");
            None
        }
        None => None,
    };

    let mut u = ScalarField::constant(seed.grid(), x / a0);
    let mut w_guess: Option<VectorField<T>> = None;
    let mut phi_guess: Option<SplitField<T>> = None;
    let mut records = Vec::new();
    for iteration in 1..=opts.max_iter {
        let out = psi_map_warm(&u, seed, opts, w_guess.as_ref(), phi_guess.as_ref())?;
        let diff = (&out.u_next - &u).norm_lp(p_norm) / out.u_next.norm_lp(p_norm);

        let in_set = set.as_ref().map(|s| s.contains(&out.u_next, &seed.tau)).transpose()?;
        let estimate_chain = guard.filter(|g| g.feasible).map(|g| {
            g.estimate_chain_holds(out.decomposition.c, out.decomposition.psi.norm_lp(beta))
        });
        records.push(IterationRecord {
            iteration,
            c: out.decomposition.c.to_f64_lossy(),
            psi_norm: out.decomposition.psi.norm_lp(beta).to_f64_lossy(),
            step: diff.to_f64_lossy(),
            obstruction: out.obstruction_norm().to_f64_lossy(),
            newton_iterations: out.newton_iterations,
            lichnerowicz_residual: out.lichnerowicz_residual.to_f64_lossy(),
            energy_residual: out.energy_residual.to_f64_lossy(),
            cross_term: out.cross_term.to_f64_lossy(),
            solvability_residual: out.solvability_residual.to_f64_lossy(),
            in_set,
            estimate_chain,
        });
        log::debug!("fixed point iteration {iteration}: step {diff:e}, c = {}", out.decomposition.c);
        if in_set == Some(false) {
            return Err(SolveError::SetEscape {
                iteration,
                detail: format!("{:?}", set.as_ref().map(|s| s.membership(&out.u_next, &seed.tau))),
            });
        }
        if diff <= opts.fixpoint_tol {
            return Ok(FixedPointResult { phi: out.phi, w: out.w, u: out.u_next, records });
        }
        u = out.u_next;
        w_guess = Some(out.w);
        phi_guess = Some(out.phi);
    }
    Err(SolveError::NoConvergence {
        solver: "fixed-point iteration",
        iterations: opts.max_iter,
        residual: records.last().map_or(f64::NAN, |r| r.step),
    })
}
