//! Independent checks of computed solutions: constraint residuals of the
//! reconstructed initial data, integral identities and the elementary
//! inequalities behind the stability estimates.

use serde::Serialize;

use crate::coupled::{source_magnitude, tau_expectation};
use crate::elliptic::SplitField;
use crate::error::{Result, SolveError};
use crate::fields::{gradient, ScalarField, SymTensorField, VectorField};
use crate::geometry::{conformal_killing, divergence, half_inverse, vector_laplacian_apply, ConformalSeed};
use crate::lichnerowicz::lichnerowicz_residual;
use crate::real::{Exponents, Real};
use crate::rng::BandLimited;

fn require_positive<T: Real>(phi: &ScalarField<T>) -> Result<()> {
    let min = phi.min();
    if min > T::zero() {
        Ok(())
    } else {
        Err(SolveError::PositivityLoss { min: min.to_f64_lossy() })
    }
}

/// Physical initial data `(g_hat, K_hat)`.
#[derive(Debug, Clone)]
pub struct InitialData<T: Real> {
    pub ghat: SymTensorField<T>,
    pub khat: SymTensorField<T>,
}

/// `g_hat = phi^(N-2) g`, `K_hat = (tau/n) g_hat + phi^(-2) (sigma + LW/(2 eta))`.
pub fn reconstruct_initial_data<T: Real>(
    phi: &ScalarField<T>,
    w: &VectorField<T>,
    seed: &ConformalSeed<T>,
) -> Result<InitialData<T>> {
    require_positive(phi)?;
    let n = seed.n();
    let ex = Exponents::<T>::new(n);
    let grid = seed.grid();
    let conf = phi.map(|p| p.powf(ex.big_n - T::lit(2.0)));
    let ghat = SymTensorField::from_fn(grid, |i, j, _| if i == j { T::one() } else { T::zero() }).mul_scalar_field(&conf);
    let b = seed.sigma.add(&conformal_killing(w).mul_scalar_field(&half_inverse(&seed.eta)));
    let khat = ghat
        .mul_scalar_field(&seed.tau.scale(T::one() / T::from_count(n)))
        .add(&b.mul_scalar_field(&phi.map(|p| T::one() / (p * p))));
    Ok(InitialData { ghat, khat })
}

impl<T: Real> InitialData<T> {
    /// `g_hat^{ij} K_hat_ij`, using that `g_hat` is conformally flat.
    pub fn mean_curvature(&self) -> ScalarField<T> {
        let inv = self.ghat.get(0, 0).map(|g| T::one() / g);
        self.khat.trace().zip_map(&inv, |k, i| k * i)
    }

    /// `|K_hat|^2` measured with `g_hat`.
    pub fn khat_norm_sq(&self) -> ScalarField<T> {
        let inv = self.ghat.get(0, 0).map(|g| T::one() / g);
        self.khat.norm_sq().zip_map(&inv, |k, i| k * i * i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintResiduals<T> {
    /// `|Scal_ghat + (tr K_hat)^2 - |K_hat|^2|_{L^2}`.
    pub hamiltonian_norm: T,
    /// `|(tr K_hat)^2|_{L^2} + ||K_hat|^2|_{L^2}`, the size of the terms that cancel.
    pub hamiltonian_scale: T,
    /// `|div(sigma + LW/(2 eta)) - (n-1)/n phi^N grad tau|_{L^2}`.
    pub momentum_norm: T,
    /// The momentum constraint is evaluated in conformal variables.
    pub conformal_form: bool,
}

/// Constraint residuals of the data reconstructed from `(phi, W)`.
///
/// The scalar curvature uses `Scal_ghat = phi^(1-N) (-kappa Lap phi)` for the
/// flat background.
pub fn constraint_residuals<T: Real>(
    phi: &ScalarField<T>,
    w: &VectorField<T>,
    seed: &ConformalSeed<T>,
) -> Result<ConstraintResiduals<T>> {
    let data = reconstruct_initial_data(phi, w, seed)?;
    let ex = Exponents::<T>::new(seed.n());
    let lap = SplitField::from_field(phi).neg_kappa_laplacian(ex.kappa);
    let scal = lap.zip_map(phi, |l, p| l * p.powf(T::one() - ex.big_n));
    let tr = data.mean_curvature();
    let k2 = data.khat_norm_sq();
    let ham = ScalarField::from_raw(
        seed.grid(),
        scal.values().iter().zip(tr.values()).zip(k2.values()).map(|((&s, &t), &k)| s + t * t - k).collect(),
    );

    let b = seed.sigma.add(&conformal_killing(w).mul_scalar_field(&half_inverse(&seed.eta)));
    let source = gradient(&seed.tau).mul_scalar_field(&phi.map(|p| ex.tau_coef * p.powf(ex.big_n)));
    let mom = divergence(&b).sub(&source);
    Ok(ConstraintResiduals {
        hamiltonian_norm: ham.norm_l2(),
        hamiltonian_scale: tr.map(|t| t * t).norm_l2() + k2.norm_l2(),
        momentum_norm: mom.norm_l2(),
        conformal_form: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemResiduals<T> {
    /// `L^2` norm of the Lichnerowicz residual.
    pub lichnerowicz_norm: T,
    /// `L^2` norm of `Lap_L W - (n-1)/n phi^N grad tau`.
    pub vector_norm: T,
}

/// Residuals of the coupled system itself at `(phi, W)`.
pub fn system_residuals<T: Real>(
    phi: &ScalarField<T>,
    w: &VectorField<T>,
    seed: &ConformalSeed<T>,
) -> Result<SystemResiduals<T>> {
    require_positive(phi)?;
    let ex = Exponents::<T>::new(seed.n());
    let a = source_magnitude(seed, w);
    let lich = lichnerowicz_residual(&SplitField::from_field(phi), &seed.tau, &a);
    let source = gradient(&seed.tau).mul_scalar_field(&phi.map(|p| ex.tau_coef * p.powf(ex.big_n)));
    let vec = vector_laplacian_apply(w, &seed.eta)?.sub(&source);
    Ok(SystemResiduals { lichnerowicz_norm: lich.norm_l2(), vector_norm: vec.norm_l2() })
}

/// `(3n-2)/(n-1) int |d phi^(N/2+1)|^2 + (n-1)/n int tau^2 phi^(2N) - int |sigma + LW/(2 eta)|^2`.
pub fn energy_identity_residual<T: Real>(phi: &ScalarField<T>, w: &VectorField<T>, seed: &ConformalSeed<T>) -> T {
    let n = T::from_count(seed.n());
    let ex = Exponents::<T>::new(seed.n());
    let lifted = phi.map(|p| p.powf(ex.half_n_plus_one()));
    let grad_energy = gradient(&lifted).pointwise_norm().map(|v| v * v).integrate();
    let potential = phi.zip_map(&seed.tau, |p, t| t * t * p.powf(T::lit(2.0) * ex.big_n)).integrate();
    let source = source_magnitude(seed, w).map(|v| v * v).integrate();
    (T::lit(3.0) * n - T::lit(2.0)) / (n - T::one()) * grad_energy + ex.tau_coef * potential - source
}

/// Smallest margin found over a sample set, with the sample realizing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport<T> {
    pub samples: usize,
    pub min_margin: T,
    pub argmin: Vec<T>,
}

impl<T: Real> MarginReport<T> {
    fn fold(items: impl Iterator<Item = (T, Vec<T>)>) -> Self {
        let mut report = Self { samples: 0, min_margin: T::infinity(), argmin: Vec::new() };
        for (margin, at) in items {
            report.samples += 1;
            if margin < report.min_margin || margin.is_nan() {
                report.min_margin = margin;
                report.argmin = at;
            }
        }
        report
    }
}

/// `alpha |x-1| + |x-1|^alpha - |x^alpha - 1|`.
pub fn scalar_inequality_margin<T: Real>(x: T, alpha: T) -> T {
    let d = (x - T::one()).abs();
    alpha * d + d.powf(alpha) - (x.powf(alpha) - T::one()).abs()
}

/// `alpha b^(alpha-1) |a-b| + |a-b|^alpha - |a^alpha - b^alpha|`.
pub fn homogeneous_inequality_margin<T: Real>(a: T, b: T, alpha: T) -> T {
    let d = (a - b).abs();
    alpha * b.powf(alpha - T::one()) * d + d.powf(alpha) - (a.powf(alpha) - b.powf(alpha)).abs()
}

/// Minimum of [`scalar_inequality_margin`] over `(x, alpha)` samples.
pub fn check_pointwise_inequality<T: Real>(samples: &[(T, T)]) -> MarginReport<T> {
    MarginReport::fold(samples.iter().map(|&(x, alpha)| (scalar_inequality_margin(x, alpha), vec![x, alpha])))
}

/// Minimum of [`homogeneous_inequality_margin`] over `(a, b, alpha)` samples.
pub fn check_homogeneous_inequality<T: Real>(samples: &[(T, T, T)]) -> MarginReport<T> {
    MarginReport::fold(
        samples.iter().map(|&(a, b, alpha)| (homogeneous_inequality_margin(a, b, alpha), vec![a, b, alpha])),
    )
}

/// Both sides of the moment inequality for `f > 0`, with `1/beta + 1/gamma = 1`:
///
/// ```text
/// |f^a - E[f^a]|_{L^b} <= a E[f^a]^((a-1)/a) (1 + (|tau|_{2g}/|tau|_2)^(2/a)) |f - E[f]|_{L^(ab)}
///                        + (1 + (|tau|_{2g}/|tau|_2)^2) |f - E[f]|_{L^(ab)}^a
/// ```
///
/// where `E = E_tau`. Returns `rhs - lhs`.
pub fn check_moment_lemma<T: Real>(f: &ScalarField<T>, tau: &ScalarField<T>, alpha: T, beta: T) -> Result<T> {
    if !(alpha > T::one() && alpha < T::lit(2.0)) || !(beta > T::one()) {
        return Err(SolveError::InvalidArgument("need alpha in (1, 2) and beta > 1".into()));
    }
    if !(f.min() > T::zero()) {
        return Err(SolveError::InvalidArgument("f must be positive".into()));
    }
    let gamma = beta / (beta - T::one());
    let fa = f.map(|v| v.powf(alpha));
    let e_fa = tau_expectation(&fa, tau)?;
    let e_f = tau_expectation(f, tau)?;
    let lhs = fa.add_scalar(-e_fa).norm_lp(beta);
    let dev = f.add_scalar(-e_f).norm_lp(alpha * beta);
    let ratio = tau.norm_lp(T::lit(2.0) * gamma) / tau.norm_l2();
    let rhs = alpha * e_fa.powf((alpha - T::one()) / alpha) * (T::one() + ratio.powf(T::lit(2.0) / alpha)) * dev
        + (T::one() + ratio * ratio) * dev.powf(alpha);
    Ok(rhs - lhs)
}

/// `E_tau[f^alpha] - E_tau[f]^alpha`, non-negative by Jensen.
pub fn jensen_gap<T: Real>(f: &ScalarField<T>, tau: &ScalarField<T>, alpha: T) -> Result<T> {
    let e_fa = tau_expectation(&f.map(|v| v.powf(alpha)), tau)?;
    Ok(e_fa - tau_expectation(f, tau)?.powf(alpha))
}

/// `|f - E_tau[f]|^2_{L^N} / |df|^2_{L^2}`; `None` when `f` is constant.
pub fn sobolev_ratio<T: Real>(f: &ScalarField<T>, tau: &ScalarField<T>) -> Result<Option<T>> {
    let ex = Exponents::<T>::new(f.grid().n());
    let den = gradient(f).norm_l2();
    if !(den > T::epsilon() * T::one().max(f.norm_linf())) {
        return Ok(None);
    }
    let num = f.add_scalar(-tau_expectation(f, tau)?).norm_lp(ex.big_n);
    Ok(Some(num * num / (den * den)))
}

/// Safety factor applied to the empirical Sobolev constant.
pub const SOBOLEV_SAFETY: f64 = 2.0;

/// Empirical Sobolev constant: the largest [`sobolev_ratio`] over `trials`
/// random band-limited fields, times [`SOBOLEV_SAFETY`].
pub fn estimate_sobolev_constant<T: Real>(tau: &ScalarField<T>, trials: usize, seed: u64) -> Result<T> {
    tau_expectation(&ScalarField::constant(tau.grid(), T::one()), tau)?;
    let sampler = BandLimited::default();
    let mut best = T::zero();
    for k in 0..trials {
        let f = sampler.sample(tau.grid(), seed.wrapping_add(k as u64));
        if let Some(r) = sobolev_ratio(&f, tau)? {
            best = best.max(r);
        }
    }
    if best == T::zero() {
        return Err(SolveError::DegenerateData("no non-constant trial field".into()));
    }
    Ok(best * T::lit(SOBOLEV_SAFETY))
}
