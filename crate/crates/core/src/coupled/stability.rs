use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::tau_expectation;
use crate::diagnostics::estimate_sobolev_constant;
use crate::elliptic::{solve_vector, LinearSolveOptions};
use crate::error::{Result, SolveError};
use crate::fields::gradient;
use crate::geometry::{conformal_killing, half_inverse, ConformalSeed};
use crate::real::{Exponents, Real};
use crate::rng::BandLimited;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions<T> {
    /// Probe fields used to estimate the operator norm `Lambda'`.
    pub probes: usize,
    /// Factor applied to the empirical `Lambda'` and Sobolev constant.
    pub safety: T,
    pub sobolev_trials: usize,
    pub rng_seed: u64,
    pub linear: LinearSolveOptions<T>,
}

impl<T: Real> Default for StabilityOptions<T> {
    fn default() -> Self {
        Self { probes: 64, safety: T::lit(2.0), sobolev_trials: 64, rng_seed: 0x5eed, linear: LinearSolveOptions::default() }
    }
}

/// Constants certifying that the admissible set is mapped into itself.
///
/// `lambda_prime` and `sobolev_s` are empirical lower bounds inflated by a
/// safety factor, not rigorous constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport<T> {
    pub n: usize,
    /// `x = |sigma|_{L^2}`.
    pub x: T,
    /// `A0 = sqrt((n-1)/n int tau^2)`.
    pub big_a0: T,
    /// `A1 = |LWbar/(2 eta)|_{L^2}` with `Lap_L Wbar = (n-1)/n grad tau`.
    pub big_a1: T,
    pub lambda_prime: T,
    /// `Lambda'' = Lambda' |grad tau|_{L^{t0}}`.
    pub lambda_pp: T,
    pub grad_tau_t0: T,
    pub sobolev_s: T,
    pub c1: T,
    pub c2: T,
    /// `1/(A0 - A1)`.
    pub a0: T,
    /// `c2 (1 + a0 A1)^{n/(n-1)}`.
    pub b0: T,
    pub a: T,
    pub b: T,
    /// `a x`.
    pub c_max: T,
    /// `b x^{n/(n-1)}`.
    pub r: T,
    /// `A0^2 c_max^2 - f(x, c_max, r)`.
    pub margin_mean: T,
    /// `r - c1 c_max^{1/n} f^{1/2} - c2 f^{n/(2(n-1))}`.
    pub margin_deviation: T,
    pub feasible: bool,
    /// `1/p0 = 2/p - 1/t`; `None` when the right side is not positive.
    pub p0: Option<T>,
    pub t0: T,
    pub empirical_constants: bool,
}

impl<T: Real> StabilityReport<T> {
    /// `f(x, c_max, r)`.
    pub fn f(&self, c_max: T, r: T) -> T {
        f_value(self.x, c_max, r, self.big_a1, self.lambda_pp)
    }

    /// Right side of the deviation bound at `c_max`.
    pub fn deviation_bound(&self, c_max: T, f: T) -> T {
        deviation_rhs(self.n, self.c1, self.c2, c_max, f)
    }

    /// Whether `A0^2 c'^2 <= f` and `|psi'| <= c1 c_max^{1/n} f^{1/2} + c2 f^{n/(2(n-1))}`
    /// at the report's `(c_max, r)`, up to a relative slack of `1e-9`.
    pub fn estimate_chain_holds(&self, c_prime: T, psi_norm: T) -> bool {
        let slack = T::one() + T::lit(1e-9);
        let f = self.f(self.c_max, self.r);
        self.big_a0 * self.big_a0 * c_prime * c_prime <= f * slack
            && psi_norm <= self.deviation_bound(self.c_max, f) * slack
    }
}

fn f_value<T: Real>(x: T, c_max: T, r: T, a1: T, lpp: T) -> T {
    let two = T::lit(2.0);
    x * x + two * c_max * x * a1 + c_max * c_max * a1 * a1 + lpp * r * (two * x + two * c_max * a1 + lpp * r)
}

fn deviation_rhs<T: Real>(n: usize, c1: T, c2: T, c_max: T, f: T) -> T {
    let nf = T::from_count(n);
    c1 * c_max.powf(T::one() / nf) * f.sqrt() + c2 * f.powf(nf / (T::lit(2.0) * (nf - T::one())))
}

/// `p0` clamped to `[2, 64]`, the exponent of the discrete convergence norm.
pub(crate) fn fixed_point_exponent<T: Real>(seed: &ConformalSeed<T>) -> T {
    p0_of(seed.p, seed.t).unwrap_or(T::lit(64.0)).max(T::lit(2.0)).min(T::lit(64.0))
}

pub(crate) fn p0_of<T: Real>(p: T, t: T) -> Option<T> {
    let inv = T::lit(2.0) / p - T::one() / t;
    (inv > T::zero()).then(|| T::one() / inv)
}

/// Computes the stability constants of the seed and solves for `(a, b)`.
pub fn stability_params<T: Real>(seed: &ConformalSeed<T>, opts: &StabilityOptions<T>) -> Result<StabilityReport<T>> {
    seed.require_nondegenerate()?;
    let n = seed.n();
    let nf = T::from_count(n);
    let ex = Exponents::<T>::new(n);
    let grid = seed.grid();
    let beta = half_inverse(&seed.eta);

    let x = seed.sigma_norm();
    let big_a0 = seed.tau_mass().sqrt();
    let grad_tau = gradient(&seed.tau);
    let wbar = solve_vector(&grad_tau.scale(ex.tau_coef), &seed.eta, &opts.linear)?.w;
    let big_a1 = conformal_killing(&wbar).mul_scalar_field(&beta).norm_l2();
    if !(big_a0 > big_a1) {
        return Err(SolveError::InfeasibleStability(format!("A0 = {big_a0:e} does not exceed A1 = {big_a1:e}")));
    }

    let t0 = ex.t0();
    let grad_tau_t0 = grad_tau.pointwise_norm().norm_lp(t0);
    let probe_exp = ex.half_n_plus_one();
    let lambda_prime = if grad_tau_t0 == T::zero() {
        T::zero()
    } else {
        let sampler = BandLimited { kmax: 2, even: seed.parity };
        let ratios: Vec<Result<T>> = (0..opts.probes)
            .into_par_iter()
            .map(|k| {
                let raw = sampler.sample(grid, opts.rng_seed.wrapping_add(k as u64));
                let psi = raw.add_scalar(-tau_expectation(&raw, &seed.tau)?);
                let xi = grad_tau.mul_scalar_field(&psi.scale(ex.tau_coef));
                let w = solve_vector(&xi, &seed.eta, &opts.linear)?.w;
                let num = conformal_killing(&w).mul_scalar_field(&beta).norm_l2();
                Ok(num / (psi.norm_lp(probe_exp) * grad_tau_t0))
            })
            .collect();
        let mut max = T::zero();
        for r in ratios {
            max = max.max(r?);
        }
        max * opts.safety
    };
    let lambda_pp = lambda_prime * grad_tau_t0;

    let sobolev_s = estimate_sobolev_constant(&seed.tau, opts.sobolev_trials, opts.rng_seed)?;
    let alpha = nf / (nf - T::one());
    let gamma = T::lit(2.0) * (nf - T::one()) / nf;
    let tau_2 = seed.tau.norm_l2();
    let tau_2g = seed.tau.norm_lp(T::lit(2.0) * gamma);
    let sob = sobolev_s * (nf - T::one()) / (T::lit(3.0) * nf - T::lit(2.0));
    let c1 = alpha * (T::one() + (tau_2g / tau_2).powf(T::lit(2.0) / alpha)) * sob.sqrt();
    let c2 = (T::one() + (tau_2g / tau_2).powi(2)) * sob.powf(nf / (T::lit(2.0) * (nf - T::one())));

    let a0 = T::one() / (big_a0 - big_a1);
    let b0 = c2 * (T::one() + a0 * big_a1).powf(alpha);

    let x_pow = x.powf(alpha);
    let mut a = a0;
    let mut b = b0;
    let mut converged = false;
    for _ in 0..10_000 {
        let c_max = a * x;
        let r = b * x_pow;
        let f = f_value(x, c_max, r, big_a1, lambda_pp);
        let a_new = f.sqrt() / (big_a0 * x);
        let b_new = deviation_rhs(n, c1, c2, c_max, f) / x_pow;
        if !(a_new.is_finite() && b_new.is_finite()) || a_new > T::lit(1e12) * a0 || b_new > T::lit(1e12) * (b0 + T::one()) {
            break;
        }
        let change = ((a_new - a) / a).abs().max(((b_new - b) / b).abs());
        a = T::lit(0.5) * (a + a_new);
        b = T::lit(0.5) * (b + b_new);
        if change < T::lit(1e-13) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolveError::InfeasibleStability(format!(
            "no solution of the stability system near (a0, b0) = ({a0:e}, {b0:e}) at x = {x:e}"
        )));
    }
    let inflate = T::one() + T::lit(1e-6);
    a *= inflate;
    b *= inflate;
    let c_max = a * x;
    let r = b * x_pow;
    let f = f_value(x, c_max, r, big_a1, lambda_pp);
    let margin_mean = big_a0 * big_a0 * c_max * c_max - f;
    let margin_deviation = r - deviation_rhs(n, c1, c2, c_max, f);
    Ok(StabilityReport {
        n,
        x,
        big_a0,
        big_a1,
        lambda_prime,
        lambda_pp,
        grad_tau_t0,
        sobolev_s,
        c1,
        c2,
        a0,
        b0,
        a,
        b,
        c_max,
        r,
        margin_mean,
        margin_deviation,
        feasible: margin_mean >= T::zero() && margin_deviation >= T::zero(),
        p0: p0_of(seed.p, seed.t),
        t0,
        empirical_constants: true,
    })
}
