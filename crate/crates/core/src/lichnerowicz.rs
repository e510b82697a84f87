//! The Lichnerowicz equation on the flat torus,
//!
//! ```text
//! -kappa Lap(phi) + (n-1)/n tau^2 phi^(N-1) - A^2 phi^(-N-1) = 0,
//! ```
//!
//! solved by damped Newton inside an explicit sub/supersolution bracket, with a
//! regularized continuation as fallback.

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_scalar_split, LinearSolveOptions, SplitField};
use crate::error::{Result, SolveError};
use crate::fields::{lp_mean, ScalarField};
use crate::real::{Exponents, Real};

/// Sub/supersolution pair for the Lichnerowicz equation.
#[derive(Debug, Clone)]
pub struct Bracket<T: Real> {
    pub phi_minus: ScalarField<T>,
    pub phi_plus: ScalarField<T>,
    pub lambda_minus: T,
    pub c_minus: T,
    pub c_plus: T,
    /// Solution of `-kappa Lap u + (n-1)/n tau^2 u = A^2`.
    pub u: ScalarField<T>,
}

impl<T: Real> Bracket<T> {
    /// Smallest pointwise gap `phi - phi_minus` and `phi_plus - phi`, relative to `phi`.
    pub fn margin(&self, phi: &ScalarField<T>) -> T {
        let mut worst = T::infinity();
        for ((&p, &lo), &hi) in phi.values().iter().zip(self.phi_minus.values()).zip(self.phi_plus.values()) {
            worst = worst.min((p - lo) / p).min((hi - p) / p);
        }
        worst
    }

    pub fn contains(&self, phi: &ScalarField<T>) -> bool {
        self.margin(phi) >= -T::lit(1e-12)
    }
}

/// Truncation levels `k` of the regularized problems, `tau_k = min(tau, k)`, `eps_k = 1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSchedule {
    pub k_values: Vec<u32>,
}

impl Default for RegularizationSchedule {
    fn default() -> Self {
        Self { k_values: vec![1, 2, 4, 8, 16, 32] }
    }
}

impl RegularizationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values[0] == 0 || self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SolveError::InvalidArgument("schedule must be a non-empty increasing list of positive k".into()));
        }
        Ok(())
    }

    pub fn tau_k<T: Real>(tau: &ScalarField<T>, k: u32) -> ScalarField<T> {
        let kk = T::lit(f64::from(k));
        tau.map(|t| t.min(kk))
    }

    pub fn eps_k<T: Real>(k: u32) -> T {
        T::one() / T::lit(f64::from(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LichnerowiczOptions<T> {
    /// Target for `|R|_2 / (|(n-1)/n tau^2 phi^(N-1)|_2 + |A^2 phi^(-N-1)|_2)`.
    pub tol: T,
    pub max_newton: usize,
    pub linear: LinearSolveOptions<T>,
    pub schedule: RegularizationSchedule,
    /// Skip Newton on the true equation and go through the schedule directly.
    pub force_fallback: bool,
}

impl<T: Real> Default for LichnerowiczOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_newton: 200,
            linear: LinearSolveOptions::default(),
            schedule: RegularizationSchedule::default(),
            force_fallback: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LichnerowiczSolution<T: Real> {
    pub phi: SplitField<T>,
    pub bracket: Bracket<T>,
    pub newton_iterations: usize,
    pub relative_residual: T,
    pub used_fallback: bool,
}

impl<T: Real> LichnerowiczSolution<T> {
    pub fn phi_field(&self) -> ScalarField<T> {
        self.phi.to_field()
    }
}

/// Coefficients of `-kappa Lap phi + eps phi + a phi^(N-1) - b (phi + eps)^(-N-1)`.
struct Problem<'a, T: Real> {
    a: &'a ScalarField<T>,
    b: &'a ScalarField<T>,
    eps: T,
    ex: Exponents<T>,
}

struct Eval<T: Real> {
    residual: ScalarField<T>,
    norm: T,
    scale: T,
}

impl<T: Real> Problem<'_, T> {
    fn evaluate(&self, phi: &SplitField<T>) -> Eval<T> {
        let lap = phi.neg_kappa_laplacian(self.ex.kappa);
        let big_n = self.ex.big_n;
        let c = phi.mean;
        let len = lap.values().len();
        let mut r = Vec::with_capacity(len);
        let mut pos = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        for i in 0..len {
            let p = c + phi.fluct.values()[i];
            let up = self.a.values()[i] * p.powf(big_n - T::one());
            let down = self.b.values()[i] * (p + self.eps).powf(-big_n - T::one());
            r.push(lap.values()[i] + self.eps * p + up - down);
            pos.push(up);
            neg.push(down);
        }
        let two = T::lit(2.0);
        let scale = lp_mean(pos.into_iter(), two) + lp_mean(neg.into_iter(), two);
        let norm = lp_mean(r.iter().copied(), two);
        Eval { residual: ScalarField::from_raw(lap.grid(), r), norm, scale }
    }

    fn derivative(&self, phi: &ScalarField<T>) -> ScalarField<T> {
        let big_n = self.ex.big_n;
        let vals = phi
            .values()
            .iter()
            .zip(self.a.values().iter().zip(self.b.values()))
            .map(|(&p, (&a, &b))| {
                self.eps
                    + (big_n - T::one()) * a * p.powf(big_n - T::lit(2.0))
                    + (big_n + T::one()) * b * (p + self.eps).powf(-big_n - T::lit(2.0))
            })
            .collect();
        ScalarField::from_raw(phi.grid(), vals)
    }
}

/// Clamp bounds for Newton iterates; `None` only enforces positivity.
type Bounds<'a, T> = Option<(&'a ScalarField<T>, &'a ScalarField<T>)>;

fn clamp_split<T: Real>(phi: SplitField<T>, bounds: Bounds<'_, T>) -> SplitField<T> {
    let Some((lo, hi)) = bounds else { return phi };
    let field = phi.to_field();
    let outside = field.values().iter().zip(lo.values().iter().zip(hi.values())).any(|(&p, (&l, &h))| p < l || p > h);
    if !outside {
        return phi;
    }
    let clamped = ScalarField::from_raw(
        field.grid(),
        field.values().iter().zip(lo.values().iter().zip(hi.values())).map(|(&p, (&l, &h))| p.max(l).min(h)).collect(),
    );
    SplitField::from_field(&clamped)
}

fn positive_everywhere<T: Real>(phi: &SplitField<T>, eps: T) -> bool {
    phi.fluct.values().iter().all(|&v| phi.mean + v + eps > T::zero() && (phi.mean + v).is_finite())
}

/// Damped Newton; returns the iterate and the number of steps taken.
fn newton<T: Real>(
    problem: &Problem<'_, T>,
    mut phi: SplitField<T>,
    bounds: Bounds<'_, T>,
    tol: T,
    max_iter: usize,
    linear: &LinearSolveOptions<T>,
) -> Result<(SplitField<T>, usize, T)> {
    phi = clamp_split(phi, bounds);
    let mut eval = problem.evaluate(&phi);
    for it in 0..max_iter {
        let rel = eval.norm / eval.scale;
        let jac = problem.derivative(&phi.to_field());
        let rhs = eval.residual.scale(-T::one());
        if rel <= tol {
            // one undamped polishing step, kept only if it helps
            if let Ok(step) = solve_scalar_split(&jac, &rhs, linear, None) {
                let trial = SplitField { mean: phi.mean + step.mean, fluct: &phi.fluct + &step.fluct };
                let trial = clamp_split(trial, bounds);
                if positive_everywhere(&trial, problem.eps) {
                    let e = problem.evaluate(&trial);
                    if e.norm < eval.norm {
                        return Ok((trial, it + 1, e.norm / e.scale));
                    }
                }
            }
            return Ok((phi, it, rel));
        }
        let step = solve_scalar_split(&jac, &rhs, linear, None)?;
        let mut t = T::one();
        let mut accepted = false;
        while t > T::lit(1e-6) {
            let trial = SplitField { mean: phi.mean + t * step.mean, fluct: &phi.fluct + &step.fluct.scale(t) };
            let trial = clamp_split(trial, bounds);
            if positive_everywhere(&trial, problem.eps) {
                let e = problem.evaluate(&trial);
                if e.norm.is_finite() && e.norm < eval.norm {
                    phi = trial;
                    eval = e;
                    accepted = true;
                    break;
                }
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            let rel = eval.norm / eval.scale;
            // at the rounding floor a tenfold tolerance is accepted
            if rel <= tol * T::lit(10.0) {
                return Ok((phi, it, rel));
            }
            return Err(SolveError::NoConvergence {
                solver: "Lichnerowicz Newton",
                iterations: it,
                residual: rel.to_f64_lossy(),
            });
        }
    }
    let rel = eval.norm / eval.scale;
    if rel <= tol {
        return Ok((phi, max_iter, rel));
    }
    Err(SolveError::NoConvergence { solver: "Lichnerowicz Newton", iterations: max_iter, residual: rel.to_f64_lossy() })
}

fn require_nondegenerate<T: Real>(tau: &ScalarField<T>, a_field: &ScalarField<T>) -> Result<()> {
    if tau.grid() != a_field.grid() {
        return Err(crate::fields::FieldError::GridMismatch.into());
    }
    if tau.norm_linf() == T::zero() {
        return Err(SolveError::DegenerateData("tau vanishes identically".into()));
    }
    if a_field.norm_linf() == T::zero() {
        return Err(SolveError::DegenerateData("A vanishes identically".into()));
    }
    Ok(())
}

/// Sub- and supersolutions from the auxiliary linear problem.
pub fn build_bracket<T: Real>(
    tau: &ScalarField<T>,
    a_field: &ScalarField<T>,
    opts: &LichnerowiczOptions<T>,
) -> Result<Bracket<T>> {
    require_nondegenerate(tau, a_field)?;
    let grid = tau.grid();
    let ex = Exponents::<T>::new(grid.n());
    let big_n = ex.big_n;
    let a = tau.map(|t| ex.tau_coef * t * t);
    let b = a_field.map(|v| v * v);

    let u = solve_scalar_split(&a, &b, &opts.linear, None)?.to_field();
    let (c_minus, c_plus) = (u.min(), u.max());
    if !(c_minus > T::zero()) {
        return Err(SolveError::DegenerateData(format!("auxiliary solution is not positive (min = {c_minus:e})")));
    }
    let lambda_minus = (T::one() / c_plus).min((T::one() + c_plus).powf(-big_n - T::one()));
    let phi_minus = u.scale(lambda_minus);

    let a1 = tau.map(|t| {
        let t1 = t.min(T::one());
        ex.tau_coef * t1 * t1
    });
    let rhs = b.scale((lambda_minus * c_minus).powf(-big_n - T::one()));
    let start = T::lit(2.0) * (rhs.max() / a1.mean()).powf(T::one() / (big_n - T::one()));
    let sup = Problem { a: &a1, b: &rhs, eps: T::zero(), ex };
    let (plus, _, _) = newton_supersolution(&sup, SplitField::constant(grid, start), opts)?;
    let phi_plus = plus.to_field();
    Ok(Bracket { phi_minus, phi_plus, lambda_minus, c_minus, c_plus, u })
}

/// Newton for `-kappa Lap phi + a phi^(N-1) = rhs` (no negative power).
fn newton_supersolution<T: Real>(
    problem: &Problem<'_, T>,
    init: SplitField<T>,
    opts: &LichnerowiczOptions<T>,
) -> Result<(SplitField<T>, usize, T)> {
    let ex = problem.ex;
    let big_n = ex.big_n;
    let mut phi = init;
    let eval = |phi: &SplitField<T>| -> (ScalarField<T>, T, T) {
        let lap = phi.neg_kappa_laplacian(ex.kappa);
        let vals: Vec<T> = (0..lap.values().len())
            .map(|i| {
                let p = phi.mean + phi.fluct.values()[i];
                lap.values()[i] + problem.a.values()[i] * p.powf(big_n - T::one()) - problem.b.values()[i]
            })
            .collect();
        let norm = lp_mean(vals.iter().copied(), T::lit(2.0));
        (ScalarField::from_raw(lap.grid(), vals), norm, problem.b.norm_l2())
    };
    let (mut r, mut norm, scale) = eval(&phi);
    for it in 0..opts.max_newton {
        if norm <= opts.tol * scale {
            return Ok((phi, it, norm / scale));
        }
        let field = phi.to_field();
        let jac = field.zip_map(problem.a, |p, a| (big_n - T::one()) * a * p.powf(big_n - T::lit(2.0)));
        let step = solve_scalar_split(&jac, &r.scale(-T::one()), &opts.linear, None)?;
        let mut t = T::one();
        loop {
            let trial = SplitField { mean: phi.mean + t * step.mean, fluct: &phi.fluct + &step.fluct.scale(t) };
            if positive_everywhere(&trial, T::zero()) {
                let (r2, n2, _) = eval(&trial);
                if n2 < norm {
                    phi = trial;
                    r = r2;
                    norm = n2;
                    break;
                }
            }
            t *= T::lit(0.5);
            if t < T::lit(1e-6) {
                if norm <= T::lit(10.0) * opts.tol * scale {
                    return Ok((phi, it, norm / scale));
                }
                return Err(SolveError::NoConvergence {
                    solver: "supersolution Newton",
                    iterations: it,
                    residual: (norm / scale).to_f64_lossy(),
                });
            }
        }
    }
    Err(SolveError::NoConvergence {
        solver: "supersolution Newton",
        iterations: opts.max_newton,
        residual: (norm / scale).to_f64_lossy(),
    })
}

/// Positive solution of the Lichnerowicz equation with coefficient `A`.
pub fn solve_lichnerowicz<T: Real>(
    tau: &ScalarField<T>,
    a_field: &ScalarField<T>,
    opts: &LichnerowiczOptions<T>,
) -> Result<LichnerowiczSolution<T>> {
    solve_lichnerowicz_from(tau, a_field, None, opts)
}

/// As [`solve_lichnerowicz`], starting Newton from `initial` (clamped into the
/// bracket) instead of the geometric mean of the bracket.
pub fn solve_lichnerowicz_from<T: Real>(
    tau: &ScalarField<T>,
    a_field: &ScalarField<T>,
    initial: Option<&SplitField<T>>,
    opts: &LichnerowiczOptions<T>,
) -> Result<LichnerowiczSolution<T>> {
    opts.schedule.validate()?;
    let bracket = build_bracket(tau, a_field, opts)?;
    let ex = Exponents::<T>::new(tau.grid().n());
    let a = tau.map(|t| ex.tau_coef * t * t);
    let b = a_field.map(|v| v * v);
    let problem = Problem { a: &a, b: &b, eps: T::zero(), ex };
    let bounds = Some((&bracket.phi_minus, &bracket.phi_plus));
    let init = match initial {
        Some(s) => s.clone(),
        None => SplitField::from_field(&bracket.phi_minus.zip_map(&bracket.phi_plus, |l, h| (l * h).sqrt())),
    };

    if !opts.force_fallback {
        match newton(&problem, init.clone(), bounds, opts.tol, opts.max_newton, &opts.linear) {
            Ok((phi, iterations, rel)) => {
                return Ok(LichnerowiczSolution {
                    phi,
                    bracket,
                    newton_iterations: iterations,
                    relative_residual: rel,
                    used_fallback: false,
                })
            }
            Err(SolveError::NoConvergence { .. }) => {
                log::warn!("Newton on the Lichnerowicz equation stalled; marching the regularized family");
            }
            Err(e) => return Err(e),
        }
    }

    let mut phi = init;
    let mut total = 0;
    for &k in &opts.schedule.k_values {
        let tau_k = RegularizationSchedule::tau_k(tau, k);
        let a_k = tau_k.map(|t| ex.tau_coef * t * t);
        let stage = Problem { a: &a_k, b: &b, eps: RegularizationSchedule::eps_k(k), ex };
        let (next, its, rel) = newton(&stage, phi, None, opts.tol, opts.max_newton, &opts.linear)?;
        log::debug!("regularized stage k = {k}: {its} Newton steps, residual {rel:e}");
        phi = next;
        total += its;
    }
    let (phi, its, rel) = newton(&problem, phi, bounds, opts.tol, opts.max_newton, &opts.linear)?;
    Ok(LichnerowiczSolution {
        phi,
        bracket,
        newton_iterations: total + its,
        relative_residual: rel,
        used_fallback: true,
    })
}

/// `(n-1)/n int tau^2 phi^(N-1) - int A^2 phi^(-N-1)`, zero at solutions.
pub fn solvability_identity_residual<T: Real>(phi: &ScalarField<T>, tau: &ScalarField<T>, a_field: &ScalarField<T>) -> T {
    let ex = Exponents::<T>::new(phi.grid().n());
    let big_n = ex.big_n;
    let lhs = phi.zip_map(tau, |p, t| t * t * p.powf(big_n - T::one())).integrate() * ex.tau_coef;
    let rhs = phi.zip_map(a_field, |p, a| a * a * p.powf(-big_n - T::one())).integrate();
    lhs - rhs
}

/// Pointwise Lichnerowicz residual of an arbitrary positive `phi`.
pub fn lichnerowicz_residual<T: Real>(phi: &SplitField<T>, tau: &ScalarField<T>, a_field: &ScalarField<T>) -> ScalarField<T> {
    let ex = Exponents::<T>::new(tau.grid().n());
    let a = tau.map(|t| ex.tau_coef * t * t);
    let b = a_field.map(|v| v * v);
    Problem { a: &a, b: &b, eps: T::zero(), ex }.evaluate(phi).residual
}
