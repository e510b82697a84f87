//! Continuation in the scaling parameter `lambda`.
//!
//! With `phi = lambda phi~`, `W = lambda^N W~` and `sigma = lambda^N sigma~`
//! the system becomes, for `phi~ = c + lambda^(N-2) psi` with `int psi = 0`,
//!
//! ```text
//! Pi(-kappa Lap psi + G) = 0,   int G = 0,   Lap_L W~ = (n-1)/n phi~^N grad tau
//! G = (n-1)/n tau^2 phi~^(N-1) - |sigma~ + LW~/(2 eta)|^2 phi~^(-N-1)
//! ```
//!
//! At `lambda = 0` it decouples into a quadratic for `c^N`, a vector solve and
//! a projected Poisson problem. The branch is then followed by Newton steps
//! whose linear systems are solved by flexible GMRES preconditioned with the
//! block elimination of the differential.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{constraint_residuals, ConstraintResiduals};
use crate::elliptic::{invert_neg_kappa_laplacian, neg_kappa_laplacian, project_range, solve_projected, solve_vector, LinearSolveOptions};
use crate::error::{Result, SolveError};
use crate::fields::{gradient, ScalarField, SymTensorField, VectorField};
use crate::geometry::{conformal_killing, half_inverse, vector_laplacian_apply, ConformalSeed};
use crate::krylov::fgmres;
use crate::real::{Exponents, Real};

/// Unknowns of the rescaled system at a given `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState<T: Real> {
    pub lambda: T,
    pub c: T,
    /// Zero-mean correction.
    pub psi: ScalarField<T>,
    pub wtilde: VectorField<T>,
}

impl<T: Real> ScaledState<T> {
    /// `phi~ = c + lambda^(N-2) psi`.
    pub fn phi_tilde(&self) -> ScalarField<T> {
        let ex = Exponents::<T>::new(self.psi.grid().n());
        let s = self.lambda.powf(ex.big_n - T::lit(2.0));
        self.psi.map(|p| self.c + s * p)
    }

    /// `(phi, W, sigma) = (lambda phi~, lambda^N W~, lambda^N sigma~)`.
    pub fn unscale(&self, sigma_tilde: &SymTensorField<T>) -> (ScalarField<T>, VectorField<T>, SymTensorField<T>) {
        let ex = Exponents::<T>::new(self.psi.grid().n());
        let ln = self.lambda.powf(ex.big_n);
        (self.phi_tilde().scale(self.lambda), self.wtilde.scale(ln), sigma_tilde.scale(ln))
    }

    /// Seed with `sigma = lambda^N sigma~`.
    pub fn unscaled_seed(&self, seed: &ConformalSeed<T>) -> ConformalSeed<T> {
        let ex = Exponents::<T>::new(seed.n());
        seed.with_sigma(seed.sigma.scale(self.lambda.powf(ex.big_n)))
    }

    fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// `a2 y^2 + a1 y + a0 = 0` for `y = c0^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticC0<T> {
    /// `(n-1)/n int tau^2 - int |LWbar|^2 / (4 eta^2)`.
    pub a2: T,
    /// `-int <sigma~, LWbar> / eta`.
    pub a1: T,
    /// `-int |sigma~|^2`.
    pub a0: T,
}

impl<T: Real> QuadraticC0<T> {
    pub fn new(a2: T, a1: T, a0: T) -> Self {
        Self { a2, a1, a0 }
    }

    pub fn eval(&self, y: T) -> T {
        (self.a2 * y + self.a1) * y + self.a0
    }

    /// Number of sign changes in `(a2, a1, a0)`, zeros skipped.
    pub fn sign_changes(&self) -> usize {
        let signs: Vec<bool> = [self.a2, self.a1, self.a0].into_iter().filter(|&v| v != T::zero()).map(|v| v > T::zero()).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Exactly one positive root, read off from the coefficient signs.
    pub fn unique_positive(&self) -> bool {
        self.sign_changes() == 1
    }

    /// Real roots in increasing order.
    pub fn real_roots(&self) -> Vec<T> {
        let (a, b, c) = (self.a2, self.a1, self.a0);
        if a == T::zero() {
            return if b == T::zero() { Vec::new() } else { vec![-c / b] };
        }
        let disc = b * b - T::lit(4.0) * a * c;
        if disc < T::zero() {
            return Vec::new();
        }
        let q = -T::lit(0.5) * (b + b.signum() * disc.sqrt());
        let mut roots = if q == T::zero() { vec![T::zero(), T::zero()] } else { vec![q / a, c / q] };
        roots.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
        roots
    }

    pub fn positive_roots(&self) -> Vec<T> {
        self.real_roots().into_iter().filter(|&r| r > T::zero()).collect()
    }
}

/// Which root of the quadratic to continue from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootPolicy {
    /// Require the sign condition guaranteeing a unique positive root.
    #[default]
    Unique,
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct LimitSolution<T: Real> {
    pub state: ScaledState<T>,
    pub c0: T,
    /// `Lap_L Wbar = (n-1)/n grad tau`.
    pub wbar: VectorField<T>,
    pub quadratic: QuadraticC0<T>,
    pub positive_roots: Vec<T>,
    pub two_positive_roots: bool,
    pub obstruction: Vec<T>,
}

/// Solves the `lambda = 0` system: `Wbar`, then `c0` from the quadratic,
/// then `psi0` from the projected Poisson problem.
pub fn solve_limit_system<T: Real>(
    seed: &ConformalSeed<T>,
    policy: RootPolicy,
    opts: &LinearSolveOptions<T>,
) -> Result<LimitSolution<T>> {
    seed.require_nondegenerate()?;
    let ex = Exponents::<T>::new(seed.n());
    let beta = half_inverse(&seed.eta);
    let vec = solve_vector(&gradient(&seed.tau).scale(ex.tau_coef), &seed.eta, opts)?;
    let wbar = vec.w;
    let lwbar = conformal_killing(&wbar).mul_scalar_field(&beta);
    let quadratic = QuadraticC0 {
        a2: seed.tau_mass() - lwbar.norm_sq().integrate(),
        a1: -T::lit(2.0) * seed.sigma.dot(&lwbar).integrate(),
        a0: -seed.sigma.norm_sq().integrate(),
    };
    let positive_roots = quadratic.positive_roots();
    let two_positive_roots = positive_roots.len() == 2;
    let y = match policy {
        RootPolicy::Unique if !quadratic.unique_positive() => {
            return Err(SolveError::ConditionViolated { a2: quadratic.a2.to_f64_lossy() });
        }
        RootPolicy::Largest => positive_roots.last().copied(),
        _ => positive_roots.first().copied(),
    }
    .ok_or(SolveError::ConditionViolated { a2: quadratic.a2.to_f64_lossy() })?;
    if two_positive_roots {
        log::warn!("the quadratic for c0^N has two positive roots {positive_roots:?}; continuing from {y}");
    }
    let c0 = y.powf(T::one() / ex.big_n);
    let wtilde = wbar.scale(y);
    let b = seed.sigma.add(&lwbar.scale(y));
    let rhs = seed.tau.zip_map(&b.norm_sq(), |t, b2| {
        -ex.tau_coef * t * t * c0.powf(ex.big_n - T::one()) + b2 * c0.powf(-ex.big_n - T::one())
    });
    let psi = solve_projected(&rhs, ex.kappa)?;
    Ok(LimitSolution {
        state: ScaledState { lambda: T::zero(), c: c0, psi, wtilde },
        c0,
        wbar,
        quadratic,
        positive_roots,
        two_positive_roots,
        obstruction: vec.obstruction,
    })
}

/// An element of `(zero-mean scalars) x R x (vector fields)`, used both for
/// residuals and for Newton directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T: Real> {
    pub psi: ScalarField<T>,
    pub c: T,
    pub w: VectorField<T>,
}

impl<T: Real> Block<T> {
    fn flatten(&self) -> Vec<T> {
        let mut v = self.psi.values().to_vec();
        v.push(self.c);
        for comp in self.w.components() {
            v.extend_from_slice(comp.values());
        }
        v
    }

    fn unflatten(grid: &crate::fields::Grid<T>, v: &[T]) -> Self {
        let len = grid.len();
        let psi = ScalarField::from_raw(grid, v[..len].to_vec());
        let comps = v[len + 1..].chunks(len).map(|c| ScalarField::from_raw(grid, c.to_vec())).collect();
        Self { psi, c: v[len], w: VectorField::from_components(grid, comps) }
    }

    /// `|psi|_{L^2} + |c| + |w|_{L^2}`.
    pub fn norm(&self) -> T {
        self.psi.norm_l2() + self.c.abs() + self.w.norm_l2()
    }
}

/// Pointwise quantities of the rescaled system at a state.
struct Frozen<T: Real> {
    ex: Exponents<T>,
    phi: ScalarField<T>,
    beta: ScalarField<T>,
    grad_tau: VectorField<T>,
    b: SymTensorField<T>,
    /// `lambda^(N-2)`.
    scale: T,
}

impl<T: Real> Frozen<T> {
    fn new(state: &ScaledState<T>, seed: &ConformalSeed<T>) -> Result<Self> {
        let ex = Exponents::<T>::new(seed.n());
        let phi = state.phi_tilde();
        let min = phi.min();
        if !(min > T::zero()) {
            return Err(SolveError::PositivityLoss { min: min.to_f64_lossy() });
        }
        let beta = half_inverse(&seed.eta);
        let b = seed.sigma.add(&conformal_killing(&state.wtilde).mul_scalar_field(&beta));
        Ok(Self {
            ex,
            phi,
            beta,
            grad_tau: gradient(&seed.tau),
            b,
            scale: state.lambda.powf(ex.big_n - T::lit(2.0)),
        })
    }

    /// `(n-1)/n tau^2 phi^(N-1)` and `|B|^2 phi^(-N-1)`.
    fn terms(&self, tau: &ScalarField<T>) -> (ScalarField<T>, ScalarField<T>) {
        let n = self.ex.big_n;
        let pos = tau.zip_map(&self.phi, |t, p| self.ex.tau_coef * t * t * p.powf(n - T::one()));
        let neg = self.b.norm_sq().zip_map(&self.phi, |b2, p| b2 * p.powf(-n - T::one()));
        (pos, neg)
    }

    /// `(n-1)/n phi^N grad tau`.
    fn vector_source(&self) -> VectorField<T> {
        self.grad_tau.mul_scalar_field(&self.phi.map(|p| self.ex.tau_coef * p.powf(self.ex.big_n)))
    }

    /// `F = (n-1)/n (N-1) tau^2 phi^(N-2) + (N+1) |B|^2 phi^(-N-2)`.
    fn f_coefficient(&self, tau: &ScalarField<T>) -> ScalarField<T> {
        let n = self.ex.big_n;
        let b2 = self.b.norm_sq();
        ScalarField::from_raw(
            tau.grid(),
            tau.values()
                .iter()
                .zip(self.phi.values())
                .zip(b2.values())
                .map(|((&t, &p), &b)| {
                    self.ex.tau_coef * (n - T::one()) * t * t * p.powf(n - T::lit(2.0))
                        + (n + T::one()) * b * p.powf(-n - T::lit(2.0))
                })
                .collect(),
        )
    }

    /// `l(W') = -2 phi^(-N-1) <B, LW'/(2 eta)>`.
    fn ell(&self, w: &VectorField<T>) -> ScalarField<T> {
        let lw = conformal_killing(w).mul_scalar_field(&self.beta);
        let n = self.ex.big_n;
        self.b.dot(&lw).zip_map(&self.phi, |d, p| -T::lit(2.0) * d * p.powf(-n - T::one()))
    }

    /// `N (n-1)/n phi^(N-1)`, the coefficient of `delta phi` in the vector row.
    fn vector_weight(&self) -> ScalarField<T> {
        self.phi.map(|p| self.ex.big_n * self.ex.tau_coef * p.powf(self.ex.big_n - T::one()))
    }
}

/// The three rows of the rescaled system, with `Pi` the removal of the mean.
pub fn phi_lambda_residual<T: Real>(state: &ScaledState<T>, seed: &ConformalSeed<T>) -> Result<Block<T>> {
    let fr = Frozen::new(state, seed)?;
    let (pos, neg) = fr.terms(&seed.tau);
    let g = &pos - &neg;
    let g_mean = g.integrate();
    let r_psi = neg_kappa_laplacian(&state.psi, fr.ex.kappa) + g.add_scalar(-g_mean);
    let r_w = vector_laplacian_apply(&state.wtilde, &seed.eta)?.sub(&fr.vector_source());
    Ok(Block { psi: r_psi, c: g_mean, w: r_w })
}

/// Directional derivative of [`phi_lambda_residual`] at fixed `lambda`.
pub fn jacobian_apply<T: Real>(state: &ScaledState<T>, seed: &ConformalSeed<T>, dir: &Block<T>) -> Result<Block<T>> {
    let fr = Frozen::new(state, seed)?;
    let f = fr.f_coefficient(&seed.tau);
    Ok(apply_frozen(&fr, &f, dir))
}

fn apply_frozen<T: Real>(fr: &Frozen<T>, f: &ScalarField<T>, dir: &Block<T>) -> Block<T> {
    let dphi = dir.psi.map(|p| dir.c + fr.scale * p);
    let h = &f.zip_map(&dphi, |a, b| a * b) + &fr.ell(&dir.w);
    let h_mean = h.integrate();
    let psi = neg_kappa_laplacian(&dir.psi, fr.ex.kappa) + h.add_scalar(-h_mean);
    let coupling = fr.vector_weight().zip_map(&dphi, |a, b| a * b);
    let w = crate::geometry::vector_laplacian_weighted(&dir.w, &fr.beta).sub(&fr.grad_tau.mul_scalar_field(&coupling));
    Block { psi, c: h_mean, w }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions<T> {
    pub linear: LinearSolveOptions<T>,
    pub root_policy: RootPolicy,
    /// Relative residual at which a Newton corrector stops.
    pub newton_tol: T,
    pub max_newton: usize,
    pub gmres_tol: T,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    pub initial_step: T,
    pub growth: T,
    pub min_step: T,
    /// Correctors converging within this many steps count as easy.
    pub easy_iterations: usize,
    /// Values of `lambda` the march must land on exactly.
    pub checkpoints: Vec<T>,
    pub max_points: usize,
}

impl<T: Real> Default for ContinuationOptions<T> {
    fn default() -> Self {
        Self {
            linear: LinearSolveOptions::default(),
            root_policy: RootPolicy::Unique,
            newton_tol: T::lit(1e-11),
            max_newton: 20,
            gmres_tol: T::lit(1e-7),
            gmres_restart: 30,
            gmres_max_iter: 300,
            initial_step: T::lit(1e-2),
            growth: T::lit(1.5),
            min_step: T::lit(1e-10),
            easy_iterations: 3,
            checkpoints: Vec::new(),
            max_points: 10_000,
        }
    }
}

/// Pivot of the block elimination: `int F + int l(W^)` with
/// `Lap_L W^ = N (n-1)/n phi^(N-1) grad tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pivot<T> {
    pub value: T,
    pub scale: T,
}

/// Relative size of the residual: each row measured against the size of its terms.
///
/// The vector row is measured after removing its kernel component, which is
/// reported separately.
pub fn relative_residual<T: Real>(state: &ScaledState<T>, seed: &ConformalSeed<T>) -> Result<(T, Vec<T>)> {
    let r = phi_lambda_residual(state, seed)?;
    let fr = Frozen::new(state, seed)?;
    Ok((scaled_norm(&r, &fr, seed), r.w.means()))
}

fn scaled_norm<T: Real>(r: &Block<T>, fr: &Frozen<T>, seed: &ConformalSeed<T>) -> T {
    let (pos, neg) = fr.terms(&seed.tau);
    let scale = pos.norm_l2() + neg.norm_l2();
    let vec_scale = fr.vector_source().norm_l2().max(scale * T::epsilon());
    (r.psi.norm_l2() + r.c.abs()) / scale + project_range(&r.w).norm_l2() / vec_scale
}

#[derive(Debug, Clone)]
pub struct NewtonStep<T: Real> {
    pub state: ScaledState<T>,
    pub residual_before: T,
    pub residual_after: T,
    pub pivot: Pivot<T>,
    pub gmres_iterations: usize,
    pub damping: T,
}

/// Pivot magnitude, relative to its scale, below which the linearization is singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// One damped Newton step at fixed `lambda`.
pub fn newton_step<T: Real>(
    state: &ScaledState<T>,
    seed: &ConformalSeed<T>,
    opts: &ContinuationOptions<T>,
) -> Result<NewtonStep<T>> {
    let grid = seed.grid();
    let fr = Frozen::new(state, seed)?;
    let f = fr.f_coefficient(&seed.tau);
    let r = phi_lambda_residual(state, seed)?;
    let before = scaled_norm(&r, &fr, seed);

    let what = solve_vector(&fr.grad_tau.mul_scalar_field(&fr.vector_weight()), &seed.eta, &opts.linear)?.w;
    let ell_hat = fr.ell(&what).integrate();
    let f_int = f.integrate();
    let pivot = Pivot { value: f_int + ell_hat, scale: f_int.abs() + ell_hat.abs() };
    if pivot.value.abs() < T::lit(PIVOT_TOL) * pivot.scale {
        return Err(SolveError::DoubleRootDegeneracy { pivot: pivot.value.to_f64_lossy() });
    }

    let mut rhs = r.clone();
    rhs.psi = rhs.psi.scale(-T::one());
    rhs.c = -rhs.c;
    rhs.w = project_range(&rhs.w).scale(-T::one());

    let inv_len = T::one() / T::from_count(grid.len());
    let len = grid.len();
    let dot = |a: &[T], b: &[T]| -> T {
        let fields = a.iter().zip(b).enumerate().filter(|(i, _)| *i != len).map(|(_, (&x, &y))| x * y);
        crate::fields::neumaier(fields) * inv_len + a[len] * b[len]
    };
    let apply = |x: &[T]| -> Result<Vec<T>> {
        let mut out = apply_frozen(&fr, &f, &Block::unflatten(grid, x));
        out.w = project_range(&out.w);
        Ok(out.flatten())
    };
    let precond = |x: &[T]| -> Result<Vec<T>> {
        let res = Block::unflatten(grid, x);
        let v3 = solve_vector(&res.w, &seed.eta, &opts.linear)?.w;
        let c = (res.c - fr.ell(&v3).integrate()) / pivot.value;
        let w = what.scale(c).add(&v3);
        let h = &f.scale(c) + &fr.ell(&w);
        let h_mean = h.integrate();
        let psi = invert_neg_kappa_laplacian(&res.psi.zip_map(&h, |r, v| r - (v - h_mean)), fr.ex.kappa);
        Ok(Block { psi, c, w }.flatten())
    };
    let x0 = vec![T::zero(); rhs.flatten().len()];
    let out = fgmres("Newton FGMRES", &rhs.flatten(), x0, apply, precond, dot, opts.gmres_tol, opts.gmres_restart, opts.gmres_max_iter)?;
    let delta = Block::unflatten(grid, &out.x);

    let mut damping = T::one();
    let mut last_err = None;
    for _ in 0..20 {
        let trial = ScaledState {
            lambda: state.lambda,
            c: state.c + damping * delta.c,
            psi: (&state.psi + &delta.psi.scale(damping)).zero_mean(),
            wtilde: project_range(&state.wtilde.add(&delta.w.scale(damping))),
        };
        match Frozen::new(&trial, seed) {
            Ok(tfr) => {
                let tr = phi_lambda_residual(&trial, seed)?;
                let after = scaled_norm(&tr, &tfr, seed);
                if after < before || after <= opts.newton_tol {
                    return Ok(NewtonStep {
                        state: trial,
                        residual_before: before,
                        residual_after: after,
                        pivot,
                        gmres_iterations: out.iterations,
                        damping,
                    });
                }
                last_err = Some(SolveError::NoConvergence {
                    solver: "damped Newton",
                    iterations: 0,
                    residual: after.to_f64_lossy(),
                });
            }
            Err(e) => last_err = Some(e),
        }
        damping *= T::lit(0.5);
    }
    Err(last_err.expect("at least one trial"))
}

#[derive(Debug, Clone)]
pub struct CorrectorOutcome<T: Real> {
    pub state: ScaledState<T>,
    pub iterations: usize,
    pub relative_residual: T,
    pub pivot: Option<Pivot<T>>,
    pub gmres_iterations: usize,
}

/// Newton iteration at fixed `lambda` until the relative residual reaches `opts.newton_tol`.
pub fn correct<T: Real>(
    state: &ScaledState<T>,
    seed: &ConformalSeed<T>,
    opts: &ContinuationOptions<T>,
) -> Result<CorrectorOutcome<T>> {
    let mut current = state.clone();
    let (mut rel, _) = relative_residual(&current, seed)?;
    let mut pivot = None;
    let mut gmres_iterations = 0;
    for it in 0..=opts.max_newton {
        if rel <= opts.newton_tol {
            return Ok(CorrectorOutcome { state: current, iterations: it, relative_residual: rel, pivot, gmres_iterations });
        }
        if it == opts.max_newton {
            break;
        }
        let step = newton_step(&current, seed, opts)?;
        log::debug!("lambda {}: Newton {} residual {:e} -> {:e}", current.lambda, it + 1, step.residual_before, step.residual_after);
        pivot = Some(step.pivot);
        gmres_iterations += step.gmres_iterations;
        current = step.state;
        rel = step.residual_after;
    }
    Err(SolveError::NoConvergence { solver: "Newton corrector", iterations: opts.max_newton, residual: rel.to_f64_lossy() })
}

/// One accepted point of the branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationRecord {
    pub lambda: f64,
    pub c: f64,
    pub psi_norm: f64,
    /// `int psi`, zero up to rounding.
    pub orthogonality: f64,
    pub min_phi_tilde: f64,
    pub newton_iterations: usize,
    pub gmres_iterations: usize,
    pub relative_residual: f64,
    pub pivot: Option<f64>,
    pub obstruction: f64,
    /// Residuals of the unscaled data; absent at `lambda = 0`.
    pub constraints: Option<ConstraintResiduals<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    LambdaMax,
    PositivityLoss { lambda: f64, min: f64 },
    DoubleRootDegeneracy { lambda: f64, pivot: f64 },
    StepUnderflow { lambda: f64, step: f64, last_failure: String },
    PointLimit { lambda: f64 },
}

impl Termination {
    /// The error matching an abnormal termination.
    pub fn error(&self) -> Option<SolveError> {
        match self {
            Self::LambdaMax => None,
            Self::PositivityLoss { min, .. } => Some(SolveError::PositivityLoss { min: *min }),
            Self::DoubleRootDegeneracy { pivot, .. } => Some(SolveError::DoubleRootDegeneracy { pivot: *pivot }),
            Self::StepUnderflow { lambda, step, .. } => Some(SolveError::StepUnderflow { lambda: *lambda, step: *step }),
            Self::PointLimit { lambda } => {
                Some(SolveError::NoConvergence { solver: "continuation", iterations: 0, residual: *lambda })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationResult<T: Real> {
    pub limit: LimitSolution<T>,
    pub states: Vec<ScaledState<T>>,
    pub records: Vec<ContinuationRecord>,
    pub termination: Termination,
}

impl<T: Real> ContinuationResult<T> {
    /// Largest accepted `lambda`.
    pub fn lambda_reached(&self) -> T {
        self.states.last().map_or(T::zero(), |s| s.lambda)
    }

    pub fn state_at(&self, lambda: T) -> Option<&ScaledState<T>> {
        self.states.iter().find(|s| s.lambda == lambda)
    }

}

fn record<T: Real>(
    state: &ScaledState<T>,
    seed: &ConformalSeed<T>,
    outcome: Option<&CorrectorOutcome<T>>,
) -> Result<ContinuationRecord> {
    let (rel, obstruction) = relative_residual(state, seed)?;
    let constraints = if state.lambda > T::zero() {
        let (phi, w, _) = state.unscale(&seed.sigma);
        let r = constraint_residuals(&phi, &w, &state.unscaled_seed(seed))?;
        Some(ConstraintResiduals {
            hamiltonian_norm: r.hamiltonian_norm.to_f64_lossy(),
            hamiltonian_scale: r.hamiltonian_scale.to_f64_lossy(),
            momentum_norm: r.momentum_norm.to_f64_lossy(),
            conformal_form: r.conformal_form,
        })
    } else {
        None
    };
    Ok(ContinuationRecord {
        lambda: state.lambda.to_f64_lossy(),
        c: state.c.to_f64_lossy(),
        psi_norm: state.psi.norm_l2().to_f64_lossy(),
        orthogonality: state.psi.integrate().to_f64_lossy(),
        min_phi_tilde: state.phi_tilde().min().to_f64_lossy(),
        newton_iterations: outcome.map_or(0, |o| o.iterations),
        gmres_iterations: outcome.map_or(0, |o| o.gmres_iterations),
        relative_residual: rel.to_f64_lossy(),
        pivot: outcome.and_then(|o| o.pivot).map(|p| p.value.to_f64_lossy()),
        obstruction: obstruction.iter().map(|&o| o * o).sum::<T>().sqrt().to_f64_lossy(),
        constraints,
    })
}

/// Follows the branch from `lambda = 0` to `lambda_max`.
///
/// The step grows after easy corrections and is halved after failures. The
/// march stops early on a singular pivot or when the step underflows; the
/// last accepted `lambda` is then the reach of the branch.
pub fn run_continuation<T: Real>(
    seed: &ConformalSeed<T>,
    lambda_max: T,
    opts: &ContinuationOptions<T>,
) -> Result<ContinuationResult<T>> {
    if !(lambda_max >= T::zero()) {
        return Err(SolveError::InvalidArgument("lambda_max must be non-negative".into()));
    }
    let limit = solve_limit_system(seed, opts.root_policy, &opts.linear)?;
    let start = correct(&limit.state, seed, opts)?;
    let mut states = vec![start.state.clone()];
    let mut records = vec![record(&start.state, seed, Some(&start))?];
    let mut checkpoints: Vec<T> = opts.checkpoints.iter().copied().filter(|&l| l > T::zero() && l < lambda_max).collect();
    checkpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite checkpoints"));

    let mut step = opts.initial_step;
    let mut last_failure: Option<SolveError> = None;
    let termination = loop {
        let current = states.last().expect("non-empty path");
        let lambda = current.lambda.to_f64_lossy();
        if current.lambda >= lambda_max {
            break Termination::LambdaMax;
        }
        if states.len() >= opts.max_points {
            break Termination::PointLimit { lambda };
        }
        if step < opts.min_step {
            break match last_failure {
                Some(SolveError::PositivityLoss { min }) => Termination::PositivityLoss { lambda, min },
                other => Termination::StepUnderflow {
                    lambda,
                    step: step.to_f64_lossy(),
                    last_failure: other.map_or_else(String::new, |e| e.to_string()),
                },
            };
        }
        let mut target = (current.lambda + step).min(lambda_max);
        if let Some(&cp) = checkpoints.iter().find(|&&cp| cp > current.lambda) {
            target = target.min(cp);
        }
        match correct(&current.with_lambda(target), seed, opts) {
            Ok(outcome) => {
                records.push(record(&outcome.state, seed, Some(&outcome))?);
                if outcome.iterations <= opts.easy_iterations {
                    step *= opts.growth;
                }
                states.push(outcome.state);
            }
            Err(SolveError::DoubleRootDegeneracy { pivot }) => {
                break Termination::DoubleRootDegeneracy { lambda: target.to_f64_lossy(), pivot };
            }
            Err(e) => {
                log::debug!("continuation step to {target} failed: {e}");
                last_failure = Some(e);
                step *= T::lit(0.5);
            }
        }
    };
    Ok(ContinuationResult { limit, states, records, termination })
}
