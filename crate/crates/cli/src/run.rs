//! Mode dispatch, artifact writing and exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_rational::BigRational;

use constraints_core::continuation::{phi_lambda_residual, run_continuation, ContinuationOptions};
use constraints_core::coupled::{
    bootstrap_exponents, run_fixed_point, source_magnitude, stability_params, FixedPointOptions, StabilityOptions,
    PARITY_OBSTRUCTION_TOL,
};
use constraints_core::diagnostics::{constraint_residuals, energy_identity_residual, system_residuals};
use constraints_core::elliptic::{solve_vector, LinearSolveOptions};
use constraints_core::fields::{cfld, gradient};
use constraints_core::geometry::divergence;
use constraints_core::lichnerowicz::{solvability_identity_residual, solve_lichnerowicz, LichnerowiczOptions};
use constraints_core::{ConformalSeed, Exponents, ScalarField, SolveError, SymTensorField, VectorField};

use crate::config::{Mode, RunConfig};
use crate::report::{
    BootstrapSection, ContinuationSection, ExactBootstrap, FixedPointSection, LichnerowiczSection, LimitRows, Phase,
    RunReport, SeedSummary, TtSection, VectorSection,
};
use crate::seed::{build_seed, make_tt, read_scalar, read_vector};
use crate::{CliError, EXIT_OK};

/// File name of the report inside the output directory.
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: RunReport,
    pub error: Option<CliError>,
}

/// Runs `config`, writing fields and `report.json` to `config.out` when set.
pub fn run(config: &RunConfig) -> RunOutcome {
    let start = Instant::now();
    let mut ctx = Context { config, report: RunReport::new(config) };
    let mut result = config.validate().and_then(|()| ctx.dispatch());
    ctx.report.timing.total_seconds = start.elapsed().as_secs_f64();

    let code = result.as_ref().err().map_or(EXIT_OK, CliError::exit_code);
    ctx.report.status.exit_code = code;
    ctx.report.status.success = code == EXIT_OK;
    if let Err(e) = &result {
        ctx.report.status.error_kind = Some(e.kind());
        ctx.report.status.message = Some(e.to_string());
    }
    if let Some(dir) = &config.out {
        let path = dir.join(REPORT_FILE);
        ctx.report.outputs.push(path.clone());
        let written = std::fs::create_dir_all(dir)
            .map_err(|e| e.to_string())
            .and_then(|()| serde_json::to_string_pretty(&ctx.report).map_err(|e| e.to_string()))
            .and_then(|json| std::fs::write(&path, json).map_err(|e| e.to_string()));
        if let Err(e) = written {
            if result.is_ok() {
                result = Err(CliError::Output(format!("{}: {e}", path.display())));
            }
        }
    }
    let exit_code = result.as_ref().err().map_or(EXIT_OK, CliError::exit_code);
    ctx.report.status.exit_code = exit_code;
    RunOutcome { exit_code, report: ctx.report, error: result.err() }
}

struct Context<'a> {
    config: &'a RunConfig,
    report: RunReport,
}

fn linear(config: &RunConfig) -> LinearSolveOptions<f64> {
    LinearSolveOptions { tol: config.tolerances.linear, max_iter: config.tolerances.linear_max_iter }
}

fn lichnerowicz_opts(config: &RunConfig) -> LichnerowiczOptions<f64> {
    LichnerowiczOptions { tol: config.tolerances.lichnerowicz, linear: linear(config), ..LichnerowiczOptions::default() }
}

fn stability_opts(config: &RunConfig) -> StabilityOptions<f64> {
    let s = &config.stability;
    StabilityOptions {
        probes: s.probes,
        safety: s.safety,
        sobolev_trials: s.sobolev_trials,
        rng_seed: s.rng_seed,
        linear: linear(config),
    }
}

/// `(n-1)/n phi^N grad tau`.
fn momentum_source(seed: &ConformalSeed, phi: &ScalarField) -> VectorField {
    let ex = Exponents::<f64>::new(seed.n());
    gradient(&seed.tau).mul_scalar_field(&phi.map(|p| ex.tau_coef * p.powf(ex.big_n)))
}

impl Context<'_> {
    fn dispatch(&mut self) -> Result<(), CliError> {
        match self.config.mode {
            Mode::FixedPoint => self.fixed_point(),
            Mode::Continuation => self.continuation(),
            Mode::Lichnerowicz => self.lichnerowicz(),
            Mode::Vector => self.vector(),
            Mode::MakeTt => self.make_tt(),
            Mode::Check => self.check(),
            Mode::Stability => self.stability().map(|_| ()),
            Mode::Bootstrap => self.bootstrap(),
        }
    }

    fn timed<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.report.timing.phases.push(Phase { name: name.to_owned(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    fn seed(&mut self, scale_by_lambda: bool) -> Result<ConformalSeed, CliError> {
        let seed = self.timed("seed", || build_seed(self.config, scale_by_lambda))?;
        self.report.seed = Some(SeedSummary::of(&seed));
        Ok(seed)
    }

    fn write(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<(), constraints_core::fields::FieldError>) -> Result<(), CliError> {
        let Some(dir) = &self.config.out else { return Ok(()) };
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        let path: PathBuf = dir.join(name);
        write(&path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.report.outputs.push(path);
        Ok(())
    }

    fn write_solution(&mut self, phi: &ScalarField, w: &VectorField, sigma: &SymTensorField) -> Result<(), CliError> {
        self.write("phi.cfld", |p| cfld::write_scalar(p, phi))?;
        self.write("w.cfld", |p| cfld::write_vector(p, w))?;
        self.write("sigma.cfld", |p| cfld::write_sym_tensor(p, sigma))
    }

    /// Constraint and system residuals plus the energy identity at `(phi, W)`.
    fn diagnose(&mut self, phi: &ScalarField, w: &VectorField, seed: &ConformalSeed) -> Result<(), CliError> {
        let start = Instant::now();
        let tol = self.config.tolerances.check;
        let constraints = constraint_residuals(phi, w, seed)?;
        let system = system_residuals(phi, w, seed)?;
        let source_energy = source_magnitude(seed, w).map(|v| v * v).integrate();
        let energy = energy_identity_residual(phi, w, seed).abs() / source_energy.max(f64::MIN_POSITIVE);
        self.report.check("hamiltonian_l2", constraints.hamiltonian_norm, tol);
        self.report.check("momentum_l2", constraints.momentum_norm, tol);
        self.report.check("energy_identity_relative", energy, 100.0 * self.config.tolerances.lichnerowicz);
        self.report.constraints = Some(constraints);
        self.report.system = Some(system);
        self.report.timing.phases.push(Phase { name: "diagnostics".into(), seconds: start.elapsed().as_secs_f64() });
        Ok(())
    }

    fn fixed_point(&mut self) -> Result<(), CliError> {
        let seed = self.seed(true)?;
        let guard = if self.config.stability.guard {
            match self.timed("stability", || stability_params(&seed, &stability_opts(self.config))) {
                Ok(report) => {
                    if !report.feasible {
                        log::warn!("stability constants are not feasible at x = {:e}", report.x);
                    }
                    self.report.stability = Some(report.clone());
                    Some(report)
                }
                Err(e) if e.is_infeasible() && !matches!(e, SolveError::DegenerateData(_)) => {
                    log::warn!("{e}; iterating without set checks");
                    None
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        let opts = FixedPointOptions {
            lichnerowicz: lichnerowicz_opts(self.config),
            linear: linear(self.config),
            fixpoint_tol: self.config.tolerances.fixpoint,
            max_iter: self.config.tolerances.fixpoint_max_iter,
        };
        let result = self.timed("fixed-point", || run_fixed_point(&seed, guard.as_ref(), &opts))?;
        let phi = result.phi_field();
        let max_obstruction = result.records.iter().map(|r| r.obstruction).fold(0.0, f64::max);
        if seed.parity {
            self.report.check("parity_obstruction", max_obstruction, PARITY_OBSTRUCTION_TOL);
        }
        self.report.fixed_point = Some(FixedPointSection {
            guarded: guard.as_ref().is_some_and(|g| g.feasible),
            iterations: result.records.clone(),
            phi_min: phi.min(),
            phi_max: phi.max(),
            max_obstruction,
        });
        self.diagnose(&phi, &result.w, &seed)?;
        self.write_solution(&phi, &result.w, &seed.sigma)
    }

    fn continuation(&mut self) -> Result<(), CliError> {
        let seed = self.seed(false)?;
        let c = &self.config.continuation;
        let opts = ContinuationOptions {
            linear: linear(self.config),
            root_policy: c.root_policy,
            newton_tol: self.config.tolerances.newton,
            initial_step: c.initial_step,
            checkpoints: c.checkpoints.clone(),
            ..ContinuationOptions::default()
        };
        let lambda_max = c.lambda_max;
        let result = self.timed("continuation", || run_continuation(&seed, lambda_max, &opts))?;
        let limit = &result.limit;
        let rows = phi_lambda_residual(&limit.state, &seed)?;
        let scale = limit.c0.powf(Exponents::<f64>::new(seed.n()).big_n).max(1.0);
        self.report.check("limit_row_psi", rows.psi.norm_l2() / scale, 1e-10);
        self.report.check("limit_row_ortho", rows.c.abs() / scale, 1e-10);
        self.report.check("limit_row_w", rows.w.zero_mean().norm_l2() / scale, 1e-10);
        self.report.continuation = Some(ContinuationSection {
            quadratic: limit.quadratic,
            unique_positive: limit.quadratic.unique_positive(),
            positive_roots: limit.positive_roots.clone(),
            two_positive_roots: limit.two_positive_roots,
            c0: limit.c0,
            limit_obstruction: limit.obstruction.clone(),
            limit_residuals: LimitRows { psi: rows.psi.norm_l2(), ortho: rows.c.abs(), w: rows.w.zero_mean().norm_l2() },
            records: result.records.clone(),
            termination: result.termination.clone(),
            lambda_reached: result.lambda_reached(),
        });
        let last = result.states.last().expect("the limit state is always accepted");
        let (phi, w, sigma) = last.unscale(&seed.sigma);
        if last.lambda > 0.0 {
            let unscaled = last.unscaled_seed(&seed);
            let constraints = constraint_residuals(&phi, &w, &unscaled)?;
            self.report.constraints = Some(constraints);
            self.report.system = Some(system_residuals(&phi, &w, &unscaled)?);
        }
        self.write_solution(&phi, &w, &sigma)?;
        match result.termination.error() {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    fn lichnerowicz(&mut self) -> Result<(), CliError> {
        let seed = self.seed(true)?;
        let a_field = seed.sigma.norm_sq().map(f64::sqrt);
        let opts = lichnerowicz_opts(self.config);
        let sol = self.timed("lichnerowicz", || solve_lichnerowicz(&seed.tau, &a_field, &opts))?;
        let phi = sol.phi_field();
        let ex = Exponents::<f64>::new(seed.n());
        let solv_scale = ex.tau_coef * phi.zip_map(&seed.tau, |p, t| t * t * p.powf(ex.big_n - 1.0)).integrate();
        let solv = solvability_identity_residual(&phi, &seed.tau, &a_field).abs() / solv_scale.max(f64::MIN_POSITIVE);
        let margin = sol.bracket.margin(&phi);
        self.report.check("relative_residual", sol.relative_residual, opts.tol);
        self.report.check("solvability_identity_relative", solv, 100.0 * opts.tol);
        self.report.check("bracket_violation", -margin, 1e-12);
        self.report.lichnerowicz = Some(LichnerowiczSection {
            newton_iterations: sol.newton_iterations,
            relative_residual: sol.relative_residual,
            used_fallback: sol.used_fallback,
            bracket_margin: margin,
            lambda_minus: sol.bracket.lambda_minus,
            c_minus: sol.bracket.c_minus,
            c_plus: sol.bracket.c_plus,
            phi_min: phi.min(),
            phi_max: phi.max(),
        });
        self.write("phi.cfld", |p| cfld::write_scalar(p, &phi))?;
        self.write("sigma.cfld", |p| cfld::write_sym_tensor(p, &seed.sigma))
    }

    fn vector(&mut self) -> Result<(), CliError> {
        let seed = self.seed(true)?;
        let phi = match &self.config.fields.phi {
            Some(path) => read_scalar(path, seed.grid())?,
            None => ScalarField::constant(seed.grid(), 1.0),
        };
        let xi = momentum_source(&seed, &phi);
        let lin = linear(self.config);
        let sol = self.timed("vector", || solve_vector(&xi, &seed.eta, &lin))?;
        if seed.parity {
            self.report.check("parity_obstruction", sol.obstruction_norm(), PARITY_OBSTRUCTION_TOL);
        }
        self.report.check("relative_residual", sol.relative_residual, 10.0 * lin.tol);
        self.report.vector = Some(VectorSection {
            iterations: sol.iterations,
            relative_residual: sol.relative_residual,
            obstruction: sol.obstruction.clone(),
            obstruction_norm: sol.obstruction_norm(),
            w_norm: sol.w.norm_l2(),
        });
        self.write("w.cfld", |p| cfld::write_vector(p, &sol.w))
    }

    fn make_tt(&mut self) -> Result<(), CliError> {
        let (sigma, _eta) = self.timed("make-tt", || make_tt(self.config))?;
        let scale = sigma.norm_linf().max(1.0);
        let section = TtSection {
            norm_l2: sigma.norm_l2(),
            trace_linf: sigma.trace().norm_linf(),
            divergence_l2: divergence(&sigma).norm_l2(),
        };
        self.report.check("trace_linf", section.trace_linf / scale, constraints_core::geometry::TRACE_TOL);
        self.report.check("divergence_l2", section.divergence_l2 / scale, constraints_core::geometry::DIVERGENCE_TOL);
        self.report.tt = Some(section);
        self.write("sigma.cfld", |p| cfld::write_sym_tensor(p, &sigma))
    }

    fn check(&mut self) -> Result<(), CliError> {
        let seed = self.seed(true)?;
        let fields = &self.config.fields;
        let (Some(phi_path), Some(w_path)) = (&fields.phi, &fields.w) else {
            return Err(CliError::Config("check mode needs fields.phi and fields.w".into()));
        };
        let phi = read_scalar(phi_path, seed.grid())?;
        let w = read_vector(w_path, seed.grid())?;
        self.diagnose(&phi, &w, &seed)?;
        let failed: Vec<String> = self
            .report
            .failed_checks()
            .iter()
            .map(|c| format!("{} = {:e} exceeds {:e}", c.name, c.value, c.threshold))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Check(failed.join("; ")))
        }
    }

    fn stability(&mut self) -> Result<bool, CliError> {
        let seed = self.seed(true)?;
        let report = self.timed("stability", || stability_params(&seed, &stability_opts(self.config)))?;
        self.report.check("margin_mean_violation", -report.margin_mean, 0.0);
        self.report.check("margin_deviation_violation", -report.margin_deviation, 0.0);
        let feasible = report.feasible;
        let detail = format!(
            "stability margins {:e} and {:e} at x = {:e}",
            report.margin_mean, report.margin_deviation, report.x
        );
        self.report.stability = Some(report);
        if feasible {
            Ok(true)
        } else {
            Err(SolveError::InfeasibleStability(detail).into())
        }
    }

    fn bootstrap(&mut self) -> Result<(), CliError> {
        let p = self.config.bootstrap_p()?;
        let t = self.config.bootstrap_t()?;
        let q0: Option<BigRational> = self.config.bootstrap.q0.as_ref().map(|q| q.to_rational()).transpose()?;
        let table = bootstrap_exponents(self.config.n, p, t, q0, self.config.bootstrap.i_max)?;
        let escape = table.require_escape();
        self.report.bootstrap = Some(BootstrapSection {
            exact: ExactBootstrap::of(&table),
            table: table.to_f64(),
            strictly_increasing: table.is_strictly_increasing(),
            constant: table.is_constant(),
            escapes: escape.is_ok(),
        });
        match escape {
            Err(e @ SolveError::NonEscaping { .. }) if self.config.bootstrap.require_escape => Err(e.into()),
            Err(e) => {
                log::warn!("{e}");
                Ok(())
            }
            Ok(_) => Ok(()),
        }
    }
}
