//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one line per criterion. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use constraints_cli::config::RunConfig;
use constraints_cli::{run, EXIT_INFEASIBLE};
use constraints_core::continuation::{
    jacobian_apply, phi_lambda_residual, run_continuation, solve_limit_system, Block, ContinuationOptions, QuadraticC0,
    RootPolicy, ScaledState, Termination,
};
use constraints_core::coupled::{bootstrap_exponents, run_fixed_point, stability_params, FixedPointOptions, StabilityOptions};
use constraints_core::diagnostics::{
    check_homogeneous_inequality, check_moment_lemma, check_pointwise_inequality, constraint_residuals,
};
use constraints_core::elliptic::{LinearSolveOptions, SplitField};
use constraints_core::fields::{Grid, ScalarField};
use constraints_core::geometry::tt_project;
use constraints_core::lichnerowicz::{
    build_bracket, solvability_identity_residual, solve_lichnerowicz, solve_lichnerowicz_from, LichnerowiczOptions,
};
use constraints_core::presets::{self, PresetOptions};
use constraints_core::rng::BandLimited;
use constraints_core::ConformalSeed;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn grid(m: usize) -> Grid<f64> {
    Grid::new(3, m).expect("valid grid")
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

fn scaled_seed(m: usize) -> Result<ConformalSeed, String> {
    presets::parity_smooth(&grid(m), &PresetOptions { sigma_norm: 1.0, ..PresetOptions::default() }).map_err(err)
}

fn constant_seed_oracle() -> Outcome {
    let g = grid(16);
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut w_max: f64 = 0.0;
    for s0 in [1e-3, 0.01, 0.3, 2.0] {
        let seed = presets::constant(&g, &PresetOptions { sigma_norm: s0, ..PresetOptions::default() }).map_err(err)?;
        let start = Instant::now();
        let result = run_fixed_point(&seed, None, &FixedPointOptions::default()).map_err(err)?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let expect = (1.5 * s0 * s0).powf(1.0 / 12.0);
        worst = worst.max((&result.phi_field() - &ScalarField::constant(&g, expect)).norm_linf() / expect);
        w_max = w_max.max(result.w.norm_linf());
    }
    ensure(
        worst <= 1e-10 && w_max <= 1e-12 && slowest < 1.0,
        format!("phi rel err {worst:.2e}, |W| {w_max:.2e}, slowest {slowest:.3} s"),
    )
}

fn parity_smooth_residuals() -> Outcome {
    let start = Instant::now();
    let seed = presets::parity_smooth(&grid(32), &PresetOptions::default()).map_err(err)?;
    let report = stability_params(&seed, &StabilityOptions::default()).map_err(err)?;
    if !report.feasible {
        return Err(format!("stability not feasible at x = {:e}", report.x));
    }
    let result = run_fixed_point(&seed, Some(&report), &FixedPointOptions::default()).map_err(err)?;
    let r = constraint_residuals(&result.phi_field(), &result.w, &seed).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        r.hamiltonian_norm <= 1e-8 && r.momentum_norm <= 1e-8 && elapsed < 60.0,
        format!("H {:.2e}, M {:.2e}, {elapsed:.1} s", r.hamiltonian_norm, r.momentum_norm),
    )
}

fn continuation_matches_fixed_point() -> Outcome {
    let seed = scaled_seed(16)?;
    let lambdas = [0.01, 0.02, 0.05];
    let opts = ContinuationOptions { checkpoints: lambdas.to_vec(), ..ContinuationOptions::default() };
    let path = run_continuation(&seed, 0.05, &opts).map_err(err)?;
    if path.termination != Termination::LambdaMax {
        return Err(format!("continuation stopped: {:?}", path.termination));
    }
    let mut worst: f64 = 0.0;
    for lambda in lambdas {
        let state = path.state_at(lambda).ok_or(format!("no state at {lambda}"))?;
        let (phi, _, _) = state.unscale(&seed.sigma);
        let direct = run_fixed_point(&state.unscaled_seed(&seed), None, &FixedPointOptions::default()).map_err(err)?;
        worst = worst.max((&direct.phi_field() - &phi).norm_linf() / phi.norm_linf());
    }
    ensure(worst <= 1e-6, format!("max L-inf rel diff {worst:.2e}"))
}

fn limit_system_and_counter_seed() -> Outcome {
    let seed = scaled_seed(16)?;
    let limit = solve_limit_system(&seed, RootPolicy::Unique, &LinearSolveOptions::default()).map_err(err)?;
    let rows = phi_lambda_residual(&limit.state, &seed).map_err(err)?;
    let (psi, ortho, w) = (rows.psi.norm_l2(), rows.c.abs(), rows.w.zero_mean().norm_l2());
    let worst = psi.max(ortho).max(w);
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/counter-seed.toml");
    let outcome = run(&RunConfig::load(&config).map_err(err)?);
    ensure(
        worst <= 1e-10 && outcome.exit_code == EXIT_INFEASIBLE,
        format!("rows {psi:.1e}/{ortho:.1e}/{w:.1e}, counter-seed exit {}", outcome.exit_code),
    )
}

/// Positive roots of `a y^2 + b y + c`, with multiplicity, from exact integer arithmetic.
fn count_positive_roots(a: i64, b: i64, c: i64) -> usize {
    if a == 0 {
        return usize::from(b != 0 && (-c).signum() * b.signum() > 0);
    }
    if (b as i128).pow(2) < 4 * a as i128 * c as i128 {
        return 0;
    }
    let (product, sum) = (c.signum() * a.signum(), -b.signum() * a.signum());
    match product {
        -1 => 1,
        0 => usize::from(sum > 0),
        _ if sum > 0 => 2,
        _ => 0,
    }
}

fn descartes_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut cases = 0;
    while cases < 1000 {
        let (a, b, c) = (rng.random_range(-20..=20), rng.random_range(-20..=20), rng.random_range(-20..=20));
        if a == 0 && b == 0 {
            continue;
        }
        cases += 1;
        let q = QuadraticC0::new(a as f64, b as f64, c as f64);
        if q.unique_positive() != (count_positive_roots(a, b, c) == 1) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches in {cases} quadratics"))
}

fn jacobian_finite_differences() -> Outcome {
    let seed = scaled_seed(16)?;
    let g = seed.grid().clone();
    let limit = solve_limit_system(&seed, RootPolicy::Unique, &LinearSolveOptions::default()).map_err(err)?;
    let bl = BandLimited::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let diff = |a: &Block<f64>, b: &Block<f64>| Block { psi: &a.psi - &b.psi, c: a.c - b.c, w: a.w.sub(&b.w) };
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let state = ScaledState {
            lambda: rng.random_range(0.0..0.1),
            c: limit.c0 * rng.random_range(0.9..1.1),
            psi: &limit.state.psi + &bl.sample(&g, 100 + k).scale(0.05),
            wtilde: limit.state.wtilde.add(&bl.vector(&g, 200 + k).scale(0.05)),
        };
        let dir = Block { psi: bl.sample(&g, 300 + k), c: rng.random_range(-1.0..1.0), w: bl.vector(&g, 400 + k) };
        let jd = jacobian_apply(&state, &seed, &dir).map_err(err)?;
        let h = 1e-6;
        let shifted = |s: f64| ScaledState {
            lambda: state.lambda,
            c: state.c + s * dir.c,
            psi: &state.psi + &dir.psi.scale(s),
            wtilde: state.wtilde.add(&dir.w.scale(s)),
        };
        let plus = phi_lambda_residual(&shifted(h), &seed).map_err(err)?;
        let minus = phi_lambda_residual(&shifted(-h), &seed).map_err(err)?;
        let d = diff(&plus, &minus);
        let fd = Block { psi: d.psi.scale(0.5 / h), c: d.c * 0.5 / h, w: d.w.scale(0.5 / h) };
        worst = worst.max(diff(&fd, &jd).norm() / jd.norm());
    }
    ensure(worst <= 1e-6, format!("max rel error {worst:.2e} over 20 states"))
}

fn identity_suites() -> Outcome {
    let seed = presets::parity_smooth(&grid(16), &PresetOptions::default()).map_err(err)?;
    let opts = FixedPointOptions::default();
    let tol = opts.lichnerowicz.tol;
    let result = run_fixed_point(&seed, None, &opts).map_err(err)?;
    let max = |f: fn(&constraints_core::coupled::IterationRecord) -> f64| result.records.iter().map(f).fold(0.0, f64::max);
    let (energy, solv, cross) = (max(|r| r.energy_residual), max(|r| r.solvability_residual), max(|r| r.cross_term));
    ensure(
        energy <= 100.0 * tol && solv <= 100.0 * tol && cross <= 1e-12,
        format!("energy {energy:.1e}, solvability {solv:.1e}, cross {cross:.1e} over {} solves", result.records.len()),
    )
}

fn inequality_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let magnitude = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-3.0..1.0));
    let scalar: Vec<(f64, f64)> =
        (0..1_000_000).map(|_| (magnitude(&mut rng), rng.random_range(1.0..2.0))).collect();
    let homogeneous: Vec<(f64, f64, f64)> = (0..1_000_000)
        .map(|_| {
            let (a, b) = (magnitude(&mut rng), magnitude(&mut rng));
            (a, b, rng.random_range(1.0..2.0))
        })
        .collect();
    let s = check_pointwise_inequality(&scalar);
    let h = check_homogeneous_inequality(&homogeneous);

    let g = grid(8);
    let bl = BandLimited::default();
    let mut moment = f64::INFINITY;
    for k in 0..200u64 {
        let f = bl.positive(&g, 1000 + k, 1.0, rng.random_range(0.1..0.95));
        let tau = bl.positive(&g, 2000 + k, 1.0, rng.random_range(0.0..0.9));
        let m = check_moment_lemma(&f, &tau, rng.random_range(1.0..2.0), rng.random_range(1.05..4.0)).map_err(err)?;
        moment = moment.min(m);
    }
    let worst = s.min_margin.min(h.min_margin).min(moment);
    ensure(
        worst >= -1e-12,
        format!("min margins: scalar {:.1e}, homogeneous {:.1e}, moment {moment:.1e}", s.min_margin, h.min_margin),
    )
}

fn bracket_property() -> Outcome {
    let g = grid(16);
    let opts = LichnerowiczOptions::default();
    let bl = BandLimited::default();
    let mut worst_margin = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    for k in 0..50u64 {
        let tau = bl.positive(&g, 3000 + k, 1.0, 0.5);
        let a = bl.positive(&g, 4000 + k, 0.3, 0.2);
        let sol = solve_lichnerowicz(&tau, &a, &opts).map_err(err)?;
        worst_margin = worst_margin.min(sol.bracket.margin(&sol.phi_field()));
        let br = build_bracket(&tau, &a, &opts).map_err(err)?;
        let lo = solve_lichnerowicz_from(&tau, &a, Some(&SplitField::from_field(&br.phi_minus)), &opts).map_err(err)?;
        let hi = solve_lichnerowicz_from(&tau, &a, Some(&SplitField::from_field(&br.phi_plus)), &opts).map_err(err)?;
        let (lo, hi) = (lo.phi_field(), hi.phi_field());
        worst_gap = worst_gap.max((&lo - &hi).norm_linf() / lo.norm_linf());
    }
    ensure(
        worst_margin >= 0.0 && worst_gap <= 10.0 * opts.tol,
        format!("min bracket margin {worst_margin:.2e}, max end-to-end gap {worst_gap:.2e}"),
    )
}

fn bootstrap_arithmetic() -> Outcome {
    let p = rat(16, 5);
    let at_two = bootstrap_exponents(3, p.clone(), rat(2, 1), None, 10).map_err(err)?;
    if at_two.t0 != rat(12, 7) {
        return Err(format!("t0 = {}", at_two.t0));
    }
    let closed = at_two.rows.iter().all(|r| r.q == rat(2i64.pow(r.i as u32 + 1) + 2, 1));
    let at_t0 = bootstrap_exponents(3, p.clone(), rat(12, 7), None, 10).map_err(err)?;
    let mut escapes = Vec::new();
    for k in 1..=20 {
        let t = rat(12, 7) + rat(k, 20);
        let table = bootstrap_exponents(3, p.clone(), t, None, 10).map_err(err)?;
        escapes.push(table.require_escape().map_err(err)?);
    }
    ensure(
        closed && at_t0.is_constant() && at_t0.require_escape().is_err(),
        format!("t0 = 12/7, escape indices on t grid {escapes:?}"),
    )
}

fn odd_breaking_seed(g: &Grid<f64>) -> Result<ConformalSeed, String> {
    let tau = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin() + 0.2 * (2.0 * PI * (x[1] + x[2])).cos());
    let eta = ScalarField::from_fn(g, |x| 0.5 + 0.1 * (2.0 * PI * x[1]).sin());
    let raw = BandLimited { kmax: 2, even: false }.sym_tensor(g, 11);
    let sigma = tt_project(&raw, &eta, &LinearSolveOptions::default()).map_err(err)?;
    let sigma = sigma.scale(0.3 / sigma.norm_l2());
    ConformalSeed::new(tau, sigma, eta, 4.0, 4.0, false).map_err(err)
}

fn parity_obstruction() -> Outcome {
    let g = grid(16);
    let even = presets::parity_smooth(&g, &PresetOptions::default()).map_err(err)?;
    let result = run_fixed_point(&even, None, &FixedPointOptions::default()).map_err(err)?;
    let even_max = result.records.iter().map(|r| r.obstruction).fold(0.0, f64::max);
    let odd = run_fixed_point(&odd_breaking_seed(&g)?, None, &FixedPointOptions::default()).map_err(err)?;
    let odd_max = odd.records.iter().map(|r| r.obstruction).fold(0.0, f64::max);
    ensure(
        even_max <= 1e-10 && odd_max > 1e-8,
        format!("even seed max {even_max:.1e} over {} iterations, odd seed {odd_max:.1e}", result.records.len()),
    )
}

fn spectral_convergence() -> Outcome {
    let opts = LichnerowiczOptions::default();
    let solve = |m: usize| -> Result<ScalarField<f64>, String> {
        let seed = presets::parity_smooth(&grid(m), &PresetOptions::default()).map_err(err)?;
        let a = seed.sigma.norm_sq().map(f64::sqrt);
        let sol = solve_lichnerowicz(&seed.tau, &a, &opts).map_err(err)?;
        let phi = sol.phi_field();
        let scale = 2.0 / 3.0 * phi.zip_map(&seed.tau, |p, t| t * t * p.powi(5)).integrate();
        let id = solvability_identity_residual(&phi, &seed.tau, &a).abs() / scale;
        if id > 100.0 * opts.tol {
            return Err(format!("solvability identity {id:e} at m = {m}"));
        }
        Ok(phi)
    };
    let coarse = solve(16)?;
    let fine = solve(32)?.restrict_by_two(coarse.grid()).map_err(err)?;
    let d = (&fine - &coarse).norm_linf();
    ensure(d <= 1e-8, format!("L-inf diff m=16 vs m=32: {d:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("analytic constant-seed oracle", constant_seed_oracle),
        ("constraint residuals, parity-smooth m=32", parity_smooth_residuals),
        ("continuation vs fixed point", continuation_matches_fixed_point),
        ("limit system rows, counter-seed exit", limit_system_and_counter_seed),
        ("Descartes suite", descartes_suite),
        ("Jacobian finite differences", jacobian_finite_differences),
        ("identity suites", identity_suites),
        ("inequality suites", inequality_suites),
        ("bracket property", bracket_property),
        ("bootstrap arithmetic", bootstrap_arithmetic),
        ("parity obstruction", parity_obstruction),
        ("spectral convergence", spectral_convergence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
