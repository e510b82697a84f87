use std::f64::consts::PI;

use constraints_core::continuation::{
    jacobian_apply, phi_lambda_residual, run_continuation, solve_limit_system, Block, ContinuationOptions, QuadraticC0,
    RootPolicy, ScaledState, Termination,
};
use constraints_core::coupled::{run_fixed_point, FixedPointOptions};
use constraints_core::elliptic::LinearSolveOptions;
use constraints_core::fields::{Grid, ScalarField, VectorField};
use constraints_core::presets::{self, PresetOptions};
use constraints_core::rng::BandLimited;
use constraints_core::{ConformalSeed, SolveError};

fn scaled_seed(m: usize) -> ConformalSeed {
    let g = Grid::<f64>::new(3, m).unwrap();
    presets::parity_smooth(&g, &PresetOptions { sigma_norm: 1.0, ..PresetOptions::default() }).unwrap()
}

fn counter_seed(g: &Grid<f64>) -> ConformalSeed {
    let tau = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    let eta = ScalarField::from_fn(g, |x| 0.5 * (1.0 + 0.8 * (2.0 * PI * x[0]).cos()));
    let sigma = presets::generated_tt(g, &eta, 1.0, 3).unwrap();
    ConformalSeed::new(tau, sigma, eta, 4.0, 4.0, true).unwrap()
}

fn diff(a: &Block<f64>, b: &Block<f64>) -> Block<f64> {
    Block { psi: &a.psi - &b.psi, c: a.c - b.c, w: a.w.sub(&b.w) }
}

#[test]
fn limit_system_rows_vanish() {
    let seed = scaled_seed(16);
    let limit = solve_limit_system(&seed, RootPolicy::Unique, &LinearSolveOptions::default()).unwrap();
    assert!(limit.quadratic.a2 > 0.0 && limit.quadratic.unique_positive());
    assert!(!limit.two_positive_roots);
    let y = limit.c0.powi(6);
    assert!(limit.quadratic.eval(y).abs() <= 1e-12);
    let r = phi_lambda_residual(&limit.state, &seed).unwrap();
    assert!(r.psi.norm_l2() <= 1e-10);
    assert!(r.c.abs() <= 1e-10);
    assert!(r.w.zero_mean().norm_l2() <= 1e-10);
    assert!(limit.state.psi.integrate().abs() <= 1e-14);
    assert!(limit.obstruction.iter().all(|o| o.abs() <= 1e-12));
}

#[test]
fn counter_seed_violates_condition() {
    let g = Grid::<f64>::new(3, 16).unwrap();
    let seed = counter_seed(&g);
    let err = solve_limit_system(&seed, RootPolicy::Unique, &LinearSolveOptions::default()).unwrap_err();
    match err {
        SolveError::ConditionViolated { a2 } => assert!(a2 < 0.0),
        other => panic!("unexpected {other}"),
    }
    assert!(SolveError::ConditionViolated { a2: -1.0 }.is_infeasible());
}

#[test]
fn jacobian_matches_finite_differences() {
    let seed = scaled_seed(8);
    let g = seed.grid().clone();
    let limit = solve_limit_system(&seed, RootPolicy::Unique, &LinearSolveOptions::default()).unwrap();
    let bl = BandLimited { kmax: 2, even: false };
    for k in 0..3u64 {
        let state = ScaledState {
            lambda: 0.05 * (k + 1) as f64,
            c: limit.c0 * (1.0 + 0.05 * k as f64),
            psi: &limit.state.psi + &bl.sample(&g, 10 + k).scale(0.05),
            wtilde: limit.state.wtilde.add(&bl.vector(&g, 20 + k).scale(0.05)),
        };
        let dir = Block { psi: bl.sample(&g, 30 + k), c: 0.7, w: bl.vector(&g, 40 + k) };
        let jd = jacobian_apply(&state, &seed, &dir).unwrap();
        let h = 1e-6;
        let shifted = |s: f64| ScaledState {
            lambda: state.lambda,
            c: state.c + s * dir.c,
            psi: &state.psi + &dir.psi.scale(s),
            wtilde: state.wtilde.add(&dir.w.scale(s)),
        };
        let plus = phi_lambda_residual(&shifted(h), &seed).unwrap();
        let minus = phi_lambda_residual(&shifted(-h), &seed).unwrap();
        let d = diff(&plus, &minus);
        let fd = Block { psi: d.psi.scale(0.5 / h), c: d.c * 0.5 / h, w: d.w.scale(0.5 / h) };
        let rel = diff(&fd, &jd).norm() / jd.norm();
        assert!(rel <= 1e-6, "state {k}: relative error {rel:e}");
    }
}

#[test]
fn continuation_agrees_with_fixed_point() {
    let seed = scaled_seed(8);
    let opts = ContinuationOptions { checkpoints: vec![0.02], ..ContinuationOptions::default() };
    let path = run_continuation(&seed, 0.05, &opts).unwrap();
    assert_eq!(path.termination, Termination::LambdaMax);
    assert_eq!(path.lambda_reached(), 0.05);
    for lambda in [0.02, 0.05] {
        let state = path.state_at(lambda).expect("checkpoint is on the path");
        let (phi, _, _) = state.unscale(&seed.sigma);
        let direct = run_fixed_point(&state.unscaled_seed(&seed), None, &FixedPointOptions::default()).unwrap();
        let d = (&direct.phi_field() - &phi).norm_linf() / phi.norm_linf();
        assert!(d <= 1e-6, "lambda {lambda}: {d:e}");
    }
    assert!(path.records.iter().all(|r| r.relative_residual <= 1e-10));
}

#[test]
fn unscaling_is_consistent() {
    let g = Grid::<f64>::new(3, 4).unwrap();
    let state = ScaledState {
        lambda: 0.5,
        c: 2.0,
        psi: ScalarField::zeros(&g),
        wtilde: VectorField::constant(&g, &[1.0, 0.0, 0.0]),
    };
    let sigma = constraints_core::fields::SymTensorField::zeros(&g);
    let (phi, w, _) = state.unscale(&sigma);
    assert!((phi.mean() - 1.0).abs() < 1e-15);
    assert!((w.component(0).mean() - 0.5f64.powi(6)).abs() < 1e-15);
}

#[test]
fn quadratic_roots() {
    let q = QuadraticC0::new(1.0, -3.0, 2.0);
    assert_eq!(q.real_roots(), vec![1.0, 2.0]);
    assert_eq!(q.sign_changes(), 2);
    assert!(!q.unique_positive());
    let q = QuadraticC0::new(2.0, 1.0, -1.0);
    assert!(q.unique_positive());
    assert_eq!(q.positive_roots(), vec![0.5]);
    let q = QuadraticC0::new(0.0, 2.0, -1.0);
    assert_eq!(q.positive_roots(), vec![0.5]);
    assert!(QuadraticC0::new(1.0, 0.0, 1.0).real_roots().is_empty());
}
