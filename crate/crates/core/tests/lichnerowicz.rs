use constraints_core::elliptic::SplitField;
use constraints_core::fields::{Grid, ScalarField};
use constraints_core::lichnerowicz::{
    build_bracket, lichnerowicz_residual, solvability_identity_residual, solve_lichnerowicz, solve_lichnerowicz_from,
    LichnerowiczOptions,
};
use constraints_core::rng::BandLimited;
use constraints_core::SolveError;

fn random_data(g: &Grid<f64>, s: u64) -> (ScalarField<f64>, ScalarField<f64>) {
    let bl = BandLimited { kmax: 2, even: false };
    (bl.positive(g, s, 1.0, 0.5), bl.positive(g, s + 1000, 0.3, 0.2))
}

/// Constant data solve `(n-1)/n tau^2 phi^(N-1) = A^2 phi^(-N-1)` algebraically.
#[test]
fn constant_data_matches_algebraic_root() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    for (tau, a) in [(1.0f64, 0.01f64), (2.0, 0.5), (0.3, 3.0)] {
        let expect = (a * a / (2.0 / 3.0 * tau * tau)).powf(1.0 / 12.0);
        let sol = solve_lichnerowicz(
            &ScalarField::constant(&g, tau),
            &ScalarField::constant(&g, a),
            &LichnerowiczOptions::default(),
        )
        .unwrap();
        assert!((sol.phi.mean - expect).abs() <= 1e-12 * expect, "tau {tau}, A {a}");
        assert!(sol.phi.fluct.norm_linf() <= 1e-14 * expect);
    }
}

#[test]
fn solution_lies_in_bracket_and_satisfies_identity() {
    let g = Grid::<f64>::new(3, 16).unwrap();
    let opts = LichnerowiczOptions::default();
    for s in 0..3 {
        let (tau, a) = random_data(&g, s);
        let sol = solve_lichnerowicz(&tau, &a, &opts).unwrap();
        let phi = sol.phi_field();
        assert!(sol.bracket.contains(&phi), "seed {s}: margin {:e}", sol.bracket.margin(&phi));
        assert!(sol.relative_residual <= opts.tol);

        let scale = 2.0 / 3.0 * phi.zip_map(&tau, |p, t| t * t * p.powi(5)).integrate();
        let id = solvability_identity_residual(&phi, &tau, &a).abs() / scale;
        assert!(id <= 100.0 * opts.tol, "seed {s}: identity {id:e}");

        let r = lichnerowicz_residual(&sol.phi, &tau, &a);
        assert!(r.norm_l2() <= 1e-8);
    }
}

#[test]
fn newton_from_either_bracket_end_agrees() {
    let g = Grid::<f64>::new(3, 16).unwrap();
    let opts = LichnerowiczOptions::default();
    let (tau, a) = random_data(&g, 7);
    let br = build_bracket(&tau, &a, &opts).unwrap();
    let lo = solve_lichnerowicz_from(&tau, &a, Some(&SplitField::from_field(&br.phi_minus)), &opts).unwrap();
    let hi = solve_lichnerowicz_from(&tau, &a, Some(&SplitField::from_field(&br.phi_plus)), &opts).unwrap();
    let (lo, hi) = (lo.phi_field(), hi.phi_field());
    assert!((&lo - &hi).norm_linf() / lo.norm_linf() <= 10.0 * opts.tol);
}

#[test]
fn regularized_fallback_reaches_same_solution() {
    let g = Grid::<f64>::new(3, 16).unwrap();
    let opts = LichnerowiczOptions::default();
    let (tau, a) = random_data(&g, 3);
    let direct = solve_lichnerowicz(&tau, &a, &opts).unwrap();
    let fallback = solve_lichnerowicz(&tau, &a, &LichnerowiczOptions { force_fallback: true, ..opts.clone() }).unwrap();
    assert!(fallback.used_fallback);
    let d = (&fallback.phi_field() - &direct.phi_field()).norm_linf() / direct.phi_field().norm_linf();
    assert!(d <= 1e-9, "difference {d:e}");
}

#[test]
fn sign_changing_tau_is_accepted() {
    let g = Grid::<f64>::new(3, 16).unwrap();
    let tau = ScalarField::from_fn(&g, |x| (2.0 * std::f64::consts::PI * x[0]).cos());
    let a = ScalarField::constant(&g, 0.2);
    let sol = solve_lichnerowicz(&tau, &a, &LichnerowiczOptions::default()).unwrap();
    let phi = sol.phi_field();
    assert!(phi.min() > 0.0);
    assert!(sol.bracket.contains(&phi));
}

#[test]
fn rejects_invalid_schedule() {
    let g = Grid::<f64>::new(3, 4).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let mut opts = LichnerowiczOptions::default();
    opts.schedule.k_values = vec![4, 2];
    assert!(matches!(solve_lichnerowicz(&one, &one, &opts), Err(SolveError::InvalidArgument(_))));
}
