use constraints_core::diagnostics::{
    check_homogeneous_inequality, check_moment_lemma, check_pointwise_inequality, constraint_residuals,
    energy_identity_residual, estimate_sobolev_constant, jensen_gap, reconstruct_initial_data, scalar_inequality_margin,
    sobolev_ratio, system_residuals,
};
use constraints_core::fields::{Grid, ScalarField, VectorField};
use constraints_core::presets::{self, PresetOptions};
use constraints_core::rng::BandLimited;
use constraints_core::SolveError;

#[test]
fn exact_constant_solution_has_zero_residuals() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    let s0 = 0.3;
    let seed = presets::constant(&g, &PresetOptions { sigma_norm: s0, ..PresetOptions::default() }).unwrap();
    let phi = ScalarField::constant(&g, (1.5 * s0 * s0).powf(1.0 / 12.0));
    let w = VectorField::zeros(&g);
    let r = constraint_residuals(&phi, &w, &seed).unwrap();
    assert!(r.hamiltonian_norm <= 1e-14 * r.hamiltonian_scale);
    assert!(r.momentum_norm <= 1e-14);
    let s = system_residuals(&phi, &w, &seed).unwrap();
    assert!(s.lichnerowicz_norm <= 1e-13 && s.vector_norm <= 1e-14);
    assert!(energy_identity_residual(&phi, &w, &seed).abs() <= 1e-14);
}

/// For constant `phi = c`: `H = (n-1)/n tau^2 - c^(-2N) |sigma|^2`.
#[test]
fn hamiltonian_of_constant_trial_factor() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    let s0 = 0.2;
    let seed = presets::constant(&g, &PresetOptions { sigma_norm: s0, ..PresetOptions::default() }).unwrap();
    for c in [0.5f64, 1.0, 1.7] {
        let r = constraint_residuals(&ScalarField::constant(&g, c), &VectorField::zeros(&g), &seed).unwrap();
        let expect = (2.0 / 3.0 - c.powi(-12) * s0 * s0).abs();
        assert!((r.hamiltonian_norm - expect).abs() <= 1e-12 * (1.0 + expect), "c {c}");
    }
}

#[test]
fn reconstructed_mean_curvature_is_tau() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    let seed = presets::parity_smooth(&g, &PresetOptions::default()).unwrap();
    let bl = BandLimited::default();
    let phi = bl.positive(&g, 4, 1.0, 0.3);
    let w = bl.vector(&g, 5);
    let data = reconstruct_initial_data(&phi, &w, &seed).unwrap();
    assert!((&data.mean_curvature() - &seed.tau).norm_linf() <= 1e-13);
    let negative = phi.add_scalar(-10.0);
    assert!(matches!(reconstruct_initial_data(&negative, &w, &seed), Err(SolveError::PositivityLoss { .. })));
}

#[test]
fn inequality_margins() {
    assert_eq!(scalar_inequality_margin(1.0f64, 1.5), 0.0);
    // x = 0: alpha + 1 - 1 = alpha.
    assert!((scalar_inequality_margin(0.0f64, 1.5) - 1.5).abs() < 1e-15);
    let report = check_pointwise_inequality(&[(0.5, 1.2), (3.0, 1.5), (1.0, 1.7)]);
    assert_eq!(report.samples, 3);
    assert_eq!(report.argmin, vec![1.0, 1.7]);
    let report = check_homogeneous_inequality(&[(2.0, 2.0, 1.5), (0.1, 4.0, 1.9)]);
    assert!(report.min_margin >= 0.0);
}

#[test]
fn moment_lemma_and_jensen() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    let bl = BandLimited::default();
    let tau = bl.positive(&g, 1, 1.0, 0.5);
    let f = bl.positive(&g, 2, 1.0, 0.8);
    assert!(check_moment_lemma(&f, &tau, 1.5, 2.0).unwrap() >= 0.0);
    assert!(jensen_gap(&f, &tau, 1.5).unwrap() >= 0.0);
    assert!(check_moment_lemma(&f, &tau, 2.5, 2.0).is_err());
    assert!(check_moment_lemma(&f.add_scalar(-10.0), &tau, 1.5, 2.0).is_err());
}

#[test]
fn sobolev_estimates() {
    let g = Grid::<f64>::new(3, 8).unwrap();
    let tau = ScalarField::constant(&g, 1.0);
    assert_eq!(sobolev_ratio(&tau, &tau).unwrap(), None);
    let s = estimate_sobolev_constant(&tau, 8, 1).unwrap();
    assert!(s > 0.0 && s.is_finite());
    assert!(estimate_sobolev_constant(&ScalarField::zeros(&g), 8, 1).is_err());
}
