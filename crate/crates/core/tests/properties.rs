use std::f64::consts::PI;

use num_rational::BigRational;
use proptest::prelude::*;

use constraints_core::continuation::QuadraticC0;
use constraints_core::coupled::bootstrap_exponents;
use constraints_core::diagnostics::{homogeneous_inequality_margin, jensen_gap, scalar_inequality_margin};
use constraints_core::elliptic::{solve_vector, LinearSolveOptions};
use constraints_core::fields::cfld::FieldFile;
use constraints_core::fields::{partial, Grid, ScalarField, VectorField};
use constraints_core::geometry::{divergence, tt_project, vector_laplacian_apply};
use constraints_core::rng::BandLimited;

/// Positive roots of `a y^2 + b y + c`, with multiplicity, by exact integer arithmetic.
fn count_positive_roots(a: i64, b: i64, c: i64) -> usize {
    if a == 0 {
        return usize::from(b != 0 && (-c).signum() * b.signum() > 0);
    }
    let disc = (b as i128).pow(2) - 4 * a as i128 * c as i128;
    if disc < 0 {
        return 0;
    }
    // Vieta: product c/a, sum -b/a.
    let product = c.signum() * a.signum();
    let sum = -b.signum() * a.signum();
    match product {
        -1 => 1,
        0 => usize::from(sum > 0),
        _ if sum > 0 => 2,
        _ => 0,
    }
}

fn small_grid() -> Grid<f64> {
    Grid::new(3, 8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn descartes_verdict_matches_root_count(a in -12i64..=12, b in -12i64..=12, c in -12i64..=12) {
        prop_assume!(a != 0 || b != 0);
        let q = QuadraticC0::new(a as f64, b as f64, c as f64);
        prop_assert_eq!(q.unique_positive(), count_positive_roots(a, b, c) == 1);
    }

    #[test]
    fn real_roots_are_roots(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        prop_assume!(a.abs() > 1e-3);
        let q = QuadraticC0::new(a, b, c);
        let scale = a.abs() + b.abs() + c.abs();
        for y in q.real_roots() {
            prop_assert!(q.eval(y).abs() <= 1e-10 * scale * (1.0 + y * y));
        }
    }

    #[test]
    fn scalar_inequality_holds(x in 0.0f64..50.0, alpha in 1.0f64..2.0) {
        prop_assert!(scalar_inequality_margin(x, alpha) >= -1e-12 * (1.0 + x.powf(alpha)));
    }

    #[test]
    fn homogeneous_inequality_holds(a in 0.0f64..20.0, b in 0.001f64..20.0, alpha in 1.0f64..2.0) {
        let scale = 1.0 + a.powf(alpha) + b.powf(alpha);
        prop_assert!(homogeneous_inequality_margin(a, b, alpha) >= -1e-12 * scale);
    }

    #[test]
    fn bootstrap_monotone_iff_above_threshold(num in 9i64..60, den in 1i64..8) {
        let t = BigRational::new(num.into(), den.into());
        let t0 = BigRational::new(12.into(), 7.into());
        let table = bootstrap_exponents(3, BigRational::new(16.into(), 5.into()), t.clone(), None, 6).unwrap();
        prop_assert_eq!(table.is_strictly_increasing(), t > t0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn jensen_gap_is_nonnegative(seed in 0u64..10_000, alpha in 1.0f64..2.0) {
        let g = small_grid();
        let bl = BandLimited::default();
        let f = bl.positive(&g, seed, 1.0, 0.9);
        let tau = bl.positive(&g, seed + 1, 0.5, 0.4);
        prop_assert!(jensen_gap(&f, &tau, alpha).unwrap() >= -1e-12);
    }

    #[test]
    fn even_samples_are_even(seed in 0u64..10_000) {
        let g = small_grid();
        let f = BandLimited { kmax: 2, even: true }.sample(&g, seed);
        prop_assert!(f.parity_defect() <= 1e-13);
        let h = BandLimited::default().sample(&g, seed);
        let twice = h.reflect().reflect();
        prop_assert_eq!(twice.values(), h.values());
    }

    #[test]
    fn cfld_round_trip_is_bitwise(seed in 0u64..10_000) {
        let g = small_grid();
        let v = BandLimited::default().vector(&g, seed);
        let file = FieldFile::from_components(v.components());
        let mut bytes = Vec::new();
        file.to_writer(&mut bytes).unwrap();
        let back = FieldFile::from_reader(bytes.as_slice()).unwrap();
        let w: VectorField<f64> = back.into_vector(&g).unwrap();
        for (a, b) in v.components().iter().zip(w.components()) {
            let same = a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn spectral_derivative_is_exact(k0 in -3i64..=3, k1 in -3i64..=3, k2 in -3i64..=3, axis in 0usize..3) {
        let g = small_grid();
        let k = [k0 as f64, k1 as f64, k2 as f64];
        let phase = |x: &[f64]| 2.0 * PI * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
        let f = ScalarField::from_fn(&g, |x| phase(x).sin());
        let expect = ScalarField::from_fn(&g, |x| 2.0 * PI * k[axis] * phase(x).cos());
        prop_assert!((&partial(&f, axis) - &expect).norm_linf() <= 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn tt_projection_is_tt_and_idempotent(seed in 0u64..10_000) {
        let g = small_grid();
        let bl = BandLimited::default();
        let eta = bl.positive(&g, seed, 0.5, 0.2);
        let s = bl.sym_tensor(&g, seed + 1);
        let opts = LinearSolveOptions::default();
        let sigma = tt_project(&s, &eta, &opts).unwrap();
        let scale = sigma.norm_l2();
        prop_assert!(sigma.trace().norm_linf() <= 1e-13 * scale);
        prop_assert!(divergence(&sigma).norm_l2() <= 1e-8 * scale);
        let again = tt_project(&sigma, &eta, &opts).unwrap();
        prop_assert!(again.sub(&sigma).norm_l2() <= 1e-8 * scale);
    }

    #[test]
    fn vector_solve_meets_projected_equation(seed in 0u64..10_000) {
        let g = small_grid();
        let bl = BandLimited::default();
        let eta = bl.positive(&g, seed, 0.5, 0.3);
        let xi = bl.vector(&g, seed + 1).add(&VectorField::constant(&g, &[0.3, -0.1, 0.2]));
        let sol = solve_vector(&xi, &eta, &LinearSolveOptions::default()).unwrap();
        for (o, m) in sol.obstruction.iter().zip(xi.means()) {
            prop_assert!((o - m).abs() <= 1e-14);
        }
        let residual = vector_laplacian_apply(&sol.w, &eta).unwrap().sub(&xi.zero_mean());
        prop_assert!(residual.norm_l2() <= 1e-8 * xi.norm_l2());
        prop_assert!(sol.w.means().iter().all(|m| m.abs() <= 1e-14));
    }
}
