//! Builds the conformal seed described by a [`RunConfig`].

use std::f64::consts::PI;

use constraints_core::elliptic::LinearSolveOptions;
use constraints_core::fields::cfld::FieldFile;
use constraints_core::geometry::tt_project;
use constraints_core::presets::{self, PresetOptions};
use constraints_core::rng::BandLimited;
use constraints_core::{ConformalSeed, Exponents, Grid, ScalarField, SymTensorField};

use crate::config::{FieldSource, RunConfig, SigmaSource};
use crate::CliError;

/// Target `|sigma|_{L^2}` when none is configured.
pub const DEFAULT_SIGMA_NORM: f64 = 0.01;
/// `eta` when none is configured.
pub const DEFAULT_ETA: f64 = 0.5;

pub fn grid(config: &RunConfig) -> Result<Grid, CliError> {
    Grid::new(config.n, config.m).map_err(|e| CliError::Config(e.to_string()))
}

pub fn read_scalar(path: &std::path::Path, grid: &Grid) -> Result<ScalarField, CliError> {
    FieldFile::read(path).and_then(|f| f.into_scalar(grid)).map_err(CliError::Input)
}

pub fn read_vector(path: &std::path::Path, grid: &Grid) -> Result<constraints_core::VectorField, CliError> {
    FieldFile::read(path).and_then(|f| f.into_vector(grid)).map_err(CliError::Input)
}

fn read_tensor(path: &std::path::Path, grid: &Grid) -> Result<SymTensorField, CliError> {
    FieldFile::read(path).and_then(|f| f.into_sym_tensor(grid)).map_err(CliError::Input)
}

/// Samples a field source on the grid.
pub fn scalar_from_source(src: &FieldSource, grid: &Grid) -> Result<ScalarField, CliError> {
    match src {
        FieldSource::File(path) => read_scalar(path, grid),
        FieldSource::Series { constant, terms } => Ok(ScalarField::from_fn(grid, |x| {
            terms.iter().fold(*constant, |acc, term| {
                let phase = 2.0 * PI * term.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>();
                acc + term.cos * phase.cos() + term.sin * phase.sin()
            })
        })),
    }
}

/// Random TT tensor of the given norm: a band-limited tensor, York-projected.
pub fn generated_sigma(grid: &Grid, eta: &ScalarField, kmax: usize, even: bool, norm: f64, rng_seed: u64) -> Result<SymTensorField, CliError> {
    let raw = BandLimited { kmax, even }.sym_tensor(grid, rng_seed);
    let tt = tt_project(&raw, eta, &LinearSolveOptions { tol: 1e-13, ..LinearSolveOptions::default() })?;
    let current = tt.norm_l2();
    if !(current > 0.0) {
        return Err(constraints_core::SolveError::DegenerateData("generated TT tensor vanishes".into()).into());
    }
    Ok(tt.scale(norm / current))
}

/// The configured seed, with `sigma` multiplied by `lambda^N` when `scale_by_lambda`.
pub fn build_seed(config: &RunConfig, scale_by_lambda: bool) -> Result<ConformalSeed, CliError> {
    let grid = grid(config)?;
    let s = &config.seed;
    let norm = s.sigma_norm.unwrap_or(DEFAULT_SIGMA_NORM);
    let mut seed = if let Some(preset) = s.preset {
        let opts = PresetOptions { sigma_norm: norm, p: s.p, t: s.t, rng_seed: s.rng_seed };
        presets::build(preset, &grid, &opts)?
    } else {
        let tau_src = s.tau.as_ref().ok_or_else(|| CliError::Config("the seed needs either a preset or a tau source".into()))?;
        let tau = scalar_from_source(tau_src, &grid)?;
        let eta = match &s.eta {
            Some(src) => scalar_from_source(src, &grid)?,
            None => ScalarField::constant(&grid, DEFAULT_ETA),
        };
        let parity = s.parity.unwrap_or(false);
        let sigma = match &s.sigma {
            Some(SigmaSource::File(path)) => {
                let sigma = read_tensor(path, &grid)?;
                match s.sigma_norm {
                    Some(target) if sigma.norm_l2() > 0.0 => sigma.scale(target / sigma.norm_l2()),
                    _ => sigma,
                }
            }
            Some(SigmaSource::Generated { rng_seed, kmax }) => generated_sigma(&grid, &eta, *kmax, parity, norm, *rng_seed)?,
            None => generated_sigma(&grid, &eta, 2, parity, norm, s.rng_seed)?,
        };
        ConformalSeed::new(tau, sigma, eta, s.p, s.t, parity)?
    };
    if let Some(parity) = s.parity {
        if parity != seed.parity {
            seed.parity = parity;
            seed.validate()?;
        }
    }
    if scale_by_lambda {
        if let Some(lambda) = s.lambda {
            let big_n = Exponents::<f64>::new(config.n).big_n;
            seed = seed.with_sigma(seed.sigma.scale(lambda.powf(big_n)));
        }
    }
    Ok(seed)
}

/// A TT tensor for `make-tt`: the configured file projected onto TT, or a
/// generated one, together with the `eta` used for the projection.
pub fn make_tt(config: &RunConfig) -> Result<(SymTensorField, ScalarField), CliError> {
    let s = &config.seed;
    if s.preset.is_some() {
        let seed = build_seed(config, true)?;
        return Ok((seed.sigma, seed.eta));
    }
    let grid = grid(config)?;
    let norm = s.sigma_norm.unwrap_or(DEFAULT_SIGMA_NORM);
    let eta = match &s.eta {
        Some(src) => scalar_from_source(src, &grid)?,
        None => ScalarField::constant(&grid, DEFAULT_ETA),
    };
    let parity = s.parity.unwrap_or(false);
    let sigma = match &s.sigma {
        Some(SigmaSource::File(path)) => {
            let tt = tt_project(&read_tensor(path, &grid)?, &eta, &LinearSolveOptions { tol: 1e-13, ..LinearSolveOptions::default() })?;
            match s.sigma_norm {
                Some(target) if tt.norm_l2() > 0.0 => tt.scale(target / tt.norm_l2()),
                _ => tt,
            }
        }
        Some(SigmaSource::Generated { rng_seed, kmax }) => generated_sigma(&grid, &eta, *kmax, parity, norm, *rng_seed)?,
        None => generated_sigma(&grid, &eta, 2, parity, norm, s.rng_seed)?,
    };
    Ok((sigma, eta))
}
