//! Ready-made seeds.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elliptic::LinearSolveOptions;
use crate::error::{Result, SolveError};
use crate::fields::{Grid, ScalarField, SymTensorField};
use crate::geometry::{tt_project, ConformalSeed};
use crate::real::Real;
use crate::rng::BandLimited;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `tau = 1`, `eta = 1/2`, constant trace-free `sigma`.
    Constant,
    /// Even non-constant `tau` and `eta` with a generated even TT tensor.
    ParitySmooth,
    /// Constant `tau` with the generated TT tensor of `ParitySmooth`.
    Cmc,
}

impl FromStr for Preset {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "parity-smooth" => Ok(Self::ParitySmooth),
            "cmc" => Ok(Self::Cmc),
            other => Err(SolveError::InvalidArgument(format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::ParitySmooth => "parity-smooth",
            Self::Cmc => "cmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetOptions<T> {
    /// Target `|sigma|_{L^2}`.
    pub sigma_norm: T,
    pub p: T,
    pub t: T,
    pub rng_seed: u64,
}

impl<T: Real> Default for PresetOptions<T> {
    fn default() -> Self {
        Self { sigma_norm: T::lit(0.01), p: T::lit(4.0), t: T::lit(4.0), rng_seed: 0x7a11 }
    }
}

pub fn build<T: Real>(preset: Preset, grid: &Grid<T>, opts: &PresetOptions<T>) -> Result<ConformalSeed<T>> {
    match preset {
        Preset::Constant => constant(grid, opts),
        Preset::ParitySmooth => parity_smooth(grid, opts),
        Preset::Cmc => cmc(grid, opts),
    }
}

/// `sigma = s diag(1, -1, 0, ...) / sqrt 2`, so that `|sigma| = s` pointwise.
pub fn constant<T: Real>(grid: &Grid<T>, opts: &PresetOptions<T>) -> Result<ConformalSeed<T>> {
    let n = grid.n();
    let s = opts.sigma_norm / T::lit(2.0).sqrt();
    let mut matrix = vec![vec![T::zero(); n]; n];
    matrix[0][0] = s;
    matrix[1][1] = -s;
    ConformalSeed::new(
        ScalarField::constant(grid, T::one()),
        SymTensorField::constant(grid, &matrix),
        ScalarField::constant(grid, T::lit(0.5)),
        opts.p,
        opts.t,
        true,
    )
}

fn cos_field<T: Real>(grid: &Grid<T>, f: impl Fn(&[f64]) -> f64) -> ScalarField<T> {
    ScalarField::from_fn(grid, |x| {
        let x: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        T::lit(f(&x))
    })
}

fn smooth_tau<T: Real>(grid: &Grid<T>) -> ScalarField<T> {
    cos_field(grid, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos() + 0.1 * (2.0 * PI * (x[1] - x[2])).cos())
}

fn smooth_eta<T: Real>(grid: &Grid<T>) -> ScalarField<T> {
    cos_field(grid, |x| 0.5 * (1.0 + 0.2 * (2.0 * PI * x[1]).cos() * (2.0 * PI * x[2]).cos()))
}

/// Even TT tensor with `|sigma|_{L^2} = norm`.
pub fn generated_tt<T: Real>(grid: &Grid<T>, eta: &ScalarField<T>, norm: T, rng_seed: u64) -> Result<SymTensorField<T>> {
    let raw = BandLimited { kmax: 2, even: true }.sym_tensor(grid, rng_seed);
    let opts = LinearSolveOptions { tol: T::lit(1e-13), ..LinearSolveOptions::default() };
    let tt = tt_project(&raw, eta, &opts)?;
    let current = tt.norm_l2();
    if !(current > T::zero()) {
        return Err(SolveError::DegenerateData("generated TT tensor vanishes".into()));
    }
    Ok(tt.scale(norm / current))
}

pub fn parity_smooth<T: Real>(grid: &Grid<T>, opts: &PresetOptions<T>) -> Result<ConformalSeed<T>> {
    if grid.n() < 3 {
        return Err(SolveError::InvalidArgument("presets need n >= 3".into()));
    }
    let eta = smooth_eta(grid);
    let sigma = generated_tt(grid, &eta, opts.sigma_norm, opts.rng_seed)?;
    ConformalSeed::new(smooth_tau(grid), sigma, eta, opts.p, opts.t, true)
}

pub fn cmc<T: Real>(grid: &Grid<T>, opts: &PresetOptions<T>) -> Result<ConformalSeed<T>> {
    if grid.n() < 3 {
        return Err(SolveError::InvalidArgument("presets need n >= 3".into()));
    }
    let eta = smooth_eta(grid);
    let sigma = generated_tt(grid, &eta, opts.sigma_norm, opts.rng_seed)?;
    ConformalSeed::new(ScalarField::constant(grid, T::one()), sigma, eta, opts.p, opts.t, true)
}
